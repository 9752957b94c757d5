"""The bounded mutation-candidate pool and its four update policies.

Policies:
- static_uniform / static_diverse: the pool stays the seed set forever;
  the diverse variant partitions it by skill-set for two-stage sampling.
- dynamic_uniform: the pool is exactly the top-`cap` records by quality
  (ties: earlier insertion, then lower id) among seeds plus quality>0
  generated records.
- dynamic_diverse: one partition per skill-set; each niche holds at most
  `niche_cap` members, evicting the lowest-quality member on overflow.
  Generated members require quality > 0; seeds are exempt.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .archive import ArchiveRecord
from .errors import ConfigError

POLICIES = ("static_uniform", "static_diverse", "dynamic_uniform", "dynamic_diverse")

DIVERSE_POLICIES = ("static_diverse", "dynamic_diverse")


def rank_key(record: ArchiveRecord) -> tuple:
    """Sort key putting better members first."""
    return (-record.quality, record.insertion_index, record.record_id)


class WorkingSet:
    def __init__(self, policy: str, cap: Optional[int] = None, niche_cap: Optional[int] = None):
        if policy not in POLICIES:
            raise ConfigError(f"unknown working-set policy {policy!r}")
        if policy == "dynamic_uniform" and (cap is None or cap < 1):
            raise ConfigError("dynamic_uniform requires a positive cap")
        if policy == "dynamic_diverse":
            if niche_cap is None:
                niche_cap = cap
            if niche_cap is None or niche_cap < 1:
                raise ConfigError("dynamic_diverse requires a positive niche cap")
        self.policy = policy
        self.cap = cap
        self.niche_cap = niche_cap
        self._members: dict = {}  # id -> ArchiveRecord
        self._niches: dict = {}  # skill-set tuple -> list[id], insertion order

    # -- construction -----------------------------------------------------

    def initialize(self, seed_records: Iterable[ArchiveRecord]) -> None:
        # Seeds whose verification was unusable carry no quality and
        # cannot participate in eviction comparisons; they stay archived
        # but never enter the pool.
        seeds = [r for r in seed_records if r.scored]
        if not seeds:
            raise ConfigError("cannot initialize a working set without scored seeds")
        if self.policy == "dynamic_uniform":
            # Cap applies from the start when the seed set exceeds it.
            for record in seeds:
                self._members[record.record_id] = record
            self._truncate_uniform()
        elif self.policy in DIVERSE_POLICIES:
            for record in seeds:
                self._insert_niche(record, enforce_cap=self.policy == "dynamic_diverse")
        else:
            for record in seeds:
                self._members[record.record_id] = record

    # -- updates ----------------------------------------------------------

    def update(self, newly_scored: Iterable[ArchiveRecord]) -> None:
        """Apply the policy's update for one freshly scored batch."""
        if self.policy in ("static_uniform", "static_diverse"):
            return
        candidates = [r for r in newly_scored if r.scored and r.quality > 0]
        if self.policy == "dynamic_uniform":
            for record in candidates:
                self._members[record.record_id] = record
            self._truncate_uniform()
        else:
            for record in candidates:
                self._insert_niche(record, enforce_cap=True)

    def _truncate_uniform(self) -> None:
        if len(self._members) <= self.cap:
            return
        ranked = sorted(self._members.values(), key=rank_key)
        self._members = {r.record_id: r for r in ranked[: self.cap]}

    def _insert_niche(self, record: ArchiveRecord, enforce_cap: bool) -> None:
        niche = self._niches.setdefault(record.skills, [])
        niche.append(record.record_id)
        self._members[record.record_id] = record
        if enforce_cap and len(niche) > self.niche_cap:
            worst = max(niche, key=lambda rid: rank_key(self._members[rid]))
            niche.remove(worst)
            del self._members[worst]

    # -- access -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self._members)

    def __contains__(self, record_id: int) -> bool:
        return record_id in self._members

    def member_ids(self) -> list:
        """Member ids in ascending order (canonical sampling order)."""
        return sorted(self._members)

    def members(self) -> list:
        return [self._members[rid] for rid in self.member_ids()]

    def get(self, record_id: int) -> ArchiveRecord:
        return self._members[record_id]

    def niche_keys(self) -> list:
        """Niche keys in ascending lexicographic order."""
        return sorted(self._niches)

    def niche_members(self, key) -> list:
        """Member ids of one niche, ascending."""
        return sorted(self._niches[key])

    # -- checkpointing ----------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "policy": self.policy,
            "cap": self.cap,
            "niche_cap": self.niche_cap,
            "member_ids": sorted(self._members),
        }

    @classmethod
    def restore(cls, snapshot: dict, records_by_id: dict) -> "WorkingSet":
        """Rebuild from a snapshot; member order is recovered from ids,
        which coincide with insertion order."""
        ws = cls(snapshot["policy"], cap=snapshot["cap"], niche_cap=snapshot["niche_cap"])
        for rid in snapshot["member_ids"]:
            record = records_by_id[rid]
            ws._members[rid] = record
            if ws.policy in DIVERSE_POLICIES:
                ws._niches.setdefault(record.skills, []).append(rid)
        return ws


def update_working_set(ws: WorkingSet, newly_scored: Iterable[ArchiveRecord]) -> WorkingSet:
    """Functional form of WorkingSet.update (returns the same instance)."""
    ws.update(newly_scored)
    return ws
