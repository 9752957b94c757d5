"""Append-only archive of every mutation attempt, with a JSONL log.

Each record is one mutation attempt (or one seed): scored samples carry
texts, the exact solve-rate, quality, skills, and the successful
verification rollouts; parse failures carry only lineage and an error
note. Records are never mutated or removed, and the accounting identity
scored-or-unusable generated records + parse failures = batch * rounds
holds after every round.

Log lines are serialized deterministically (sorted keys, fixed separators)
so identical runs produce byte-identical logs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterator, Optional

from .answers import FinalAnswer
from .errors import DataError
from .samples import Sample
from .scoring import QualityConfig, quality as quality_of

SCHEMA_VERSION = 1

STATUS_SCORED = "scored"
STATUS_PARSE_FAILURE = "parse_failure"
STATUS_UNUSABLE = "unusable"


@dataclass(frozen=True)
class ArchiveRecord:
    record_id: int
    origin: str  # "seed" | "generated"
    status: str  # "scored" | "parse_failure" | "unusable"
    round_index: int
    slot: Optional[int] = None
    parent_id: Optional[int] = None
    problem: Optional[str] = None
    solution: Optional[str] = None
    answer_raw: Optional[str] = None
    solve_rate: Optional[Fraction] = None
    quality: Optional[Fraction] = None
    k_rollouts: Optional[int] = None
    skills: tuple = ()
    verified_rollouts: tuple = ()  # indices of successful rollouts
    verifications: tuple = ()  # texts aligned with verified_rollouts
    flags: tuple = ()
    error: Optional[str] = None
    insertion_index: int = -1

    @property
    def scored(self) -> bool:
        return self.status == STATUS_SCORED

    def to_sample(self) -> Sample:
        return Sample(
            problem=self.problem,
            solution=self.solution,
            answer=FinalAnswer.from_raw(self.answer_raw),
            sample_id=self.record_id,
            parent_id=self.parent_id,
            round_index=self.round_index,
            origin=self.origin,
        )

    def to_json_obj(self) -> dict:
        return {
            "v": SCHEMA_VERSION,
            "id": self.record_id,
            "origin": self.origin,
            "status": self.status,
            "round": self.round_index,
            "slot": self.slot,
            "parent": self.parent_id,
            "problem": self.problem,
            "solution": self.solution,
            "answer": self.answer_raw,
            # Written un-reduced as "n/K" so the rollout count stays visible.
            "solve_rate": None
            if self.solve_rate is None
            else f"{int(self.solve_rate * self.k_rollouts)}/{self.k_rollouts}",
            "quality": None if self.quality is None else float(self.quality),
            "skills": list(self.skills),
            "verified_k": list(self.verified_rollouts),
            "verifications": list(self.verifications),
            "flags": list(self.flags),
            "error": self.error,
        }

    def to_json_line(self) -> str:
        return json.dumps(
            self.to_json_obj(), sort_keys=True, ensure_ascii=False, separators=(",", ":")
        )


def record_from_json_obj(obj: dict, quality_cfg: Optional[QualityConfig] = None) -> ArchiveRecord:
    """Rebuild a record from its log form.

    The exact solve-rate comes from the "n/K" string; quality is recomputed
    from it when a QualityConfig is supplied (the float in the log is only
    a readable projection).
    """
    rate = None
    qual = None
    k_rollouts = None
    if obj.get("solve_rate") is not None:
        num, den = obj["solve_rate"].split("/")
        rate = Fraction(int(num), int(den))
        k_rollouts = int(den)
        if quality_cfg is not None:
            qual = quality_of(rate, quality_cfg)
        elif obj.get("quality") is not None:
            qual = Fraction(str(obj["quality"]))
    return ArchiveRecord(
        record_id=obj["id"],
        origin=obj["origin"],
        status=obj["status"],
        round_index=obj["round"],
        slot=obj.get("slot"),
        parent_id=obj.get("parent"),
        problem=obj.get("problem"),
        solution=obj.get("solution"),
        answer_raw=obj.get("answer"),
        solve_rate=rate,
        quality=qual,
        k_rollouts=k_rollouts,
        skills=tuple(obj.get("skills") or ()),
        verified_rollouts=tuple(obj.get("verified_k") or ()),
        verifications=tuple(obj.get("verifications") or ()),
        flags=tuple(obj.get("flags") or ()),
        error=obj.get("error"),
    )


class Archive:
    """In-memory record sequence with optional write-through JSONL sink."""

    def __init__(self, sink_path: Optional[Path] = None, append: bool = False):
        self._records: list = []
        self._by_id: dict = {}
        self._sink_path = Path(sink_path) if sink_path is not None else None
        self._sink = None
        if self._sink_path is not None:
            self._sink_path.parent.mkdir(parents=True, exist_ok=True)
            self._sink = open(self._sink_path, "a" if append else "w", encoding="utf-8")

    # -- mutation ---------------------------------------------------------

    def append(self, record: ArchiveRecord) -> ArchiveRecord:
        if record.record_id in self._by_id:
            raise DataError(f"duplicate archive record id {record.record_id}")
        record = replace(record, insertion_index=len(self._records))
        self._records.append(record)
        self._by_id[record.record_id] = record
        if self._sink is not None:
            self._sink.write(record.to_json_line() + "\n")
        return record

    def flush(self) -> None:
        if self._sink is not None:
            self._sink.flush()

    def close(self) -> None:
        if self._sink is not None:
            self._sink.close()
            self._sink = None

    def sink_offset(self) -> int:
        """Current byte offset of the log file (for checkpoint truncation)."""
        if self._sink is None:
            return 0
        self._sink.flush()
        return self._sink.tell()

    # -- access -----------------------------------------------------------

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[ArchiveRecord]:
        return iter(self._records)

    @property
    def records(self) -> list:
        return self._records

    def get(self, record_id: int) -> ArchiveRecord:
        return self._by_id[record_id]

    def scored(self) -> Iterator[ArchiveRecord]:
        return (r for r in self._records if r.scored)

    def generated(self) -> Iterator[ArchiveRecord]:
        return (r for r in self._records if r.origin == "generated")

    def counters(self) -> dict:
        scored_generated = 0
        parse_failures = 0
        unusable = 0
        quality_positive = 0
        duplicates = 0
        seen_problems: set = set()
        for r in self._records:
            if r.origin != "generated":
                continue
            if r.status == STATUS_PARSE_FAILURE:
                parse_failures += 1
            elif r.status == STATUS_UNUSABLE:
                unusable += 1
            else:
                scored_generated += 1
                if r.quality and r.quality > 0:
                    quality_positive += 1
                # Exact duplicates stay archived; their count is a metric.
                if r.problem in seen_problems:
                    duplicates += 1
                else:
                    seen_problems.add(r.problem)
        return {
            "mutations_scored": scored_generated,
            "mutations_unusable": unusable,
            "parse_failures": parse_failures,
            "quality_positive": quality_positive,
            "duplicate_problems": duplicates,
            "seeds": sum(1 for r in self._records if r.origin == "seed"),
        }

    # -- persistence ------------------------------------------------------

    @classmethod
    def load(cls, path, quality_cfg: Optional[QualityConfig] = None) -> "Archive":
        archive = cls()
        for obj in iter_log_objects(path, strict=True):
            archive.append(record_from_json_obj(obj, quality_cfg))
        return archive

    @classmethod
    def load_for_append(cls, path, quality_cfg: Optional[QualityConfig] = None) -> "Archive":
        """Load an existing log and reopen it as this archive's sink."""
        loaded = cls.load(path, quality_cfg)
        archive = cls(path, append=True)
        archive._records = loaded._records
        archive._by_id = loaded._by_id
        return archive


def iter_log_objects(path, strict: bool = False, corrupt_counter: Optional[list] = None) -> Iterator[dict]:
    """Stream JSON objects from an archive log.

    With strict=False corrupt lines are skipped; pass a one-element list as
    corrupt_counter to receive the skip count.
    """
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError:
                if strict:
                    raise DataError(f"corrupt archive record at line {line_no}")
                if corrupt_counter is not None:
                    corrupt_counter[0] += 1
                continue
