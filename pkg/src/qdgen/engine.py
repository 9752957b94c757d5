"""Phase 1: iterative select -> mutate -> classify -> verify -> update.

Every random decision draws from a substream keyed by (root seed, round,
slot, purpose), so archives are a pure function of (config, root seed)
regardless of worker count, and an interrupted run resumed from a
checkpoint reproduces the uninterrupted archive byte for byte.

Round/slot accounting: seeds occupy round 0; generation rounds are
1-based. Ids are assigned as seeds first, then one id per (round, slot)
whether the slot yielded a scored sample or a parse failure, which makes
ids independent of scheduling.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from .archive import (
    Archive,
    ArchiveRecord,
    SCHEMA_VERSION,
    STATUS_PARSE_FAILURE,
    STATUS_SCORED,
    STATUS_UNUSABLE,
)
from .errors import ConfigError, DataError, GatewayError, MutationParseError
from .gateway.service import ModelGateway
from .rng import mix, substream
from .samples import Sample
from .scoring import QualityConfig, quality as quality_of, solve_rate as solve_rate_of
from .skills import (
    SkillVocabulary,
    build_vocabulary,
    canonical_skill_set,
    max_unique_skill_subset,
    unbounded_vocabulary,
)
from .working_set import DIVERSE_POLICIES, POLICIES, WorkingSet
from . import persist

logger = logging.getLogger(__name__)

NICHE_SELECTION_MODES = ("uniform", "max_div")


@dataclass(frozen=True)
class EngineConfig:
    quality: QualityConfig
    batch_size: int = 64
    rounds: int = 5000
    policy: str = "static_uniform"
    skills_per_sample: int = 3  # k: max labels per skill-set
    vocabulary_size: int = 100  # M: bounded-vocabulary size
    vocabulary_mode: str = "bounded"
    working_set_cap: int = 256  # T
    niche_cap: Optional[int] = None  # T_phi; defaults to working_set_cap
    niche_selection: str = "uniform"
    max_div_niches: Optional[int] = None  # niche-set size under max_div
    root_seed: int = 0
    fan_out: int = 1
    checkpoint_every: int = 50
    verify_requeue: int = 2

    def __post_init__(self):
        problems = []
        if self.batch_size < 1:
            problems.append("batch_size must be >= 1")
        if self.rounds < 1:
            problems.append("rounds must be >= 1")
        if self.policy not in POLICIES:
            problems.append(f"policy must be one of {POLICIES}")
        if self.skills_per_sample < 1:
            problems.append("skills_per_sample must be >= 1")
        if self.vocabulary_size < 1:
            problems.append("vocabulary_size must be >= 1")
        if self.vocabulary_mode not in ("bounded", "unbounded"):
            problems.append("vocabulary_mode must be bounded or unbounded")
        if self.working_set_cap < 1:
            problems.append("working_set_cap must be >= 1")
        if self.niche_cap is not None and self.niche_cap < 1:
            problems.append("niche_cap must be >= 1")
        if self.fan_out < 1:
            problems.append("fan_out must be >= 1")
        if self.niche_selection not in NICHE_SELECTION_MODES:
            problems.append(f"niche_selection must be one of {NICHE_SELECTION_MODES}")
        if self.max_div_niches is not None and self.max_div_niches < 1:
            problems.append("max_div_niches must be >= 1")
        if self.checkpoint_every < 1:
            problems.append("checkpoint_every must be >= 1")
        if self.verify_requeue < 0:
            problems.append("verify_requeue must be >= 0")
        if problems:
            raise ConfigError(problems)

    def effective_niche_cap(self) -> int:
        return self.niche_cap if self.niche_cap is not None else self.working_set_cap

    def fingerprint(self) -> str:
        """Hash of everything that determines the archive contents."""
        payload = {
            "batch_size": self.batch_size,
            "rounds": self.rounds,
            "policy": self.policy,
            "skills_per_sample": self.skills_per_sample,
            "vocabulary_size": self.vocabulary_size,
            "vocabulary_mode": self.vocabulary_mode,
            "working_set_cap": self.working_set_cap,
            "niche_cap": self.effective_niche_cap(),
            "niche_selection": self.niche_selection,
            "max_div_niches": self.max_div_niches,
            "root_seed": self.root_seed,
            "quality": {
                "lower": str(self.quality.lower),
                "upper": str(self.quality.upper),
                "k_rollouts": self.quality.k_rollouts,
            },
            "verify_requeue": self.verify_requeue,
        }
        return persist.sha256_text(persist.canonical_json(payload))


def select_parents(ws: WorkingSet, batch_size: int, substream_seed: int,
                   niche_selection: str = "uniform",
                   max_div_niches: Optional[int] = None) -> list:
    """Draw batch_size parent ids, with replacement.

    Uniform policies draw i.i.d. over members. Diverse policies draw a
    niche uniformly, then a member uniformly inside it; with max_div niche
    selection the round's niche pool is first reduced to the greedy
    maximum-coverage subset (size max_div_niches, default
    min(batch_size, #niches)).
    """
    if len(ws) == 0:
        raise ConfigError("working set is empty; cannot select parents")
    rng = substream(substream_seed, "select")
    if ws.policy in DIVERSE_POLICIES:
        niche_keys = ws.niche_keys()
        if niche_selection == "max_div":
            count = max_div_niches if max_div_niches is not None else batch_size
            niche_keys = max_unique_skill_subset(
                niche_keys, min(count, len(niche_keys))
            )
        picked = []
        for _ in range(batch_size):
            key = niche_keys[rng.randrange(len(niche_keys))]
            members = ws.niche_members(key)
            picked.append(members[rng.randrange(len(members))])
        return picked
    members = ws.member_ids()
    return [members[rng.randrange(len(members))] for _ in range(batch_size)]


class RunStore:
    """Filesystem layout of one generation run."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.archive_path = self.out_dir / "archive.jsonl"
        self.checkpoint_path = self.out_dir / "checkpoint.json"
        self.working_set_path = self.out_dir / "working_set.json"
        self.manifest_path = self.out_dir / "manifest.json"
        self.vocabulary_path = self.out_dir / "vocabulary.txt"

    def exists(self) -> bool:
        return self.checkpoint_path.exists()

    def write_vocabulary(self, vocab: SkillVocabulary) -> str:
        text = "".join(label + "\n" for label in vocab.labels)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.vocabulary_path.write_text(text, encoding="utf-8")
        return persist.sha256_text(text)

    def read_vocabulary(self, mode: str) -> SkillVocabulary:
        if mode == "unbounded":
            return unbounded_vocabulary()
        labels = tuple(
            line for line in self.vocabulary_path.read_text(encoding="utf-8").splitlines() if line
        )
        return SkillVocabulary(labels=labels, mode="bounded")


class GenerationEngine:
    """Drives one generation run against a gateway, with checkpoint/resume."""

    def __init__(self, cfg: EngineConfig, gateway: ModelGateway, store: Optional[RunStore] = None):
        self.cfg = cfg
        self.gateway = gateway
        self.store = store
        self.archive: Optional[Archive] = None
        self.working_set: Optional[WorkingSet] = None
        self.vocabulary: Optional[SkillVocabulary] = None
        self.rounds_completed = 0
        self._vocab_hash = ""
        self._executor: Optional[ThreadPoolExecutor] = None
        self._started = time.time()

    # -- lifecycle --------------------------------------------------------

    def start(self, seed_samples: list) -> None:
        """Initialize from seeds: classify, build the vocabulary, score."""
        if not seed_samples:
            raise DataError("seed dataset is empty")
        cfg = self.cfg
        root = cfg.root_seed
        self.archive = Archive(self.store.archive_path if self.store else None)

        seeds = [
            replace(sample, sample_id=i, round_index=0, origin="seed")
            for i, sample in enumerate(seed_samples)
        ]
        raw_classifications = [
            self.gateway.classify_skills(seed, cfg.skills_per_sample, mix(root, "seed-classify", i))
            for i, seed in enumerate(seeds)
        ]
        if cfg.vocabulary_mode == "bounded":
            self.vocabulary = build_vocabulary(raw_classifications, cfg.vocabulary_size)
        else:
            self.vocabulary = unbounded_vocabulary()
        if self.store is not None:
            self._vocab_hash = self.store.write_vocabulary(self.vocabulary)

        seed_records = []
        for i, seed in enumerate(seeds):
            skills = canonical_skill_set(
                raw_classifications[i], self.vocabulary, cfg.skills_per_sample
            )
            record = self._score(seed, skills, mix(root, "seed-verify", i))
            seed_records.append(self.archive.append(record))

        self.working_set = WorkingSet(
            cfg.policy, cap=cfg.working_set_cap, niche_cap=cfg.effective_niche_cap()
        )
        self.working_set.initialize(seed_records)
        self.rounds_completed = 0
        if self.store is not None:
            self._write_manifest(completed=False)
            self._write_checkpoint()

    def resume(self) -> None:
        """Restore state written by an identically configured run."""
        if self.store is None or not self.store.exists():
            raise DataError("no checkpoint to resume from")
        for path in (self.store.archive_path, self.store.working_set_path):
            if not path.exists():
                raise DataError(f"checkpoint is incomplete: missing {path.name}")
        if self.cfg.vocabulary_mode == "bounded" and not self.store.vocabulary_path.exists():
            raise DataError("checkpoint is incomplete: missing vocabulary.txt")
        checkpoint = persist.read_json(self.store.checkpoint_path)
        if checkpoint["config_hash"] != self.cfg.fingerprint():
            raise ConfigError(
                "checkpoint was written by a different configuration "
                f"(hash {checkpoint['config_hash'][:12]}..., current {self.cfg.fingerprint()[:12]}...)"
            )
        # Drop any rows from rounds after the checkpoint; they are
        # regenerated identically.
        with open(self.store.archive_path, "r+", encoding="utf-8") as handle:
            handle.truncate(checkpoint["archive_bytes"])
        self.archive = Archive.load_for_append(self.store.archive_path, self.cfg.quality)
        self.vocabulary = self.store.read_vocabulary(self.cfg.vocabulary_mode)
        self._vocab_hash = persist.sha256_file(self.store.vocabulary_path)
        snapshot = persist.read_json(self.store.working_set_path)
        self.working_set = WorkingSet.restore(
            snapshot, {r.record_id: r for r in self.archive}
        )
        self.rounds_completed = checkpoint["rounds_completed"]

    def run(self) -> Archive:
        """Run remaining rounds; checkpoints and halts on backend failure."""
        cfg = self.cfg
        try:
            while self.rounds_completed < cfg.rounds:
                round_index = self.rounds_completed + 1
                self._run_round(round_index)
                self.rounds_completed = round_index
                if self.store is not None and (
                    round_index % cfg.checkpoint_every == 0 or round_index == cfg.rounds
                ):
                    self._write_checkpoint()
        except GatewayError:
            if self.store is not None:
                self._write_checkpoint()
                self._write_manifest(completed=False)
                logger.warning(
                    "backend failure after round %d; state checkpointed in %s",
                    self.rounds_completed,
                    self.store.out_dir,
                )
            raise
        finally:
            if self._executor is not None:
                self._executor.shutdown(wait=True)
                self._executor = None
        if self.store is not None:
            self.archive.flush()
            self._write_manifest(completed=True)
        return self.archive

    # -- internals --------------------------------------------------------

    def _run_round(self, round_index: int) -> None:
        cfg = self.cfg
        parent_ids = select_parents(
            self.working_set,
            cfg.batch_size,
            mix(cfg.root_seed, "round", round_index),
            niche_selection=cfg.niche_selection,
            max_div_niches=cfg.max_div_niches,
        )
        base_id = len(self.archive)

        def job(slot_parent):
            slot, parent_id = slot_parent
            return self._mutation_slot(round_index, slot, parent_id, base_id + slot)

        slots = list(enumerate(parent_ids))
        if cfg.fan_out > 1:
            if self._executor is None:
                self._executor = ThreadPoolExecutor(max_workers=cfg.fan_out)
            results = list(self._executor.map(job, slots))
        else:
            results = [job(s) for s in slots]

        # Single-writer section: append in slot order, then update the pool.
        appended = [self.archive.append(record) for record in results]
        self.working_set.update([r for r in appended if r.scored])
        self.archive.flush()

    def _mutation_slot(self, round_index: int, slot: int, parent_id: int, record_id: int) -> ArchiveRecord:
        cfg = self.cfg
        root = cfg.root_seed
        parent = self.archive.get(parent_id).to_sample()
        try:
            child = self.gateway.mutate(parent, mix(root, "mutate", round_index, slot))
        except MutationParseError as exc:
            return ArchiveRecord(
                record_id=record_id,
                origin="generated",
                status=STATUS_PARSE_FAILURE,
                round_index=round_index,
                slot=slot,
                parent_id=parent_id,
                error=str(exc),
            )
        child = replace(child, sample_id=record_id, parent_id=parent_id, round_index=round_index)
        raw_labels = self.gateway.classify_skills(
            child, cfg.skills_per_sample, mix(root, "classify", round_index, slot)
        )
        skills = canonical_skill_set(raw_labels, self.vocabulary, cfg.skills_per_sample)
        return self._score(child, skills, mix(root, "verify", round_index, slot), slot=slot)

    def _score(self, sample: Sample, skills: tuple, verify_seed: int, slot: Optional[int] = None) -> ArchiveRecord:
        cfg = self.cfg
        vs = None
        for attempt in range(cfg.verify_requeue + 1):
            vs = self.gateway.verify(sample, cfg.quality.k_rollouts, mix(verify_seed, "try", attempt))
            if vs.usable:
                break
        flags = []
        if skills == ():
            flags.append("unclassified")
        if not vs.usable:
            flags.append("unusable_verification")
            return ArchiveRecord(
                record_id=sample.sample_id,
                origin=sample.origin,
                status=STATUS_UNUSABLE,
                round_index=sample.round_index,
                slot=slot,
                parent_id=sample.parent_id,
                problem=sample.problem,
                solution=sample.solution,
                answer_raw=sample.answer.raw,
                skills=skills,
                flags=tuple(flags),
            )
        if vs.infrastructure_failures:
            flags.append("infrastructure_failure")
        rate = solve_rate_of(vs)
        return ArchiveRecord(
            record_id=sample.sample_id,
            origin=sample.origin,
            status=STATUS_SCORED,
            round_index=sample.round_index,
            slot=slot,
            parent_id=sample.parent_id,
            problem=sample.problem,
            solution=sample.solution,
            answer_raw=sample.answer.raw,
            solve_rate=rate,
            quality=quality_of(rate, cfg.quality),
            k_rollouts=cfg.quality.k_rollouts,
            skills=skills,
            verified_rollouts=vs.successful_indices(),
            verifications=tuple(vs.rollouts[i].text for i in vs.successful_indices()),
            flags=tuple(flags),
        )

    # -- persistence ------------------------------------------------------

    def _write_checkpoint(self) -> None:
        persist.write_json(self.store.working_set_path, self.working_set.snapshot())
        persist.write_json(
            self.store.checkpoint_path,
            {
                "schema": SCHEMA_VERSION,
                "config_hash": self.cfg.fingerprint(),
                "rounds_completed": self.rounds_completed,
                "archive_bytes": self.archive.sink_offset(),
            },
        )

    def _write_manifest(self, completed: bool) -> None:
        counters = self.archive.counters()
        counters["rounds_completed"] = self.rounds_completed
        self.archive.flush()
        persist.write_json(
            self.store.manifest_path,
            {
                "schema": SCHEMA_VERSION,
                "config_hash": self.cfg.fingerprint(),
                "archive_sha256": persist.sha256_file(self.store.archive_path),
                "root_seed": self.cfg.root_seed,
                "backend": self.gateway.backend.identity(),
                "policy": self.cfg.policy,
                "quality": {
                    "lower": str(self.cfg.quality.lower),
                    "upper": str(self.cfg.quality.upper),
                    "k_rollouts": self.cfg.quality.k_rollouts,
                },
                "vocabulary_sha256": self._vocab_hash,
                "counters": counters,
                "completed": completed,
                "started_at": self._started,
                "updated_at": time.time(),
            },
        )


def run_generation(
    cfg: EngineConfig,
    seed_samples: list,
    gateway: ModelGateway,
    out_dir=None,
    resume: bool = False,
) -> Archive:
    """Run a full generation phase; the one-call form of GenerationEngine."""
    store = RunStore(out_dir) if out_dir is not None else None
    engine = GenerationEngine(cfg, gateway, store)
    if resume:
        engine.resume()
    else:
        engine.start(seed_samples)
    return engine.run()
