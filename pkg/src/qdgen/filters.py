"""Phase 2: training-pair construction and budgeted subset filtering.

Training pairs couple a quality>0 generated problem with one of its
successful verification rollouts. The four budgeted filters all return
exactly N pairs over distinct problems:

- quality_gaussian: sequential weighted draws without replacement, with
  weights from a gaussian density over pair quality. Weights are
  quantized to integers and drawn through a Fenwick tree, so each draw
  picks index i with probability weight_i / total exactly and the whole
  procedure is reproducible by a naive cumulative scan fed the same
  substream.
- diversity: greedy maximum-coverage ordering of niches, one uniformly
  chosen representative per niche, cycling niches when N exceeds their
  count.
- qd: the same niche ordering, taking the highest-quality member per
  niche (then next-highest on later cycles).
- random: uniform without replacement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .answers import extract_final_answer, is_correct
from .archive import Archive
from .errors import ConfigError, DataError
from .persist import canonical_json, sha256_file, sha256_text, write_jsonl
from .rng import substream
from .scoring import QualityConfig, as_exact
from .skills import max_unique_skill_subset

STRATEGIES = ("quality_gaussian", "diversity", "qd", "random")


@dataclass(frozen=True)
class TrainingPair:
    """One (problem, successful verification) training unit."""

    problem_id: int
    problem: str
    verification: str
    solve_rate: Fraction
    quality: Fraction
    k_rollouts: int
    skills: tuple
    rollout_index: int
    parent_id: Optional[int] = None

    def to_json_obj(self, plain: bool = False) -> dict:
        if plain:
            return {"problem": self.problem, "solution": self.verification}
        return {
            "problem": self.problem,
            "solution": self.verification,
            "solve_rate": f"{int(self.solve_rate * self.k_rollouts)}/{self.k_rollouts}",
            "quality": float(self.quality),
            "skills": list(self.skills),
            "lineage": {
                "problem_id": self.problem_id,
                "parent_id": self.parent_id,
                "rollout": self.rollout_index,
            },
        }


@dataclass(frozen=True)
class FilterSpec:
    strategy: str
    budget: int
    seed: int
    mean: Optional[Fraction] = None  # quality_gaussian target mean
    sd: Fraction = Fraction(1, 10)

    def __post_init__(self):
        problems = []
        if self.strategy not in STRATEGIES:
            problems.append(f"strategy must be one of {STRATEGIES}")
        if self.budget < 1:
            problems.append("budget must be >= 1")
        if self.strategy == "quality_gaussian":
            if self.mean is None or not (0 < self.mean < 1):
                problems.append("quality_gaussian needs a mean in (0, 1)")
            if self.sd <= 0:
                problems.append("quality_gaussian needs sd > 0")
        if problems:
            raise ConfigError(problems)

    @classmethod
    def create(cls, strategy, budget, seed, mean=None, sd="0.1") -> "FilterSpec":
        return cls(
            strategy=strategy,
            budget=int(budget),
            seed=int(seed),
            mean=None if mean is None else as_exact(mean),
            sd=as_exact(sd),
        )


# -- pool construction ------------------------------------------------------


def _viable(record) -> bool:
    return (
        record.scored
        and record.origin == "generated"
        and record.quality is not None
        and record.quality > 0
    )


def _pairs_of(record) -> list:
    return [
        TrainingPair(
            problem_id=record.record_id,
            problem=record.problem,
            verification=text,
            solve_rate=record.solve_rate,
            quality=record.quality,
            k_rollouts=record.k_rollouts,
            skills=record.skills,
            rollout_index=k,
            parent_id=record.parent_id,
        )
        for k, text in zip(record.verified_rollouts, record.verifications)
    ]


def build_training_pairs(archive: Iterable) -> list:
    """One pair per successful rollout of every viable generated problem."""
    pairs = []
    for record in archive:
        if _viable(record):
            pairs.extend(_pairs_of(record))
    return pairs


def build_unique_pool(archive: Iterable) -> list:
    """One pair per viable problem, using its lowest successful rollout index."""
    pool = []
    for record in archive:
        if _viable(record) and record.verified_rollouts:
            pool.append(_pairs_of(record)[0])
    return pool


def downsample_easy(
    pairs: Sequence[TrainingPair],
    easy_threshold=Fraction(1, 2),
    keep_fraction=Fraction(1, 4),
    seed: int = 0,
) -> list:
    """Keep ceil(keep_fraction * n) pairs per easy problem, chosen uniformly.

    A problem is easy when its solve-rate is at least easy_threshold;
    pairs of non-easy problems pass through untouched.
    """
    easy_threshold = as_exact(easy_threshold)
    keep_fraction = as_exact(keep_fraction)
    if not (0 <= keep_fraction <= 1):
        raise ConfigError("keep_fraction must be in [0, 1]")
    grouped: dict = {}
    for i, pair in enumerate(pairs):
        grouped.setdefault(pair.problem_id, []).append(i)
    keep_positions = set()
    for problem_id, positions in grouped.items():
        if pairs[positions[0]].solve_rate >= easy_threshold:
            count = math.ceil(keep_fraction * len(positions))
            rng = substream(seed, "easy", problem_id)
            keep_positions.update(rng.sample(positions, count))
        else:
            keep_positions.update(positions)
    return [pair for i, pair in enumerate(pairs) if i in keep_positions]


# -- weighted sampling ------------------------------------------------------

_WEIGHT_SCALE = 1 << 40


class FenwickSampler:
    """Sequential weighted sampling without replacement over integer weights.

    Each draw consumes one rng.randrange(total) and selects the smallest
    index whose cumulative weight exceeds the target, i.e. index i with
    probability weight_i / total exactly. Selected (or suppressed) indices
    get weight zero.
    """

    def __init__(self, weights: Sequence[int]):
        self.n = len(weights)
        self.weights = list(weights)
        self.total = sum(weights)
        self.tree = [0] * (self.n + 1)
        for i in range(1, self.n + 1):
            self.tree[i] += self.weights[i - 1]
            parent = i + (i & -i)
            if parent <= self.n:
                self.tree[parent] += self.tree[i]
        self.top_bit = 1 << (self.n.bit_length() - 1) if self.n else 0

    def zero(self, index: int) -> None:
        delta = -self.weights[index]
        if delta == 0:
            return
        self.weights[index] = 0
        self.total += delta
        i = index + 1
        while i <= self.n:
            self.tree[i] += delta
            i += i & -i

    def draw(self, rng) -> int:
        if self.total <= 0:
            raise DataError("no sampling weight left")
        target = rng.randrange(self.total)
        pos = 0
        bit = self.top_bit
        while bit:
            nxt = pos + bit
            if nxt <= self.n and self.tree[nxt] <= target:
                target -= self.tree[nxt]
                pos = nxt
            bit >>= 1
        return pos


def gaussian_weights(qualities: Sequence[float], mean: float, sd: float) -> list:
    """Integer-quantized gaussian density weights (max weight 2^40, min 1)."""
    dens = [math.exp(-0.5 * ((q - mean) / sd) ** 2) for q in qualities]
    top = max(dens)
    return [max(1, round(d / top * _WEIGHT_SCALE)) for d in dens]


# -- budgeted filters -------------------------------------------------------


def filter_subset(pool: Sequence[TrainingPair], spec: FilterSpec) -> list:
    """Exactly spec.budget pairs over distinct problems, per the strategy."""
    distinct = len({pair.problem_id for pair in pool})
    if spec.budget > distinct:
        raise DataError(
            f"budget {spec.budget} exceeds the {distinct} distinct problems available"
        )
    rng = substream(spec.seed, "filter", spec.strategy)
    if spec.strategy == "random":
        return _filter_random(pool, spec.budget, rng)
    if spec.strategy == "quality_gaussian":
        return _filter_gaussian(pool, spec, rng)
    return _filter_by_niche(pool, spec, greedy_quality=spec.strategy == "qd")


def _filter_random(pool, budget, rng) -> list:
    order = list(range(len(pool)))
    rng.shuffle(order)
    chosen: list = []
    seen: set = set()
    for i in order:
        pair = pool[i]
        if pair.problem_id in seen:
            continue
        chosen.append(pair)
        seen.add(pair.problem_id)
        if len(chosen) == budget:
            break
    return chosen


def _filter_gaussian(pool, spec, rng) -> list:
    weights = gaussian_weights(
        [float(p.quality) for p in pool], float(spec.mean), float(spec.sd)
    )
    sampler = FenwickSampler(weights)
    by_problem: dict = {}
    for i, pair in enumerate(pool):
        by_problem.setdefault(pair.problem_id, []).append(i)
    chosen = []
    for _ in range(spec.budget):
        index = sampler.draw(rng)
        pair = pool[index]
        chosen.append(pair)
        for sibling in by_problem[pair.problem_id]:
            sampler.zero(sibling)
    return chosen


def _filter_by_niche(pool, spec, greedy_quality: bool) -> list:
    by_niche: dict = {}
    for pair in pool:
        by_niche.setdefault(pair.skills, []).append(pair)
    niche_order = max_unique_skill_subset(sorted(by_niche), len(by_niche))

    queues = {}
    for key, members in by_niche.items():
        if greedy_quality:
            # Highest quality first; ties go to the lower problem id.
            members = sorted(members, key=lambda p: (-p.quality, p.problem_id))
        else:
            members = sorted(members, key=lambda p: p.problem_id)
            substream(spec.seed, "niche", "|".join(key)).shuffle(members)
        queues[key] = members

    chosen: list = []
    seen: set = set()
    while len(chosen) < spec.budget:
        progressed = False
        for key in niche_order:
            queue = queues[key]
            while queue:
                pair = queue.pop(0)
                if pair.problem_id in seen:
                    continue
                chosen.append(pair)
                seen.add(pair.problem_id)
                progressed = True
                break
            if len(chosen) == spec.budget:
                break
        if not progressed:
            raise DataError("niche pools exhausted before reaching the budget")
    return chosen


# -- export and validation --------------------------------------------------


def pool_hash(pool: Sequence[TrainingPair]) -> str:
    identity = [[p.problem_id, p.rollout_index] for p in pool]
    return sha256_text(canonical_json(identity))


def write_dataset(pairs: Sequence[TrainingPair], path, plain: bool = False) -> dict:
    """Write pairs as JSON Lines; returns a manifest fragment for the file."""
    count = write_jsonl(path, (p.to_json_obj(plain=plain) for p in pairs))
    return {"path": str(path), "pairs": count, "sha256": sha256_file(path)}


def validate_dataset(dataset_path, archive: Archive, quality_cfg: QualityConfig) -> dict:
    """Independent integrity pass over an exported dataset file.

    Re-extracts each problem's intended answer from the archived solution
    text and re-checks is_correct and the solve-rate band from scratch.
    """
    from .persist import iter_jsonl

    pairs = 0
    violations = []
    seen_problems = set()
    for line_no, obj in enumerate(iter_jsonl(dataset_path), start=1):
        pairs += 1
        problem_id = obj["lineage"]["problem_id"]
        record = archive.get(problem_id)
        intended = extract_final_answer(record.solution)
        if intended is None or not is_correct(intended, obj["solution"]):
            violations.append(f"line {line_no}: verification does not match the intended answer")
        num, den = obj["solve_rate"].split("/")
        rate = Fraction(int(num), int(den))
        if not (quality_cfg.lower <= rate <= quality_cfg.upper):
            violations.append(f"line {line_no}: solve rate {obj['solve_rate']} outside the keep band")
        if rate != record.solve_rate:
            violations.append(f"line {line_no}: solve rate disagrees with the archive")
        seen_problems.add((problem_id, obj["lineage"]["rollout"]))
    return {"pairs": pairs, "distinct": len(seen_problems), "violations": violations}
