"""Diagnostic measurements over archives: validity labeling, solve-rate
binning, coverage curves, histograms, and mutation-perturbation metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .answers import FinalAnswer, answers_equal, extract_final_answer
from .archive import ArchiveRecord, iter_log_objects, record_from_json_obj
from .errors import ConfigError, DataError, MutationParseError, TransportError
from .rng import mix, substream
from .scoring import QualityConfig, quality as quality_of, solve_rate as solve_rate_of
from .skills import UNCLASSIFIED

logger = logging.getLogger(__name__)

VALID = "valid"
INVALID = "invalid"
UNSCORABLE = "unscorable"


@dataclass(frozen=True)
class ValidityLabel:
    sample_id: int
    oracle_answer: Optional[str]  # raw extracted answer, None when unscorable
    label: str  # valid | invalid | unscorable
    flags: tuple = ()


@dataclass(frozen=True)
class PerturbationReport:
    """Quality drift of a parent's mutations (child sample size may fall
    short of the requested n when redraws run out)."""

    parent_id: int
    parent_quality: Fraction
    child_qualities: tuple
    mean_diff: Fraction
    child_failure_rate: Fraction

    @property
    def n_children(self) -> int:
        return len(self.child_qualities)


def viable_records(records: Iterable[ArchiveRecord]) -> list:
    return [
        r
        for r in records
        if r.scored and r.origin == "generated" and r.quality is not None and r.quality > 0
    ]


def sample_for_labeling(records: Iterable[ArchiveRecord], count: int, seed: int) -> list:
    """Uniform sample (without replacement) of quality>0 generated records."""
    pool = viable_records(records)
    if count > len(pool):
        raise DataError(f"asked for {count} samples but only {len(pool)} are viable")
    rng = substream(seed, "labeling")
    return sorted(rng.sample(pool, count), key=lambda r: r.record_id)


def with_solve_rate_between(records: Iterable[ArchiveRecord], lower, upper) -> list:
    """The configurable solve-rate window filter used by validity studies."""
    lower, upper = Fraction(lower), Fraction(upper)
    return [
        r
        for r in records
        if r.scored and r.solve_rate is not None and lower <= r.solve_rate <= upper
    ]


def label_validity(gateway, records: Sequence[ArchiveRecord], substream_seed: int, votes: int = 1) -> list:
    """Compare each sample's intended answer against oracle solutions.

    One oracle completion per sample by default; with votes > 1 the label
    is the majority over scorable completions.
    """
    if votes < 1:
        raise ConfigError("votes must be >= 1")
    labels = []
    for record in records:
        intended = FinalAnswer.from_raw(record.answer_raw)
        prompt = gateway.templates.render_verify(record.problem)
        agree = disagree = transport_failures = 0
        oracle_raw = None
        for vote in range(votes):
            try:
                text = gateway.complete(
                    "validity_oracle", prompt, mix(substream_seed, "oracle", record.record_id, vote)
                )
            except TransportError:
                transport_failures += 1
                continue
            answer = extract_final_answer(text)
            if answer is None:
                continue
            oracle_raw = answer.raw
            if answers_equal(intended, answer):
                agree += 1
            else:
                disagree += 1
        flags = ("transport_failure",) if transport_failures else ()
        if agree == 0 and disagree == 0:
            labels.append(ValidityLabel(record.record_id, None, UNSCORABLE, flags))
        elif agree > disagree:
            labels.append(ValidityLabel(record.record_id, oracle_raw, VALID, flags))
        else:
            labels.append(ValidityLabel(record.record_id, oracle_raw, INVALID, flags))
    return labels


def validity_by_solve_rate(labels: Sequence[ValidityLabel], records: Iterable[ArchiveRecord], bins: int) -> list:
    """Equal-width solve-rate bins with mean validity and counts.

    Rows are (bin_low, bin_high, mean_validity, count); empty bins report
    count 0 and a None mean. Unscorable labels are excluded.
    """
    if bins < 2:
        raise ConfigError("bins must be >= 2")
    rate_by_id = {r.record_id: r.solve_rate for r in records if r.scored}
    totals = [0] * bins
    valid_counts = [0] * bins
    for label in labels:
        if label.label == UNSCORABLE:
            continue
        rate = rate_by_id.get(label.sample_id)
        if rate is None:
            continue
        index = min(bins - 1, int(rate * bins))
        totals[index] += 1
        if label.label == VALID:
            valid_counts[index] += 1
    rows = []
    for i in range(bins):
        low = Fraction(i, bins)
        high = Fraction(i + 1, bins)
        mean = valid_counts[i] / totals[i] if totals[i] else None
        rows.append((float(low), float(high), mean, totals[i]))
    return rows


def perturbative_report(
    gateway,
    quality_cfg: QualityConfig,
    parent: ArchiveRecord,
    n_children: int,
    substream_seed: int,
    redraw_budget: int = 8,
) -> PerturbationReport:
    """Mutate the parent n times, score each child, report the drift.

    mean_diff = sum(parent_quality - child_quality) / n and
    child_failure_rate = |{child_quality = 0}| / n, both exact. Parse-failed
    children are redrawn with fresh substreams up to redraw_budget extra
    attempts; whatever is left short reduces n.
    """
    if n_children < 1:
        raise ConfigError("n_children must be >= 1")
    parent_sample = parent.to_sample()
    qualities = []
    attempts = 0
    while len(qualities) < n_children and attempts < n_children + redraw_budget:
        slot = attempts
        attempts += 1
        try:
            child = gateway.mutate(parent_sample, mix(substream_seed, "child", slot))
        except MutationParseError:
            continue
        vs = gateway.verify(child, quality_cfg.k_rollouts, mix(substream_seed, "child-verify", slot))
        qualities.append(quality_of(solve_rate_of(vs), quality_cfg))
    if not qualities:
        raise DataError(f"no scorable children produced for parent {parent.record_id}")
    n = len(qualities)
    mean_diff = sum((parent.quality - q for q in qualities), Fraction(0)) / n
    failure_rate = Fraction(sum(1 for q in qualities if q == 0), n)
    return PerturbationReport(
        parent_id=parent.record_id,
        parent_quality=parent.quality,
        child_qualities=tuple(qualities),
        mean_diff=mean_diff,
        child_failure_rate=failure_rate,
    )


def coverage_curve(source, stride: int = 100) -> list:
    """Cumulative skill-set and unique-skill coverage over generated samples.

    `source` is an archive log path or an iterable of ArchiveRecord. Rows:
    (generated, archive_skill_sets, train_skill_sets, archive_unique_skills,
    train_unique_skills); "train" restricts to quality>0 samples. Corrupt
    log lines are skipped and counted in a warning.
    """
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    records = _iter_source(source)
    seen_tuples: set = set()
    seen_tuples_train: set = set()
    seen_labels: set = set()
    seen_labels_train: set = set()
    rows = []
    generated = 0
    for record in records:
        if not record.scored or record.origin != "generated":
            continue
        generated += 1
        if record.skills != UNCLASSIFIED:
            seen_tuples.add(record.skills)
            seen_labels.update(record.skills)
            if record.quality > 0:
                seen_tuples_train.add(record.skills)
                seen_labels_train.update(record.skills)
        if generated % stride == 0:
            rows.append(
                (generated, len(seen_tuples), len(seen_tuples_train), len(seen_labels), len(seen_labels_train))
            )
    if generated == 0 or generated % stride != 0:
        rows.append(
            (generated, len(seen_tuples), len(seen_tuples_train), len(seen_labels), len(seen_labels_train))
        )
    return rows


def _iter_source(source):
    if isinstance(source, (str, Path)):
        corrupt = [0]

        def generate():
            for obj in iter_log_objects(source, strict=False, corrupt_counter=corrupt):
                yield record_from_json_obj(obj)
            if corrupt[0]:
                logger.warning("skipped %d corrupt archive records", corrupt[0])

        return generate()
    return iter(source)


def solve_rate_histogram(records: Iterable[ArchiveRecord]) -> list:
    """Exact counts per attainable solve-rate value over generated samples.

    Returns K+1 rows ("n/K", count), zero-count buckets included.
    """
    counts: dict = {}
    k_rollouts = None
    total = 0
    for record in records:
        if not record.scored or record.origin != "generated":
            continue
        if k_rollouts is None:
            k_rollouts = record.k_rollouts
        elif record.k_rollouts != k_rollouts:
            raise DataError("mixed rollout counts in one histogram")
        numerator = int(record.solve_rate * k_rollouts)
        counts[numerator] = counts.get(numerator, 0) + 1
        total += 1
    if k_rollouts is None:
        return []
    return [(f"{n}/{k_rollouts}", counts.get(n, 0)) for n in range(k_rollouts + 1)]
