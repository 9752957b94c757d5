"""Skill vocabularies, canonical skill-sets, and coverage measures.

A skill-set is the alphabetically ordered tuple (length 1..k) of distinct
skill labels attached to a sample; it doubles as the niche key for the
diversity-aware policies. The reserved empty tuple marks samples that
could not be classified; it participates in niche sampling like any other
niche but contributes no labels to coverage.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ConfigError

logger = logging.getLogger(__name__)

SkillSet = tuple  # tuple[str, ...], strictly ascending labels

UNCLASSIFIED: SkillSet = ()

VOCABULARY_MODES = ("bounded", "unbounded")


@dataclass(frozen=True)
class SkillVocabulary:
    """The admissible skill-label universe.

    Bounded mode restricts labels to a fixed list (the top-M most frequent
    seed labels); unbounded mode admits any label.
    """

    labels: tuple = ()
    mode: str = "bounded"
    _members: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.mode not in VOCABULARY_MODES:
            raise ConfigError(f"unknown vocabulary mode {self.mode!r}")
        if len(set(self.labels)) != len(self.labels):
            raise ConfigError("vocabulary labels must be distinct")
        object.__setattr__(self, "_members", frozenset(self.labels))

    def __contains__(self, label: str) -> bool:
        return self.mode == "unbounded" or label in self._members

    def __len__(self) -> int:
        return len(self.labels)


def build_vocabulary(
    seed_classifications: Iterable[Sequence[str]], size: int
) -> SkillVocabulary:
    """The `size` most frequent labels over seed classifications.

    Ties break lexicographically. When fewer distinct labels exist than
    requested, all of them are kept and a warning is logged.
    """
    if size < 1:
        raise ConfigError("vocabulary size must be >= 1")
    counts = Counter()
    for labels in seed_classifications:
        counts.update(labels)
    ranked = sorted(counts, key=lambda label: (-counts[label], label))
    if len(ranked) < size:
        logger.warning(
            "only %d distinct skill labels available, wanted %d; keeping all",
            len(ranked),
            size,
        )
    return SkillVocabulary(labels=tuple(ranked[:size]), mode="bounded")


def unbounded_vocabulary() -> SkillVocabulary:
    return SkillVocabulary(labels=(), mode="unbounded")


def canonical_skill_set(
    raw_labels: Sequence[str], vocab: SkillVocabulary, max_labels: int
) -> SkillSet:
    """Filter to the vocabulary, dedupe, sort ascending, truncate to max_labels.

    Returns UNCLASSIFIED (the empty tuple) when nothing survives filtering.
    Unbounded vocabularies skip the filtering step.
    """
    kept = {label for label in raw_labels if label in vocab}
    if not kept:
        return UNCLASSIFIED
    return tuple(sorted(kept)[:max_labels])


def coverage(skill_sets: Iterable[SkillSet]) -> int:
    """Number of distinct labels across all skill-sets."""
    seen: set = set()
    for skill_set in skill_sets:
        seen.update(skill_set)
    return len(seen)


def max_unique_skill_subset(niches: Sequence[SkillSet], count: int) -> list:
    """Greedy maximum-coverage selection of `count` niches.

    Repeatedly picks the niche contributing the most not-yet-covered labels,
    breaking ties by lexicographically smallest tuple (then input order).
    Returns the chosen niches in selection order. Greedy carries the classic
    (1 - 1/e) guarantee relative to the exhaustive optimum.
    """
    if count > len(niches):
        raise ConfigError(
            f"cannot select {count} niches from a pool of {len(niches)}"
        )
    remaining = list(enumerate(niches))
    covered: set = set()
    chosen: list = []
    for _ in range(count):
        best_pos = min(
            range(len(remaining)),
            key=lambda pos: (
                -len(set(remaining[pos][1]) - covered),
                remaining[pos][1],
                remaining[pos][0],
            ),
        )
        _, niche = remaining.pop(best_pos)
        chosen.append(niche)
        covered.update(niche)
    return chosen
