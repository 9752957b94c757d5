"""Uniform front door to the generator, student, classifier, and oracle.

All operations take an explicit substream seed and derive per-attempt and
per-rollout seeds from it, so results are independent of completion order
and of the configured fan-out.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

from ..answers import is_correct
from ..errors import ConfigError, MutationParseError, TransportError
from ..rng import mix
from ..samples import Sample, sample_from_texts
from .prompts import PromptTemplates
from .roles import default_roles

_PROBLEM_TAG_RE = re.compile(r"<problem>(.*?)</problem>", re.DOTALL)
_SOLUTION_TAG_RE = re.compile(r"<solution>(.*?)</solution>", re.DOTALL)
_SKILLS_TAG_RE = re.compile(r"<skills>(.*?)</skills>", re.DOTALL)


@dataclass(frozen=True)
class Rollout:
    """One student verification attempt."""

    text: str
    correct: bool
    infrastructure_failure: bool = False


@dataclass(frozen=True)
class VerificationSet:
    """All K rollouts for one problem, failures included."""

    rollouts: tuple

    @property
    def size(self) -> int:
        return len(self.rollouts)

    @property
    def correct_count(self) -> int:
        return sum(1 for r in self.rollouts if r.correct)

    @property
    def infrastructure_failures(self) -> int:
        return sum(1 for r in self.rollouts if r.infrastructure_failure)

    @property
    def usable(self) -> bool:
        # Unusable when strictly more than half the rollouts failed on
        # infrastructure rather than on the problem itself.
        return 2 * self.infrastructure_failures <= self.size

    def successful_indices(self) -> tuple:
        return tuple(i for i, r in enumerate(self.rollouts) if r.correct)


class ModelGateway:
    """Routes role-tagged completions to a backend and parses the results."""

    def __init__(
        self,
        backend,
        roles: Optional[dict] = None,
        templates: Optional[PromptTemplates] = None,
        fan_out: int = 1,
    ):
        self.backend = backend
        self.roles = roles or default_roles()
        self.templates = templates or PromptTemplates.load()
        self.fan_out = max(1, int(fan_out))
        self._pool: Optional[ThreadPoolExecutor] = None

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None

    def _executor(self) -> ThreadPoolExecutor:
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.fan_out)
        return self._pool

    def complete(self, role: str, prompt: str, substream_seed: int) -> str:
        """One completion from the named role."""
        try:
            role_cfg = self.roles[role]
        except KeyError:
            raise ConfigError(f"no backend binding for role {role!r}") from None
        return self.backend.complete(role_cfg, prompt, substream_seed)

    def mutate(self, parent: Sample, substream_seed: int) -> Sample:
        """Generate one child of `parent`; raises MutationParseError after
        the single retry when tags or the final answer cannot be parsed."""
        prompt = self.templates.render_mutation(parent.problem, parent.solution)
        failure = "no completion"
        for attempt in range(2):
            text = self.complete("generator", prompt, mix(substream_seed, "attempt", attempt))
            problem_match = _PROBLEM_TAG_RE.search(text)
            solution_match = _SOLUTION_TAG_RE.search(text)
            if problem_match is None or solution_match is None:
                failure = "missing or unbalanced problem/solution tags"
                continue
            try:
                return sample_from_texts(
                    problem_match.group(1).strip(),
                    solution_match.group(1).strip(),
                    parent_id=parent.sample_id,
                )
            except Exception:
                failure = "solution has no extractable final answer"
        raise MutationParseError(failure)

    def verify(self, sample: Sample, k_rollouts: int, substream_seed: int) -> VerificationSet:
        """Score `sample` with K independent student rollouts.

        A rollout whose transport fails after retries scores 0 and is
        flagged; the set always contains exactly K rollout records.
        """
        prompt = self.templates.render_verify(sample.problem)
        intended = sample.answer

        def one(k: int) -> Rollout:
            try:
                text = self.complete("student", prompt, mix(substream_seed, "rollout", k))
            except TransportError:
                return Rollout(text="", correct=False, infrastructure_failure=True)
            return Rollout(text=text, correct=bool(is_correct(intended, text)))

        if self.fan_out > 1 and k_rollouts > 1:
            rollouts = tuple(self._executor().map(one, range(k_rollouts)))
        else:
            rollouts = tuple(one(k) for k in range(k_rollouts))
        return VerificationSet(rollouts=rollouts)

    def classify_skills(self, sample: Sample, max_labels: int, substream_seed: int) -> list:
        """Raw skill labels (lowercased, trimmed, at most `max_labels`).

        Missing tags get one retry; a second failure yields [] and the
        sample lands in the reserved unclassified niche downstream.
        """
        prompt = self.templates.render_skills(sample.problem, sample.solution, max_labels)
        for attempt in range(2):
            text = self.complete(
                "skill_classifier", prompt, mix(substream_seed, "attempt", attempt)
            )
            match = _SKILLS_TAG_RE.search(text)
            if match is None:
                continue
            labels = [part.strip().lower() for part in match.group(1).split(",")]
            return [label for label in labels if label][:max_labels]
        return []
