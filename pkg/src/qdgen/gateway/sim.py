"""Deterministic simulated backend for offline runs and verification.

Simulated problems carry their ground truth inline as a bracketed payload
(difficulty, true answer, skill labels) inside the problem text, so every
role can be simulated as a pure function of (prompt, substream seed):

- student: answers correctly with probability exactly 1 - difficulty;
- generator: random-walks difficulty, redraws the answer, occasionally
  swaps one skill for a vocabulary neighbor;
- skill_classifier: echoes the payload's skills;
- validity_oracle: agrees with the intended answer with probability
  1 - difficulty, decided once per problem (planted invalidity rises
  with difficulty).

Identical (prompt, seed) pairs always produce byte-identical completions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from ..errors import PermanentBackendError
from ..rng import mix, substream, unit
from .roles import RoleConfig

# Fixed universe of skill labels the simulator draws from. Seed synthesis
# uses a prefix of this list; mutation may drift to neighbors anywhere in it.
SIM_SKILLS = (
    "algebra",
    "arithmetic",
    "geometry",
    "number-theory",
    "combinatorics",
    "probability",
    "pigeonhole-principle",
    "modular-arithmetic",
    "prime-factorization",
    "polynomial-factoring",
    "quadratic-formula",
    "completing-the-square",
    "inequalities",
    "am-gm-inequality",
    "cauchy-schwarz",
    "telescoping-sums",
    "recursion",
    "induction",
    "invariants",
    "parity-argument",
    "casework",
    "symmetry",
    "substitution",
    "systems-of-equations",
    "linear-equations",
    "exponent-rules",
    "logarithms",
    "trigonometry",
    "law-of-cosines",
    "similar-triangles",
    "angle-chasing",
    "coordinate-geometry",
    "vectors",
    "complex-numbers",
    "sequences-and-series",
    "geometric-series",
    "binomial-theorem",
    "counting-principles",
    "inclusion-exclusion",
    "expected-value",
    "divisibility",
    "gcd-lcm",
    "base-conversion",
    "floor-function",
    "functional-equations",
    "optimization",
    "rate-problems",
    "ratio-and-proportion",
)

_SKILL_INDEX = {label: i for i, label in enumerate(SIM_SKILLS)}

_PAYLOAD_RE = re.compile(
    r"\[sim difficulty=(\d+\.\d{6}) answer=(-?\d+) skills=([a-z0-9|-]*)\]"
)


@dataclass(frozen=True)
class SimProblemPayload:
    """Ground truth embedded in a simulated problem's text."""

    difficulty: float  # in [0, 1]; student solves with probability 1 - difficulty
    true_answer: int
    skills: tuple

    def render(self) -> str:
        return (
            f"[sim difficulty={self.difficulty:.6f} "
            f"answer={self.true_answer} skills={'|'.join(self.skills)}]"
        )


@lru_cache(maxsize=8192)
def extract_payload(text: str) -> Optional[SimProblemPayload]:
    """Parse the last payload marker in the text; None when absent."""
    found = None
    for found in _PAYLOAD_RE.finditer(text):
        pass
    if found is None:
        return None
    skills = tuple(s for s in found.group(3).split("|") if s)
    return SimProblemPayload(
        difficulty=float(found.group(1)),
        true_answer=int(found.group(2)),
        skills=skills,
    )


def _problem_text(tag: int, payload: SimProblemPayload) -> str:
    return (
        f"Simulated problem #{tag}: determine the hidden value. {payload.render()}"
    )


def _solution_text(answer: int) -> str:
    return f"Simulated derivation concluding \\boxed{{{answer}}}."


class SimulatedBackend:
    """Pure-function completions for all four roles."""

    name = "sim"

    def __init__(
        self,
        generator_malform_rate: float = 0.02,
        skill_swap_rate: float = 0.3,
        difficulty_step: float = 0.2,
        answer_range: tuple = (1, 9999),
    ):
        self.generator_malform_rate = generator_malform_rate
        self.skill_swap_rate = skill_swap_rate
        self.difficulty_step = difficulty_step
        self.answer_range = answer_range

    def identity(self) -> dict:
        return {
            "backend": self.name,
            "generator_malform_rate": self.generator_malform_rate,
            "skill_swap_rate": self.skill_swap_rate,
            "difficulty_step": self.difficulty_step,
        }

    def complete(self, role: RoleConfig, prompt: str, substream_seed: int) -> str:
        handler = {
            "student": self._student,
            "generator": self._generator,
            "skill_classifier": self._classifier,
            "validity_oracle": self._oracle,
        }[role.role]
        return handler(prompt, substream_seed)

    def _student(self, prompt: str, seed: int) -> str:
        payload = extract_payload(prompt)
        if payload is None:
            return "I cannot determine the answer."
        trace = mix(seed, "trace")
        if unit(seed, "solve") < 1.0 - payload.difficulty:
            answer = payload.true_answer
        else:
            answer = payload.true_answer + 1 + trace % 17
        return (
            f"Simulated reasoning trace {trace % 1000000:06d}. "
            f"The final answer is \\boxed{{{answer}}}."
        )

    def _generator(self, prompt: str, seed: int) -> str:
        parent = extract_payload(prompt)
        if parent is None:
            raise PermanentBackendError(
                "mutation prompt carries no simulated payload", role="generator"
            )
        rng = substream(seed, "mutate")
        if rng.random() < self.generator_malform_rate:
            return "<problem>degenerate output with no closing tags"
        difficulty = min(1.0, max(0.0, parent.difficulty + rng.gauss(0.0, self.difficulty_step)))
        answer = rng.randint(*self.answer_range)
        skills = list(parent.skills) or [rng.choice(SIM_SKILLS)]
        if rng.random() < self.skill_swap_rate:
            pos = rng.randrange(len(skills))
            old = _SKILL_INDEX.get(skills[pos])
            if old is None:
                skills[pos] = rng.choice(SIM_SKILLS)
            else:
                step = rng.choice((-4, -3, -2, -1, 1, 2, 3, 4))
                skills[pos] = SIM_SKILLS[(old + step) % len(SIM_SKILLS)]
        deduped = tuple(dict.fromkeys(skills))
        child = SimProblemPayload(difficulty=difficulty, true_answer=answer, skills=deduped)
        problem = _problem_text(rng.randrange(10**9), child)
        return f"<problem>{problem}</problem>\n<solution>{_solution_text(answer)}</solution>"

    def _classifier(self, prompt: str, seed: int) -> str:
        payload = extract_payload(prompt)
        if payload is None:
            return "<skills></skills>"
        return f"<skills>{','.join(payload.skills)}</skills>"

    def _oracle(self, prompt: str, seed: int) -> str:
        payload = extract_payload(prompt)
        if payload is None:
            return "The problem statement is unclear."
        # Validity is a fixed property of the problem, independent of the
        # call's substream: agreement probability is the solve probability.
        agree = (
            unit("oracle-valid", payload.true_answer, f"{payload.difficulty:.6f}")
            < 1.0 - payload.difficulty
        )
        answer = payload.true_answer if agree else payload.true_answer + 7
        return f"Independent derivation arrives at \\boxed{{{answer}}}."


def make_seed_records(
    count: int,
    seed: int,
    difficulty_range: tuple = (0.15, 0.85),
    label_pool: int = 24,
    skills_per_problem: tuple = (2, 3),
) -> list:
    """Synthesize a simulated seed dataset as {problem, solution} records."""
    rng = substream(seed, "sim-seed")
    pool = SIM_SKILLS[:label_pool]
    lo, hi = difficulty_range
    records = []
    for i in range(count):
        payload = SimProblemPayload(
            difficulty=rng.uniform(lo, hi),
            true_answer=rng.randint(1, 9999),
            skills=tuple(sorted(rng.sample(pool, rng.randint(*skills_per_problem)))),
        )
        records.append(
            {
                "problem": f"Simulated seed problem #{i}: find the hidden value. {payload.render()}",
                "solution": _solution_text(payload.true_answer),
            }
        )
    return records
