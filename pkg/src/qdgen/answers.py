"""Final-answer extraction and equivalence for \\boxed{...}-style solutions.

A solution's final answer is the content of the last well-balanced
``\\boxed{...}`` region. Answers canonicalize to exact rationals when they
look numeric, to ordered tuples for the ``(n1, n2, ...)`` convention, and
to a whitespace-free, lightly de-latexed string otherwise. Equality is
exact-rational for numerics (so "1/2" == "0.5" and "6" == "6.0") and plain
string equality for everything else; no CAS-style algebra is attempted.

The normalization rules are the single "default" profile selected by the
``answer_normalization_profile`` config knob.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple, Union

Canonical = Union[Fraction, str, Tuple["Canonical", ...]]

NORMALIZATION_PROFILES = ("default",)

_BOXED_RE = re.compile(r"\\boxed\s*\{")
_INT_RE = re.compile(r"[+-]?\d+\Z")
_DECIMAL_RE = re.compile(r"[+-]?(?:\d+\.\d*|\.\d+)\Z")
_RATIO_RE = re.compile(r"([+-]?\d+)/([+-]?\d+)\Z")
_FRAC_RE = re.compile(r"\\[dt]?frac\s*\{([^{}]*)\}\s*\{([^{}]*)\}")
_TEXT_RE = re.compile(r"\\text\s*\{([^{}]*)\}")
_WS_RE = re.compile(r"\s+")

# Wrappers removed during normalization; anything latex beyond these (and
# \text / \frac above) is left in place and falls through to string compare.
_STRIP_TOKENS = ("\\left", "\\right", "\\,", "\\;", "\\!", "$")


@dataclass(frozen=True)
class FinalAnswer:
    """An extracted final answer: raw boxed content plus canonical form."""

    raw: str
    canonical: Canonical

    @classmethod
    def from_raw(cls, raw: str) -> "FinalAnswer":
        return cls(raw=raw, canonical=_canonicalize(raw))


def _strip_latex(s: str) -> str:
    if "\\" not in s and "$" not in s:  # fast path for plain answers
        return s.strip()
    s = _TEXT_RE.sub(r"\1", s)
    s = _FRAC_RE.sub(r"\1/\2", s)
    for token in _STRIP_TOKENS:
        s = s.replace(token, "")
    return s.strip()


def _split_top_level(s: str) -> Optional[list[str]]:
    """Split on commas at bracket depth zero; None when no top-level comma."""
    parts: list[str] = []
    depth = 0
    start = 0
    for i, ch in enumerate(s):
        if ch in "({[":
            depth += 1
        elif ch in ")}]":
            depth -= 1
        elif ch == "," and depth == 0:
            parts.append(s[start:i])
            start = i + 1
    if not parts:
        return None
    parts.append(s[start:])
    return parts


def _parse_numeric(s: str) -> Optional[Fraction]:
    s = _WS_RE.sub("", s)
    if _INT_RE.fullmatch(s):
        return Fraction(int(s))
    if _DECIMAL_RE.fullmatch(s):
        return Fraction(s)
    m = _RATIO_RE.fullmatch(s)
    if m:
        den = int(m.group(2))
        if den != 0:
            return Fraction(int(m.group(1)), den)
    return None


def _canonicalize(raw: str) -> Canonical:
    s = _strip_latex(raw)
    if s.startswith("(") and s.endswith(")"):
        inner = _split_top_level(s[1:-1])
        if inner is not None:
            return tuple(_canonicalize(part) for part in inner)
    numeric = _parse_numeric(s)
    if numeric is not None:
        return numeric
    # String fallback: drop all whitespace so equality is insensitive to
    # whitespace insertion anywhere in the raw text.
    return _WS_RE.sub("", s)


def extract_final_answer(solution_text: str) -> Optional[FinalAnswer]:
    """Parse the last well-balanced \\boxed{...} region; None if there is none."""
    if "\\boxed" not in solution_text:
        return None
    matches = list(_BOXED_RE.finditer(solution_text))
    for m in reversed(matches):
        start = m.end()
        depth = 1
        i = start
        n = len(solution_text)
        while i < n and depth > 0:
            ch = solution_text[i]
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
            i += 1
        if depth == 0:
            return FinalAnswer.from_raw(solution_text[start : i - 1].strip())
    return None


def answers_equal(a: FinalAnswer, b: FinalAnswer) -> bool:
    """Exact equality of canonical forms (ordered for tuples)."""
    return a.canonical == b.canonical


def is_correct(intended: FinalAnswer, rollout_text: str) -> int:
    """1 iff the rollout's extracted final answer matches the intended one."""
    extracted = extract_final_answer(rollout_text)
    if extracted is None:
        return 0
    return int(answers_equal(intended, extracted))
