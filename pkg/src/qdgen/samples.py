"""Problem-solution sample records with lineage."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .answers import FinalAnswer, extract_final_answer
from .errors import DataError


@dataclass
class Sample:
    """A problem-solution pair plus its intended final answer and lineage."""

    problem: str
    solution: str
    answer: FinalAnswer
    sample_id: Optional[int] = None
    parent_id: Optional[int] = None
    round_index: int = 0
    origin: str = "generated"  # "seed" | "generated"


def sample_from_texts(problem: str, solution: str, **kwargs) -> Sample:
    """Build a Sample, extracting the intended answer from the solution.

    Raises DataError when the solution carries no extractable final answer,
    since such a sample can never be verified.
    """
    answer = extract_final_answer(solution)
    if answer is None:
        raise DataError("solution has no extractable \\boxed{...} final answer")
    return Sample(problem=problem, solution=solution, answer=answer, **kwargs)
