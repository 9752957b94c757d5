from fractions import Fraction

import pytest

from qdgen.archive import ArchiveRecord, STATUS_SCORED


def make_record(
    record_id,
    quality,
    skills=("algebra",),
    origin="generated",
    k_rollouts=16,
    insertion_index=None,
    successes=None,
    round_index=1,
    parent_id=None,
    solve_rate=None,
):
    """Scored archive record with a quality value and matching solve rate."""
    quality = Fraction(quality)
    if solve_rate is None:
        rate = 1 - quality if quality > 0 else Fraction(1)  # solve rate 1 => quality 0
    else:
        rate = Fraction(solve_rate)
    n_correct = int(rate * k_rollouts)
    if successes is None:
        successes = tuple(range(n_correct))
    return ArchiveRecord(
        record_id=record_id,
        origin=origin,
        status=STATUS_SCORED,
        round_index=round_index,
        slot=None,
        parent_id=parent_id,
        problem=f"problem {record_id}",
        solution=f"solution \\boxed{{{record_id}}}",
        answer_raw=str(record_id),
        solve_rate=rate,
        quality=quality,
        k_rollouts=k_rollouts,
        skills=tuple(skills),
        verified_rollouts=tuple(successes),
        verifications=tuple(f"rollout {k} \\boxed{{{record_id}}}" for k in successes),
        flags=(),
        insertion_index=record_id if insertion_index is None else insertion_index,
    )


@pytest.fixture
def record_factory():
    return make_record
