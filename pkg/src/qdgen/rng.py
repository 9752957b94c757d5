"""Deterministic seed derivation for parallel-safe random substreams.

Python's builtin hash() is salted per process, so every substream seed is
derived by hashing its identifying parts (root seed, round, slot, purpose)
with blake2b. The result is stable across runs, platforms, and worker
counts, which makes batch results independent of completion order.
"""

from __future__ import annotations

import hashlib
import random

_SEP = b"\x1f"
_TWO64 = 2.0**64


def mix(*parts: int | str) -> int:
    """Mix ints and strings into a stable 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        if isinstance(p, int):
            h.update(p.to_bytes(16, "little", signed=True))
        else:
            h.update(str(p).encode("utf-8"))
        h.update(_SEP)
    return int.from_bytes(h.digest(), "little")


def unit(*parts: int | str) -> float:
    """One-shot uniform draw in [0, 1) keyed by the mixed parts."""
    return mix(*parts) / _TWO64


def substream(*parts: int | str) -> random.Random:
    """Independent Random instance keyed by the mixed parts."""
    return random.Random(mix(*parts))
