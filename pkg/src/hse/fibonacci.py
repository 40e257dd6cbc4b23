"""Fibonacci word and the aperiodic A/B drive it schedules.

``W_0 = "1"``, ``W_1 = "0"`` and ``W_{j+1} = W_j W_{j-1}``. Letters of the
infinite word are indexed from 1. Time step ``t`` (``t = 1, 2, ...``) applies
the propagator ``A`` when letter ``t`` is ``"0"`` and ``B`` when it is ``"1"``,
so ``|psi(1)> = U_A |psi(0)>``.

Written as an operator product the drive reads ``... U_B U_A U_B U_A U_A U_B U_A``
with the rightmost factor acting first; a caption listing ``U_A U_A U_B U_A``
for the first four steps is the same product read as operators.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DriveSchedule", "fibonacci_word", "symbol_at", "schedule", "word_lengths"]


def word_lengths(j: int) -> list[int]:
    """``len(W_0), ..., len(W_j)``: Fibonacci numbers with ``F(0) = F(1) = 1``."""
    lengths = [1, 1]
    while len(lengths) <= j:
        lengths.append(lengths[-1] + lengths[-2])
    return lengths[: j + 1]


def fibonacci_word(j: int) -> str:
    if j < 0:
        raise ValueError("generation index must be >= 0")
    prev, cur = "1", "0"
    if j == 0:
        return prev
    for _ in range(j - 1):
        prev, cur = cur, cur + prev
    return cur


def symbol_at(t: int) -> int:
    """Letter ``t`` (1-indexed) of the infinite Fibonacci word, in ``O(log t)``.

    Descends the length ladder: inside ``W_{j+1} = W_j W_{j-1}`` a position
    either falls in the leading ``W_j`` or, shifted by ``len(W_j)``, in the
    trailing ``W_{j-1}``.
    """
    if t < 1:
        raise ValueError("positions are 1-indexed")
    lengths = [1, 1]
    while lengths[-1] < t:
        lengths.append(lengths[-1] + lengths[-2])
    j = len(lengths) - 1
    while j > 1:
        if t > lengths[j - 1]:
            t -= lengths[j - 1]
            j -= 2
        else:
            j -= 1
    return 1 if j == 0 else 0


@dataclass(frozen=True)
class DriveSchedule:
    """Labels of the first ``horizon`` steps; ``symbols[k]`` drives step ``k + 1``."""

    horizon: int
    symbols: str

    def as_array(self) -> np.ndarray:
        """0 for ``A``, 1 for ``B``."""
        return np.frombuffer(self.symbols.encode(), dtype=np.uint8) - ord("A")


def schedule(horizon: int) -> DriveSchedule:
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    word = "0"
    j = 1
    while len(word) < horizon:
        j += 1
        word = fibonacci_word(j)
    labels = word[:horizon].translate(str.maketrans("01", "AB"))
    return DriveSchedule(horizon, labels)
