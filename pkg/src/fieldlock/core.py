"""Access modes, access vectors and control vectors.

Everything here is a pure value-level function. Vectors are plain tuples of
:class:`Mode`, so they hash, compare and can be shared across threads.
"""

from __future__ import annotations

import enum
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

__all__ = [
    "Mode",
    "AccessVector",
    "ControlVectors",
    "DimensionError",
    "compatible",
    "vectors_commute",
    "bag_pairwise_commutative",
    "control_vectors",
    "lemma1_holds",
    "vector_leq",
    "vector_max",
    "format_vector",
    "parse_vector",
    "null_vector",
]


class DimensionError(ValueError):
    """Vectors of different length were combined."""


class Mode(enum.IntEnum):
    NULL = 0
    READ = 1
    WRITE = 2

    @property
    def letter(self) -> str:
        return "NRW"[self]

    @classmethod
    def from_letter(cls, letter: str) -> "Mode":
        try:
            return cls("NRW".index(letter.strip().upper()))
        except ValueError:
            raise ValueError(f"unknown access mode {letter!r}") from None

    def __str__(self) -> str:
        return self.letter


AccessVector = tuple  # tuple[Mode, ...]

# Table 1, indexed [a][b].
_COMPAT = (
    (True, True, True),
    (True, True, False),
    (True, False, False),
)


def compatible(a: Mode, b: Mode) -> bool:
    """Classical Null/Read/Write compatibility."""
    return _COMPAT[a][b]


def _check_same_length(a: Sequence, b: Sequence) -> None:
    if len(a) != len(b):
        raise DimensionError(f"dimension mismatch: {len(a)} vs {len(b)}")


def vectors_commute(a: Sequence[Mode], b: Sequence[Mode]) -> bool:
    """True iff the two vectors are compatible field by field."""
    _check_same_length(a, b)
    return all(_COMPAT[x][y] for x, y in zip(a, b))


def vector_leq(a: Sequence[Mode], b: Sequence[Mode]) -> bool:
    _check_same_length(a, b)
    return all(x <= y for x, y in zip(a, b))


def vector_max(a: Sequence[Mode], b: Sequence[Mode]) -> AccessVector:
    _check_same_length(a, b)
    return tuple(max(x, y) for x, y in zip(a, b))


def null_vector(n: int) -> AccessVector:
    return (Mode.NULL,) * n


def _bag_dimension(bag: Sequence[Sequence[Mode]]) -> int | None:
    dims = {len(v) for v in bag}
    if len(dims) > 1:
        raise DimensionError(f"bag mixes dimensions {sorted(dims)}")
    return dims.pop() if dims else None


def bag_pairwise_commutative(bag: Iterable[Sequence[Mode]]) -> bool:
    """Every pair of distinct bag members commutes.

    The bag is a multiset: two copies of the same vector are two members.
    """
    bag = list(bag)
    _bag_dimension(bag)
    for i in range(len(bag)):
        for j in range(i + 1, len(bag)):
            if not vectors_commute(bag[i], bag[j]):
                return False
    return True


@dataclass(frozen=True)
class ControlVectors:
    """Per-field reader and writer counts of a bag of vectors."""

    rcv: tuple[int, ...]
    wcv: tuple[int, ...]

    def __post_init__(self) -> None:
        _check_same_length(self.rcv, self.wcv)
        if any(r < 0 for r in self.rcv) or any(w < 0 for w in self.wcv):
            raise ValueError("control vector counts must be non-negative")

    @property
    def dimension(self) -> int:
        return len(self.rcv)


def control_vectors(bag: Iterable[Sequence[Mode]], dimension: int | None = None) -> ControlVectors:
    """Count readers and writers per field.

    ``dimension`` is only needed to size the result for an empty bag.
    """
    bag = list(bag)
    n = _bag_dimension(bag)
    if n is None:
        n = dimension or 0
    elif dimension is not None and dimension != n:
        raise DimensionError(f"bag has dimension {n}, expected {dimension}")
    rcv = [0] * n
    wcv = [0] * n
    for vec in bag:
        for i, m in enumerate(vec):
            if m is Mode.READ:
                rcv[i] += 1
            elif m is Mode.WRITE:
                wcv[i] += 1
    return ControlVectors(tuple(rcv), tuple(wcv))


def lemma1_holds(cv: ControlVectors) -> bool:
    """Per field: readers exclude writers, and there is at most one writer."""
    return all((r == 0 or w == 0) and w <= 1 for r, w in zip(cv.rcv, cv.wcv))


def format_vector(vec: Sequence[Mode]) -> str:
    return "(" + ",".join(Mode(m).letter for m in vec) + ")"


def parse_vector(text: str) -> AccessVector:
    """Inverse of :func:`format_vector`, e.g. ``"(R,N,W)"``."""
    body = text.strip()
    if not (body.startswith("(") and body.endswith(")")):
        raise ValueError(f"malformed access vector {text!r}")
    body = body[1:-1].strip()
    if not body:
        return ()
    return tuple(Mode.from_letter(part) for part in body.split(","))
