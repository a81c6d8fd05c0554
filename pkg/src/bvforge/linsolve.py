"""Exact linear algebra over the rationals.

A single deterministic Gaussian elimination routine backs every solver
in the package.  Determinism matters more than speed here: pivots are
chosen as the first row with a nonzero entry in column order, free
variables are set to zero, and therefore two runs on the same system
produce the identical solution vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence


@dataclass(frozen=True)
class LinearSolution:
    """A particular solution plus the dimension of the homogeneous space."""

    values: tuple[Fraction, ...]
    nullity: int
    rank: int


def solve_linear_system(
    equations: Sequence[Mapping[int, Fraction]],
    rhs: Sequence[Fraction],
    num_unknowns: int,
) -> LinearSolution | None:
    """Solve A x = b exactly; return None when the system is inconsistent.

    Each equation is a sparse row mapping unknown index to coefficient.
    The returned particular solution sets every free variable to zero.
    """
    if len(equations) != len(rhs):
        raise ValueError("one right-hand side per equation required")
    rows = [
        [Fraction(eq.get(j, 0)) for j in range(num_unknowns)] + [Fraction(b)]
        for eq, b in zip(equations, rhs)
    ]

    pivot_cols: list[int] = []
    pivot_row = 0
    for col in range(num_unknowns):
        chosen = None
        for r in range(pivot_row, len(rows)):
            if rows[r][col] != 0:
                chosen = r
                break
        if chosen is None:
            continue
        rows[pivot_row], rows[chosen] = rows[chosen], rows[pivot_row]
        pivot = rows[pivot_row][col]
        rows[pivot_row] = [v / pivot for v in rows[pivot_row]]
        for r in range(len(rows)):
            if r != pivot_row and rows[r][col] != 0:
                factor = rows[r][col]
                rows[r] = [a - factor * b for a, b in zip(rows[r], rows[pivot_row])]
        pivot_cols.append(col)
        pivot_row += 1
        if pivot_row == len(rows):
            break

    for r in range(pivot_row, len(rows)):
        if rows[r][num_unknowns] != 0:
            return None

    values = [Fraction(0)] * num_unknowns
    for r, col in enumerate(pivot_cols):
        values[col] = rows[r][num_unknowns]
    rank = len(pivot_cols)
    return LinearSolution(tuple(values), nullity=num_unknowns - rank, rank=rank)
