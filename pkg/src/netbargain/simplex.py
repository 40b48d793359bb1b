"""Dense tableau simplex over exact rationals with Bland's anti-cycling rule.

Solves ``max c.x  s.t.  A x <= b, x >= 0`` for ``b >= 0`` (the slack basis
is feasible, so no phase one is needed) and returns primal and dual optima.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

ZERO = Fraction(0)


@dataclass
class SimplexResult:
    x: list[Fraction]
    y: list[Fraction]
    objective: Fraction
    pivots: int


class Unbounded(ArithmeticError):
    pass


def simplex_max(c: Sequence, A: Sequence[Sequence], b: Sequence, max_pivots: int = 100_000) -> SimplexResult:
    nvar = len(c)
    nrow = len(A)
    if any(Fraction(v) < 0 for v in b):
        raise ValueError("right-hand side must be non-negative")
    width = nvar + nrow
    rows = []
    for r in range(nrow):
        row = [Fraction(v) for v in A[r]] + [ZERO] * nrow + [Fraction(b[r])]
        row[nvar + r] = Fraction(1)
        rows.append(row)
    obj = [-Fraction(v) for v in c] + [ZERO] * nrow + [ZERO]
    basis = [nvar + r for r in range(nrow)]

    pivots = 0
    while True:
        enter = next((j for j in range(width) if obj[j] < 0), None)
        if enter is None:
            break
        leave = None
        best = None
        for r in range(nrow):
            a = rows[r][enter]
            if a > 0:
                ratio = rows[r][-1] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[leave]):
                    best, leave = ratio, r
        if leave is None:
            raise Unbounded("objective is unbounded")
        _pivot(rows, obj, leave, enter)
        basis[leave] = enter
        pivots += 1
        if pivots > max_pivots:
            raise RuntimeError("simplex pivot limit exceeded")

    x = [ZERO] * nvar
    for r, v in enumerate(basis):
        if v < nvar:
            x[v] = rows[r][-1]
    y = [obj[nvar + r] for r in range(nrow)]
    return SimplexResult(x, y, obj[-1], pivots)


def _pivot(rows, obj, p, q):
    prow = rows[p]
    piv = prow[q]
    if piv != 1:
        for j, v in enumerate(prow):
            if v:
                prow[j] = v / piv
    nz = [j for j, v in enumerate(prow) if v]
    for row in rows:
        if row is prow:
            continue
        f = row[q]
        if f:
            for j in nz:
                row[j] -= f * prow[j]
    f = obj[q]
    if f:
        for j in nz:
            obj[j] -= f * prow[j]
