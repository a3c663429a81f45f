"""Piecewise-linear outer functions with constant extension."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exact import GammaNumber, gn_compare

__all__ = [
    "OuterFunction",
    "CollisionError",
    "BoundError",
    "build_outer",
    "build_outer_arrays",
    "eval_outer",
    "sum_outer",
    "lipschitz",
    "sup_norm_outer",
]

# Adjacent float positions closer than this are re-ordered by exact comparison.
_NEAR_TIE = 1e-12


class CollisionError(ValueError):
    pass


class BoundError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OuterFunction:
    positions: np.ndarray
    values: np.ndarray
    bound: float
    exact: tuple | None = None  # GammaNumber per knot when known

    def __post_init__(self):
        if len(self.positions) != len(self.values):
            raise ValueError("positions and values differ in length")
        if len(self.positions) > 1 and not np.all(np.diff(self.positions) > 0):
            raise CollisionError("knot positions must be strictly increasing")

    def __call__(self, t):
        return eval_outer(self, t)

    def __len__(self) -> int:
        return len(self.positions)

    def scaled(self, c: float) -> "OuterFunction":
        return OuterFunction(self.positions, c * self.values, abs(c) * self.bound, self.exact)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["position_float", "position_exact", "value"])
        for k, (p, v) in enumerate(zip(self.positions, self.values)):
            ex = " ".join(self.exact[k].to_strings()) if self.exact is not None else ""
            w.writerow([repr(float(p)), ex, repr(float(v))])
        return buf.getvalue()


def _position_float(p) -> float:
    return float(p)


def build_outer(forced: Iterable[tuple], B: float) -> OuterFunction:
    """Outer function through ``(position, value)`` pairs, bounded by ``B``.

    Positions may be GammaNumbers (compared exactly) or floats.
    """
    items = list(forced)
    for _, v in items:
        if abs(v) > B:
            raise BoundError(f"|value| = {abs(v)} exceeds bound {B}")
    items.sort(key=lambda it: _position_float(it[0]))
    exact = all(isinstance(p, GammaNumber) for p, _ in items) and bool(items)
    if exact:
        # Float order can be wrong only for near ties; settle those exactly.
        i = 0
        while i < len(items) - 1:
            a, b = items[i][0], items[i + 1][0]
            if float(b) - float(a) <= _NEAR_TIE * max(1.0, abs(float(a))):
                c = gn_compare(a, b)
                if c > 0:
                    items[i], items[i + 1] = items[i + 1], items[i]
                    i = max(i - 1, 0)
                    continue
            i += 1
    merged: list[tuple] = []
    for p, v in items:
        if merged and _same_position(merged[-1][0], p, exact):
            if merged[-1][1] != v:
                raise CollisionError(f"conflicting values at position {p!r}")
            continue
        merged.append((p, v))
    pos = np.array([float(p) for p, _ in merged])
    vals = np.array([float(v) for _, v in merged])
    if len(pos) > 1 and not np.all(np.diff(pos) > 0):
        raise CollisionError("distinct exact positions round to the same float")
    return OuterFunction(pos, vals, float(B), tuple(p for p, _ in merged) if exact else None)


def _same_position(a, b, exact: bool) -> bool:
    if exact:
        return a == b
    return float(a) == float(b)


def build_outer_arrays(positions: np.ndarray, values: np.ndarray, B: float) -> OuterFunction:
    """Vectorized ``build_outer`` for float positions already known to be distinct."""
    positions = np.asarray(positions, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.size and np.max(np.abs(values)) > B:
        raise BoundError(f"|value| = {np.max(np.abs(values))} exceeds bound {B}")
    order = np.argsort(positions, kind="stable")
    pos, vals = positions[order], values[order]
    if len(pos) > 1 and not np.all(np.diff(pos) > 0):
        raise CollisionError("forced positions coincide in floating point")
    return OuterFunction(pos, vals, float(B))


def eval_outer(g: OuterFunction, t):
    """Linear between knots, constant beyond the extreme knots, zero without knots."""
    t = np.asarray(t, dtype=float)
    if len(g.positions) == 0:
        return np.zeros_like(t)[()]
    return np.interp(t, g.positions, g.values)[()]


def sum_outer(gs: Sequence[OuterFunction]) -> OuterFunction:
    """Exact pointwise sum: knots are the union, values the summed evaluations."""
    gs = list(gs)
    if not gs:
        return OuterFunction(np.empty(0), np.empty(0), 0.0)
    if len(gs) == 1:
        return gs[0]
    pos = np.unique(np.concatenate([g.positions for g in gs]))
    vals = np.zeros_like(pos)
    for g in gs:
        vals = vals + eval_outer(g, pos)
    exact = None
    if all(g.exact is not None for g in gs):
        table = {}
        for g in gs:
            for p, e in zip(g.positions, g.exact):
                table.setdefault(float(p), e)
        exact = tuple(table[float(p)] for p in pos)
    return OuterFunction(pos, vals, float(sum(g.bound for g in gs)), exact)


def lipschitz(g: OuterFunction) -> float:
    if len(g.positions) < 2:
        return 0.0
    return float(np.max(np.abs(np.diff(g.values)) / np.diff(g.positions)))


def sup_norm_outer(g: OuterFunction) -> float:
    if len(g.values) == 0:
        return 0.0
    return float(np.max(np.abs(g.values)))
