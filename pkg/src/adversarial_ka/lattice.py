"""Red intervals, red solids and rank coverage at resolution ``N``.

The red set of rank ``i`` is ``[0, 1]`` with every open cell ``(s/N, (s+1)/N)``,
``s = i (mod 2n+1)``, removed.  Endpoints are kept as integers over ``N`` so
membership tests at lattice points are exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exact import as_fraction

__all__ = ["RedLattice", "RedInterval", "RedSolid", "LatticeError"]


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class RedInterval:
    rank: int
    index: int
    lo: Fraction
    hi: Fraction

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    @property
    def midpoint(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def __contains__(self, x) -> bool:
        return self.lo <= as_fraction(x) <= self.hi


@dataclass(frozen=True)
class RedSolid:
    rank: int
    intervals: tuple[RedInterval, ...]

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(iv.index for iv in self.intervals)

    @property
    def representative(self) -> tuple[Fraction, ...]:
        return tuple(iv.midpoint for iv in self.intervals)

    def __contains__(self, point) -> bool:
        return all(x in iv for x, iv in zip(point, self.intervals))


@dataclass(frozen=True)
class RedLattice:
    n: int
    N: int

    def __post_init__(self):
        if self.n < 2:
            raise LatticeError(f"input dimension must be > 1, got {self.n}")
        if self.N < self.m:
            raise LatticeError(f"resolution N={self.N} below rank count {self.m}")

    @property
    def m(self) -> int:
        return 2 * self.n + 1

    @property
    def ranks(self) -> range:
        return range(1, self.m + 1)

    def _check_rank(self, rank: int) -> None:
        if not 1 <= rank <= self.m:
            raise LatticeError(f"rank {rank} outside 1..{self.m}")

    def gap_rank(self, s: int) -> int:
        """Rank whose red set loses the open cell ``(s/N, (s+1)/N)``."""
        r = s % self.m
        return r if r else self.m

    def gaps(self, rank: int) -> list[int]:
        self._check_rank(rank)
        start = rank % self.m
        return list(range(start, self.N + 1, self.m))

    def bounds(self, rank: int) -> tuple[np.ndarray, np.ndarray]:
        """Integer numerators ``(lo, hi)`` over ``N`` of the rank's red intervals."""
        lo, hi = [], []
        prev = 0
        for s in self.gaps(rank):
            if s >= self.N:
                break
            lo.append(prev)
            hi.append(s)
            prev = s + 1
        if prev <= self.N:
            lo.append(prev)
            hi.append(self.N)
        return np.asarray(lo, dtype=np.int64), np.asarray(hi, dtype=np.int64)

    def red_intervals(self, rank: int) -> list[RedInterval]:
        lo, hi = self.bounds(rank)
        return [RedInterval(rank, k, Fraction(int(a), self.N), Fraction(int(b), self.N))
                for k, (a, b) in enumerate(zip(lo, hi))]

    def count(self, rank: int) -> int:
        return len(self.bounds(rank)[0])

    def rank_coverage_1d(self, x) -> frozenset[int]:
        x = as_fraction(x)
        if not 0 <= x <= 1:
            raise LatticeError(f"point {x} outside [0, 1]")
        t = x * self.N
        if t.denominator == 1:
            return frozenset(self.ranks)
        s = t.numerator // t.denominator
        return frozenset(self.ranks) - {self.gap_rank(s)}

    def rank_coverage_nd(self, point: Sequence) -> frozenset[int]:
        if len(point) != self.n:
            raise LatticeError(f"expected {self.n} coordinates, got {len(point)}")
        covered = frozenset(self.ranks)
        for x in point:
            covered &= self.rank_coverage_1d(x)
        return covered

    def red_solids(self, rank: int) -> list[RedSolid]:
        ivs = self.red_intervals(rank)
        return [RedSolid(rank, combo) for combo in itertools.product(ivs, repeat=self.n)]

    def locate(self, rank: int, x) -> np.ndarray:
        """Index of the rank's red interval holding each ``x`` (float array), -1 in a gap."""
        lo, hi = self.bounds(rank)
        lo_f = lo / self.N
        hi_f = hi / self.N
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(lo_f, x, side="right") - 1
        kc = np.clip(k, 0, len(lo_f) - 1)
        inside = (k >= 0) & (x <= hi_f[kc])
        return np.where(inside, kc, -1)
