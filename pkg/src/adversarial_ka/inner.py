"""Construction of the inner tuple in adversary coordinates.

The tuple is specified through ``phi_h = h o phi``: on every rank-``j`` red
interval ``phi_h[j]`` is a constant close to the local mean of ``h o phi0``,
and across the rank's gaps it is interpolated linearly.  Constants are
rationals over one common power-of-two denominator, so forced positions
``sum_i gamma_i * c_i`` are pairwise distinct exactly as soon as the constants of
each tuple are distinct.  ``phi`` itself is recovered as ``h^-1 o phi_h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .adversary import Adversary, AffineRational, Identity, Translation, modulus_of_inverse
from .exact import GammaBasis, GammaNumber, gn_compare
from .lattice import RedLattice

__all__ = [
    "ReferenceTuple",
    "ConstructionBudget",
    "InnerTuple",
    "ForcedTable",
    "BudgetExhaustedError",
    "DomainError",
    "InvariantError",
    "choose_resolution",
    "inner_requirements",
    "construct_phi_h",
    "construct_phi_multi",
    "forced_positions",
    "forced_table",
    "eval_phi",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


class BudgetExhaustedError(RuntimeError):
    pass


class DomainError(ValueError):
    pass


class InvariantError(AssertionError):
    pass


@dataclass(frozen=True)
class ReferenceTuple:
    """The unperturbed tuple ``phi0_j(x) = (j - 1 + offset + slope * x) / m``."""

    m: int
    slope: Fraction = Fraction(1, 2)
    offset: Fraction = Fraction(1, 4)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        j = np.arange(self.m, dtype=float)
        return (j + float(self.offset) + float(self.slope) * x[..., None]) / self.m

    def exact(self, x) -> tuple[Fraction, ...]:
        x = Fraction(x)
        return tuple((j + self.offset + self.slope * x) / self.m for j in range(self.m))

    @property
    def lipschitz(self) -> float:
        return float(self.slope) / self.m

    def range_box(self):
        lo = self(0.0)
        hi = self(1.0)
        return np.minimum(lo, hi), np.maximum(lo, hi)


@dataclass(frozen=True)
class ConstructionBudget:
    eps: float
    N: int
    D: int
    slack: float = 0.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.D < self.N:
            raise ValueError("snapping denominator D must be at least N")

    @classmethod
    def default(cls, eps: float, N: int) -> "ConstructionBudget":
        # Snapping noise must stay well below the natural spacing of forced
        # positions (~ 1/N^2), hence the generous denominator.
        return cls(eps=eps, N=N, D=1 << max(12, math.ceil(math.log2(4096 * N))))


@dataclass(frozen=True, eq=False)
class InnerTuple:
    lattice: RedLattice
    h: Adversary
    basis: GammaBasis
    slot: int
    denominator: int
    numerators: tuple  # per rank (index rank-1): tuple of python ints
    phi0: ReferenceTuple
    eps: float
    eps_prime: float
    min_gap: float = float("nan")
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def m(self) -> int:
        return self.lattice.m

    @property
    def gamma(self) -> float:
        return self.basis.floats[self.slot]

    def constant(self, rank: int, k: int) -> Fraction:
        """Rational part ``q`` of the constant on the rank's ``k``-th red interval."""
        return Fraction(self.numerators[rank - 1][k], self.denominator)

    def constant_gn(self, rank: int, k: int) -> GammaNumber:
        """The constant ``q * gamma_slot`` as an exact number."""
        return self.basis.unit(self.slot, self.constant(rank, k))

    def q_float(self, rank: int) -> np.ndarray:
        key = ("qf", rank)
        if key not in self._cache:
            num = np.array(self.numerators[rank - 1], dtype=np.int64)
            if np.abs(num).max(initial=0) >= 1 << 53:
                vals = np.array([float(Fraction(k, self.denominator)) for k in self.numerators[rank - 1]])
            else:
                vals = num / self.denominator
            self._cache[key] = vals
        return self._cache[key]

    def knots(self, rank: int) -> tuple[np.ndarray, np.ndarray]:
        """Breakpoints and values of the rational part of ``phi_h[rank]`` on ``[0, 1]``."""
        key = ("knots", rank)
        if key not in self._cache:
            lo, hi = self.lattice.bounds(rank)
            q = self.q_float(rank)
            xs, ys = [], []
            for a, b, v in zip(lo, hi, q):
                xs.append(a / self.lattice.N)
                ys.append(v)
                if b != a:
                    xs.append(b / self.lattice.N)
                    ys.append(v)
            self._cache[key] = (np.array(xs), np.array(ys))
        return self._cache[key]

    def q_values(self, rank: int, x) -> np.ndarray:
        xs, ys = self.knots(rank)
        return np.interp(x, xs, ys)

    def phi_h(self, x) -> np.ndarray:
        """``h o phi`` at ``x``, shape ``x.shape + (m,)``."""
        x = _check_domain(x)
        out = np.stack([self.q_values(j, x) for j in self.lattice.ranks], axis=-1)
        return self.gamma * out

    def to_json(self) -> dict:
        return {
            "lattice": {"n": self.lattice.n, "N": self.lattice.N},
            "adversary": self.h.to_spec(),
            "basis": list(self.basis.radicands),
            "slot": self.slot,
            "denominator": str(self.denominator),
            "constants": {str(j): [str(k) for k in self.numerators[j - 1]]
                          for j in self.lattice.ranks},
            "eps": self.eps,
            "eps_prime": self.eps_prime,
            "min_gap": self.min_gap,
        }


def _check_domain(x):
    x = np.asarray(x, dtype=float)
    if x.size and (np.nanmin(x) < 0 or np.nanmax(x) > 1 or np.isnan(x).any()):
        raise DomainError("inner tuple is defined on [0, 1] only")
    return x


def eval_phi(t: InnerTuple, x, tol: float = 1e-12) -> np.ndarray:
    """``phi(x) = h^-1(phi_h(x))``."""
    return t.h.invert(t.phi_h(x), tol)


def choose_resolution(f_lip: float, alpha: float, phi0_mod: float, epsp: float, n: int,
                      max_doublings: int = 40) -> int:
    """Smallest ``N = (2n+1) * 2^k`` meeting both variation requirements.

    ``f_lip * (4/N) * n < alpha`` bounds the target's variation on red solids;
    ``phi0_mod * (4/N) <= epsp`` bounds the variation of ``h o phi0`` (Lipschitz
    constant ``phi0_mod``) on red intervals.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not epsp > 0:
        raise ValueError("epsp must be positive")
    if f_lip < 0 or phi0_mod < 0:
        raise ValueError("Lipschitz constants must be non-negative")
    m = 2 * n + 1
    N = m
    for _ in range(max_doublings):
        if f_lip * (4 / N) * n < alpha and phi0_mod * (4 / N) <= epsp:
            return N
        N *= 2
    raise BudgetExhaustedError("resolution requirement not met within the doubling cap")


def inner_requirements(phi0: ReferenceTuple, h: Adversary, eps: float) -> tuple[float, float]:
    """``(eps_prime, lip)``: tolerance in adversary coordinates and Lipschitz bound of ``h o phi0``."""
    unit = (np.zeros(phi0.m), np.ones(phi0.m))
    eps_prime = modulus_of_inverse(h, h.image_box(unit), eps)
    lip = h.lipschitz(phi0.range_box()) * phi0.lipschitz
    return eps_prime, lip


def _interval_targets(lattice: RedLattice, phi0: ReferenceTuple, h: Adversary, rank: int):
    """Local mean and variation of ``(h o phi0)[rank]`` on each red interval."""
    lo, hi = lattice.bounds(rank)
    a = lo / lattice.N
    b = hi / lattice.N
    mid, half = (a + b) / 2, (b - a) / 2
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    vals = h.apply(phi0(pts))[..., rank - 1]
    mean = (vals * _GL_WEIGHTS[None, :]).sum(axis=1) / 2
    ends = h.apply(phi0(np.stack([a, b], axis=1)))[..., rank - 1]
    allv = np.concatenate([vals, ends], axis=1)
    spread = allv.max(axis=1) - allv.min(axis=1)
    return mean, spread


def _snap_constants(lattice, phi0, h, budget, eps_prime, gamma):
    """Rational parts of the constants (common denominator) before gap tuning."""
    D = budget.D
    total = sum(lattice.count(j) for j in lattice.ranks)
    Dp = 1 << math.ceil(math.log2(4 * total * D))
    den = D * Dp // math.gcd(D, Dp)
    if 3 * gamma / (4 * D) > eps_prime / 16:
        raise BudgetExhaustedError(
            f"denominator D={D} too small for eps'={eps_prime:.3g}; raise D")
    a_num, offsets = [], []
    idx = 0
    for j in lattice.ranks:
        mean, spread = _interval_targets(lattice, phi0, h, j)
        if np.max(spread, initial=0) > eps_prime / 4:
            raise BudgetExhaustedError(
                f"h o phi0 varies by {np.max(spread):.3g} > eps'/4 on a rank-{j} interval; raise N")
        a = np.rint(mean / gamma * D).astype(np.int64)
        a_num.append([int(v) for v in a])
        offsets.append(list(range(idx + 1, idx + 1 + len(a))))
        idx += len(a)
    return den, D, Dp, a_num, offsets


def _assemble(den, D, Dp, a_num, offsets):
    sa, so = den // D, den // Dp
    return tuple(tuple(a * sa + o * so for a, o in zip(ar, orow)) for ar, orow in zip(a_num, offsets))


@dataclass
class ForcedTable:
    """Forced positions of every red solid, vectorized.

    ``pos`` holds floats accumulated in the same order the approximator uses;
    ``keys`` holds the exact rational coefficients (numerators over each
    tuple's denominator), one column per basis slot.
    """

    rank: np.ndarray
    idx: np.ndarray
    pos: np.ndarray
    keys: np.ndarray

    def __len__(self) -> int:
        return len(self.pos)

    def min_gap(self) -> float:
        if len(self.pos) < 2:
            return math.inf
        return float(np.min(np.diff(np.sort(self.pos))))

    def exact_distinct(self) -> bool:
        """Whether all coefficient rows differ (exact, since the multipliers are independent)."""
        if len(self.keys) < 2:
            return True
        if self.keys.dtype == object:
            return len({tuple(r) for r in self.keys}) == len(self.keys)
        # Hash rows into one wrapped integer, then compare full rows on hash ties.
        mult = np.array([0x9E3779B97F4A7C15, 0xC2B2AE3D27D4EB4F, 0x165667B19E3779F9][: self.keys.shape[1]],
                        dtype=np.uint64)
        with np.errstate(over="ignore"):
            h = (self.keys.astype(np.uint64) * mult).sum(axis=1, dtype=np.uint64)
        hs = np.sort(h)
        dup = hs[1:][hs[1:] == hs[:-1]]
        if dup.size == 0:
            return True
        rows = self.keys[np.isin(h, dup)]
        return len({tuple(r) for r in rows.tolist()}) == len(rows)


def forced_table(tuples: Sequence[InnerTuple], offsets=None) -> ForcedTable:
    """Forced positions for per-variable tuples (repeat one tuple ``n`` times for the single form).

    ``offsets`` optionally adds a float shift per (variable, rank) to the
    rational parts, which is how translation adversaries move the positions.
    """
    lat = tuples[0].lattice
    n = lat.n
    weights = tuples[0].basis.floats
    ranks, idxs, poss, keys = [], [], [], []
    for j in lat.ranks:
        vals, nums = [], []
        for i, t in enumerate(tuples):
            v = t.q_float(j)
            if offsets is not None:
                v = v + offsets[i][j - 1]
            vals.append(v)
            nums.append(np.array(t.numerators[j - 1], dtype=object))
        shape = tuple(len(v) for v in vals)
        acc = None
        for i, v in enumerate(vals):
            term = (weights[i] * v).reshape([-1 if k == i else 1 for k in range(n)])
            acc = term if acc is None else acc + term
        acc = np.broadcast_to(acc, shape)
        grids = np.indices(shape).reshape(n, -1).T
        poss.append(acc.reshape(-1))
        idxs.append(grids)
        ranks.append(np.full(len(grids), j))
        keys.append(np.stack([_as_key(nums[i])[grids[:, i]] for i in range(n)], axis=1))
    return ForcedTable(np.concatenate(ranks), np.concatenate(idxs),
                       np.concatenate(poss), np.concatenate(keys))


def _as_key(nums):
    try:
        return nums.astype(np.int64)
    except OverflowError:  # pragma: no cover - denominators stay far below 2^63
        return nums


def forced_positions(tuples, basis: GammaBasis | None = None):
    """Exact forced positions ``(rank, solid index, GammaNumber)`` of every red solid.

    Accepts one InnerTuple (single-adversary form, weighted by the basis) or a
    list of ``n`` per-variable tuples (multi-adversary form, plain sum).
    Raises ``InvariantError`` on any collision.
    """
    if isinstance(tuples, InnerTuple):
        tuples = [tuples] * tuples.n
    basis = basis or tuples[0].basis
    lat = tuples[0].lattice
    out = []
    seen = set()
    for j in lat.ranks:
        counts = [lat.count(j)] * lat.n
        for combo in np.ndindex(*counts):
            coeffs = [t.constant(j, k) for t, k in zip(tuples, combo)]
            p = GammaNumber(basis, coeffs)
            if p.coeffs in seen:
                raise InvariantError(f"forced positions collide at rank {j}, solid {combo}")
            seen.add(p.coeffs)
            out.append((j, combo, p))
    return out


class _GapTuner:
    """Greedy pass: nudge the constants behind the closest pair of forced positions.

    Offsets stay in ``1..Dp/(4D)`` and distinct among constants sharing a
    snapped value, which keeps every constant distinct and non-zero.  A trial
    shift only moves the solids that use the shifted constant, so each trial
    re-sorts those few positions and merges them into the rest.
    """

    def __init__(self, lattice, weights, var_tuple, dens, scales, a_num, offsets, cap):
        self.lat = lattice
        self.n = lattice.n
        self.w = weights
        self.var_tuple = var_tuple
        self.dens = dens  # tid -> common denominator
        self.scales = scales  # tid -> (multiplier of a, multiplier of offset)
        self.a_num = a_num
        self.offsets = {t: [list(r) for r in rows] for t, rows in offsets.items()}
        self.cap = cap
        self.K = [lattice.count(j) for j in lattice.ranks]
        self.block = np.concatenate([[0], np.cumsum([k ** self.n for k in self.K])])
        self.q = {t: [np.array([self._q(t, j, k) for k in range(self.K[j - 1])])
                      for j in lattice.ranks] for t in a_num}
        self.used = {t: {} for t in a_num}
        for t in a_num:
            for j, (arow, orow) in enumerate(zip(a_num[t], self.offsets[t])):
                for k, (a, o) in enumerate(zip(arow, orow)):
                    self.used[t].setdefault(a, set()).add(o)
        pos = np.concatenate([self._rank_positions(j) for j in lattice.ranks])
        self.order = np.argsort(pos, kind="stable")
        self.S = pos[self.order]
        self.inv = np.empty_like(self.order)
        self.inv[self.order] = np.arange(len(self.order))
        self._refresh_gaps()

    def _q(self, t, j, k, offset=None):
        sa, so = self.scales[t]
        o = self.offsets[t][j - 1][k] if offset is None else offset
        return (self.a_num[t][j - 1][k] * sa + o * so) / self.dens[t]

    def _rank_positions(self, j):
        acc = None
        for i in range(self.n):
            v = self.q[self.var_tuple[i]][j - 1]
            term = (self.w[i] * v).reshape([-1 if d == i else 1 for d in range(self.n)])
            acc = term if acc is None else acc + term
        return np.broadcast_to(acc, (self.K[j - 1],) * self.n).reshape(-1)

    def _affected(self, t, j, k):
        K = self.K[j - 1]
        ids = []
        for i in range(self.n):
            if self.var_tuple[i] != t:
                continue
            shape = [K] * self.n
            shape[i] = 1
            idx = np.indices(shape).reshape(self.n, -1)
            idx[i] = k
            ids.append(np.ravel_multi_index(idx, (K,) * self.n))
        return np.unique(np.concatenate(ids))

    def _positions_of(self, t, j, k, qk, flat):
        idx = np.unravel_index(flat, (self.K[j - 1],) * self.n)
        acc = None
        for i in range(self.n):
            v = self.q[self.var_tuple[i]][j - 1][idx[i]]
            if self.var_tuple[i] == t:
                v = np.where(idx[i] == k, qk, v)
            term = self.w[i] * v
            acc = term if acc is None else acc + term
        return acc

    def min_gap(self):
        return float(self.D[self.small[0]]) if len(self.S) > 1 else math.inf

    def _refresh_gaps(self):
        self.D = np.diff(self.S)
        few = min(64, len(self.D) - 1)
        small = np.argpartition(self.D, few)[: few + 1] if few > 0 else np.arange(len(self.D))
        self.small = small[np.argsort(self.D[small], kind="stable")]

    def _trial(self, t, j, k, new_off):
        flat = self._affected(t, j, k)
        loc = np.sort(self.inv[self.block[j - 1] + flat])
        newp = self._positions_of(t, j, k, self._q(t, j, k, new_off), flat)
        srt = np.argsort(newp, kind="stable")
        ss = newp[srt]
        S, last = self.S, len(self.S) - 1
        # maximal runs of removed sorted indices; their outer neighbours are kept
        brk = np.flatnonzero(np.diff(loc) > 1)
        starts = loc[np.r_[0, brk + 1]]
        ends = loc[np.r_[brk, len(loc) - 1]]
        gaps = [np.diff(ss)]
        # untouched gaps: the smallest cached one that borders no removed index
        touched = np.isin(self.small, loc) | np.isin(self.small + 1, loc)
        if np.all(touched):
            keep = np.ones(len(S), dtype=bool)
            keep[loc] = False
            gaps.append(np.diff(S[keep]))
        else:
            gaps.append(self.D[self.small[~touched][:1]])
        inner = (starts > 0) & (ends < last)
        gaps.append(S[ends[inner] + 1] - S[starts[inner] - 1])
        at_s = np.searchsorted(S, ss)
        left = at_s - 1
        r = np.minimum(np.searchsorted(ends, left), len(ends) - 1)
        left = np.where((starts[r] <= left) & (left <= ends[r]), starts[r] - 1, left)
        right = at_s
        r = np.minimum(np.searchsorted(ends, right), len(ends) - 1)
        right = np.where((starts[r] <= right) & (right <= ends[r]), ends[r] + 1, right)
        ok = left >= 0
        gaps.append(ss[ok] - S[left[ok]])
        ok = right <= last
        gaps.append(S[right[ok]] - ss[ok])
        gap = min((float(g.min()) for g in gaps if g.size), default=math.inf)
        at = at_s - np.searchsorted(loc, at_s)
        return gap, (flat, loc, srt, ss, at, new_off)

    def _accept(self, t, j, k, data):
        flat, loc, srt, ss, at, new_off = data
        ids = np.delete(self.order, loc)
        self.S = np.insert(np.delete(self.S, loc), at, ss)
        self.order = np.insert(ids, at, self.block[j - 1] + flat[srt])
        self.inv[self.order] = np.arange(len(self.order))
        self._refresh_gaps()
        a = self.a_num[t][j - 1][k]
        self.used[t][a].discard(self.offsets[t][j - 1][k])
        self.used[t][a].add(new_off)
        self.offsets[t][j - 1][k] = new_off
        self.q[t][j - 1][k] = self._q(t, j, k)

    def _locate(self, sorted_index):
        flat = int(self.order[sorted_index])
        j = int(np.searchsorted(self.block, flat, side="right"))
        idx = np.unravel_index(flat - self.block[j - 1], (self.K[j - 1],) * self.n)
        return j, [int(v) for v in idx]

    def run(self, rounds):
        best = self.min_gap()
        steps = [s for s in (self.cap // 64, self.cap // 16, self.cap // 4) if s >= 1] or [1]
        for _ in range(max(rounds, 0)):
            if len(self.S) < 2:
                break
            p = int(self.small[0])
            improved = False
            for sorted_index in (p, p + 1):
                j, idx = self._locate(sorted_index)
                for var, k in enumerate(idx):
                    t = self.var_tuple[var]
                    a = self.a_num[t][j - 1][k]
                    for s in steps:
                        for sign in (1, -1):
                            new_off = self.offsets[t][j - 1][k] + sign * s
                            if not 1 <= new_off <= self.cap or new_off in self.used[t][a]:
                                continue
                            gap, data = self._trial(t, j, k, new_off)
                            if gap > best:
                                self._accept(t, j, k, data)
                                best, improved = gap, True
                                break
                        if improved:
                            break
                    if improved:
                        break
                if improved:
                    break
            if not improved:
                break
        return best


def _build(lattice, h, basis, slot, den, D, Dp, a_num, offsets, phi0, eps, eps_prime, min_gap=float("nan")):
    return InnerTuple(lattice=lattice, h=h, basis=basis, slot=slot, denominator=den,
                      numerators=_assemble(den, D, Dp, a_num, offsets), phi0=phi0,
                      eps=eps, eps_prime=eps_prime, min_gap=min_gap)


def construct_phi_h(phi0: ReferenceTuple, h: Adversary, budget: ConstructionBudget,
                    basis: GammaBasis, *, eps_prime: float | None = None,
                    gap_rounds: int = 16, verify: bool = False) -> InnerTuple:
    """Inner tuple for one adversary with rational constants (single-adversary form)."""
    return _construct([phi0] * 1, [h], budget, basis, slots=[0], eps_prime=eps_prime,
                      gap_rounds=gap_rounds, verify=verify, shared=True)[0]


def construct_phi_multi(phi0s, hs: Sequence[Adversary], budget: ConstructionBudget,
                        basis: GammaBasis, *, q_zero_ok: bool = False,
                        eps_prime: float | None = None, gap_rounds: int = 16,
                        verify: bool = False) -> list[InnerTuple]:
    """Per-variable tuples whose constants are non-zero rational multiples of ``gamma_i``."""
    if q_zero_ok:
        raise ValueError("constants must be non-zero multiples of gamma_i")
    n = basis.n
    if isinstance(phi0s, ReferenceTuple):
        phi0s = [phi0s] * n
    if len(hs) != n or len(phi0s) != n:
        raise ValueError(f"need {n} adversaries and {n} reference tuples")
    return _construct(list(phi0s), list(hs), budget, basis, slots=list(range(n)),
                      eps_prime=eps_prime, gap_rounds=gap_rounds, verify=verify, shared=False)


def _construct(phi0s, hs, budget, basis, slots, eps_prime, gap_rounds, verify, shared):
    n = basis.n
    lattice = RedLattice(n, budget.N)
    if hs[0].m != lattice.m:
        raise ValueError(f"adversary acts on R^{hs[0].m}, need R^{lattice.m}")
    parts = []
    for phi0, h, slot in zip(phi0s, hs, slots):
        ep, _ = inner_requirements(phi0, h, budget.eps)
        if eps_prime is not None:
            ep = eps_prime
        if not ep > 0:
            raise BudgetExhaustedError("eps' = 0 leaves no room to snap constants")
        den, D, Dp, a_num, offsets = _snap_constants(lattice, phi0, h, budget, ep, basis.floats[slot])
        parts.append((phi0, h, slot, ep, den, D, Dp, a_num, offsets))

    var_tuple = [0] * n if shared else list(range(n))
    cap = parts[0][6] // (4 * parts[0][5])
    tuner = _GapTuner(lattice, basis.floats, var_tuple,
                      dens={t: p[4] for t, p in enumerate(parts)},
                      scales={t: (p[4] // p[5], p[4] // p[6]) for t, p in enumerate(parts)},
                      a_num={t: p[7] for t, p in enumerate(parts)},
                      offsets={t: p[8] for t, p in enumerate(parts)}, cap=cap)
    tuner.run(gap_rounds)
    tuples = [_build(lattice, p[1], basis, p[2], p[4], p[5], p[6], p[7], tuner.offsets[t],
                     p[0], budget.eps, p[3]) for t, p in enumerate(parts)]
    table = forced_table([tuples[var_tuple[v]] for v in range(n)])
    gap = table.min_gap()
    if not gap > 0:
        raise BudgetExhaustedError("forced positions coincide in floating point; raise D")
    if not table.exact_distinct():
        raise InvariantError("forced positions collide exactly")
    tuples = [replace(t, min_gap=gap) for t in tuples]
    for t in tuples:
        _check_constants(t)
    if verify:
        for t in tuples:
            verify_tuple(t)
    return tuples


def _check_constants(t: InnerTuple) -> None:
    flat = [k for row in t.numerators for k in row]
    if len(set(flat)) != len(flat):
        raise InvariantError("constants are not pairwise distinct")
    if 0 in flat:
        raise InvariantError("zero constant")


def _gn_vector(t: InnerTuple, s: int):
    """Exact ``phi_h(s/N)`` as GammaNumbers (lattice points lie in every rank's red set)."""
    x = Fraction(s, t.lattice.N)
    out = []
    for j in t.lattice.ranks:
        lo, hi = t.lattice.bounds(j)
        k = int(np.searchsorted(lo, s, side="right") - 1)
        assert lo[k] <= s <= hi[k], (x, j)
        out.append(t.constant_gn(j, k))
    return out


def _exact_preimage(h: Adversary, vec):
    """``h^-1`` of a vector of GammaNumbers for identity, rational translations and affine maps."""
    basis = vec[0].basis
    if isinstance(h, Identity):
        return list(vec)
    if isinstance(h, Translation) and h.exact:
        return [v - basis.rational(c) for v, c in zip(vec, h.vector)]
    if isinstance(h, AffineRational):
        out = []
        for row, a in zip(h.inverse, h.offset):
            acc = basis.rational(-a)
            for r, v in zip(row, vec):
                if r:
                    acc = acc + v.scale(r)
            out.append(acc)
        return out
    return None


def verify_tuple(t: InnerTuple, samples: int = 10_000, seed: int = 0) -> dict:
    """Re-check the range, closeness, constancy and distinctness conditions.

    Range is certified exactly at every lattice point for exact adversaries
    (the preimage is linear between lattice points); otherwise by sampling.
    """
    lat = t.lattice
    zero, one = t.basis.zero(), t.basis.rational(1)
    exact_range = t.h.exact and _exact_preimage(t.h, _gn_vector(t, 0)) is not None
    if exact_range:
        for s in range(lat.N + 1):
            for v in _exact_preimage(t.h, _gn_vector(t, s)):
                if gn_compare(v, zero) < 0 or gn_compare(v, one) > 0:
                    raise InvariantError(f"range condition fails at x={s}/{lat.N}")
    rng = np.random.default_rng(seed)
    x = np.concatenate([np.arange(lat.N + 1) / lat.N, (np.arange(lat.N) + 0.5) / lat.N,
                        rng.random(samples)])
    phi = eval_phi(t, x, tol=1e-13)
    if not exact_range and (phi.min() < -1e-9 or phi.max() > 1 + 1e-9):
        raise InvariantError("sampled range condition fails")
    dev = float(np.max(np.abs(phi - t.phi0(x))))
    if not dev < t.eps:
        raise InvariantError(f"|phi - phi0| = {dev:.3g} not below eps = {t.eps}")
    for j in lat.ranks:
        lo, hi = lat.bounds(j)
        xs = (lo[:, None] + (hi - lo)[:, None] * np.linspace(0, 1, 5)[None, :]) / lat.N
        vals = t.q_values(j, xs)
        if np.any(vals != vals[:, :1]):
            raise InvariantError(f"phi_h not constant on a rank-{j} red interval")
    _check_constants(t)
    return {"deviation": dev, "exact_range": exact_range}
