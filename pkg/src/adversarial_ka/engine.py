"""The approximator, one lemma step, and the two residual iterations.

Inner arguments are always computed from the stored ``h o phi`` values as
``w_1*c_1 + w_2*c_2 + ...`` accumulated left to right, the same order used for
forced positions, so a point in a red solid lands on its knot bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .adversary import Adversary, Identity
from .exact import GammaBasis, gamma_basis
from .inner import (ConstructionBudget, InnerTuple, ReferenceTuple, choose_resolution,
                    construct_phi_h, construct_phi_multi, eval_phi, forced_table, inner_requirements)
from .outer import OuterFunction, build_outer_arrays, eval_outer, lipschitz, sup_norm_outer

__all__ = [
    "Target",
    "RunReport",
    "LemmaReport",
    "ConstructionFailure",
    "DecayFailure",
    "as_tuples",
    "inner_arguments",
    "appx_eval",
    "appx_grid",
    "grid_axis",
    "sup_norm_grid",
    "solid_oscillation",
    "lemma_step",
    "iterate",
    "represent_multi",
    "default_grid",
]

DEFAULT_EPS = 0.04
MAX_LEVEL_N = 40960


class ConstructionFailure(RuntimeError):
    def __init__(self, message: str, witness=None, value: float | None = None):
        super().__init__(message)
        self.witness = witness
        self.value = value


class DecayFailure(RuntimeError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class Target:
    """A function on the unit cube, vectorized over the last axis."""

    name: str
    evaluator: Callable[[np.ndarray], np.ndarray]
    lip: float
    norm_hint: float
    n: int = 2

    def __call__(self, x):
        return self.evaluator(np.asarray(x, dtype=float))

    def normalized(self) -> "Target":
        if self.norm_hint == 0:
            raise ValueError("cannot normalize the zero function")
        if self.norm_hint == 1:
            return self
        c = self.norm_hint
        ev = self.evaluator
        return Target(self.name, lambda x: ev(x) / c, self.lip / c, 1.0, self.n)


def default_grid(n: int) -> int:
    return 512 if n == 2 else 64


def as_tuples(phi, n: int | None = None) -> list[InnerTuple]:
    if isinstance(phi, InnerTuple):
        return [phi] * phi.n
    phi = list(phi)
    if n is not None and len(phi) != n:
        raise ValueError(f"expected {n} inner tuples, got {len(phi)}")
    return phi


def _weights(tuples) -> tuple[float, ...]:
    return tuples[0].basis.floats


def inner_arguments(phi, x, through_adversary: bool = False) -> np.ndarray:
    """Hidden-layer sums at points ``x`` (shape ``(P, n)``), one column per rank.

    ``through_adversary`` recomputes them as ``sum_i w_i * h(phi(x_i))``, which
    is only useful as a cross-check of the stored values.
    """
    tuples = as_tuples(phi)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = tuples[0].n
    if x.shape[-1] != n:
        raise ValueError(f"points must have {n} coordinates")
    w = _weights(tuples)
    m = tuples[0].m
    out = np.empty(x.shape[:-1] + (m,))
    for j in range(1, m + 1):
        acc = None
        for i, t in enumerate(tuples):
            if through_adversary:
                v = t.h.apply(eval_phi(t, x[..., i]))[..., j - 1] / t.gamma
            else:
                v = t.q_values(j, _check_unit(x[..., i]))
            term = w[i] * v
            acc = term if acc is None else acc + term
        out[..., j - 1] = acc
    return out


def _check_unit(x):
    if x.size and (np.min(x) < 0 or np.max(x) > 1):
        from .inner import DomainError
        raise DomainError("points must lie in the unit cube")
    return x


def appx_eval(phi, g: OuterFunction, x) -> np.ndarray:
    """``sum_j g(w_1 * h_j(phi(x_1)) + ... + w_n * h_j(phi(x_n)))``."""
    args = inner_arguments(phi, x)
    return eval_outer(g, args).sum(axis=-1)


def grid_axis(G: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, G + 1)


def _rank_grid_args(tuples, j: int, xs: np.ndarray) -> np.ndarray:
    n = len(tuples)
    w = _weights(tuples)
    acc = None
    for i, t in enumerate(tuples):
        term = (w[i] * t.q_values(j, xs)).reshape([-1 if k == i else 1 for k in range(n)])
        acc = term if acc is None else acc + term
    return np.broadcast_to(acc, (len(xs),) * n)


def appx_grid(phi, g: OuterFunction, G: int) -> np.ndarray:
    """Approximator on the uniform ``(G+1)^n`` grid (separable inner sums)."""
    tuples = as_tuples(phi)
    xs = grid_axis(G)
    out = np.zeros((G + 1,) * tuples[0].n)
    for j in range(1, tuples[0].m + 1):
        out += eval_outer(g, _rank_grid_args(tuples, j, xs))
    return out


def _grid_points(n: int, G: int) -> np.ndarray:
    xs = grid_axis(G)
    return np.stack(np.meshgrid(*([xs] * n), indexing="ij"), axis=-1)


def sup_norm_grid(fn, M: int, n: int = 2) -> tuple[float, np.ndarray]:
    """Max of ``|fn|`` over the uniform ``(M+1)^n`` grid; a lower bound of the true sup."""
    if M < 2:
        raise ValueError("grid needs M >= 2")
    vals = np.abs(np.asarray(fn(_grid_points(n, M)), dtype=float))
    k = int(np.argmax(vals))
    idx = np.unravel_index(k, vals.shape)
    return float(vals[idx]), grid_axis(M)[list(idx)]


def _abs_max(arr: np.ndarray) -> tuple[float, tuple]:
    a = np.abs(arr)
    k = int(np.argmax(a))
    idx = np.unravel_index(k, a.shape)
    return float(a[idx]), idx


def _solid_ids(lattice, rank: int, xs: np.ndarray) -> np.ndarray:
    """Flat solid index of every grid point for one rank, -1 outside the rank's red solids."""
    n = lattice.n
    loc = lattice.locate(rank, xs)
    K = lattice.count(rank)
    grids = np.meshgrid(*([loc] * n), indexing="ij")
    ids = np.zeros(grids[0].shape, dtype=np.int64)
    valid = np.ones(grids[0].shape, dtype=bool)
    for gi in grids:
        ids = ids * K + np.maximum(gi, 0)
        valid &= gi >= 0
    return np.where(valid, ids, -1)


def solid_oscillation(lattice, values: np.ndarray, G: int) -> float:
    """Largest spread of grid values inside a single red solid, over all ranks."""
    xs = grid_axis(G)
    worst = 0.0
    flat = values.reshape(-1)
    for j in lattice.ranks:
        ids = _solid_ids(lattice, j, xs).reshape(-1)
        keep = ids >= 0
        ids, v = ids[keep], flat[keep]
        if ids.size == 0:
            continue
        order = np.argsort(ids, kind="stable")
        ids, v = ids[order], v[order]
        starts = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]])
        spread = np.maximum.reduceat(v, starts) - np.minimum.reduceat(v, starts)
        worst = max(worst, float(spread.max()))
    return worst


def _representatives(lattice, table, G: int | None):
    """Points at which forced values are sampled, one per red solid.

    Midpoints by default.  With ``G`` the grid point nearest the midpoint is
    used whenever the solid contains one, and ``on_grid`` gives its index.
    """
    n = lattice.n
    pts = np.empty((len(table), n))
    grid_idx = np.full((len(table), n), -1, dtype=np.int64)
    for j in lattice.ranks:
        sel = table.rank == j
        lo, hi = lattice.bounds(j)
        mids = (lo + hi) / (2 * lattice.N)
        if G is not None:
            k = np.rint(mids * G).astype(np.int64)
            inside = (k * lattice.N >= lo * G) & (k * lattice.N <= hi * G)
            snap = np.where(inside, k, -1)
            coord = np.where(inside, k / G, mids)
        else:
            snap = np.full(len(mids), -1)
            coord = mids
        idx = table.idx[sel]
        pts[sel] = coord[idx]
        grid_idx[sel] = snap[idx]
    on_grid = np.all(grid_idx >= 0, axis=1)
    return pts, grid_idx, on_grid


@dataclass
class LemmaReport:
    N: int
    grid: int
    grid_error: float
    witness: tuple
    bound: float
    g_norm: float
    g_lip: float
    knots: int
    min_gap: float

    def to_json(self) -> dict:
        return {
            "N": self.N, "grid": self.grid, "grid_error": self.grid_error,
            "witness": [float(v) for v in self.witness], "bound": self.bound,
            "g_norm": self.g_norm, "g_lip": self.g_lip, "knots": self.knots,
            "min_gap": self.min_gap,
        }


def _forced_outer(tuples, values_at, scale: float, clip: float, G: int | None, grid_values=None):
    """Outer function with values ``clip(r(l), -clip, clip) / (n+1)`` at every forced position."""
    lattice = tuples[0].lattice
    n = lattice.n
    table = forced_table(tuples)
    pts, gidx, on_grid = _representatives(lattice, table, G)
    vals = np.empty(len(table))
    if grid_values is not None and on_grid.any():
        vals[on_grid] = grid_values[tuple(gidx[on_grid].T)]
    rest = ~on_grid if grid_values is not None else np.ones(len(table), dtype=bool)
    if rest.any():
        vals[rest] = values_at(pts[rest])
    vals = np.clip(vals, -clip, clip) * scale / (n + 1)
    g = build_outer_arrays(table.pos, vals, clip * scale / (n + 1))
    return g, table


def lemma_step(f: Target, phi, alpha: float, basis: GammaBasis | None = None, *,
               grid: int | None = None, check: bool = True) -> tuple[OuterFunction, LemmaReport]:
    """Outer function forcing ``f(l)/(n+1)`` at the position of every red solid.

    Raises ``ConstructionFailure`` with the witness grid point if the grid error
    is not below ``(n/(n+1) + alpha) * |f|``.
    """
    tuples = as_tuples(phi, f.n)
    n = f.n
    G = grid or default_grid(n)
    norm = f.norm_hint
    unit = f.normalized() if norm not in (0, 1) else f
    g, table = _forced_outer(tuples, unit, norm if norm else 1.0, 1.0, None)
    err_grid = unit(_grid_points(n, G)) * (norm or 1.0) - appx_grid(tuples, g, G)
    err, idx = _abs_max(err_grid)
    witness = tuple(grid_axis(G)[list(idx)])
    bound = (n / (n + 1) + alpha) * (norm or 1.0)
    report = LemmaReport(N=tuples[0].lattice.N, grid=G, grid_error=err, witness=witness,
                         bound=bound, g_norm=sup_norm_outer(g), g_lip=lipschitz(g),
                         knots=len(g), min_gap=table.min_gap())
    if check and not err < bound:
        raise ConstructionFailure(f"grid error {err:.6g} not below {bound:.6g}", witness, err)
    return g, report


@dataclass
class RunReport:
    mode: str
    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    COLUMNS = ("m", "N", "residual_norm", "g_norm", "g_lip", "knots", "min_gap",
               "lambda_achieved", "solid_variation_flag", "offgrid_residual_norm")

    def to_json(self) -> dict:
        return {"schema": 1, "mode": self.mode, "config": self.config, "iterations": self.rows}

    def to_csv_rows(self) -> list[list]:
        return [[row.get(c, "") for c in self.COLUMNS] for row in self.rows]


def _builder_single(h: Adversary, basis: GammaBasis, eps: float, gap_rounds: int):
    phi0 = ReferenceTuple(2 * basis.n + 1)

    def build(N):
        t = construct_phi_h(phi0, h, ConstructionBudget.default(eps, N), basis, gap_rounds=gap_rounds)
        return [t] * basis.n

    return build, inner_requirements(phi0, h, eps)


def _builder_multi(hs, basis, eps, gap_rounds):
    phi0 = ReferenceTuple(2 * basis.n + 1)
    reqs = [inner_requirements(phi0, h, eps) for h in hs]

    def build(N):
        return construct_phi_multi(phi0, hs, ConstructionBudget.default(eps, N), basis,
                                   gap_rounds=gap_rounds)

    return build, (min(r[0] for r in reqs), max(r[1] for r in reqs))


def _initial_N(f: Target, alpha: float, reqs, n: int) -> int:
    eps_prime, lip = reqs
    return choose_resolution(f.lip, alpha, lip, eps_prime / 4, n)


def iterate(f: Target, h: Adversary | None, M: int, mode: str = "adaptive-cascade",
            alpha: float = 1 / 15, basis: GammaBasis | None = None, *, grid: int | None = None,
            eps: float = DEFAULT_EPS, N: int | None = None, seed: int = 0,
            offgrid_samples: int = 20_000, gap_rounds: int = 16, _builder=None):
    """Residual iteration ``r_m = f - sum_{k<=m} Appx(g_k)``.

    ``theorem-faithful`` keeps one inner tuple and returns ``(tuples, g_total)``.
    ``adaptive-cascade`` rebuilds the inner tuple per level at a resolution
    where the grid residual varies by less than ``alpha * |r|`` on every red
    solid, and returns the list of ``(tuples, g_m)`` levels.
    """
    if M < 0:
        raise ValueError("M must be non-negative")
    if mode not in ("theorem-faithful", "adaptive-cascade"):
        raise ValueError(f"unknown mode {mode!r}")
    n = f.n
    basis = basis or gamma_basis(n)
    G = grid or default_grid(n)
    f = f.normalized() if f.norm_hint not in (0, 1) else f
    if _builder is None:
        _builder = _builder_single(h or Identity(2 * n + 1), basis, eps, gap_rounds)
    build, reqs = _builder
    N0 = N or _initial_N(f, alpha, reqs, n)
    lam_bound = n / (n + 1) + 2 * alpha

    pts = _grid_points(n, G)
    resid = f(pts)
    rng = np.random.default_rng(seed)
    off = rng.random((offgrid_samples, n))
    resid_off = f(off)
    report = RunReport(mode=mode, config={"alpha": alpha, "M": M, "grid": G, "eps": eps,
                                          "target": f.name, "n": n, "seed": seed})
    R, _ = _abs_max(resid)
    report.rows.append({"m": 0, "N": 0, "residual_norm": R, "g_norm": 0.0, "g_lip": 0.0,
                        "knots": 0, "min_gap": None, "lambda_achieved": None,
                        "solid_variation_flag": False,
                        "offgrid_residual_norm": float(np.max(np.abs(resid_off)))})
    levels = []
    tuples = build(N0) if M > 0 else None
    totals = None
    cur_N = N0

    def residual_at(x):
        out = f(x)
        for tp, gl in levels:
            out = out - appx_eval(tp, gl, x)
        return out

    for m in range(1, M + 1):
        if R == 0:
            break
        if mode == "adaptive-cascade" and m > 1:
            while True:
                osc = solid_oscillation(tuples[0].lattice, resid, G)
                if osc < alpha * R:
                    break
                if cur_N * 2 > MAX_LEVEL_N:
                    raise DecayFailure("resolution cap reached before the residual settled",
                                       {"m": m, "N": cur_N, "oscillation": osc, "residual": R})
                cur_N *= 2
                tuples = build(cur_N)
        osc = solid_oscillation(tuples[0].lattice, resid, G)
        flag = bool(osc >= alpha * R)
        if mode == "adaptive-cascade":
            g, table = _forced_outer(tuples, residual_at, 1.0, R, G, grid_values=resid)
        else:
            g, table = _forced_outer(tuples, _theorem_residual(f, tuples, totals), 1.0, R, None)
        new_resid = resid - appx_grid(tuples, g, G)
        new_off = resid_off - appx_eval(tuples, g, off)
        R_new, _ = _abs_max(new_resid)
        lam = R_new / R
        row = {"m": m, "N": tuples[0].lattice.N, "residual_norm": R_new, "g_norm": sup_norm_outer(g),
               "g_lip": lipschitz(g), "knots": len(g), "min_gap": table.min_gap(),
               "lambda_achieved": lam, "solid_variation_flag": flag,
               "offgrid_residual_norm": float(np.max(np.abs(new_off)))}
        report.rows.append(row)
        if mode == "adaptive-cascade" and not lam <= lam_bound:
            raise DecayFailure(f"level {m} reached ratio {lam:.4f} > {lam_bound:.4f}",
                               {"row": row, "oscillation": osc})
        levels.append((tuples, g))
        totals = g if totals is None else _add_same_knots(totals, g)
        resid, resid_off, R = new_resid, new_off, R_new

    if mode == "theorem-faithful":
        if totals is None:
            totals = OuterFunction(np.empty(0), np.empty(0), 0.0)
        return (tuples, totals), report
    return levels, report


def _theorem_residual(f, tuples, totals):
    def values_at(x):
        out = f(x)
        if totals is not None:
            out = out - appx_eval(tuples, totals, x)
        return out
    return values_at


def _add_same_knots(a: OuterFunction, b: OuterFunction) -> OuterFunction:
    if len(a) == len(b) and np.array_equal(a.positions, b.positions):
        return OuterFunction(a.positions, a.values + b.values, a.bound + b.bound)
    from .outer import sum_outer
    return sum_outer([a, b])


def cascade_eval(levels, x) -> np.ndarray:
    """Summed approximator of an adaptive cascade at points ``x``."""
    x = np.atleast_2d(x)
    out = np.zeros(x.shape[:-1])
    for tuples, g in levels:
        out = out + appx_eval(tuples, g, x)
    return out


def represent_multi(f: Target, hs: Sequence[Adversary], M: int, alpha: float = 1 / 15,
                    basis: GammaBasis | None = None, mode: str = "adaptive-cascade", **kw):
    """``iterate`` with one adversary per input variable."""
    basis = basis or gamma_basis(f.n)
    if len(hs) != f.n:
        raise ValueError(f"need {f.n} adversaries, got {len(hs)}")
    builder = _builder_multi(list(hs), basis, kw.pop("eps", DEFAULT_EPS), kw.pop("gap_rounds", 16))
    return iterate(f, None, M, mode, alpha, basis, _builder=builder, **kw)


def lemma_multi(f: Target, hs: Sequence[Adversary], alpha: float = 1 / 15,
                basis: GammaBasis | None = None, *, eps: float = DEFAULT_EPS, grid: int | None = None,
                N: int | None = None, check: bool = True):
    """Single lemma step with per-variable adversaries; returns ``(tuples, g, report)``."""
    basis = basis or gamma_basis(f.n)
    if len(hs) != f.n:
        raise ValueError(f"need {f.n} adversaries, got {len(hs)}")
    unit = f.normalized() if f.norm_hint not in (0, 1) else f
    build, reqs = _builder_multi(list(hs), basis, eps, 16)
    tuples = build(N or _initial_N(unit, alpha, reqs, f.n))
    g, rep = lemma_step(f, tuples, alpha, basis, grid=grid, check=check)
    return tuples, g, rep


def lemma_single(f: Target, h: Adversary, alpha: float = 1 / 15, basis: GammaBasis | None = None,
                 *, eps: float = DEFAULT_EPS, grid: int | None = None, N: int | None = None,
                 check: bool = True):
    """Build the inner tuple for ``(f, h)`` and run one lemma step; returns ``(tuple, g, report)``."""
    basis = basis or gamma_basis(f.n)
    unit = f.normalized() if f.norm_hint not in (0, 1) else f
    build, reqs = _builder_single(h, basis, eps, 16)
    tuples = build(N or _initial_N(unit, alpha, reqs, f.n))
    g, rep = lemma_step(f, tuples, alpha, basis, grid=grid, check=check)
    return tuples[0], g, rep
