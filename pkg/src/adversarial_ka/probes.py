"""Numerical experiments around adversaries acting on the hidden layer.

* ``corner_obstruction``: best uniform fit of a 2x2 table by ``u_i + v_j``.
* ``affine_commute_check``: an affine map can be moved past the weighted sum.
* ``equicontinuity_probe``: translating the hidden layer makes forced
  positions drift into each other, and the Lipschitz constant of the outer
  function blows up along the way.  This shows the mechanism; it settles nothing
  about whether a uniform modulus exists.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
from scipy.optimize import linprog

from .adversary import Adversary, AffineRational, Identity
from .engine import Target, appx_grid, default_grid, grid_axis, _grid_points, _representatives, lemma_single
from .inner import InnerTuple, eval_phi, forced_table
from .outer import OuterFunction, build_outer_arrays, lipschitz

__all__ = [
    "ProbeReport",
    "corner_obstruction",
    "corner_obstruction_lp",
    "affine_commute_check",
    "equicontinuity_probe",
    "crossing_path",
    "thread_count",
]

_TIE = 1e-13
_EXACT_DPS_BITS = 256


@dataclass
class ProbeReport:
    name: str
    params: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    verdict: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"schema": 1, "probe": self.name, "params": self.params,
                "rows": self.rows, "verdict": self.verdict}

    def to_csv(self, columns=None) -> str:
        columns = columns or (list(self.rows[0]) if self.rows else [])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in self.rows:
            w.writerow([row.get(c, "") for c in columns])
        return buf.getvalue()


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("KA_THREADS", "1")))
    except ValueError:
        return 1


# --- corner obstruction --------------------------------------------------

def corner_obstruction(values) -> float:
    """``min_{u,v} max_{i,j} |f_ij - u_i - v_j|`` for a 2x2 table (row-major or nested).

    Every additive table has zero alternating sum, and the alternating sum
    changes by at most 4 times the sup error, so the optimum is ``|alt|/4``.
    """
    f = np.asarray(values, dtype=float).reshape(2, 2)
    return abs(f[0, 0] - f[0, 1] - f[1, 0] + f[1, 1]) / 4


def corner_obstruction_lp(values) -> float:
    """The same optimum by linear programming over ``(u1, u2, v1, v2, t)``."""
    f = np.asarray(values, dtype=float).reshape(2, 2)
    A, b = [], []
    for i in range(2):
        for j in range(2):
            row = np.zeros(5)
            row[i] = 1
            row[2 + j] = 1
            A.append(np.r_[-row[:4], -1])
            b.append(-f[i, j])
            A.append(np.r_[row[:4], -1])
            b.append(f[i, j])
    res = linprog(c=[0, 0, 0, 0, 1], A_ub=np.array(A), b_ub=np.array(b),
                  bounds=[(None, None)] * 4 + [(0, None)], method="highs")
    if not res.success:  # pragma: no cover - bounded feasible LP
        raise RuntimeError(res.message)
    return float(res.fun)


# --- affine commuting ------------------------------------------------------

def _interp_ld(t: np.ndarray, xp: np.ndarray, fp: np.ndarray) -> np.ndarray:
    """Piecewise-linear interpolation in extended precision with constant extension."""
    xp = xp.astype(np.longdouble)
    fp = fp.astype(np.longdouble)
    k = np.clip(np.searchsorted(xp, t, side="right") - 1, 0, len(xp) - 2)
    x0, x1 = xp[k], xp[k + 1]
    y0, y1 = fp[k], fp[k + 1]
    out = y0 + (y1 - y0) * ((t - x0) / (x1 - x0))
    out = np.where(t <= xp[0], fp[0], out)
    return np.where(t >= xp[-1], fp[-1], out)


def affine_commute_check(h: Adversary, phi: InnerTuple, g: OuterFunction, samples: int = 1000,
                         seed: int = 0) -> float:
    """Largest gap between feeding ``g`` the per-neuron and the summed form of the hidden layer.

    The per-neuron form is ``sum_i w_i * h(phi(x_i))``.  For affine ``h(p) = A(p + a)``
    the summed form is ``A(sum_i w_i phi(x_i)) + (sum_i w_i) A a``; for any other
    map it is the naive ``h(sum_i w_i phi(x_i))``, which is where commuting fails.
    Both sides are evaluated in extended precision from the same ``phi`` values.
    """
    rng = np.random.default_rng(seed)
    n = phi.n
    w = np.array(phi.basis.floats, dtype=np.longdouble)
    x = rng.random((samples, n))
    inner = np.stack([eval_phi(phi, x[:, i]) for i in range(n)], axis=1).astype(np.longdouble)
    summed = np.einsum("i,pij->pj", w, inner)
    if isinstance(h, AffineRational):
        A = np.array([[float(v) for v in row] for row in h.matrix], dtype=np.longdouble)
        a = np.array([float(v) for v in h.offset], dtype=np.longdouble)
        per_neuron = np.einsum("i,pij->pj", w, (inner + a) @ A.T)
        post = summed @ A.T + w.sum() * (A @ a)
    else:
        per_neuron = np.einsum("i,pij->pj", w, h.apply(inner.astype(float)).astype(np.longdouble))
        post = h.apply(summed.astype(float)).astype(np.longdouble)
    if len(g) < 2:
        return 0.0
    pre_val = _interp_ld(per_neuron, g.positions, g.values).sum(axis=1)
    post_val = _interp_ld(post, g.positions, g.values).sum(axis=1)
    return float(np.max(np.abs(pre_val - post_val)))


# --- equi-continuity ----------------------------------------------------------

@dataclass
class _Base:
    phi: InnerTuple
    g0: OuterFunction
    pos: np.ndarray  # forced positions at t = 0
    vals: np.ndarray
    rank: np.ndarray
    shift_scale: float  # sum of the multipliers
    table: object
    by_rank: list = field(default_factory=list)  # indices of each rank, sorted by position

    def __post_init__(self):
        for j in range(1, int(self.rank.max()) + 1):
            idx = np.flatnonzero(self.rank == j)
            self.by_rank.append(idx[np.argsort(self.pos[idx], kind="stable")])


def _base(f: Target, alpha: float, N: int | None) -> _Base:
    phi, g0, _ = lemma_single(f, Identity(2 * f.n + 1), alpha, N=N)
    table = forced_table([phi] * f.n)
    pts, _, _ = _representatives(phi.lattice, table, None)
    unit = f.normalized() if f.norm_hint not in (0, 1) else f
    vals = unit(pts) / (f.n + 1)
    return _Base(phi, g0, table.pos, vals, table.rank, float(sum(phi.basis.floats)), table)


def _shifted(base: _Base, direction, t: float) -> np.ndarray:
    d = np.asarray(direction, dtype=float)
    return base.pos + base.shift_scale * t * d[base.rank - 1]


def _earliest_crossing(base: _Base, direction, threshold: float, lookahead: int = 16):
    """Earliest ``t > 0`` at which two forced positions of different ranks whose
    values differ by at least ``threshold`` meet, with the pair's indices."""
    d = np.asarray(direction, dtype=float)
    m = len(base.by_rank)
    by_rank = base.by_rank
    best = (math.inf, None, None)
    for j in range(m):
        for k in range(m):
            rate = base.shift_scale * (d[j] - d[k])
            if j == k or rate <= 0:
                continue
            # rank j moves right relative to rank k: pairs with p_k > p_j close at ``rate``
            a_idx, b_idx = by_rank[j], by_rank[k]
            pb = base.pos[b_idx]
            start = np.searchsorted(pb, base.pos[a_idx], side="right")
            for off in range(lookahead):
                cand = start + off
                ok = cand < len(pb)
                if not ok.any():
                    break
                ai = a_idx[ok]
                bi = b_idx[cand[ok]]
                elig = np.abs(base.vals[ai] - base.vals[bi]) >= threshold
                if not elig.any():
                    continue
                tc = (base.pos[bi[elig]] - base.pos[ai[elig]]) / rate
                q = int(np.argmin(tc))
                if tc[q] < best[0]:
                    best = (float(tc[q]), int(ai[elig][q]), int(bi[elig][q]))
    return best


def _candidate_directions(m: int, seed: int, count: int = 32) -> list[np.ndarray]:
    dirs = [np.eye(m)[j] for j in range(m)]
    rng = np.random.default_rng(seed)
    while len(dirs) < count:
        v = rng.normal(size=m)
        dirs.append(v / np.linalg.norm(v))
    return dirs


def crossing_path(base: _Base, seed: int = 0, shrink: float = 1e-3, points: int = 101):
    """Direction and ``t`` grid on which an eligible pair gets within ``shrink`` x base gap.

    Each of the 32 candidate directions gets its own grid ``linspace(0, 2 t*, points)``
    with ``t*`` just before its earliest eligible crossing; the direction whose
    grid reaches the smallest forced gap wins.
    """
    n = base.phi.n
    threshold = 1 / (2 * (n + 1))
    g0 = float(np.min(np.diff(np.sort(base.pos))))
    best = None
    for d in _candidate_directions(base.phi.m, seed):
        tc, a, b = _earliest_crossing(base, d, threshold)
        if not math.isfinite(tc):
            continue
        rate = base.shift_scale * abs(d[base.rank[a] - 1] - d[base.rank[b] - 1])
        t_star = tc - shrink * g0 / rate
        grid = np.linspace(0.0, 2 * t_star, points)
        achieved = min(float(np.min(np.diff(np.sort(_shifted(base, d, t))))) for t in grid)
        if best is None or achieved < best[0]:
            best = (achieved, d, grid, t_star, (a, b))
    if best is None:
        raise RuntimeError("no candidate direction brings an eligible pair together")
    return best[1], best[2], best[3], best[4]


def _exact_position(base: _Base, index: int, direction, t: float):
    """Position of one forced point at 256 bits: rational coefficients plus the float shift."""
    with mpmath.workprec(_EXACT_DPS_BITS):
        j = int(base.rank[index])
        ks = base.table.idx[index]
        phi = base.phi
        total = mpmath.mpf(0)
        for i, k in enumerate(ks):
            q = phi.constant(j, int(k))
            total += mpmath.sqrt(phi.basis.radicands[i]) * mpmath.mpf(q.numerator) / q.denominator
        shift = mpmath.mpf(base.shift_scale) * mpmath.mpf(t) * mpmath.mpf(float(direction[j - 1]))
        return total + shift


def _crossings(base: _Base, direction, t: float) -> int:
    """Number of pairs (different ranks) whose order differs from ``t = 0``."""
    d = np.asarray(direction, dtype=float)
    m = len(base.by_rank)
    sorted_pos = [base.pos[idx] for idx in base.by_rank]
    total = 0
    for j in range(m):
        for k in range(m):
            delta = base.shift_scale * t * (d[j] - d[k])
            if j == k or delta <= 0:
                continue
            a, b = sorted_pos[j], sorted_pos[k]
            lo = np.searchsorted(b, a, side="right")
            hi = np.searchsorted(b, a + delta, side="left")
            total += int(np.sum(hi - lo))
            # settle near ties at the upper end exactly
            near = np.searchsorted(b, a + delta - _TIE, side="left")
            far = np.searchsorted(b, a + delta + _TIE, side="right")
            for ia in np.flatnonzero(far > near):
                for ib in range(near[ia], far[ia]):
                    pa = _exact_position(base, base.by_rank[j][ia], d, t)
                    pb = _exact_position(base, base.by_rank[k][ib], d, t)
                    crossed = pb < pa
                    counted = ib < hi[ia]
                    total += int(crossed) - int(counted)
    return total


def _grid_error_shifted(base: _Base, f_grid: np.ndarray, g: OuterFunction, direction, t: float, G: int):
    tuples = [base.phi] * base.phi.n
    from .engine import _rank_grid_args
    xs = grid_axis(G)
    out = np.zeros_like(f_grid)
    d = np.asarray(direction, dtype=float)
    for j in base.phi.lattice.ranks:
        args = _rank_grid_args(tuples, j, xs) + base.shift_scale * t * d[j - 1]
        out += np.interp(args, g.positions, g.values)
    return float(np.max(np.abs(f_grid - out)))


def _adjacent_ratio(pos: np.ndarray, vals: np.ndarray) -> float:
    o = np.argsort(pos, kind="stable")
    dp = np.diff(pos[o])
    dv = np.abs(np.diff(vals[o]))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(dp > 0, dv / dp, np.where(dv > 0, np.inf, 0.0))
    return float(np.max(r)) if r.size else 0.0


def equicontinuity_probe(f: Target, direction=None, t_grid=None, base_phi: InnerTuple | None = None,
                         alpha: float = 1 / 15, *, grid: int | None = None, seed: int = 0,
                         N: int | None = None) -> ProbeReport:
    """Translate the hidden layer along ``t * direction`` and rebuild the single outer function.

    Without ``direction``/``t_grid`` the built-in crossing path is used.  Rows
    record the forced min gap, ``Lip(g_t)``, the grid error of ``g_t``, the grid
    error of reusing ``g_0``, crossings relative to ``t = 0`` and collisions.
    """
    base = _base(f, alpha, N if base_phi is None else base_phi.lattice.N)
    if base_phi is not None and not isinstance(base_phi.h, Identity):
        raise ValueError("the probe starts from an inner tuple built without adversary")
    m = base.phi.m
    chosen = None
    if direction is None or t_grid is None:
        direction, t_grid, t_star, pair = crossing_path(base, seed)
        chosen = {"t_star": t_star, "pair": [int(pair[0]), int(pair[1])]}
    direction = np.asarray(direction, dtype=float)
    if direction.shape != (m,):
        raise ValueError(f"direction must have {m} entries")
    G = grid or default_grid(f.n)
    unit = f.normalized() if f.norm_hint not in (0, 1) else f
    f_grid = unit(_grid_points(f.n, G))
    base_gap = float(np.min(np.diff(np.sort(base.pos))))
    base_lip = lipschitz(base.g0)

    def row(t):
        pos = _shifted(base, direction, float(t))
        gap = float(np.min(np.diff(np.sort(pos))))
        ratio = _adjacent_ratio(pos, base.vals)
        rec = {"t": float(t), "min_gap": gap, "adjacent_ratio": ratio,
               "crossings": _crossings(base, direction, float(t)),
               "reuse_error": _grid_error_shifted(base, f_grid, base.g0, direction, float(t), G)}
        try:
            g = build_outer_arrays(pos, base.vals, 1 / (f.n + 1))
        except ValueError:
            rec.update(lip=math.inf, grid_error=None, collision=True, consistent=True)
            return rec
        lip = lipschitz(g)
        rec.update(lip=lip, grid_error=_grid_error_shifted(base, f_grid, g, direction, float(t), G),
                   collision=False, consistent=bool(lip >= ratio * (1 - 1e-12)))
        return rec

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        rows = list(pool.map(row, list(t_grid)))

    lips = [r["lip"] for r in rows]
    gaps = [r["min_gap"] for r in rows]
    verdict = {
        "base_min_gap": base_gap,
        "base_lip": base_lip,
        "min_gap_ratio": min(gaps) / base_gap,
        "lip_ratio": max(lips) / base_lip if base_lip else math.inf,
        "consistency_holds": all(r["consistent"] for r in rows),
        "collisions": sum(r["collision"] for r in rows),
        "mechanism_observed": bool(min(gaps) < 0.01 * base_gap and max(lips) >= 10 * base_lip),
    }
    params = {"target": f.name, "alpha": alpha, "N": base.phi.lattice.N, "grid": G, "seed": seed,
              "direction": [float(v) for v in direction], "points": len(rows)}
    if chosen:
        params.update(chosen)
    return ProbeReport("equicontinuity", params, rows, verdict)
