"""Named targets on the unit square/cube with Lipschitz constants in the sup metric.

Every recorded constant is re-checked by ``check_lipschitz`` (finite differences
on a dense grid) in the test suite.
"""

from __future__ import annotations

import math

import numpy as np

from .engine import Target

__all__ = ["catalog", "make_target", "check_lipschitz", "TARGET_NAMES"]

TARGET_NAMES = ("xy", "affine", "trig", "gaussian", "constant", "max", "random-pl")

_BUMP_SIGMA = 0.25


def _xy(x):
    return np.prod(x, axis=-1)


def _affine(x):
    return x.mean(axis=-1)


def _trig(x):
    out = np.sin(2 * np.pi * x[..., 0])
    for i in range(1, x.shape[-1]):
        out = out * np.cos(2 * np.pi * x[..., i])
    return out


def _gaussian(x):
    return np.exp(-np.sum((x - 0.5) ** 2, axis=-1) / (2 * _BUMP_SIGMA ** 2))


def _constant(x):
    return np.ones(x.shape[:-1])


def _max(x):
    return x.max(axis=-1)


def _random_pl(n: int, seed: int):
    """Multilinear interpolation of seeded corner values on a 4^n cell grid."""
    cells = 4
    rng = np.random.default_rng(seed)
    corners = rng.uniform(-1, 1, size=(cells + 1,) * n)
    corners[(0,) * n] = 1.0  # pins the sup norm to 1

    def ev(x):
        u = np.clip(x, 0, 1) * cells
        k = np.minimum(np.floor(u).astype(int), cells - 1)
        s = u - k
        out = np.zeros(x.shape[:-1])
        for bits in np.ndindex(*([2] * n)):
            w = np.ones(x.shape[:-1])
            idx = []
            for i, b in enumerate(bits):
                w = w * (s[..., i] if b else 1 - s[..., i])
                idx.append(k[..., i] + b)
            out = out + w * corners[tuple(idx)]
        return out

    # Multilinear on each cell: the sup-metric slope is the largest sum of
    # per-axis edge slopes, attained at some cell corner.
    lip = 0.0
    for cell in np.ndindex(*([cells] * n)):
        for corner in np.ndindex(*([2] * n)):
            base = tuple(c + b for c, b in zip(cell, corner))
            total = 0.0
            for i in range(n):
                lo = list(base)
                hi = list(base)
                lo[i] = cell[i]
                hi[i] = cell[i] + 1
                total += abs(corners[tuple(hi)] - corners[tuple(lo)]) * cells
            lip = max(lip, total)
    norm = float(np.max(np.abs(corners)))
    return ev, lip, norm


def make_target(name: str, n: int = 2, seed: int = 0) -> Target:
    if name == "xy":
        return Target("xy", _xy, float(n), 1.0, n)
    if name == "affine":
        return Target("affine", _affine, 1.0, 1.0, n)
    if name == "trig":
        return Target("trig", _trig, 2 * math.pi, 1.0, n)
    if name == "gaussian":
        # sup of |grad| in the l1 sense along the diagonal: sqrt(n)*r/s^2*exp(-r^2/2s^2)
        # maximised at r = s, giving sqrt(n) * exp(-1/2) / s.
        return Target("gaussian", _gaussian, math.sqrt(n) * math.exp(-0.5) / _BUMP_SIGMA, 1.0, n)
    if name == "constant":
        return Target("constant", _constant, 0.0, 1.0, n)
    if name == "max":
        return Target("max", _max, 1.0, 1.0, n)
    if name == "random-pl":
        ev, lip, norm = _random_pl(n, seed)
        return Target("random-pl", ev, lip, norm, n)
    raise KeyError(f"unknown target {name!r}; choose from {', '.join(TARGET_NAMES)}")


def catalog(n: int = 2, seed: int = 0) -> list[Target]:
    return [make_target(name, n, seed) for name in TARGET_NAMES]


def check_lipschitz(target: Target, points: int = 201, seed: int = 0) -> float:
    """Largest finite-difference slope ``|f(x)-f(y)| / |x-y|_inf`` seen on a grid plus random pairs."""
    n = target.n
    xs = np.linspace(0, 1, points if n == 2 else 41)
    grid = np.stack(np.meshgrid(*([xs] * n), indexing="ij"), axis=-1)
    vals = target(grid)
    h = xs[1] - xs[0]
    best = 0.0
    # Steps along every sign pattern of the diagonal cover the sup-metric direction.
    for signs in np.ndindex(*([3] * n)):
        step = np.array(signs) - 1
        if not step.any():
            continue
        sl_a = tuple(slice(max(0, -s), len(xs) - max(0, s)) for s in step)
        sl_b = tuple(slice(max(0, s), len(xs) - max(0, -s)) for s in step)
        best = max(best, float(np.max(np.abs(vals[sl_b] - vals[sl_a]))) / h)
    rng = np.random.default_rng(seed)
    a = rng.random((20000, n))
    b = np.clip(a + rng.uniform(-1e-3, 1e-3, a.shape), 0, 1)
    d = np.max(np.abs(a - b), axis=-1)
    ok = d > 0
    best = max(best, float(np.max(np.abs(target(a) - target(b))[ok] / d[ok])))
    return best
