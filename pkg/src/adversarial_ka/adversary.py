"""Invertible transforms of R^m acting on the hidden layer.

Affine maps follow the convention ``A_j(x) = sum_i A[j][i] * (x_i + a_i)``: the
offset is added before the matrix.  Affine and rational translations invert
exactly over the rationals; coordinatewise monotone polynomials invert by
bracketed bisection to a caller-supplied tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .exact import as_fraction

__all__ = [
    "Adversary",
    "Identity",
    "AffineRational",
    "Translation",
    "CoordMonotonePoly",
    "Composition",
    "RationalAffineFamily",
    "TranslationPath",
    "AdversaryError",
    "InversionError",
    "modulus_of_inverse",
    "random_rational_affine",
    "sturm_root_count",
    "adversary_from_spec",
]


class AdversaryError(ValueError):
    pass


class InversionError(ArithmeticError):
    pass


def _box(box, m):
    lo, hi = box
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (m,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (m,)).copy()
    return lo, hi


def _frac_str(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


class Adversary:
    """Base class.  Subclasses are frozen dataclasses with an ``m`` attribute."""

    kind = "abstract"
    exact = False

    def apply(self, p):
        raise NotImplementedError

    def invert(self, q, tol: float = 1e-12):
        raise NotImplementedError

    def apply_exact(self, p: Sequence) -> tuple[Fraction, ...]:
        raise AdversaryError(f"{self.kind} has no exact rational form")

    def invert_exact(self, q: Sequence) -> tuple[Fraction, ...]:
        raise AdversaryError(f"{self.kind} has no exact rational inverse")

    def lipschitz(self, box) -> float:
        """Upper bound of the sup-norm Lipschitz constant of ``self`` on ``box``."""
        raise NotImplementedError

    def image_box(self, box):
        """A box containing ``self(box)``."""
        raise NotImplementedError

    def to_spec(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Identity(Adversary):
    m: int
    kind = "identity"
    exact = True

    def apply(self, p):
        return np.array(p, dtype=float)

    def invert(self, q, tol=1e-12):
        return np.array(q, dtype=float)

    def apply_exact(self, p):
        return tuple(as_fraction(x) for x in p)

    invert_exact = apply_exact

    def lipschitz(self, box):
        return 1.0

    def image_box(self, box):
        return _box(box, self.m)

    def to_spec(self):
        return {"kind": self.kind, "m": self.m}


def _frac_inverse(mat):
    m = len(mat)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(m)] for i, row in enumerate(mat)]
    for col in range(m):
        piv = next((r for r in range(col, m) if aug[r][col] != 0), None)
        if piv is None:
            return None
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [v / p for v in aug[col]]
        for r in range(m):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return tuple(tuple(row[m:]) for row in aug)


@dataclass(frozen=True)
class AffineRational(Adversary):
    matrix: tuple
    offset: tuple
    inverse: tuple = field(init=False, repr=False, compare=False)
    kind = "affine"
    exact = True

    def __post_init__(self):
        mat = tuple(tuple(as_fraction(v) for v in row) for row in self.matrix)
        off = tuple(as_fraction(v) for v in self.offset)
        m = len(mat)
        if any(len(row) != m for row in mat) or len(off) != m:
            raise AdversaryError("affine adversary needs an m x m matrix and length-m offset")
        inv = _frac_inverse(mat)
        if inv is None:
            raise AdversaryError("affine matrix is singular")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "offset", off)
        object.__setattr__(self, "inverse", inv)
        object.__setattr__(self, "_mat_f", np.array(mat, dtype=float))
        object.__setattr__(self, "_off_f", np.array(off, dtype=float))
        object.__setattr__(self, "_inv_f", np.array(inv, dtype=float))

    @classmethod
    def scaled_identity(cls, m: int, scale=1, offset=0) -> "AffineRational":
        scale, offset = as_fraction(scale), as_fraction(offset)
        mat = [[scale if i == j else Fraction(0) for j in range(m)] for i in range(m)]
        return cls(tuple(map(tuple, mat)), (offset,) * m)

    @property
    def m(self) -> int:
        return len(self.matrix)

    def apply(self, p):
        p = np.asarray(p, dtype=float)
        return (p + self._off_f) @ self._mat_f.T

    def invert(self, q, tol=1e-12):
        q = np.asarray(q, dtype=float)
        return q @ self._inv_f.T - self._off_f

    def apply_exact(self, p):
        shifted = [as_fraction(x) + a for x, a in zip(p, self.offset)]
        return tuple(sum((r * s for r, s in zip(row, shifted)), Fraction(0)) for row in self.matrix)

    def invert_exact(self, q):
        q = [as_fraction(x) for x in q]
        return tuple(sum((r * s for r, s in zip(row, q)), Fraction(0)) - a
                     for row, a in zip(self.inverse, self.offset))

    def norm(self) -> Fraction:
        return max(sum(abs(v) for v in row) for row in self.matrix)

    def inverse_norm(self) -> Fraction:
        return max(sum(abs(v) for v in row) for row in self.inverse)

    def lipschitz(self, box):
        return float(self.norm())

    def image_box(self, box):
        lo, hi = _box(box, self.m)
        lo, hi = lo + self._off_f, hi + self._off_f
        pos = np.clip(self._mat_f, 0, None)
        neg = np.clip(self._mat_f, None, 0)
        return pos @ lo + neg @ hi, pos @ hi + neg @ lo

    def to_spec(self):
        return {"kind": self.kind,
                "matrix": [[_frac_str(v) for v in row] for row in self.matrix],
                "offset": [_frac_str(v) for v in self.offset]}


@dataclass(frozen=True)
class Translation(Adversary):
    vector: tuple
    kind = "translation"

    def __post_init__(self):
        vec = tuple(v if isinstance(v, (Fraction, float)) else as_fraction(v) for v in self.vector)
        object.__setattr__(self, "vector", vec)
        object.__setattr__(self, "_vec_f", np.array([float(v) for v in vec]))

    @property
    def m(self) -> int:
        return len(self.vector)

    @property
    def exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.vector)

    def apply(self, p):
        return np.asarray(p, dtype=float) + self._vec_f

    def invert(self, q, tol=1e-12):
        return np.asarray(q, dtype=float) - self._vec_f

    def apply_exact(self, p):
        if not self.exact:
            return super().apply_exact(p)
        return tuple(as_fraction(x) + v for x, v in zip(p, self.vector))

    def invert_exact(self, q):
        if not self.exact:
            return super().invert_exact(q)
        return tuple(as_fraction(x) - v for x, v in zip(q, self.vector))

    def lipschitz(self, box):
        return 1.0

    def image_box(self, box):
        lo, hi = _box(box, self.m)
        return lo + self._vec_f, hi + self._vec_f

    def to_spec(self):
        vec = [_frac_str(v) if isinstance(v, Fraction) else repr(v) for v in self.vector]
        return {"kind": self.kind, "vector": vec}


# Polynomials are coefficient lists, lowest degree first.

def _trim(p):
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return p


def _deriv(p):
    return _trim([k * c for k, c in enumerate(p)][1:] or [Fraction(0)])


def _rem(a, b):
    a = [Fraction(x) for x in _trim(a)]
    b = _trim(b)
    while len(a) >= len(b) and any(a):
        f = a[-1] / b[-1]
        shift = len(a) - len(b)
        for k, c in enumerate(b):
            a[k + shift] -= f * c
        a.pop()
    return _trim(a) if a else [Fraction(0)]


def _sign_changes(values):
    signs = [v for v in values if v != 0]
    return sum(1 for x, y in zip(signs, signs[1:]) if (x > 0) != (y > 0))


def sturm_root_count(p) -> int:
    """Number of distinct real roots of ``p`` (Sturm's theorem)."""
    p = _trim([as_fraction(c) for c in p])
    if len(p) == 1:
        return 0
    seq = [p, _deriv(p)]
    while True:
        r = _rem(seq[-2], seq[-1])
        if len(r) == 1 and r[0] == 0:
            break
        seq.append([-c for c in r])
    at_pos = [q[-1] for q in seq]
    at_neg = [q[-1] * (-1) ** (len(q) - 1) for q in seq]
    return _sign_changes(at_neg) - _sign_changes(at_pos)


def _strictly_increasing(p) -> bool:
    d = _deriv(p)
    return d[-1] > 0 and sturm_root_count(d) == 0


@dataclass(frozen=True)
class CoordMonotonePoly(Adversary):
    polys: tuple
    kind = "monotone-poly"

    def __post_init__(self):
        polys = tuple(tuple(_trim([as_fraction(c) for c in p])) for p in self.polys)
        for k, p in enumerate(polys):
            if len(p) % 2 != 0 or not _strictly_increasing(p):
                raise AdversaryError(f"coordinate {k}: polynomial must have odd degree "
                                     "and strictly positive derivative")
        object.__setattr__(self, "polys", polys)
        object.__setattr__(self, "_pf", [np.array(p, dtype=float) for p in polys])
        object.__setattr__(self, "_df", [np.array(_deriv(p), dtype=float) for p in polys])

    @classmethod
    def uniform(cls, m: int, coeffs) -> "CoordMonotonePoly":
        return cls(tuple(tuple(coeffs) for _ in range(m)))

    @property
    def m(self) -> int:
        return len(self.polys)

    def apply(self, p):
        p = np.asarray(p, dtype=float)
        out = np.empty_like(p)
        for k, c in enumerate(self._pf):
            out[..., k] = np.polynomial.polynomial.polyval(p[..., k], c)
        return out

    def apply_exact(self, p):
        out = []
        for x, poly in zip(p, self.polys):
            x = as_fraction(x)
            out.append(sum((c * x ** k for k, c in enumerate(poly)), Fraction(0)))
        return tuple(out)

    def invert(self, q, tol=1e-12):
        q = np.asarray(q, dtype=float)
        out = np.empty_like(q)
        for k, c in enumerate(self._pf):
            out[..., k] = _bisect_increasing(c, q[..., k], tol)
        return out

    def lipschitz(self, box):
        lo, hi = _box(box, self.m)
        best = 0.0
        for k, d in enumerate(self._df):
            # |p'| on [lo, hi] bounded by the max at the endpoints and critical points of p'.
            pts = [lo[k], hi[k]]
            if len(d) > 2:
                for r in np.roots(np.polynomial.polynomial.polyder(d)[::-1]):
                    if abs(r.imag) < 1e-12 and lo[k] <= r.real <= hi[k]:
                        pts.append(r.real)
            best = max(best, float(np.max(np.abs(np.polynomial.polynomial.polyval(pts, d)))))
        return best

    def image_box(self, box):
        lo, hi = _box(box, self.m)
        return self.apply(lo), self.apply(hi)

    def to_spec(self):
        return {"kind": self.kind, "polys": [[_frac_str(c) for c in p] for p in self.polys]}


def _bisect_increasing(coeffs, q, tol, max_iter=400):
    q = np.asarray(q, dtype=float)
    f = lambda u: np.polynomial.polynomial.polyval(u, coeffs)  # noqa: E731
    lo = np.full(q.shape, -1.0)
    hi = np.full(q.shape, 1.0)
    for _ in range(2100):
        bad_lo = f(lo) > q
        bad_hi = f(hi) < q
        if not (bad_lo.any() or bad_hi.any()):
            break
        lo = np.where(bad_lo, lo * 2.0, lo)
        hi = np.where(bad_hi, hi * 2.0, hi)
    else:
        raise InversionError("could not bracket the preimage")
    if not np.all(np.isfinite(lo) & np.isfinite(hi)):
        raise InversionError("could not bracket the preimage")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        below = fm < q
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        narrow = (hi - lo) <= np.spacing(np.maximum(np.abs(lo), np.abs(hi)))
        if np.all(narrow | (np.abs(fm - q) <= 0.25 * tol)):
            break
    cand = np.stack([lo, 0.5 * (lo + hi), hi])
    err = np.abs(f(cand) - q)
    pick = np.argmin(err, axis=0)
    return np.take_along_axis(cand, pick[None, ...], axis=0)[0]


@dataclass(frozen=True)
class Composition(Adversary):
    """``parts[-1] o ... o parts[0]``: ``apply`` runs the list in order."""

    parts: tuple
    kind = "composition"

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise AdversaryError("empty composition")
        if len({p.m for p in parts}) != 1:
            raise AdversaryError("composition parts disagree on dimension")
        object.__setattr__(self, "parts", parts)

    @property
    def m(self) -> int:
        return self.parts[0].m

    @property
    def exact(self) -> bool:
        return all(p.exact for p in self.parts)

    def apply(self, p):
        for h in self.parts:
            p = h.apply(p)
        return p

    def invert(self, q, tol=1e-12):
        # Each stage gets an equal share; an inner stage's error is amplified by
        # at most the outer stages' Lipschitz constants, which the caller sizes tol for.
        for h in reversed(self.parts):
            q = h.invert(q, tol)
        return q

    def apply_exact(self, p):
        for h in self.parts:
            p = h.apply_exact(p)
        return p

    def invert_exact(self, q):
        for h in reversed(self.parts):
            q = h.invert_exact(q)
        return q

    def lipschitz(self, box):
        total = 1.0
        for h in self.parts:
            total *= h.lipschitz(box)
            box = h.image_box(box)
        return total

    def image_box(self, box):
        for h in self.parts:
            box = h.image_box(box)
        return box

    def to_spec(self):
        return {"kind": self.kind, "parts": [h.to_spec() for h in self.parts]}


def modulus_of_inverse(h: Adversary, box, eps: float, samples: int = 2000,
                       seed: int = 0) -> float:
    """A ``delta`` with ``|h^-1(u) - h^-1(v)| <= eps`` whenever ``|u - v| <= delta`` on ``box``.

    Exact for identity, translations and rational affine maps.  Otherwise the
    inverse's Lipschitz constant is estimated from sampled difference quotients
    and a safety factor of 1/2 is applied.
    """
    if samples < 2:
        raise AdversaryError("need at least two samples")
    if eps <= 0:
        raise AdversaryError("eps must be positive")
    if isinstance(h, (Identity, Translation)):
        return float(eps)
    if isinstance(h, AffineRational):
        return float(Fraction(eps) / h.inverse_norm())
    lo, hi = _box(box, h.m)
    rng = np.random.default_rng(seed)
    width = np.maximum(hi - lo, 1e-12)
    u = lo + rng.random((samples, h.m)) * width
    steps = [1e-2, 1e-3, 1e-4]
    best = 0.0
    for s in steps:
        v = np.clip(u + (rng.random((samples, h.m)) - 0.5) * 2 * s * width, lo, hi)
        du = np.max(np.abs(u - v), axis=-1)
        keep = du > 0
        tol = 1e-3 * s * float(np.min(width))
        dx = np.max(np.abs(h.invert(u[keep], tol) - h.invert(v[keep], tol)), axis=-1)
        best = max(best, float(np.max(dx / du[keep])))
    return 0.5 * eps / max(best, 1e-300)


def _digits(k: int, base: int, count: int) -> list[int]:
    out = []
    for _ in range(count):
        k, d = divmod(k, base)
        out.append(d)
    if k:
        raise AdversaryError("index outside the family's enumeration range")
    return out


@dataclass(frozen=True)
class RationalAffineFamily:
    """Countable catalog of unipotent rational affine maps; index 0 is the identity.

    Index ``k`` is written in base 5; each digit (mapped to -1, -1/2, 0, 1/2, 1)
    fills one strictly-upper-triangular matrix entry or offset entry, so distinct
    indices give distinct maps and every member is invertible.
    """

    m: int

    @property
    def slots(self) -> int:
        return self.m * (self.m - 1) // 2 + self.m

    def member(self, index: int) -> Adversary:
        if index < 0:
            raise AdversaryError("family index must be non-negative")
        if index == 0:
            return Identity(self.m)
        vals = {0: Fraction(0), 1: Fraction(1, 2), 2: Fraction(-1, 2), 3: Fraction(1), 4: Fraction(-1)}
        digits = [vals[d] for d in _digits(index, 5, self.slots)]
        mat = [[Fraction(int(i == j)) for j in range(self.m)] for i in range(self.m)]
        pos = 0
        for i in range(self.m):
            for j in range(i + 1, self.m):
                mat[i][j] = digits[pos]
                pos += 1
        offset = digits[pos:]
        return AffineRational(tuple(map(tuple, mat)), tuple(offset))


@dataclass(frozen=True)
class TranslationPath:
    """``t -> Translation(t * direction)`` for ``t`` in a closed parameter interval."""

    direction: tuple
    domain: tuple = (-math.inf, math.inf)

    def member(self, t) -> Translation:
        lo, hi = self.domain
        if not (math.isfinite(float(t)) and lo <= t <= hi):
            raise AdversaryError(f"parameter {t} outside {self.domain}")
        if isinstance(t, (int, Fraction)) and all(isinstance(v, (int, Fraction)) for v in self.direction):
            return Translation(tuple(Fraction(t) * Fraction(v) for v in self.direction))
        return Translation(tuple(float(t) * float(v) for v in self.direction))


def random_rational_affine(m: int, rng: np.random.Generator, max_den: int = 7,
                           max_inverse_norm: float = 8.0) -> AffineRational:
    """Random invertible ``I + E`` with small rational entries (denominators <= ``max_den``)."""
    while True:
        num = rng.integers(-2, 3, size=(m, m))
        den = rng.integers(1, max_den + 1, size=(m, m))
        scale = int(rng.integers(2, 5))
        mat = [[Fraction(int(i == j)) + Fraction(int(num[i, j]), int(den[i, j]) * scale)
                for j in range(m)] for i in range(m)]
        onum = rng.integers(-3, 4, size=m)
        oden = rng.integers(1, max_den + 1, size=m)
        off = [Fraction(int(a), int(b)) for a, b in zip(onum, oden)]
        try:
            h = AffineRational(tuple(map(tuple, mat)), tuple(off))
        except AdversaryError:
            continue
        if h.inverse_norm() <= max_inverse_norm:
            return h


def adversary_from_spec(spec, m: int) -> Adversary:
    """Build an adversary from a config entry (a kind string or a dict)."""
    if isinstance(spec, str):
        spec = {"kind": spec}
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "identity":
        return Identity(m)
    if kind == "affine":
        if "scale" in spec:
            return AffineRational.scaled_identity(m, spec["scale"], spec.get("shift", 0))
        return AffineRational(tuple(tuple(row) for row in spec["matrix"]), tuple(spec["offset"]))
    if kind == "translation":
        vec = [as_fraction(v) if isinstance(v, (str, int)) else float(v) for v in spec["vector"]]
        return Translation(tuple(vec))
    if kind == "monotone-poly":
        if "polys" in spec:
            return CoordMonotonePoly(tuple(tuple(p) for p in spec["polys"]))
        return CoordMonotonePoly.uniform(m, spec["coeffs"])
    if kind == "composition":
        return Composition(tuple(adversary_from_spec(p, m) for p in spec["parts"]))
    if kind == "family":
        return RationalAffineFamily(m).member(int(spec["index"]))
    raise AdversaryError(f"unknown adversary kind {kind!r}")
