"""Exact arithmetic in the rational span of 1, sqrt(2), sqrt(3), sqrt(5), ...

Forced positions of the outer function are sums ``c_1*gamma_1 + ... + c_n*gamma_n``
with rational ``c_i``.  Because the multipliers are rationally independent two
such numbers are equal iff their coefficient lists are equal, and their order
can be certified by bracketing the square roots with integer square roots.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Sequence

__all__ = [
    "Rational",
    "GammaBasis",
    "GammaNumber",
    "gamma_basis",
    "gn_add",
    "gn_compare",
    "gn_to_float",
    "as_fraction",
    "InvalidDimensionError",
    "BasisMismatchError",
]

Rational = Fraction

_START_BITS = 64
_MAX_BITS = 4096


class InvalidDimensionError(ValueError):
    pass


class BasisMismatchError(ValueError):
    pass


def as_fraction(value) -> Fraction:
    """Coerce ints, Fractions, floats and ``"p/q"`` strings to a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(value)
    return Fraction(value)


def _primes():
    found = []
    k = 2
    while True:
        if all(k % p for p in found if p * p <= k):
            found.append(k)
            yield k
        k += 1


class GammaBasis:
    """The multipliers ``(1, sqrt(p_2), ..., sqrt(p_n))`` for distinct primes ``p_i``."""

    __slots__ = ("n", "radicands", "floats")

    def __init__(self, n: int):
        if n <= 1:
            raise InvalidDimensionError(f"need n > 1, got {n}")
        primes = _primes()
        self.n = n
        self.radicands = (1,) + tuple(next(primes) for _ in range(n - 1))
        self.floats = tuple(math.sqrt(r) for r in self.radicands)

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other) -> bool:
        return isinstance(other, GammaBasis) and other.radicands == self.radicands

    def __hash__(self) -> int:
        return hash(self.radicands)

    def __repr__(self) -> str:
        names = ["1"] + [f"sqrt({r})" for r in self.radicands[1:]]
        return f"GammaBasis({', '.join(names)})"

    def zero(self) -> "GammaNumber":
        return GammaNumber(self, [0] * self.n)

    def unit(self, i: int, q=1) -> "GammaNumber":
        """``q * gamma_i`` (0-based ``i``)."""
        coeffs = [0] * self.n
        coeffs[i] = q
        return GammaNumber(self, coeffs)

    def rational(self, q) -> "GammaNumber":
        return self.unit(0, q)


def gamma_basis(n: int) -> GammaBasis:
    return GammaBasis(n)


@total_ordering
class GammaNumber:
    """Immutable element ``sum_i coeffs[i] * gamma_i`` with rational coefficients."""

    __slots__ = ("basis", "coeffs")

    def __init__(self, basis: GammaBasis, coeffs: Iterable):
        coeffs = tuple(as_fraction(c) for c in coeffs)
        if len(coeffs) != basis.n:
            raise InvalidDimensionError(
                f"expected {basis.n} coefficients, got {len(coeffs)}")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, name, value):
        raise AttributeError("GammaNumber is immutable")

    def _check(self, other: "GammaNumber") -> None:
        if not isinstance(other, GammaNumber):
            raise TypeError(f"cannot combine GammaNumber with {type(other).__name__}")
        if other.basis != self.basis:
            raise BasisMismatchError("GammaNumbers over different bases")

    def __add__(self, other):
        if not isinstance(other, GammaNumber):
            return NotImplemented
        return gn_add(self, other)

    def __neg__(self):
        return GammaNumber(self.basis, [-c for c in self.coeffs])

    def __sub__(self, other):
        if not isinstance(other, GammaNumber):
            return NotImplemented
        return gn_add(self, -other)

    def scale(self, q) -> "GammaNumber":
        """Multiply by a rational scalar."""
        q = as_fraction(q)
        return GammaNumber(self.basis, [q * c for c in self.coeffs])

    def __eq__(self, other):
        if not isinstance(other, GammaNumber):
            return NotImplemented
        self._check(other)
        return self.coeffs == other.coeffs

    def __lt__(self, other):
        if not isinstance(other, GammaNumber):
            return NotImplemented
        return gn_compare(self, other) < 0

    def __hash__(self):
        return hash((self.basis.radicands, self.coeffs))

    def __float__(self):
        return gn_to_float(self)

    def __bool__(self):
        return any(self.coeffs)

    def is_rational(self) -> bool:
        return not any(self.coeffs[1:])

    def to_strings(self) -> list[str]:
        return [f"{c.numerator}/{c.denominator}" for c in self.coeffs]

    @classmethod
    def from_strings(cls, basis: GammaBasis, items: Sequence[str]) -> "GammaNumber":
        return cls(basis, [Fraction(s) for s in items])

    def __repr__(self) -> str:
        parts = [str(self.coeffs[0])]
        for r, c in zip(self.basis.radicands[1:], self.coeffs[1:]):
            parts.append(f"sqrt({r})*{c}")
        return "GammaNumber(" + " + ".join(parts) + ")"


def gn_add(a: GammaNumber, b: GammaNumber) -> GammaNumber:
    a._check(b)
    return GammaNumber(a.basis, [x + y for x, y in zip(a.coeffs, b.coeffs)])


def _sign(basis: GammaBasis, coeffs: Sequence[Fraction]) -> int:
    if not any(coeffs):
        return 0
    # Scale to integer coefficients so the bracketing loop stays in int arithmetic.
    den = 1
    for c in coeffs:
        den = den * c.denominator // math.gcd(den, c.denominator)
    ints = [c.numerator * (den // c.denominator) for c in coeffs]
    bits = _START_BITS
    while bits <= _MAX_BITS:
        lo = hi = 0
        for k, r in zip(ints, basis.radicands):
            if k == 0:
                continue
            if r == 1:
                s_lo = s_hi = 1 << bits
            else:
                s_lo = math.isqrt(r << (2 * bits))
                s_hi = s_lo + 1
            if k > 0:
                lo += k * s_lo
                hi += k * s_hi
            else:
                lo += k * s_hi
                hi += k * s_lo
        if lo > 0:
            return 1
        if hi < 0:
            return -1
        bits *= 2
    raise ArithmeticError("sign not certified within precision cap")


def gn_compare(a: GammaNumber, b: GammaNumber) -> int:
    """Return -1, 0 or 1 as the real value of ``a`` is below, equal to or above ``b``."""
    a._check(b)
    if a.coeffs == b.coeffs:
        return 0
    return _sign(a.basis, [x - y for x, y in zip(a.coeffs, b.coeffs)])


def gn_to_float(a: GammaNumber) -> float:
    # Same left-to-right accumulation the engine uses for inner arguments, so a
    # knot computed here and an argument computed there agree bit for bit.
    total = 0.0
    for c, g in zip(a.coeffs, a.basis.floats):
        total = total + float(c) * g
    return total
