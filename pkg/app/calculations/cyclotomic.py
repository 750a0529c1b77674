"""
Exact Cyclotomic Arithmetic

Values in Z[zeta_M] kept in canonical form modulo the cyclotomic
polynomial Phi_M, so two values are equal exactly when their coefficient
vectors are equal. Epsilon factors are QHalfScaled values
cyc * q^(halfpow/2); their +-1 signs are certified exactly where possible
and with outward-rounded interval arithmetic otherwise.
"""

import logging
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import gcd
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from mpmath import iv
from sympy import Poly, cyclotomic_poly, factorint, symbols, totient

from app.calculations.errors import (
    ModulusMismatchError,
    NotRealError,
    NotUnimodularError,
    UnseparatedError,
)

logger = logging.getLogger(__name__)

DEFAULT_DPS = 30
# int64 headroom kept free during reductions and convolutions
INT64_LIMIT = 2 ** 62

_X = symbols("x")
_IV_LOCK = threading.Lock()


def lcm(a: int, b: int) -> int:
    return a * b // gcd(a, b)


@lru_cache(maxsize=None)
def radical(M: int) -> int:
    r = 1
    for prime in factorint(M):
        r *= prime
    return r


@lru_cache(maxsize=None)
def phi(M: int) -> int:
    return int(totient(M))


@lru_cache(maxsize=None)
def _phi_poly(R: int) -> Tuple[int, ...]:
    """Coefficients of Phi_R, constant term first."""
    coeffs = Poly(cyclotomic_poly(R, _X), _X).all_coeffs()
    return tuple(int(c) for c in reversed(coeffs))


def _fits_int64(bound: int) -> bool:
    return bound < INT64_LIMIT


def _as_array(values: Sequence[int], bound: int) -> np.ndarray:
    dtype = np.int64 if _fits_int64(bound) else object
    return np.array([int(v) for v in values], dtype=dtype)


def _reduce(vec: Sequence[int], M: int) -> Tuple[int, ...]:
    """
    Canonical form of sum vec[i] x^i modulo Phi_M.

    Uses Phi_M(x) = Phi_R(x^m) with R = rad(M), m = M / R: the folded
    vector is reshaped to (R, m) and each column is reduced modulo Phi_R.
    """
    folded = [0] * M
    for i, c in enumerate(vec):
        if c:
            folded[i % M] += int(c)

    R = radical(M)
    m = M // R
    P = _phi_poly(R)
    D = len(P) - 1
    size = 1 + sum(abs(c) for c in P)
    top = max((abs(c) for c in folded), default=0)
    bound = top * size ** (R - D)

    table = _as_array(folded, bound).reshape(R, m)
    coeffs = np.array(P[:-1], dtype=table.dtype)
    for k in range(R - 1, D - 1, -1):
        row = table[k].copy()
        if not row.any():
            continue
        base = k - D
        table[base:k] -= np.outer(coeffs, row)
        table[k] = 0
    return tuple(int(c) for c in table[:D].reshape(-1))


def _convolve(a: Tuple[int, ...], b: Tuple[int, ...]) -> List[int]:
    bound = (max(map(abs, a), default=0) * max(map(abs, b), default=0)
             * max(1, min(len(a), len(b))))
    if _fits_int64(bound):
        return [int(c) for c in np.convolve(np.array(a, dtype=np.int64),
                                            np.array(b, dtype=np.int64))]
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


# ============================================================================
# CYCLOTOMIC INTEGERS
# ============================================================================

@dataclass(frozen=True)
class CycInt:
    """
    Element of Z[zeta_M] in the power basis 1, zeta, ..., zeta^(phi(M)-1).
    """

    M: int
    coeffs: Tuple[int, ...]

    @classmethod
    def from_vector(cls, vec: Sequence[int], M: int) -> "CycInt":
        """Reduce sum vec[i] zeta_M^i."""
        if M < 1:
            raise ValueError(f"root order must be positive, got {M}")
        return cls(M, _reduce(vec, M))

    @classmethod
    def from_histogram(cls, counts: np.ndarray, M: int) -> "CycInt":
        """Reduce sum counts[e] zeta_M^e for a histogram over exponents."""
        return cls.from_vector([int(c) for c in counts], M)

    @classmethod
    def zero(cls, M: int = 1) -> "CycInt":
        return cls(M, (0,) * phi(M))

    @classmethod
    def integer(cls, n: int, M: int = 1) -> "CycInt":
        return cls(M, (n,) + (0,) * (phi(M) - 1))

    @classmethod
    def one(cls, M: int = 1) -> "CycInt":
        return cls.integer(1, M)

    @classmethod
    def zeta(cls, k: int, M: int) -> "CycInt":
        """zeta_M^k."""
        vec = [0] * M
        vec[k % M] = 1
        return cls.from_vector(vec, M)

    # ------------------------------------------------------------------

    def lift(self, M2: int) -> "CycInt":
        """The same value written over a multiple M2 of M."""
        if M2 == self.M:
            return self
        if M2 % self.M:
            raise ValueError(f"cannot lift from M={self.M} to M={M2}")
        step = M2 // self.M
        vec = [0] * M2
        for i, c in enumerate(self.coeffs):
            vec[i * step] = c
        return CycInt.from_vector(vec, M2)

    def _common(self, other: "CycInt") -> Tuple["CycInt", "CycInt"]:
        M = lcm(self.M, other.M)
        return self.lift(M), other.lift(M)

    def __add__(self, other: Union["CycInt", int]) -> "CycInt":
        if isinstance(other, int):
            other = CycInt.integer(other, self.M)
        x, y = self._common(other)
        return CycInt(x.M, tuple(a + b for a, b in zip(x.coeffs, y.coeffs)))

    def __neg__(self) -> "CycInt":
        return CycInt(self.M, tuple(-c for c in self.coeffs))

    def __sub__(self, other: Union["CycInt", int]) -> "CycInt":
        if isinstance(other, int):
            other = CycInt.integer(other, self.M)
        return self + (-other)

    def __mul__(self, other: Union["CycInt", int]) -> "CycInt":
        if isinstance(other, int):
            return self.scalar(other)
        x, y = self._common(other)
        return CycInt.from_vector(_convolve(x.coeffs, y.coeffs), x.M)

    __rmul__ = __mul__

    def scalar(self, k: int) -> "CycInt":
        return CycInt(self.M, tuple(k * c for c in self.coeffs))

    def conj(self) -> "CycInt":
        """Complex conjugate: zeta -> zeta^-1."""
        vec = [0] * self.M
        for i, c in enumerate(self.coeffs):
            vec[(-i) % self.M] += c
        return CycInt.from_vector(vec, self.M)

    def __pow__(self, k: int) -> "CycInt":
        if k < 0:
            raise ValueError("negative powers are not cyclotomic integers")
        result = CycInt.one(self.M)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other: object) -> bool:
        if isinstance(other, int):
            other = CycInt.integer(other, self.M)
        if not isinstance(other, CycInt):
            return NotImplemented
        x, y = self._common(other)
        return x.coeffs == y.coeffs

    def __hash__(self) -> int:
        # equal values may live over different M; only the integer part is stable
        return hash(self.coeffs[0]) if self.is_integer() else hash(CycInt)

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def is_integer(self) -> bool:
        return not any(self.coeffs[1:])

    def integer_value(self) -> int:
        if not self.is_integer():
            raise ValueError(f"{self} is not a rational integer")
        return self.coeffs[0]

    def approx(self) -> complex:
        """Floating point value, for display and debugging only."""
        k = np.arange(len(self.coeffs))
        roots = np.exp(2j * np.pi * k / self.M)
        return complex(np.dot(np.array(self.coeffs, dtype=float), roots))

    def __str__(self) -> str:
        terms = [f"{c}*z{self.M}^{i}" if i else str(c)
                 for i, c in enumerate(self.coeffs) if c]
        return " + ".join(terms) if terms else "0"


def from_exponent(e: Union[Fraction, int], M: int) -> CycInt:
    """
    e^{2 pi i e} as zeta_M^(e M).

    Raises:
        ModulusMismatchError: If e * M is not an integer
    """
    k = Fraction(e) * M
    if k.denominator != 1:
        raise ModulusMismatchError(f"exponent {e} is not a multiple of 1/{M}")
    return CycInt.zeta(int(k), M)


def cyc_arith(op: str, x: CycInt, y: Union[CycInt, int, None] = None) -> CycInt:
    """
    Dispatch for add, sub, mul, conj and scalar.

    Raises:
        ValueError: For an unknown op
    """
    if op == "add":
        return x + y
    if op == "sub":
        return x - y
    if op == "mul":
        return x * y
    if op == "conj":
        return x.conj()
    if op == "scalar":
        return x.scalar(int(y))
    raise ValueError(f"unknown op: {op}")


# ============================================================================
# INTERVAL EMBEDDING
# ============================================================================

def _interval_parts(c: CycInt, dps: int):
    """Real and imaginary parts of c as mpmath intervals (caller holds the lock)."""
    re = iv.mpf(0)
    im = iv.mpf(0)
    turn = 2 * iv.pi / c.M
    for i, coeff in enumerate(c.coeffs):
        if coeff:
            angle = turn * i
            re += coeff * iv.cos(angle)
            im += coeff * iv.sin(angle)
    return re, im


def _interval_sign(x) -> Optional[int]:
    """+1 or -1 when the interval excludes 0, else None."""
    if x.a > 0:
        return 1
    if x.b < 0:
        return -1
    return None


def _sqrt_power(q: int, h: int):
    """q^(h/2) as an interval."""
    if h >= 0:
        return iv.sqrt(iv.mpf(q) ** h)
    return 1 / iv.sqrt(iv.mpf(q) ** (-h))


def _with_dps(dps: int, fn):
    with _IV_LOCK:
        saved = iv.dps
        iv.dps = dps
        try:
            return fn()
        finally:
            iv.dps = saved


# ============================================================================
# HALF-INTEGRAL POWERS OF q
# ============================================================================

@dataclass(frozen=True)
class QHalfScaled:
    """The complex number cyc * q^(halfpow / 2)."""

    cyc: CycInt
    q: int
    halfpow: int = 0

    def __mul__(self, other: "QHalfScaled") -> "QHalfScaled":
        self._check_base(other)
        return QHalfScaled(self.cyc * other.cyc, self.q, self.halfpow + other.halfpow)

    def conj(self) -> "QHalfScaled":
        return QHalfScaled(self.cyc.conj(), self.q, self.halfpow)

    def _check_base(self, other: "QHalfScaled") -> None:
        if self.q != other.q:
            raise ValueError(f"incompatible bases q={self.q} and q={other.q}")

    def square(self) -> "QHalfScaled":
        return self * self

    def abs_squared_scaled(self) -> Tuple[CycInt, int]:
        """(cyc * conj(cyc), halfpow): |v|^2 = that integer times q^halfpow."""
        return self.cyc * self.cyc.conj(), self.halfpow

    def is_zero(self) -> bool:
        return self.cyc.is_zero()

    def _scaled_pair(self, other: "QHalfScaled") -> Tuple[CycInt, CycInt]:
        """Both values times q^(-h/2) for the smaller h, same parity required."""
        h = min(self.halfpow, other.halfpow)
        x = self.cyc * self.q ** ((self.halfpow - h) // 2)
        y = other.cyc * self.q ** ((other.halfpow - h) // 2)
        return x, y

    def equals(self, other: "QHalfScaled", dps: int = DEFAULT_DPS,
               max_dps: Optional[int] = None) -> bool:
        """
        Exact equality.

        Same parity of halfpow reduces to equality of cyclotomic integers.
        Otherwise the squares are compared exactly and, when they agree,
        the remaining sign is settled numerically.
        """
        self._check_base(other)
        if self.is_zero() or other.is_zero():
            return self.is_zero() and other.is_zero()
        if (self.halfpow - other.halfpow) % 2 == 0:
            x, y = self._scaled_pair(other)
            return x == y
        sx, sy = self.square(), other.square()
        x, y = sx._scaled_pair(sy)
        if x != y:
            return False
        return self._numeric_sign_against(other, dps, max_dps or dps) == 1

    def _numeric_sign_against(self, other: "QHalfScaled", dps: int, max_dps: int) -> int:
        """With self^2 == other^2 (nonzero), decide self = +other or -other."""
        while True:
            def evaluate():
                a_re, a_im = _interval_parts(self.cyc, dps)
                b_re, b_im = _interval_parts(other.cyc, dps)
                sa = _sqrt_power(self.q, self.halfpow)
                sb = _sqrt_power(self.q, other.halfpow)
                diff = (a_re * sa - b_re * sb, a_im * sa - b_im * sb)
                total = (a_re * sa + b_re * sb, a_im * sa + b_im * sb)
                diff_off = any(_interval_sign(t) for t in diff)
                total_off = any(_interval_sign(t) for t in total)
                return diff_off, total_off

            diff_off, total_off = _with_dps(dps, evaluate)
            if total_off and not diff_off:
                return 1
            if diff_off and not total_off:
                return -1
            if dps >= max_dps:
                raise UnseparatedError(f"values not separated at {dps} digits")
            dps = min(2 * dps, max_dps)

    def approx(self) -> complex:
        return self.cyc.approx() * float(self.q) ** (self.halfpow / 2)

    def __str__(self) -> str:
        if self.halfpow == 0:
            return str(self.cyc)
        return f"({self.cyc}) * {self.q}^({self.halfpow}/2)"


@dataclass(frozen=True)
class EpsilonValue:
    """An epsilon factor: its certified sign (when real) and the exact value."""

    sign: Optional[int]
    raw: QHalfScaled
    resolved: bool


def certified_sign(v: QHalfScaled, dps: int = DEFAULT_DPS,
                   max_dps: Optional[int] = None) -> int:
    """
    Certify that v is +1 or -1 and return which.

    Args:
        v: Value expected to be a real sign
        dps: Starting working precision for the interval embedding
        max_dps: Largest precision tried; doubled from dps up to this

    Returns:
        +1 or -1

    Raises:
        NotUnimodularError: If |v| != 1 exactly
        NotRealError: If v^2 != 1 exactly
        UnseparatedError: If the interval bound never separates the signs
    """
    q, h = v.q, v.halfpow
    norm = v.cyc * v.cyc.conj()
    if not _equals_power(norm, q, -h):
        raise NotUnimodularError(f"|v|^2 = ({norm}) * {q}^{h}", {"value": str(v)})
    square = v.cyc * v.cyc
    if not _equals_power(square, q, -h):
        raise NotRealError(f"v^2 = ({square}) * {q}^{h}", {"value": str(v)})

    if h % 2 == 0:
        # cyc = +-q^(-h/2), an integer in canonical form
        return 1 if v.cyc.integer_value() > 0 else -1

    max_dps = max(max_dps or dps, dps)
    while True:
        re = _with_dps(dps, lambda: _interval_parts(v.cyc, dps)[0])
        sign = _interval_sign(re)
        if sign is not None:
            return sign
        if dps >= max_dps:
            raise UnseparatedError(f"sign not separated at {dps} digits", {"value": str(v)})
        logger.debug(f"Sign of {v} unseparated at {dps} digits, retrying")
        dps = min(2 * dps, max_dps)


def _equals_power(c: CycInt, q: int, k: int) -> bool:
    """Is c == q^k, with c a cyclotomic integer and k possibly negative?"""
    if not c.is_integer():
        return False
    n = c.integer_value()
    if k >= 0:
        return n == q ** k
    return n * q ** (-k) == 1


def epsilon_normalize(G: CycInt, chi_c: CycInt, a: int, q: int, f: int = 1) -> EpsilonValue:
    """
    epsilon = chi(c) * q_K^(-a/2) * G with q_K = q^f.

    Raises:
        ModulusMismatchError: If |G|^2 != q_K^a
    """
    norm = G * G.conj()
    if not _equals_power(norm, q, a * f):
        raise ModulusMismatchError(
            f"|G|^2 = {norm} but q_K^a = {q ** (a * f)}", {"a": a, "q": q, "f": f}
        )
    raw = QHalfScaled(chi_c * G, q, -a * f)
    return EpsilonValue(sign=None, raw=raw, resolved=False)


def resolve_sign(value: EpsilonValue, dps: int = DEFAULT_DPS,
                 max_dps: Optional[int] = None) -> EpsilonValue:
    """Attach the certified sign to an epsilon value."""
    sign = certified_sign(value.raw, dps, max_dps)
    return EpsilonValue(sign=sign, raw=value.raw, resolved=True)
