"""
p-adic Arithmetic

Truncated arithmetic in F = Q_p and in a quadratic extension K = F(alpha),
plus Galois data and the additive characters psi (on F), psi_K = psi o tr
and psi_0(x) = psi(tr[-x x0 / 2]).

Every value carries an absolute precision: it is known modulo p^prec.
Operations compute the precision their result is justified to and raise
PrecisionError instead of returning undetermined digits.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Dict, Optional, Tuple, Union

from sympy import isprime
from sympy.ntheory import legendre_symbol

from app.calculations.errors import CatalogError, InvariantError, PrecisionError

logger = logging.getLogger(__name__)

DEFAULT_PRECISION = 40
RAMIFIED = "ramified"
UNRAMIFIED = "unramified"

# Scan window for the direct conductor search of psi_0
CONDUCTOR_SCAN_START = -8
CONDUCTOR_SCAN_STOP = 40

Number = Union[int, Fraction]


def _strip(p: int, n: int) -> Tuple[int, int]:
    """Split n = u * p^v with p not dividing u (n != 0)."""
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return n, v


def p_valuation(n: int, p: int) -> int:
    """Valuation of a nonzero integer."""
    if n == 0:
        raise ValueError("valuation of 0 is undefined")
    return _strip(p, n)[1]


# ============================================================================
# BASE FIELD
# ============================================================================

@dataclass(frozen=True)
class PAdic:
    """
    Element of Q_p known modulo p^prec.

    Stored as unit * p^val with p not dividing unit and unit reduced mod
    p^(prec - val). Zero to precision is unit = 0, val = prec.
    """

    p: int
    unit: int
    val: int
    prec: int

    @classmethod
    def make(cls, p: int, digits: int, shift: int, prec: int) -> "PAdic":
        """Normalize digits * p^shift modulo p^prec."""
        if prec <= shift or digits % (p ** (prec - shift)) == 0:
            return cls(p, 0, prec, prec)
        unit, v = _strip(p, digits)
        shift += v
        return cls(p, unit % (p ** (prec - shift)), shift, prec)

    @classmethod
    def from_number(cls, p: int, value: Number, prec: int) -> "PAdic":
        """Embed an integer or a rational into Q_p with absolute precision prec."""
        value = Fraction(value)
        if value == 0:
            return cls(p, 0, prec, prec)
        num, vn = _strip(p, value.numerator)
        den, vd = _strip(p, value.denominator)
        shift = vn - vd
        if prec <= shift:
            return cls(p, 0, prec, prec)
        modulus = p ** (prec - shift)
        return cls(p, (num * pow(den, -1, modulus)) % modulus, shift, prec)

    @classmethod
    def zero(cls, p: int, prec: int) -> "PAdic":
        return cls(p, 0, prec, prec)

    # ------------------------------------------------------------------

    def is_zero(self) -> bool:
        return self.unit == 0

    def valuation(self) -> int:
        if self.is_zero():
            raise PrecisionError(f"valuation undecidable: zero modulo p^{self.prec}")
        return self.val

    def __add__(self, other: "PAdic") -> "PAdic":
        s = min(self.val, other.val)
        prec = min(self.prec, other.prec)
        digits = (self.unit * self.p ** (self.val - s)
                  + other.unit * self.p ** (other.val - s))
        return PAdic.make(self.p, digits, s, prec)

    def __neg__(self) -> "PAdic":
        return PAdic.make(self.p, -self.unit, self.val, self.prec)

    def __sub__(self, other: "PAdic") -> "PAdic":
        return self + (-other)

    def __mul__(self, other: "PAdic") -> "PAdic":
        prec = min(self.prec + other.val, other.prec + self.val)
        return PAdic.make(self.p, self.unit * other.unit, self.val + other.val, prec)

    def scale(self, k: int) -> "PAdic":
        """Multiply by an exact integer."""
        if k == 0:
            return PAdic.zero(self.p, self.prec)
        u, v = _strip(self.p, k)
        return PAdic.make(self.p, self.unit * u, self.val + v, self.prec + v)

    def divide_int(self, k: int) -> "PAdic":
        """Divide by an exact nonzero integer."""
        u, v = _strip(self.p, k)
        if self.is_zero():
            return PAdic.zero(self.p, self.prec - v)
        rel = self.prec - self.val
        modulus = self.p ** rel
        return PAdic(self.p, (self.unit * pow(u, -1, modulus)) % modulus,
                     self.val - v, self.prec - v)

    def inverse(self) -> "PAdic":
        if self.is_zero():
            raise PrecisionError("cannot invert an element that is zero to precision")
        rel = self.prec - self.val
        modulus = self.p ** rel
        return PAdic(self.p, pow(self.unit, -1, modulus), -self.val, rel - self.val)

    def frac_part(self) -> Fraction:
        """
        p-adic fractional part lambda(x) in [0, 1).

        Raises:
            PrecisionError: If some digit at a negative valuation is unknown
        """
        if self.prec < 0:
            raise PrecisionError(
                f"fractional part needs precision >= 0, have {self.prec}"
            )
        if self.val >= 0:
            return Fraction(0)
        k = -self.val
        return Fraction(self.unit % self.p ** k, self.p ** k)

    def residue(self, k: int) -> int:
        """Integral element reduced mod p^k."""
        if k <= 0:
            return 0
        if self.prec < k:
            raise PrecisionError(f"need precision {k}, have {self.prec}")
        if self.is_zero():
            return 0
        if self.val < 0:
            raise ValueError("element is not integral")
        return (self.unit * self.p ** self.val) % self.p ** k

    def to_fraction(self) -> Fraction:
        """Rational representative unit * p^val."""
        return Fraction(self.unit) * Fraction(self.p) ** self.val

    def equals(self, other: "PAdic") -> bool:
        """Equality up to the common precision."""
        return (self - other).is_zero()


@dataclass(frozen=True)
class PrimeField:
    """F = Q_p with the number of digits carried by default."""

    p: int
    default_precision: int = DEFAULT_PRECISION

    def __post_init__(self):
        if not isprime(self.p):
            raise CatalogError(f"p={self.p} is not prime")
        if self.default_precision < 1:
            raise ValueError("default_precision must be >= 1")

    @property
    def t(self) -> int:
        """v_F(2)."""
        return 1 if self.p == 2 else 0

    def element(self, value: Number, prec: Optional[int] = None) -> PAdic:
        return PAdic.from_number(self.p, value, prec or self.default_precision)


@dataclass(frozen=True)
class AdditiveCharValue:
    """The value e^{2 pi i * exponent} of an additive character."""

    p: int
    exponent: Fraction

    def __post_init__(self):
        if not 0 <= self.exponent < 1:
            raise ValueError(f"exponent {self.exponent} outside [0, 1)")
        den = self.exponent.denominator
        if den != 1 and _strip(self.p, den)[0] != 1:
            raise ValueError(f"denominator {den} is not a power of {self.p}")

    def is_trivial(self) -> bool:
        return self.exponent == 0


def psi_frac(x: PAdic) -> AdditiveCharValue:
    """lambda(x), the exponent of psi(x); psi has conductor 0."""
    return AdditiveCharValue(x.p, x.frac_part())


# ============================================================================
# QUADRATIC EXTENSION
# ============================================================================

@dataclass(frozen=True)
class KElem:
    """
    a + b * alpha in K, alpha a root of X^2 - T X + N.

    alpha is pi_K for ramified extensions and the residue generator rho
    for unramified ones.
    """

    ext: "QuadExt" = field(repr=False, compare=False)
    a: PAdic
    b: PAdic

    def _new(self, a: PAdic, b: PAdic) -> "KElem":
        return KElem(self.ext, a, b)

    @property
    def precision(self) -> int:
        """Absolute precision in v_K units."""
        if self.ext.ramified:
            return min(2 * self.a.prec, 2 * self.b.prec + 1)
        return min(self.a.prec, self.b.prec)

    def is_zero(self) -> bool:
        return self.a.is_zero() and self.b.is_zero()

    def valuation(self) -> int:
        if self.ext.ramified:
            v = min(2 * self.a.val, 2 * self.b.val + 1)
        else:
            v = min(self.a.val, self.b.val)
        if v >= self.precision:
            raise PrecisionError("valuation undecidable: element is zero to precision")
        return v

    def __add__(self, other: "KElem") -> "KElem":
        return self._new(self.a + other.a, self.b + other.b)

    def __neg__(self) -> "KElem":
        return self._new(-self.a, -self.b)

    def __sub__(self, other: "KElem") -> "KElem":
        return self + (-other)

    def __mul__(self, other: Union["KElem", int]) -> "KElem":
        if isinstance(other, int):
            return self._new(self.a.scale(other), self.b.scale(other))
        T, N = self.ext.T, self.ext.N
        bd = self.b * other.b
        a = self.a * other.a - bd.scale(N)
        b = self.a * other.b + self.b * other.a
        if T:
            b = b + bd.scale(T)
        return self._new(a, b)

    def conj(self) -> "KElem":
        """Nontrivial Galois image: alpha -> T - alpha."""
        a = self.a + self.b.scale(self.ext.T) if self.ext.T else self.a
        return self._new(a, -self.b)

    def trace(self) -> PAdic:
        t = self.a.scale(2)
        if self.ext.T:
            t = t + self.b.scale(self.ext.T)
        return t

    def norm(self) -> PAdic:
        n = self.a * self.a + (self.b * self.b).scale(self.ext.N)
        if self.ext.T:
            n = n + (self.a * self.b).scale(self.ext.T)
        return n

    def inverse(self) -> "KElem":
        n_inv = self.norm().inverse()
        c = self.conj()
        return self._new(c.a * n_inv, c.b * n_inv)

    def __pow__(self, k: int) -> "KElem":
        base = self if k >= 0 else self.inverse()
        result = self.ext.one
        for _ in range(abs(k)):
            result = result * base
        return result

    def divide_int(self, k: int) -> "KElem":
        return self._new(self.a.divide_int(k), self.b.divide_int(k))

    def in_base_field(self) -> bool:
        return self.b.is_zero()

    def base_part(self) -> PAdic:
        """The F-coordinate of an element known to lie in F."""
        if not self.b.is_zero():
            raise ValueError("element does not lie in F")
        return self.a

    def residue_pair(self, k_a: int, k_b: int) -> Tuple[int, int]:
        """Integer coordinates reduced modulo (p^k_a, p^k_b)."""
        return self.a.residue(k_a), self.b.residue(k_b)

    def equals(self, other: "KElem") -> bool:
        return (self - other).is_zero()


@dataclass(frozen=True)
class QuadExt:
    """
    Quadratic extension K/Q_p from the catalog.

    alpha has minimal polynomial X^2 - T X + N. For ramified kinds
    alpha = pi_K and pi_F = -N, so N(pi_K) = -pi_F by construction.
    """

    p: int
    tag: str
    kind: str
    T: int
    N: int
    d: int
    pi_F_value: int
    x0_coords: Tuple[int, int]
    s: Optional[int] = None
    u_prime: Optional[int] = None
    precision: int = DEFAULT_PRECISION

    @property
    def base(self) -> PrimeField:
        return PrimeField(self.p, self.precision)

    @property
    def ramified(self) -> bool:
        return self.kind == RAMIFIED

    @property
    def t(self) -> int:
        return 1 if self.p == 2 else 0

    @property
    def q(self) -> int:
        return self.p

    @property
    def residue_degree(self) -> int:
        return 1 if self.ramified else 2

    @property
    def q_K(self) -> int:
        return self.p ** self.residue_degree

    def element(self, a: Number, b: Number = 0) -> KElem:
        return KElem(self, PAdic.from_number(self.p, a, self.precision),
                     PAdic.from_number(self.p, b, self.precision))

    def from_base(self, x: PAdic) -> KElem:
        return KElem(self, x, PAdic.zero(self.p, x.prec))

    @property
    def one(self) -> KElem:
        return self.element(1)

    @property
    def alpha(self) -> KElem:
        return self.element(0, 1)

    @property
    def pi_K(self) -> KElem:
        return self.alpha if self.ramified else self.element(self.p)

    @property
    def pi_F(self) -> KElem:
        return self.element(self.pi_F_value)

    @property
    def x0(self) -> KElem:
        return self.element(*self.x0_coords)

    @property
    def pi_conj_ratio(self) -> KElem:
        """v = conj(pi_K) / pi_K."""
        return self.pi_K.conj() * self.pi_K.inverse()

    @property
    def w(self) -> KElem:
        """pi_K^2 / pi_F, the unit relating the two uniformizers."""
        return self.pi_K * self.pi_K * self.pi_F.inverse()

    @cached_property
    def n_psi0(self) -> int:
        return psi0_conductor(self)

    def describe(self) -> Dict[str, object]:
        """Convention data echoed in reports."""
        return {
            "p": self.p,
            "tag": self.tag,
            "kind": self.kind,
            "d": self.d,
            "t": self.t,
            "s": self.s,
            "u_prime": self.u_prime,
            "min_poly": f"X^2 - ({self.T})X + ({self.N})",
            "pi_K": "alpha" if self.ramified else str(self.p),
            "pi_F": self.pi_F_value,
            "x0": list(self.x0_coords),
            "n_psi0": self.n_psi0,
        }


def psi0_eval(x: KElem) -> AdditiveCharValue:
    """lambda(tr(-x * x0 / 2)), the exponent of psi_0(x)."""
    t = (x * x.ext.x0).trace()
    return psi_frac((-t).divide_int(2))


def psiK_eval(x: KElem) -> AdditiveCharValue:
    """lambda(tr x), the exponent of psi_K(x) = psi(tr x)."""
    return psi_frac(x.trace())


def _trivial_on_ideal(ext: QuadExt, n: int) -> bool:
    """Is psi_0 trivial on P_K^{-n}?"""
    generator = ext.pi_K ** (-n)
    return all(psi0_eval(generator * g).is_trivial() for g in (ext.one, ext.alpha))


def psi0_conductor(ext: QuadExt) -> int:
    """
    n(psi_0): the largest n with psi_0 trivial on P_K^{-n}, by direct scan.

    For ramified extensions the result must equal 2 (d odd) or
    2(s - t) (d even).
    """
    if not _trivial_on_ideal(ext, CONDUCTOR_SCAN_START):
        raise InvariantError(f"psi_0 nontrivial on P_K^{-CONDUCTOR_SCAN_START}")
    n = CONDUCTOR_SCAN_START
    while n < CONDUCTOR_SCAN_STOP and _trivial_on_ideal(ext, n + 1):
        n += 1
    if ext.ramified:
        expected = 2 if ext.d % 2 else 2 * (ext.s - ext.t)
        if n != expected:
            raise InvariantError(
                f"n(psi_0)={n} for {ext.tag}, closed form gives {expected}"
            )
    return n


def field_arith(op: str, a: KElem, b: Optional[KElem] = None) -> KElem:
    """
    Dispatch for add, mul, negate and invert_unit.

    Raises:
        ValueError: For an unknown op or a non-unit passed to invert_unit
        PrecisionError: If the result has no correct digit
    """
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "negate":
        return -a
    if op == "invert_unit":
        if a.valuation() != 0:
            raise ValueError("invert_unit requires a unit")
        return a.inverse()
    raise ValueError(f"unknown op: {op}")


def valuation(a: KElem) -> int:
    return a.valuation()


def galois_data(a: KElem) -> Tuple[KElem, KElem, KElem]:
    """(conj, trace, norm); trace and norm are returned embedded in K."""
    conj = a.conj()
    trace = a + conj
    norm = a * conj
    if not (trace.in_base_field() and norm.in_base_field()):
        raise InvariantError("trace or norm left the base field")
    if not (trace.a.equals(a.trace()) and norm.a.equals(a.norm())):
        raise InvariantError("trace/norm formulas disagree with a + conj, a * conj")
    return conj, trace, norm


# ============================================================================
# CATALOG
# ============================================================================

# p = 2: (kind, T, N, d, s, u', pi_F, x0)
_DYADIC_CATALOG: Dict[str, Tuple] = {
    "sqrt(-1)": (RAMIFIED, 2, 2, 2, 1, -1, -2, (-1, 1)),
    "sqrt(3)": (RAMIFIED, 2, -2, 2, 1, 1, 2, (-1, 1)),
    "sqrt(2)": (RAMIFIED, 0, -2, 3, None, None, 2, (0, 1)),
    "sqrt(-2)": (RAMIFIED, 0, 2, 3, None, None, -2, (0, 1)),
    "sqrt(6)": (RAMIFIED, 0, -6, 3, None, None, 6, (0, 1)),
    "sqrt(10)": (RAMIFIED, 0, -10, 3, None, None, 10, (0, 1)),
    "sqrt(5)": (UNRAMIFIED, 1, 1, 0, None, None, 2, (-1, 2)),
}

# Other radicands in the same square class of Q_2*
_DYADIC_ALIASES = {
    "unramified": "sqrt(5)",
    "sqrt(-3)": "sqrt(5)",
    "sqrt(7)": "sqrt(-1)",
    "sqrt(-5)": "sqrt(3)",
    "sqrt(14)": "sqrt(-2)",
    "sqrt(-6)": "sqrt(10)",
    "sqrt(-10)": "sqrt(6)",
}

ODD_TAGS = ("unramified", "sqrt-pi", "sqrt-u-pi")
DYADIC_TAGS = tuple(_DYADIC_CATALOG) + ("unramified",)


def smallest_nonresidue(p: int) -> int:
    return next(u for u in range(2, p) if legendre_symbol(u, p) == -1)


def supported_tags(p: int) -> Tuple[str, ...]:
    return DYADIC_TAGS if p == 2 else ODD_TAGS


def make_extension(p: int, tag: str, precision: int = DEFAULT_PRECISION) -> QuadExt:
    """
    Build a catalog extension and check its invariants.

    Args:
        p: Residue characteristic
        tag: Catalog tag, e.g. "sqrt-pi" or "sqrt(-1)"
        precision: p-adic digits carried by constants

    Returns:
        QuadExt satisfying all catalog invariants

    Raises:
        CatalogError: If p is not prime or the tag is unknown
    """
    if not isinstance(p, int) or p < 2 or not isprime(p):
        raise CatalogError(f"p={p} is not prime")
    key = tag.strip().lower().replace(" ", "")

    if p == 2:
        key = _DYADIC_ALIASES.get(key, key)
        if key not in _DYADIC_CATALOG:
            raise CatalogError(f"unknown tag {tag!r} for p=2; choose from {DYADIC_TAGS}")
        kind, T, N, d, s, u_prime, pi_F, x0 = _DYADIC_CATALOG[key]
        ext = QuadExt(p, key, kind, T, N, d, pi_F, x0, s, u_prime, precision)
    elif key == "sqrt-pi":
        ext = QuadExt(p, key, RAMIFIED, 0, -p, 1, p, (0, 1), precision=precision)
    elif key == "sqrt-u-pi":
        u = smallest_nonresidue(p)
        ext = QuadExt(p, key, RAMIFIED, 0, -u * p, 1, u * p, (0, 1), precision=precision)
    elif key == "unramified":
        D = smallest_nonresidue(p)
        ext = QuadExt(p, key, UNRAMIFIED, 0, -D, 0, p, (0, 1), precision=precision)
    else:
        raise CatalogError(f"unknown tag {tag!r} for p={p}; choose from {ODD_TAGS}")

    validate_extension(ext)
    logger.debug(f"Built extension {ext.tag} over Q_{p}: d={ext.d}, n(psi0)={ext.n_psi0}")
    return ext


def validate_extension(ext: QuadExt) -> None:
    """
    Startup assertions on catalog constants.

    Raises:
        InvariantError: If any structural relation fails
    """
    x0 = ext.x0
    if x0.is_zero() or not x0.trace().is_zero():
        raise InvariantError(f"{ext.tag}: x0 must be nonzero of trace 0")
    if not (x0.conj() + x0).is_zero():
        raise InvariantError(f"{ext.tag}: conj(x0) != -x0")

    if ext.ramified:
        pi, pi_F = ext.pi_K, ext.pi_F
        if pi.valuation() != 1 or pi_F.valuation() != 2:
            raise InvariantError(f"{ext.tag}: uniformizers have wrong valuation")
        if not pi.norm().equals(-pi_F.a):
            raise InvariantError(f"{ext.tag}: N(pi_K) != -pi_F")
        if ext.d % 2:
            if not pi.trace().is_zero() or not (pi * pi).equals(pi_F):
                raise InvariantError(f"{ext.tag}: need tr(pi_K)=0 and pi_K^2=pi_F")
            if ext.d != 2 * ext.t + 1:
                raise InvariantError(f"{ext.tag}: odd d must equal 2t+1")
        else:
            if ext.s is None or ext.u_prime is None or ext.s > ext.t or ext.d != 2 * ext.s:
                raise InvariantError(f"{ext.tag}: inconsistent Eisenstein data")
            coeff = ext.u_prime * ext.pi_F_value ** ext.s
            eisenstein = pi * pi - pi * coeff - pi_F
            if not eisenstein.is_zero():
                raise InvariantError(f"{ext.tag}: Eisenstein relation fails")
            rebuilt = (ext.one + x0) * coeff
            if not rebuilt.divide_int(2).equals(pi):
                raise InvariantError(f"{ext.tag}: pi_K != (pi_F^s u'/2)(1 + x0)")
            if x0.valuation() != 0:
                raise InvariantError(f"{ext.tag}: x0 must be a unit")
    else:
        if ext.d != 0 or x0.valuation() != 0:
            raise InvariantError(f"{ext.tag}: unramified data inconsistent")
        if ext.N % ext.p == 0:
            raise InvariantError(f"{ext.tag}: rho must be a unit")

    # touches the conductor scan and its closed-form assertion
    ext.n_psi0
