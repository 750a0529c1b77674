"""
Epsilon Factors

Local epsilon factors as exact Gauss sums:

    eps(chi, psi) = chi(c) q_K^(-a/2) sum_{y in U_K/U_K^a} chi^-1(y) psi(y/c)

with v_K(c) = a(chi) + n(psi) and c a pure power of pi_K. Additive
values are histogrammed over a common root order and reduced exactly in
Z[zeta]; signs are certified in the cyclotomic module.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.calculations.characters import (
    CharSet,
    CharacterSpace,
    MultChar,
    conductor,
    format_char,
    mu_char,
    omega_char,
)
from app.calculations.cyclotomic import (
    DEFAULT_DPS,
    CycInt,
    EpsilonValue,
    QHalfScaled,
    certified_sign,
    epsilon_normalize,
    lcm,
)
from app.calculations.errors import (
    HypothesisError,
    InvariantError,
    ModulusMismatchError,
    NotUnimodularError,
)
from app.calculations.padic import KElem, PAdic, QuadExt, psi_frac

logger = logging.getLogger(__name__)

PSI0 = "psi0"
PSIK = "psiK"
ADDITIVE_ALIASES = {"psi0": PSI0, "psiK": PSIK, "psiF": PSIK}


@dataclass(frozen=True)
class GaussSumResult:
    """One Gauss sum and the epsilon factor built from it."""

    chi: MultChar
    additive: str
    conductor: int
    c_exponent: int
    raw: CycInt
    eps: EpsilonValue


@dataclass(frozen=True)
class SignRecord:
    """Certified signs of eps(chi^-1, psi0) and eps(chi, psi0)."""

    inverse: int
    direct: int


@dataclass
class CheckResult:
    """Outcome of one exact cross-check."""

    name: str
    passed: bool
    checked: int = 0
    detail: Dict[str, object] = field(default_factory=dict)


def additive_conductor(ext: QuadExt, additive: str) -> int:
    """n(psi_0) from the direct scan, or d for psi_K = psi o tr."""
    return ext.n_psi0 if additive == PSI0 else ext.d


def _additive_coefficients(ext: QuadExt, additive: str, c: KElem) -> Tuple[Fraction, Fraction]:
    """
    (A, B) with psi(y / c) = e^{2 pi i (a_y A + b_y B)} for integral
    y = a_y + b_y alpha.
    """
    z = c.inverse()
    if additive == PSI0:
        z = (z * ext.x0 * -1).divide_int(2)
    A = psi_frac(z.trace()).exponent
    B = psi_frac((z * ext.alpha).trace()).exponent
    return A, B


def _additive_exponents(pairs_a: np.ndarray, pairs_b: np.ndarray,
                        A: Fraction, B: Fraction, L: int) -> np.ndarray:
    """a A + b B as integers mod L (L a multiple of both denominators)."""
    ka = int(A * L)
    kb = int(B * L)
    return (pairs_a * ka + pairs_b * kb) % L


def _normalize_additive(additive: str) -> str:
    try:
        return ADDITIVE_ALIASES[additive]
    except KeyError:
        raise ValueError(f"unknown additive character: {additive}") from None


# ============================================================================
# ENGINE
# ============================================================================

class EpsilonEngine:
    """
    Gauss sums and certified epsilon signs over one character space.

    Sign lookups are memoized by character encoding; writes are
    idempotent, so concurrent workers may race on a key harmlessly.
    """

    def __init__(
        self,
        space: CharacterSpace,
        dps: int = DEFAULT_DPS,
        max_dps: Optional[int] = None,
        workers: int = 1,
        flip: Optional[Callable[[MultChar], bool]] = None,
    ):
        self.space = space
        self.ext = space.ext
        self.dps = dps
        self.max_dps = max(max_dps or 4 * dps, dps)
        self.workers = max(1, workers)
        self.flip = flip
        self._signs: Dict[str, SignRecord] = {}
        self._lock = threading.Lock()
        self.computed = 0
        self.memo_hits = 0

    # ------------------------------------------------------------------

    def gauss_sum(self, chi: MultChar, additive: str = PSI0,
                  unit: Optional[KElem] = None) -> GaussSumResult:
        """
        Gauss sum of chi against psi_0 or psi_K.

        Args:
            chi: Character of the engine's space
            additive: "psi0", or "psiK" (alias "psiF") for psi o tr
            unit: Optional unit u replacing c by c * u

        Returns:
            GaussSumResult with the unresolved epsilon value

        Raises:
            ModulusMismatchError: If |G|^2 != q_K^a(chi)
        """
        additive = _normalize_additive(additive)
        ext, G = self.ext, self.space.group
        a = conductor(chi)
        e = a + additive_conductor(ext, additive)
        c = ext.pi_K ** e
        chi_c_exp = (e * chi.pi_value) % chi.M
        if unit is not None:
            c = c * unit
            chi_c_exp = (chi_c_exp + chi.exponent_at(unit)) % chi.M

        reps = G.representatives(a)
        ya, yb = G.split(reps)
        A, B = _additive_coefficients(ext, additive, c)
        L = lcm(chi.M, lcm(A.denominator, B.denominator))
        additive_part = _additive_exponents(ya, yb, A, B, L)
        char_part = (-chi.unit_exponents(reps) * (L // chi.M)) % L
        counts = np.bincount((char_part + additive_part) % L, minlength=L)
        raw = CycInt.from_histogram(counts, L)

        chi_c = CycInt.zeta(chi_c_exp, chi.M)
        eps = epsilon_normalize(raw, chi_c, a, ext.p, ext.residue_degree)
        return GaussSumResult(chi, additive, a, e, raw, eps)

    def epsilon(self, chi: MultChar, additive: str = PSI0) -> QHalfScaled:
        return self.gauss_sum(chi, additive).eps.raw

    def _certify(self, value: QHalfScaled) -> int:
        return certified_sign(value, self.dps, self.max_dps)

    def sign_record(self, chi: MultChar) -> SignRecord:
        """
        Both signs for chi with chi|F* = omega, memoized.

        Raises:
            InvariantError: If eps(chi^-1) != omega(-1) eps(chi)
        """
        key = format_char(chi)
        with self._lock:
            cached = self._signs.get(key)
        if cached is not None:
            self.memo_hits += 1
            return cached

        inverse = self._certify(self.epsilon(chi.inverse()))
        direct = self._certify(self.epsilon(chi))
        if inverse != self.space.omega.at_minus_one * direct:
            raise InvariantError(
                f"eps(chi^-1) = {inverse} but omega(-1) eps(chi) = "
                f"{self.space.omega.at_minus_one * direct} for {key}"
            )
        record = SignRecord(inverse, direct)
        with self._lock:
            self._signs.setdefault(key, record)
            self.computed += 1
        logger.debug(f"eps signs for {key}: inverse {inverse}, direct {direct}")
        return record

    def epsilon_sign(self, chi: MultChar) -> int:
        """Certified sign of eps(chi^-1, psi_0)."""
        sign = self.sign_record(chi).inverse
        if self.flip is not None and self.flip(chi):
            sign = -sign
        return sign

    def map_signs(self, chars: Sequence[MultChar]) -> List[int]:
        """epsilon_sign over many characters, in input order."""
        if self.workers == 1 or len(chars) < 2:
            return [self.epsilon_sign(chi) for chi in chars]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(self.epsilon_sign, chars))

    def preload(self, records: Dict[str, Tuple[int, int]]) -> None:
        """Seed the memo from a cache table."""
        with self._lock:
            for key, (inverse, direct) in records.items():
                self._signs.setdefault(key, SignRecord(int(inverse), int(direct)))

    def export_signs(self) -> Dict[str, Tuple[int, int]]:
        with self._lock:
            return {k: (r.inverse, r.direct) for k, r in sorted(self._signs.items())}

    # ------------------------------------------------------------------
    # y search for the twisting formulas

    def find_y(self, alpha: MultChar, additive: str = PSI0) -> Tuple[int, int, int]:
        """
        y_alpha with alpha(1 + x) = psi(y_alpha x) for v_K(x) >= a/2.

        Returns (a_u, b_u, e) with y_alpha = (a_u + b_u alpha) / pi_K^e,
        e = a(alpha) + n(psi).

        Raises:
            InvariantError: If no unit solves the defining relation
        """
        additive = _normalize_additive(additive)
        ext, G = self.ext, self.space.group
        a = conductor(alpha)
        e = a + additive_conductor(ext, additive)
        if a == 0:
            return 1, 0, e

        reps = G.representatives(a // 2)
        ua, ub = G.split(reps)
        c = ext.pi_K ** e
        good = np.ones(len(reps), dtype=bool)
        for x in self._additive_generators((a + 1) // 2, a):
            A, B = _additive_coefficients(ext, additive, c * x.inverse())
            L = lcm(alpha.M, lcm(A.denominator, B.denominator))
            lhs = (alpha.exponent_at(ext.one + x) * (L // alpha.M)) % L
            good &= _additive_exponents(ua, ub, A, B, L) == lhs
        hits = np.flatnonzero(good)
        if len(hits) != 1:
            raise InvariantError(
                f"found {len(hits)} solutions y for {format_char(alpha)} modulo P^{a // 2}"
            )
        return int(ua[hits[0]]), int(ub[hits[0]]), e

    def _additive_generators(self, lo: int, hi: int) -> List[KElem]:
        ext = self.ext
        gens = []
        for j in range(lo, hi):
            base = ext.pi_K ** j
            gens.append(base)
            if not ext.ramified:
                gens.append(base * ext.alpha)
        return gens

    def _exponent_at_y(self, beta: MultChar, y: Tuple[int, int, int]) -> int:
        ua, ub, e = y
        return (beta.exponent_at_pair((ua, ub)) - e * beta.pi_value) % beta.M

    # ------------------------------------------------------------------

    def deligne_check(self, alpha: MultChar, beta: MultChar) -> CheckResult:
        """
        eps(alpha beta, psi_0) == beta^-1(y_alpha) eps(alpha, psi_0), exactly.

        Raises:
            HypothesisError: If a(alpha) < 2 a(beta)
        """
        a_alpha, a_beta = conductor(alpha), conductor(beta)
        if a_alpha < 2 * a_beta:
            raise HypothesisError(f"need a(alpha) >= 2 a(beta), have {a_alpha} < 2*{a_beta}")
        y = self.find_y(alpha, PSI0)
        twist = CycInt.zeta(-self._exponent_at_y(beta, y), beta.M)
        lhs = self.epsilon(alpha * beta)
        rhs = QHalfScaled(twist, self.ext.p, 0) * self.epsilon(alpha)
        passed = lhs.equals(rhs, self.dps, self.max_dps)
        return CheckResult("deligne", passed, 1, {
            "alpha": format_char(alpha), "beta": format_char(beta),
            "a_alpha": a_alpha, "a_beta": a_beta,
        })

    def eq1_check(self, chi: MultChar, omega_tilde: MultChar) -> CheckResult:
        """
        eps(chi, psi_0) == omega~(-x0/2) omega~^-1(y) with y solving
        chi omega~^-1 (1 + x) = psi_K(y x).

        Raises:
            HypothesisError: If a(chi) < 2 a(omega~)
        """
        a_chi, a_w = conductor(chi), conductor(omega_tilde)
        if a_chi < 2 * a_w:
            raise HypothesisError(f"need a(chi) >= 2 a(omega~), have {a_chi} < 2*{a_w}")
        y = self.find_y(chi * omega_tilde.inverse(), PSIK)
        M = chi.M
        point = (self.ext.x0 * -1).divide_int(2)
        exp = (omega_tilde.exponent_at(point) - self._exponent_at_y(omega_tilde, y)) % M
        rhs = QHalfScaled(CycInt.zeta(exp, M), self.ext.p, 0)
        passed = self.epsilon(chi).equals(rhs, self.dps, self.max_dps)
        return CheckResult("eq1", passed, 1, {
            "chi": format_char(chi), "omega_tilde": format_char(omega_tilde),
        })

    def deligne_checks(self, chars: CharSet, max_pairs: int = 200) -> List[CheckResult]:
        """
        Both twisting checks over admissible pairs drawn from chars in
        canonical order.
        """
        space = self.space
        betas = [space.trivial(), mu_char(space)] + list(chars.chars)
        pairs = [
            (alpha, beta)
            for alpha in chars.chars
            for beta in betas
            if chars.conductor(alpha) >= 2 * conductor(beta)
        ]
        results = [self.deligne_check(alpha, beta) for alpha, beta in pairs[:max_pairs]]

        if self.ext.ramified:
            stratum = chars.stratum(2 * self.ext.d - 1)
            eq1_pairs = [
                (chi, w)
                for chi in chars.chars
                for w in stratum
                if chars.conductor(chi) >= 2 * chars.conductor(w)
            ]
            results.extend(self.eq1_check(chi, w) for chi, w in eq1_pairs[:max_pairs])
        return results

    def check_choice_independence(self, chi: MultChar, unit: Optional[KElem] = None) -> CheckResult:
        """The epsilon value is unchanged when c is replaced by c * u."""
        u = unit if unit is not None else self.ext.one + self.ext.alpha * self.ext.p
        base = self.gauss_sum(chi).eps.raw
        moved = self.gauss_sum(chi, unit=u).eps.raw
        passed = base.equals(moved, self.dps, self.max_dps)
        return CheckResult("choice_independence", passed, 1, {"chi": format_char(chi)})

    def check_unramified_closed_form(self, chars: CharSet) -> CheckResult:
        """eps(chi^-1, psi_0) = (-1)^(a(chi) + t) for unramified K."""
        if self.ext.ramified:
            raise HypothesisError("closed form applies to unramified extensions")
        failures = []
        signs = self.map_signs(chars.chars)
        for chi, sign in zip(chars.chars, signs):
            expected = (-1) ** (chars.conductor(chi) + self.ext.t)
            if sign != expected:
                failures.append(format_char(chi))
        return CheckResult("unramified_closed_form", not failures, len(chars.chars),
                           {"failures": failures[:5]})

    def check_unimodular(self, chars: CharSet) -> CheckResult:
        """|G|^2 = q_K^a and eps * conj(eps) = 1 for every chi."""
        one = QHalfScaled(CycInt.one(), self.ext.p, 0)
        failures = []
        for chi in chars.chars:
            try:
                value = self.epsilon(chi)
                if not (value * value.conj()).equals(one, self.dps, self.max_dps):
                    raise NotUnimodularError(f"|eps|^2 = {value * value.conj()}")
            except (ModulusMismatchError, NotUnimodularError) as exc:
                logger.error(f"{self.ext.tag}: {format_char(chi)}: {exc}")
                failures.append(format_char(chi))
        return CheckResult("unimodular", not failures, len(chars.chars),
                           {"failures": failures[:5], "failed": len(failures)})


# ============================================================================
# EPSILON OF OMEGA
# ============================================================================

def _omega_gauss_value(ext: QuadExt) -> EpsilonValue:
    """eps(omega, psi) for psi of conductor 0; 1 when omega is unramified."""
    omega = omega_char(ext)
    d = omega.conductor
    if d == 0:
        one = QHalfScaled(CycInt.one(), ext.p, 0)
        return EpsilonValue(sign=1, raw=one, resolved=True)

    inv = PAdic.from_number(ext.p, ext.pi_F_value, ext.precision).inverse()
    inv_d = inv
    for _ in range(d - 1):
        inv_d = inv_d * inv
    units = [u for u in range(1, ext.p ** d) if u % ext.p]
    fracs = [psi_frac(inv_d.scale(u)).exponent for u in units]
    L = 2
    for f in fracs:
        L = lcm(L, f.denominator)
    exps = [(int(f * L) + (0 if omega.value(u) == 1 else L // 2)) % L for u, f in zip(units, fracs)]
    raw = CycInt.from_histogram(np.bincount(exps, minlength=L), L)
    prefactor = CycInt.integer(omega.at_pi_F ** d)
    return epsilon_normalize(raw, prefactor, d, ext.p, 1)


def epsilon_omega(ext: QuadExt) -> EpsilonValue:
    """
    eps(omega, psi) for ramified K.

    Raises:
        HypothesisError: If K/F is unramified
        InvariantError: If omega(-1) eps(omega, psi)^2 != 1
    """
    if not ext.ramified:
        raise HypothesisError("epsilon_omega needs a ramified extension")
    value = _omega_gauss_value(ext)
    omega = omega_char(ext)
    square = value.raw.square()
    target = QHalfScaled(CycInt.integer(omega.at_minus_one), ext.p, 0)
    if not square.equals(target):
        raise InvariantError(f"omega(-1) eps(omega, psi)^2 != 1 for {ext.tag}")
    return value


def omega_epsilon_flags(ext: QuadExt, value: Optional[QHalfScaled] = None) -> Dict[str, object]:
    """Report data for eps(omega, psi), including the d-odd square form."""
    value = value if value is not None else _omega_gauss_value(ext).raw
    one = QHalfScaled(CycInt.one(), ext.p, 0)
    omega_minus_one = omega_char(ext).at_minus_one
    square = value.square()
    return {
        "value": str(value),
        "approx": [round(value.approx().real, 12), round(value.approx().imag, 12)],
        "omega_minus_one": omega_minus_one,
        "square_is_one": square.equals(one),
        "unimodular": (value * value.conj()).equals(one),
        "twisted_square_is_one": square.equals(QHalfScaled(CycInt.integer(omega_minus_one), ext.p, 0)),
    }


def check_epsilon_omega(ext: QuadExt, value: Optional[QHalfScaled] = None) -> CheckResult:
    """|eps(omega, psi)| = 1 and omega(-1) eps(omega, psi)^2 = 1."""
    flags = omega_epsilon_flags(ext, value)
    passed = bool(flags["unimodular"] and flags["twisted_square_is_one"])
    if not passed:
        logger.error(f"{ext.tag}: eps(omega, psi) = {flags['value']} breaks omega(-1) eps^2 = 1")
    return CheckResult("epsilon_omega", passed, 1, flags)


def epsilon_omega_value(ext: QuadExt) -> QHalfScaled:
    """eps(omega, psi) as a value, 1 for unramified K."""
    return _omega_gauss_value(ext).raw
