"""
Summation Identities

Exact checks of the character-sum identities over the sets
S = {chi : chi|F* = omega, eps(chi^-1, psi_0) = 1} and S' (sign -1):

* stratum sums at x = 1 + pi_F^(r-1) pi_K x' (sum classification),
* the full sum over S against omega(-1) eps(omega, psi)
  omega((x - conj x)/(x0 - conj x0)) |(x - conj x)^2 / (x conj x)|^(-1/2).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.calculations.census import FAIL, INDETERMINATE, PASS, build_S_sets, feasible_conductors
from app.calculations.characters import CharSet, MultChar
from app.calculations.cyclotomic import CycInt, QHalfScaled
from app.calculations.epsilon import EpsilonEngine, epsilon_omega_value
from app.calculations.errors import HypothesisError, InfeasibleError
from app.calculations.padic import KElem

logger = logging.getLogger(__name__)


@dataclass
class IdentityResult:
    name: str
    verdict: str
    detail: Dict[str, object] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict != FAIL


def _character_sum(chars: Sequence[MultChar], x: KElem, M: int) -> CycInt:
    """sum chi(x) over chars, exactly."""
    exps = [chi.exponent_at(x) for chi in chars]
    if not exps:
        return CycInt.zero(M)
    return CycInt.from_histogram(np.bincount(exps, minlength=M), M)


def twisted_epsilon_term(engine: EpsilonEngine, x: KElem, with_sign: bool = True) -> QHalfScaled:
    """
    [omega(-1)] eps(omega, psi) omega((x - conj x)/(x0 - conj x0)) |(x - conj x)^2/(x conj x)|^(-1/2).

    Raises:
        HypothesisError: If x lies in F
    """
    ext = engine.ext
    omega = engine.space.omega
    diff = x - x.conj()
    if diff.is_zero():
        raise HypothesisError("x must lie in K* - F*")
    x0 = ext.x0
    ratio = diff * (x0 - x0.conj()).inverse()
    sign = omega.value_padic(ratio.base_part())
    if with_sign:
        sign *= omega.at_minus_one

    square = (diff * diff).base_part()
    v = square.valuation() - x.norm().valuation()
    eps = epsilon_omega_value(ext)
    return QHalfScaled(eps.cyc * sign, ext.p, eps.halfpow + v)


# ============================================================================
# SUM CLASSIFICATION
# ============================================================================

def check_sumclass(engine: EpsilonEngine, chars: CharSet, r: int, m: int,
                   x_prime: Optional[KElem] = None,
                   strata: Optional[Dict[int, Tuple[List[MultChar], List[MultChar]]]] = None) -> IdentityResult:
    """
    Stratum sums over S(l), S'(l) at x = 1 + pi_F^(r-1) pi_K x', l = 2r + 2m.

    Expected: -q^(r-1) for m = 0; +T on S and -T on S' for m = d - 1;
    0 otherwise. For d = 1 the first two coincide in m and the candidates
    m = 0, m = d - 1 and their sum are all evaluated.

    Raises:
        HypothesisError: For an unramified extension or r < 1
        InfeasibleError: If l is not a conductor and the expected sum is nonzero
    """
    ext = engine.ext
    if not ext.ramified:
        raise HypothesisError("sum classification needs a ramified extension")
    if r < 1 or m < 0:
        raise HypothesisError(f"need r >= 1 and m >= 0, got r={r}, m={m}")
    l = 2 * r + 2 * m
    if l > chars.n_max:
        raise HypothesisError(f"l={l} above enumerated conductor bound {chars.n_max}")

    x_prime = x_prime if x_prime is not None else ext.one
    x = ext.one + ext.pi_F ** (r - 1) * ext.pi_K * x_prime
    strata = strata if strata is not None else build_S_sets(engine, chars)
    plus, minus = strata.get(l, ([], []))
    M = chars.space.M
    sum_plus = QHalfScaled(_character_sum(plus, x, M), ext.p)
    sum_minus = QHalfScaled(_character_sum(minus, x, M), ext.p)

    d, q = ext.d, ext.q
    zero = QHalfScaled(CycInt.zero(), ext.p)
    base = QHalfScaled(CycInt.integer(-q ** (r - 1)), ext.p)
    T = twisted_epsilon_term(engine, x)
    neg_T = QHalfScaled(-T.cyc, T.q, T.halfpow)

    if d == 1 and m == 0:
        candidates = {
            "m0": (base, base),
            "m_d-1": (T, neg_T),
            "combined": (_add(base, T), _add(base, neg_T)),
        }
    elif m == 0:
        candidates = {"m0": (base, base)}
    elif m == d - 1:
        candidates = {"m_d-1": (T, neg_T)}
    else:
        candidates = {"zero": (zero, zero)}

    feasible = bool(plus or minus)
    detail: Dict[str, object] = {
        "r": r, "m": m, "l": l,
        "S_sum": str(sum_plus), "S_prime_sum": str(sum_minus),
        "S_size": len(plus), "S_prime_size": len(minus),
    }
    if not feasible:
        if all(a.is_zero() and b.is_zero() for a, b in candidates.values()):
            detail["note"] = "vacuous: no character of this conductor"
            return IdentityResult("sumclass", PASS, detail)
        raise InfeasibleError(f"l={l} is not a conductor for {ext.tag}")

    matches = [
        name for name, (want_plus, want_minus) in candidates.items()
        if sum_plus.equals(want_plus, engine.dps, engine.max_dps)
        and sum_minus.equals(want_minus, engine.dps, engine.max_dps)
    ]
    detail["candidates"] = {name: [str(a), str(b)] for name, (a, b) in candidates.items()}
    detail["matched"] = matches
    verdict = PASS if matches else FAIL
    if verdict == FAIL:
        logger.warning(f"{ext.tag}: sum classification failed at r={r}, m={m}: {detail}")
    return IdentityResult("sumclass", verdict, detail)


def _add(a: QHalfScaled, b: QHalfScaled) -> QHalfScaled:
    """Sum of values whose halfpow parities agree."""
    if (a.halfpow - b.halfpow) % 2:
        raise ValueError("cannot add values of different halfpow parity exactly")
    h = min(a.halfpow, b.halfpow)
    x = a.cyc * a.q ** ((a.halfpow - h) // 2)
    y = b.cyc * b.q ** ((b.halfpow - h) // 2)
    return QHalfScaled(x + y, a.q, h)


# ============================================================================
# MAIN IDENTITY
# ============================================================================

def check_main_identity(engine: EpsilonEngine, chars: CharSet, x: KElem,
                        n: Optional[int] = None,
                        strata: Optional[Dict[int, Tuple[List[MultChar], List[MultChar]]]] = None) -> IdentityResult:
    """
    Partial sums of chi(x) over S up to conductor n against the closed form.

    The cutoff is accepted when the two highest feasible strata up to n
    both contribute zero; otherwise the verdict is INDETERMINATE. The
    sum over the characters with eps(chi, psi_0) = 1 is reported beside
    it, compared with the closed form without omega(-1).

    Raises:
        HypothesisError: If x lies in F
    """
    ext = engine.ext
    n = chars.n_max if n is None else min(n, chars.n_max)
    strata = strata if strata is not None else build_S_sets(engine, chars)
    target = twisted_epsilon_term(engine, x, with_sign=True)
    target_original = twisted_epsilon_term(engine, x, with_sign=False)
    M = chars.space.M

    flip = engine.space.omega.at_minus_one == -1
    total = CycInt.zero(M)
    total_original = CycInt.zero(M)
    contributions: Dict[int, str] = {}
    for l in feasible_conductors(ext, n):
        plus, minus = strata.get(l, ([], []))
        part = _character_sum(plus, x, M)
        # eps(chi, psi0) = omega(-1) eps(chi^-1, psi0)
        part_original = _character_sum(minus if flip else plus, x, M)
        total = total + part
        total_original = total_original + part_original
        contributions[l] = str(part)

    feasible = feasible_conductors(ext, n)
    tail = feasible[-2:]
    stabilized = len(tail) == 2 and all(contributions[l] == "0" for l in tail)

    lhs = QHalfScaled(total, ext.p)
    lhs_original = QHalfScaled(total_original, ext.p)
    matches = lhs.equals(target, engine.dps, engine.max_dps)
    matches_original = lhs_original.equals(target_original, engine.dps, engine.max_dps)
    if not stabilized:
        verdict = INDETERMINATE
    else:
        verdict = PASS if matches else FAIL

    detail = {
        "cutoff": n,
        "stabilized": stabilized,
        "contributions": contributions,
        "sum": str(lhs),
        "expected": str(target),
        "matches": matches,
        "original_convention_sum": str(lhs_original),
        "original_convention_expected": str(target_original),
        "original_convention_matches": matches_original,
    }
    if verdict == FAIL:
        logger.warning(f"{ext.tag}: main identity failed: {detail}")
    return IdentityResult("main_identity", verdict, detail)
