"""
Twist Census

For a regular theta and every lambda with lambda|F* = omega, the pair

    s1 = eps(lambda^-1, psi_0),  s2 = eps(lambda^-1 conj(theta)/theta, psi_0)

decides where lambda*theta lands: r_theta+ (1, 1), r_theta- (-1, -1) or
the two primed classes. Counts per conductor are compared with the
closed-form predictions for ramified and unramified K/F.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from app.calculations.characters import (
    CharSet,
    MultChar,
    conductor,
    conjugate,
    expected_stratum_size,
    format_char,
    galois_ops,
    restricts_to_omega,
)
from app.calculations.epsilon import CheckResult, EpsilonEngine
from app.calculations.errors import HypothesisError, InfeasibleError, InvariantError, RegularityError

logger = logging.getLogger(__name__)

PASS = "PASS"
FAIL = "FAIL"
REPORTED = "REPORTED"
INDETERMINATE = "INDETERMINATE"


class OccurrenceClass(str, Enum):
    RPLUS = "Rplus"
    RMINUS = "Rminus"
    RDPLUS = "RDplus"
    RDMINUS = "RDminus"

    @property
    def occurs(self) -> bool:
        return self in (OccurrenceClass.RPLUS, OccurrenceClass.RMINUS)


_CLASS_OF = {
    (1, 1): OccurrenceClass.RPLUS,
    (-1, -1): OccurrenceClass.RMINUS,
    (1, -1): OccurrenceClass.RDPLUS,
    (-1, 1): OccurrenceClass.RDMINUS,
}


class PredictionKind(str, Enum):
    NONE = "none"
    ALL = "all"
    HALF = "half"
    TOTAL_HALF = "total-half"
    EXACT = "exact"
    LOWER_BOUND = "lower-bound"
    ALL_OR_NOTHING = "all-or-nothing"
    PARITY_RULE = "parity-rule"
    UNSPECIFIED = "unspecified"


@dataclass(frozen=True)
class SignPair:
    s1: int
    s2: int

    @property
    def occurrence(self) -> OccurrenceClass:
        return _CLASS_OF[(self.s1, self.s2)]


@dataclass(frozen=True)
class Prediction:
    """
    kind with an optional count k; exact=False marks a bound.

    basis is "theorem" for the ramified table and forced unramified rows,
    "empirical" where no closed form applies.
    """

    kind: PredictionKind
    value: Optional[int] = None
    exact: bool = True
    basis: str = "theorem"

    def describe(self) -> str:
        if self.kind in (PredictionKind.EXACT, PredictionKind.LOWER_BOUND):
            op = "=" if self.exact else ">="
            return f"{self.kind.value}({op}{self.value})"
        return self.kind.value


@dataclass
class CensusRow:
    """Counts for one conductor stratum l = a(lambda)."""

    l: int
    S_plus: int
    S_minus: int
    counts: Dict[str, int]
    prediction: Prediction
    verdict: str
    counterexample: Optional[str] = None
    flagged: List[str] = field(default_factory=list)

    @property
    def occurring(self) -> int:
        return self.counts[OccurrenceClass.RPLUS.value] + self.counts[OccurrenceClass.RMINUS.value]


@dataclass
class CensusReport:
    ext_tag: str
    theta: str
    ratio_conductor: int
    rows: List[CensusRow]
    appendix: List[Dict[str, object]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(row.verdict != FAIL for row in self.rows)


# ============================================================================
# S SETS
# ============================================================================

def build_S_sets(engine: EpsilonEngine, chars: CharSet) -> Dict[int, Tuple[List[MultChar], List[MultChar]]]:
    """
    l -> (S(l), S'(l)) with S the characters of eps(chi^-1, psi_0) = +1.

    Raises:
        InvariantError: If |S(l)| != |S'(l)| on a feasible ramified stratum
    """
    signs = engine.map_signs(chars.chars)
    strata: Dict[int, Tuple[List[MultChar], List[MultChar]]] = {}
    for chi, sign in zip(chars.chars, signs):
        plus, minus = strata.setdefault(chars.conductor(chi), ([], []))
        (plus if sign == 1 else minus).append(chi)

    if engine.ext.ramified:
        for l, (plus, minus) in strata.items():
            if len(plus) != len(minus):
                raise InvariantError(f"|S({l})| = {len(plus)} but |S'({l})| = {len(minus)}")
    return dict(sorted(strata.items()))


def feasible_conductors(ext, n_max: int) -> List[int]:
    return [l for l in range(n_max + 1) if expected_stratum_size(ext, l)]


# ============================================================================
# CLASSIFICATION
# ============================================================================

def classify_occurrence(engine: EpsilonEngine, lam: MultChar, theta: MultChar,
                        ratio: Optional[MultChar] = None) -> Tuple[SignPair, OccurrenceClass]:
    """
    Sign pair and class of lambda * theta.

    Raises:
        RegularityError: If theta = conj(theta)
        HypothesisError: If lambda does not restrict to omega
    """
    if ratio is None:
        _, ratio, regular = galois_ops(theta)
        if not regular:
            raise RegularityError(f"theta {format_char(theta)} is not regular")
    if not restricts_to_omega(lam):
        raise HypothesisError(f"lambda {format_char(lam)} does not restrict to omega")
    pair = SignPair(engine.epsilon_sign(lam), engine.epsilon_sign(lam * ratio))
    return pair, pair.occurrence


# ============================================================================
# PREDICTIONS
# ============================================================================

def predict_count(ext, a_ratio: int, l: int) -> Prediction:
    """
    Closed-form prediction for lambda of conductor l against a(theta/conj theta).

    Raises:
        InfeasibleError: If l or a_ratio cannot occur for ext
    """
    if not expected_stratum_size(ext, l):
        raise InfeasibleError(f"no lambda of conductor {l} for {ext.tag}")
    if a_ratio < 0 or (ext.ramified and a_ratio % 2) or (not ext.ramified and a_ratio == 0):
        raise InfeasibleError(f"a(theta/conj theta) = {a_ratio} is impossible for {ext.tag}")

    if not ext.ramified:
        if l > a_ratio:
            return Prediction(PredictionKind.ALL)
        if l < a_ratio:
            kind = PredictionKind.ALL if (a_ratio - l) % 2 == 0 else PredictionKind.NONE
            return Prediction(kind)
        return Prediction(PredictionKind.PARITY_RULE, basis="empirical")

    q, d = ext.q, ext.d
    if l == 2 * d - 1:
        if a_ratio == 0:
            return Prediction(PredictionKind.NONE)
        if a_ratio < 2 * d - 1:
            return Prediction(PredictionKind.HALF)
        return Prediction(PredictionKind.TOTAL_HALF)

    f = (l - 2 * d) // 2
    if a_ratio <= 2 * f:
        return Prediction(PredictionKind.ALL)
    if a_ratio == 2 * f + 2 and a_ratio < l:
        return Prediction(PredictionKind.EXACT, (q - 2) // 2 * q ** (f + d - 1))
    if 2 * f + 2 < a_ratio < l:
        return Prediction(PredictionKind.HALF)
    if a_ratio == l:
        return Prediction(PredictionKind.LOWER_BOUND, q ** (f + d - 1), exact=(q == 2))
    if a_ratio < l + 2 * d:
        return Prediction(PredictionKind.TOTAL_HALF)
    return Prediction(PredictionKind.ALL_OR_NOTHING)


def _judge(prediction: Prediction, S_plus: int, S_minus: int,
           counts: Dict[str, int], rule_failures: List[str]) -> bool:
    rp = counts[OccurrenceClass.RPLUS.value]
    rm = counts[OccurrenceClass.RMINUS.value]
    total = S_plus + S_minus
    kind = prediction.kind
    if kind == PredictionKind.NONE:
        return rp + rm == 0
    if kind == PredictionKind.ALL:
        return rp + rm == total
    if kind == PredictionKind.HALF:
        return 2 * rp == S_plus and 2 * rm == S_minus
    if kind == PredictionKind.TOTAL_HALF:
        return 2 * (rp + rm) == total
    if kind == PredictionKind.EXACT:
        return rp == prediction.value and rm == prediction.value
    if kind == PredictionKind.LOWER_BOUND:
        if prediction.exact:
            return rp + rm == prediction.value
        return rp + rm >= prediction.value
    if kind == PredictionKind.ALL_OR_NOTHING:
        return (rp == S_plus and rm == 0) or (rp == 0 and rm == S_minus)
    if kind == PredictionKind.PARITY_RULE:
        return not rule_failures
    return True


# ============================================================================
# CENSUS
# ============================================================================

def census(engine: EpsilonEngine, chars: CharSet, theta: MultChar,
           strata: Optional[Dict[int, Tuple[List[MultChar], List[MultChar]]]] = None) -> CensusReport:
    """
    Classify every twist lambda * theta, lambda in chars, by conductor.

    Raises:
        RegularityError: If theta is not regular
    """
    ext = engine.ext
    _, ratio, regular = galois_ops(theta)
    if not regular:
        raise RegularityError(f"theta {format_char(theta)} is not regular")
    a_ratio = conductor(ratio)
    strata = strata if strata is not None else build_S_sets(engine, chars)

    rows: List[CensusRow] = []
    for l in feasible_conductors(ext, chars.n_max):
        plus, minus = strata.get(l, ([], []))
        members = plus + minus
        twisted = [lam * ratio for lam in members]
        s2 = engine.map_signs(twisted)
        s1 = [1] * len(plus) + [-1] * len(minus)

        counts = {c.value: 0 for c in OccurrenceClass}
        occurrences: List[bool] = []
        for a, b in zip(s1, s2):
            cls = SignPair(a, b).occurrence
            counts[cls.value] += 1
            occurrences.append(cls.occurs)

        prediction = predict_count(ext, a_ratio, l)
        rule_failures: List[str] = []
        flagged: List[str] = []
        if prediction.kind == PredictionKind.PARITY_RULE:
            for lam, lam_r, occurs in zip(members, twisted, occurrences):
                a_twist = conductor(lam_r)
                if a_twist == l:
                    # equal-conductor subcase: occurrence is claimed, only flagged
                    if not occurs:
                        flagged.append(format_char(lam))
                elif occurs != ((a_twist - l) % 2 == 0):
                    rule_failures.append(format_char(lam))

        ok = _judge(prediction, len(plus), len(minus), counts, rule_failures)
        if prediction.kind == PredictionKind.UNSPECIFIED:
            verdict = REPORTED
        else:
            verdict = PASS if ok else FAIL
        counterexample = None
        if not ok:
            counterexample = rule_failures[0] if rule_failures else _first_offender(
                prediction, members, occurrences)
        rows.append(CensusRow(l, len(plus), len(minus), counts, prediction, verdict,
                              counterexample, flagged))
        if verdict == FAIL:
            logger.warning(
                f"{ext.tag}: theta {format_char(theta)} l={l}: {counts} vs "
                f"{prediction.describe()}, first offender {counterexample}"
            )

    return CensusReport(ext.tag, format_char(theta), a_ratio, rows)


def _first_offender(prediction: Prediction, members: Sequence[MultChar],
                    occurrences: Sequence[bool]) -> Optional[str]:
    """First lambda on the wrong side of the prediction, in canonical order."""
    want_occurs = prediction.kind != PredictionKind.NONE
    for lam, occurs in zip(members, occurrences):
        if occurs != want_occurs:
            return format_char(lam)
    return format_char(members[0]) if members else None


# ============================================================================
# SUITE
# ============================================================================

@dataclass
class SuiteVerdict:
    ext_tag: str
    theta: str
    ratio_conductor: int
    l: int
    verdict: str
    prediction: str
    counterexample: Optional[str] = None


def verify_suite(engine: EpsilonEngine, chars: CharSet, thetas: Sequence[MultChar],
                 stop_on_fail: bool = True,
                 strata: Optional[Dict[int, Tuple[List[MultChar], List[MultChar]]]] = None,
                 ) -> Tuple[List[CensusReport], List[SuiteVerdict]]:
    """
    Census for every theta; one verdict per (theta, l).

    The run stops at the first FAIL when stop_on_fail is set. The failing
    report is cut after its first FAIL row, which carries the
    counterexample.
    """
    strata = strata if strata is not None else build_S_sets(engine, chars)
    reports: List[CensusReport] = []
    verdicts: List[SuiteVerdict] = []
    for theta in thetas:
        report = census(engine, chars, theta, strata)
        first_fail = next((i for i, row in enumerate(report.rows) if row.verdict == FAIL), None)
        if stop_on_fail and first_fail is not None:
            report.rows = report.rows[:first_fail + 1]
        reports.append(report)
        for row in report.rows:
            verdicts.append(SuiteVerdict(
                report.ext_tag, report.theta, report.ratio_conductor, row.l,
                row.verdict, row.prediction.describe(), row.counterexample,
            ))
        if stop_on_fail and first_fail is not None:
            row = report.rows[-1]
            logger.error(f"{report.ext_tag}: census failed for theta {report.theta} at l={row.l}, "
                         f"counterexample {row.counterexample}")
            break
    passed = sum(1 for v in verdicts if v.verdict == PASS)
    logger.info(f"{engine.ext.tag}: {passed}/{len(verdicts)} census cells PASS over {len(reports)} theta")
    return reports, verdicts


# ============================================================================
# CROSS-CHECKS
# ============================================================================

def occurrence_profile(report: CensusReport) -> Dict[int, int]:
    return {row.l: row.occurring for row in report.rows}


def unit_scalar(p: int) -> int:
    """Smallest integer > 1 prime to p."""
    return 3 if p == 2 else 2


def check_x0_rescaling(engine: EpsilonEngine, chars: CharSet, theta: MultChar,
                       scalar: Optional[int] = None) -> CheckResult:
    """Occurrence counts are unchanged when x0 is replaced by k * x0."""
    ext = engine.ext
    k = scalar if scalar is not None else unit_scalar(ext.p)
    moved_ext = replace(ext, x0_coords=(k * ext.x0_coords[0], k * ext.x0_coords[1]))
    if moved_ext.n_psi0 != ext.n_psi0:
        raise HypothesisError(f"scaling x0 by {k} changes n(psi_0)")
    moved = EpsilonEngine(replace(engine.space, ext=moved_ext), engine.dps, engine.max_dps, engine.workers)

    base = occurrence_profile(census(engine, chars, theta))
    other = occurrence_profile(census(moved, chars, theta))
    return CheckResult("x0_rescaling", base == other, len(base),
                       {"scalar": k, "base": base, "rescaled": other})


def check_conjugate_symmetry(engine: EpsilonEngine, chars: CharSet, theta: MultChar) -> CheckResult:
    """Conjugating lambda and theta together preserves the class counts per conductor."""
    _, ratio, _ = galois_ops(theta)
    _, ratio_bar, _ = galois_ops(conjugate(theta))
    mismatched = []
    by_l: Dict[int, Dict[str, int]] = {}
    for lam in chars.chars:
        l = chars.conductor(lam)
        _, cls = classify_occurrence(engine, lam, theta, ratio)
        _, cls_bar = classify_occurrence(engine, conjugate(lam), conjugate(theta), ratio_bar)
        tally = by_l.setdefault(l, {})
        tally[cls.value] = tally.get(cls.value, 0) + 1
        tally[cls_bar.value] = tally.get(cls_bar.value, 0) - 1
    for l, tally in by_l.items():
        if any(tally.values()):
            mismatched.append(l)
    return CheckResult("conjugate_symmetry", not mismatched, len(chars.chars), {"mismatched": mismatched})
