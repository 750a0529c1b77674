"""
Command runners.

Each runner turns a validated RunConfig into a ReportDocument plus a
stats dictionary (timings and cache counters) that is kept out of the
report so that reports stay byte-identical across runs.
"""

import logging
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.calculations.census import (
    FAIL,
    INDETERMINATE,
    PASS,
    CensusReport,
    check_conjugate_symmetry,
    check_x0_rescaling,
    feasible_conductors,
    verify_suite,
)
from app.calculations.characters import (
    MultChar,
    expected_stratum_size,
    format_char,
    parse_char,
    pick_thetas,
    restricts_to_omega,
)
from app.calculations.cyclotomic import certified_sign
from app.calculations.epsilon import CheckResult, check_epsilon_omega, epsilon_omega
from app.calculations.errors import HypothesisError, InfeasibleError, NotRealError
from app.calculations.identities import IdentityResult, check_main_identity, check_sumclass
from app.calculations.padic import KElem, QuadExt
from app.commands.documents import (
    SUITES,
    CensusModel,
    CensusRowModel,
    CharacterRow,
    CheckModel,
    ConventionsModel,
    CyclotomicModel,
    EpsilonModel,
    EpsilonQuery,
    ExtensionReport,
    ReportDocument,
    RunConfig,
    StratumRow,
    jsonable,
)
from app.commands.workspace import Workspace, open_workspace
from app.services.cache import TableCache

logger = logging.getLogger(__name__)

Stats = Dict[str, object]
Flip = Optional[Callable[[MultChar], bool]]


# ============================================================================
# SHARED PIECES
# ============================================================================

def conventions_model(ws: Workspace) -> ConventionsModel:
    ext = ws.ext
    info = ext.describe()
    eps_omega = None
    if ext.ramified:
        value = epsilon_omega(ext)
        eps_omega = EpsilonModel.from_value(value.raw)
    return ConventionsModel(
        tag=ext.tag, p=ext.p, kind=ext.kind, ramified=ext.ramified,
        d=ext.d, t=ext.t, q_K=ext.q_K, s=ext.s, u_prime=ext.u_prime,
        min_poly=info["min_poly"], pi_K=info["pi_K"], pi_F=ext.pi_F_value,
        x0=list(ext.x0_coords), n_psi0=ext.n_psi0,
        omega_minus_one=ws.space.omega.at_minus_one,
        epsilon_omega=eps_omega,
    )


def check_model(result: CheckResult) -> CheckModel:
    return CheckModel(name=result.name, verdict=PASS if result.passed else FAIL,
                      checked=result.checked, detail=jsonable(result.detail))


def identity_model(result: IdentityResult) -> CheckModel:
    return CheckModel(name=result.name, verdict=result.verdict, checked=1, detail=jsonable(result.detail))


def aggregate(name: str, results: Sequence[CheckResult]) -> CheckModel:
    """One verdict over many single checks; failures listed in canonical order."""
    failures = [r.detail for r in results if not r.passed]
    return CheckModel(
        name=name,
        verdict=FAIL if failures else PASS,
        checked=sum(r.checked for r in results),
        detail=jsonable({"failures": failures[:5], "failed": len(failures)}),
    )


def census_model(report: CensusReport) -> CensusModel:
    rows = [
        CensusRowModel(
            conductor=row.l, S_plus=row.S_plus, S_minus=row.S_minus,
            Rplus=row.counts["Rplus"], Rminus=row.counts["Rminus"],
            RDplus=row.counts["RDplus"], RDminus=row.counts["RDminus"],
            predicted=row.prediction.describe(), basis=row.prediction.basis,
            verdict=row.verdict, counterexample=row.counterexample, flagged=row.flagged,
        )
        for row in report.rows
    ]
    return CensusModel(theta=report.theta, ratio_conductor=report.ratio_conductor, rows=rows)


def ratio_targets(ext: QuadExt, level: int) -> List[int]:
    """Every possible a(theta / conj theta) up to level."""
    if ext.ramified:
        return list(range(0, level + 1, 2))
    return list(range(1, level + 1))


def document_verdict(extensions: Sequence[ExtensionReport]) -> str:
    for report in extensions:
        cells = [c.verdict for c in report.checks] + [c.verdict for c in report.identities]
        cells += [row.verdict for cen in report.censuses for row in cen.rows]
        if FAIL in cells:
            return FAIL
    return PASS


def _run(config: RunConfig, cache: Optional[TableCache], flip: Flip,
         body: Callable[[RunConfig, Workspace], ExtensionReport]) -> Tuple[ReportDocument, Stats]:
    cache = cache or TableCache(config.cache_dir, config.format_version, config.cache_enabled)
    started = time.perf_counter()
    reports: List[ExtensionReport] = []
    timings: Dict[str, Dict[str, float]] = {}
    for tag in config.extensions:
        ws = open_workspace(config, tag, cache, flip)
        ext_started = time.perf_counter()
        reports.append(body(config, ws))
        ws.close()
        ws.timings["run"] = round(time.perf_counter() - ext_started, 3)
        ws.timings["signs_computed"] = ws.engine.computed
        ws.timings["sign_memo_hits"] = ws.engine.memo_hits
        timings[tag] = ws.timings

    doc = ReportDocument(
        format_version=config.format_version,
        command=config.command,
        config=config.echo(),
        extensions=reports,
        verdict=document_verdict(reports),
    )
    stats: Stats = {
        "elapsed": round(time.perf_counter() - started, 3),
        "extensions": timings,
        "cache": cache.stats.as_dict(),
    }
    logger.info(f"{config.command}: verdict {doc.verdict} in {stats['elapsed']}s, cache {stats['cache']}")
    return doc, stats


# ============================================================================
# ENUMERATE
# ============================================================================

def strata_rows(ws: Workspace) -> List[StratumRow]:
    rows = []
    for l in feasible_conductors(ws.ext, ws.chars.n_max):
        plus, minus = ws.strata.get(l, ([], []))
        rows.append(StratumRow(conductor=l, S_plus=len(plus), S_minus=len(minus),
                               expected_total=expected_stratum_size(ws.ext, l)))
    return rows


def strata_checks(ws: Workspace) -> List[CheckModel]:
    """Stratum sizes, |S(l)| = |S'(l)| and the conductor spectrum."""
    ext, chars = ws.ext, ws.chars
    rows = strata_rows(ws)
    sizes_bad = [r.conductor for r in rows if r.S_plus + r.S_minus != r.expected_total]
    checks = [CheckModel(name="stratum_sizes", verdict=FAIL if sizes_bad else PASS,
                         checked=len(rows), detail={"mismatched": sizes_bad})]
    if ext.ramified:
        unpaired = [r.conductor for r in rows if r.S_plus != r.S_minus]
        checks.append(CheckModel(name="pairing", verdict=FAIL if unpaired else PASS,
                                 checked=len(rows), detail={"unpaired": unpaired}))
    feasible = set(feasible_conductors(ext, chars.n_max))
    stray = sorted(l for l in chars.counts() if l not in feasible)
    checks.append(CheckModel(name="conductor_spectrum", verdict=FAIL if stray else PASS,
                             checked=len(chars), detail={"unexpected_conductors": stray}))
    return checks


def _enumerate_body(config: RunConfig, ws: Workspace) -> ExtensionReport:
    strata = ws.strata
    member = {}
    for l, (plus, minus) in strata.items():
        member.update({format_char(chi): "S" for chi in plus})
        member.update({format_char(chi): "S'" for chi in minus})
    characters = []
    for chi in ws.chars.chars:
        record = ws.engine.sign_record(chi)
        key = format_char(chi)
        characters.append(CharacterRow(encoding=key, conductor=ws.chars.conductor(chi),
                                       eps_inverse=record.inverse, eps_direct=record.direct,
                                       member_of=member[key]))
    return ExtensionReport(conventions=conventions_model(ws), characters=characters,
                           strata=strata_rows(ws), checks=strata_checks(ws))


def run_enumerate(config: RunConfig, cache: Optional[TableCache] = None,
                  flip: Flip = None) -> Tuple[ReportDocument, Stats]:
    """Characters with chi|F* = omega, their signs and the S / S' tables."""
    return _run(config, cache, flip, _enumerate_body)


# ============================================================================
# EPSILON
# ============================================================================

def _epsilon_body(config: RunConfig, ws: Workspace) -> ExtensionReport:
    if not config.character:
        raise HypothesisError("the epsilon command needs a character encoding")
    chi = parse_char(config.character, ws.space)
    result = ws.engine.gauss_sum(chi, config.additive)
    try:
        sign = certified_sign(result.eps.raw, ws.engine.dps, ws.engine.max_dps)
    except NotRealError:
        sign = None
    sign_inverse = None
    if result.additive == "psi0" and restricts_to_omega(chi):
        sign_inverse = ws.engine.epsilon_sign(chi)
    query = EpsilonQuery(
        encoding=format_char(chi), conductor=result.conductor, additive=result.additive,
        c_exponent=result.c_exponent, raw=CyclotomicModel.from_cyc(result.raw),
        eps=EpsilonModel.from_value(result.eps.raw, sign), sign_inverse=sign_inverse,
    )
    return ExtensionReport(conventions=conventions_model(ws), epsilon=query)


def run_epsilon(config: RunConfig, cache: Optional[TableCache] = None,
                flip: Flip = None) -> Tuple[ReportDocument, Stats]:
    """Gauss sum and epsilon factor of one character."""
    if len(config.extensions) != 1:
        raise HypothesisError("the epsilon command takes exactly one extension")
    return _run(config, cache, flip, _epsilon_body)


# ============================================================================
# CENSUS
# ============================================================================

def thetas_for(config: RunConfig, ws: Workspace, target: int) -> List[MultChar]:
    return pick_thetas(ws.ext, target, config.theta_count, config.seed, ws.space)


def census_models(config: RunConfig, ws: Workspace, targets: Sequence[int],
                  strict: bool) -> List[CensusModel]:
    """
    Census for the sampled thetas of every target ratio conductor, stopping
    at the first FAIL.

    Raises:
        InfeasibleError: If strict and a target admits no regular theta
    """
    models = []
    for target in targets:
        try:
            thetas = thetas_for(config, ws, target)
        except InfeasibleError:
            if strict:
                raise
            logger.info(f"{ws.ext.tag}: no regular theta with ratio conductor {target}, skipped")
            continue
        reports, _ = verify_suite(ws.engine, ws.chars, thetas, strata=ws.strata)
        models.extend(census_model(report) for report in reports)
        if reports and not reports[-1].passed:
            logger.error(f"{ws.ext.tag}: census stopped at ratio conductor {target}")
            break
    return models


def _census_body(config: RunConfig, ws: Workspace) -> ExtensionReport:
    explicit = bool(config.ratio_conductors)
    targets = config.ratio_conductors or ratio_targets(ws.ext, ws.space.level)
    return ExtensionReport(conventions=conventions_model(ws), strata=strata_rows(ws),
                           censuses=census_models(config, ws, targets, strict=explicit))


def run_census(config: RunConfig, cache: Optional[TableCache] = None,
               flip: Flip = None) -> Tuple[ReportDocument, Stats]:
    """Twist census of sampled regular thetas."""
    return _run(config, cache, flip, _census_body)


# ============================================================================
# IDENTITIES
# ============================================================================

def sample_points(ext: QuadExt, count: int, seed: int) -> List[KElem]:
    """x = (a + b alpha) pi_K^k with b a unit, so x lies in K* - F*."""
    rng = np.random.default_rng(seed)
    bound = ext.p ** 2
    points = []
    while len(points) < count:
        a = int(rng.integers(-bound, bound + 1))
        b = int(rng.integers(1, bound))
        k = int(rng.integers(-1, 2))
        if b % ext.p == 0:
            continue
        points.append(ext.element(a, b) * ext.pi_K ** k)
    return points


def identity_models(config: RunConfig, ws: Workspace) -> List[CheckModel]:
    """
    Sum classification on every feasible (r, m) and the main identity on
    sampled points.

    Raises:
        HypothesisError: If the extension is unramified
    """
    ext = ws.ext
    if not ext.ramified:
        raise HypothesisError(f"summation identities need a ramified extension, {ext.tag} is unramified")
    feasible = set(feasible_conductors(ext, ws.chars.n_max))
    models = []
    for r in range(1, ws.chars.n_max // 2 + 1):
        for m in range(0, (ws.chars.n_max - 2 * r) // 2 + 1):
            if 2 * r + 2 * m not in feasible:
                continue
            models.append(identity_model(check_sumclass(ws.engine, ws.chars, r, m, strata=ws.strata)))
    for x in sample_points(ext, config.samples, config.seed):
        models.append(identity_model(check_main_identity(ws.engine, ws.chars, x, strata=ws.strata)))
    undecided = sum(1 for m in models if m.verdict == INDETERMINATE)
    if undecided:
        logger.warning(f"{ext.tag}: {undecided} main identity samples did not stabilize by n={ws.chars.n_max}")
    return models


def _identities_body(config: RunConfig, ws: Workspace) -> ExtensionReport:
    return ExtensionReport(conventions=conventions_model(ws), identities=identity_models(config, ws))


def run_identities(config: RunConfig, cache: Optional[TableCache] = None,
                   flip: Flip = None) -> Tuple[ReportDocument, Stats]:
    """Sum classification and main identity checks."""
    return _run(config, cache, flip, _identities_body)


# ============================================================================
# VERIFY
# ============================================================================

def epsilon_checks(ws: Workspace) -> List[CheckModel]:
    engine, chars = ws.engine, ws.chars
    checks = [check_model(engine.check_unimodular(chars))]
    checks.append(check_model(check_epsilon_omega(ws.ext)))
    if not ws.ext.ramified:
        checks.append(check_model(engine.check_unramified_closed_form(chars)))
    firsts = {}
    for chi in chars.chars:
        firsts.setdefault(chars.conductor(chi), chi)
    checks.append(aggregate("choice_independence",
                            [engine.check_choice_independence(chi) for chi in firsts.values()]))
    return checks


def deligne_models(ws: Workspace) -> List[CheckModel]:
    results = ws.engine.deligne_checks(ws.chars)
    return [
        aggregate(name, [r for r in results if r.name == name])
        for name in ("deligne", "eq1")
        if any(r.name == name for r in results)
    ]


def convention_checks(config: RunConfig, ws: Workspace) -> List[CheckModel]:
    """x0 rescaling and conjugation symmetry on the first sampled theta."""
    for target in ratio_targets(ws.ext, ws.space.level):
        if target == 0:
            continue
        try:
            theta = thetas_for(config, ws, target)[0]
        except InfeasibleError:
            continue
        return [
            check_model(check_x0_rescaling(ws.engine, ws.chars, theta)),
            check_model(check_conjugate_symmetry(ws.engine, ws.chars, theta)),
        ]
    return []


def _verify_body(config: RunConfig, ws: Workspace) -> ExtensionReport:
    suites = config.suites or list(SUITES)
    report = ExtensionReport(conventions=conventions_model(ws), strata=strata_rows(ws))
    if "strata" in suites:
        report.checks.extend(strata_checks(ws))
    if "epsilon" in suites:
        report.checks.extend(epsilon_checks(ws))
    if "deligne" in suites:
        report.checks.extend(deligne_models(ws))
    if "conventions" in suites:
        report.checks.extend(convention_checks(config, ws))
    if "census" in suites:
        targets = config.ratio_conductors or ratio_targets(ws.ext, ws.space.level)
        report.censuses.extend(census_models(config, ws, targets, strict=bool(config.ratio_conductors)))
    if "identities" in suites and ws.ext.ramified:
        report.identities.extend(identity_models(config, ws))
    return report


def run_verify(config: RunConfig, cache: Optional[TableCache] = None,
               flip: Flip = None) -> Tuple[ReportDocument, Stats]:
    """Theorem suites over every requested extension."""
    return _run(config, cache, flip, _verify_body)


RUNNERS = {
    "enumerate": run_enumerate,
    "epsilon": run_epsilon,
    "census": run_census,
    "verify": run_verify,
    "identities": run_identities,
}


def run(config: RunConfig, cache: Optional[TableCache] = None,
        flip: Flip = None) -> Tuple[ReportDocument, Stats]:
    return RUNNERS[config.command](config, cache, flip)
