"""
Command-line entry point.

    python -m app.main verify --p 3 --ext sqrt-pi --nmax 6
    python -m app.main census --p 2 --ext "sqrt(-1)" --ratio-conductor 4 --nmax 6
    python -m app.main epsilon --p 3 --ext sqrt-pi --char "N6/M36:...|0"

Exit status: 0 when every verdict is PASS (INDETERMINATE and REPORTED
included), 1 on any FAIL or broken invariant, 2 on a usage or
configuration error.
"""

import logging
import sys
from typing import Annotated, List, Optional, Sequence

import click
import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from app.calculations.census import FAIL
from app.calculations.errors import InvariantError, SignError
from app.commands.documents import ReportDocument, RunConfig
from app.commands.runners import run
from app.config import get_settings
from app.services.report import emit_report

logger = logging.getLogger(__name__)

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

app = typer.Typer(
    name="twist-census",
    help="Exact epsilon factors and twist census for quadratic extensions of Q_p",
    add_completion=False,
    rich_markup_mode="rich",
)

console = Console()


def setup_logging(level: str) -> None:
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), show_path=False)],
        force=True,
    )


# ============================================================================
# OPTIONS
# ============================================================================

POption = Annotated[int, typer.Option("--p", help="Residue characteristic p")]
ExtOption = Annotated[List[str], typer.Option("--ext", help="Extension tag; repeat for several")]
NmaxOption = Annotated[int, typer.Option("--nmax", help="Largest conductor enumerated")]
OutputOption = Annotated[Optional[str], typer.Option("--output", "-o", help="Report path without suffix")]
FormatOption = Annotated[Optional[List[str]], typer.Option("--format", help="json and/or csv")]
SeedOption = Annotated[Optional[int], typer.Option("--seed", help="Theta / sample seed")]
CountOption = Annotated[Optional[int], typer.Option("--count", help="Thetas per ratio conductor")]
RatioOption = Annotated[Optional[List[int]], typer.Option("--ratio-conductor", help="a(theta / conj theta)")]
CacheDirOption = Annotated[Optional[str], typer.Option("--cache-dir", help="Table cache directory")]
NoCacheOption = Annotated[bool, typer.Option("--no-cache", help="Compute every table afresh")]
WorkersOption = Annotated[Optional[int], typer.Option("--workers", help="Threads for sign evaluation")]
DpsOption = Annotated[Optional[int], typer.Option("--dps", help="Starting decimal places for sign certification")]


def build_config(command: str, **values) -> RunConfig:
    """Merge CLI values over Settings and validate."""
    settings = get_settings()
    fields = {
        "command": command,
        "precision": settings.default_precision,
        "dps": settings.numeric_dps,
        "max_dps": settings.max_numeric_dps,
        "workers": settings.workers,
        "theta_count": settings.theta_count,
        "seed": settings.theta_seed,
        "cache_dir": settings.cache_dir,
        "cache_enabled": settings.cache_enabled,
        "format_version": settings.format_version,
    }
    no_cache = values.pop("no_cache", False)
    fields.update({k: v for k, v in values.items() if v is not None})
    if no_cache:
        fields["cache_enabled"] = False
    return RunConfig(**fields)


def execute(command: str, **values) -> None:
    """Validate, run, print, write; always ends in typer.Exit."""
    setup_logging(get_settings().log_level)
    try:
        config = build_config(command, **values)
        doc, stats = run(config)
    except InvariantError as exc:
        logger.error(f"invariant violated: {exc}")
        raise typer.Exit(EXIT_FAIL)
    except SignError as exc:
        logger.error(f"epsilon certification failed: {exc}")
        raise typer.Exit(EXIT_FAIL)
    except ValueError as exc:
        logger.error(f"{command}: {exc}")
        raise typer.Exit(EXIT_USAGE)

    print_summary(doc)
    if config.output:
        try:
            emit_report(doc, config.output, config.formats, stats)
        except OSError as exc:
            logger.error(f"cannot write report: {exc}")
            raise typer.Exit(EXIT_USAGE)
    raise typer.Exit(EXIT_FAIL if doc.verdict == FAIL else EXIT_PASS)


# ============================================================================
# OUTPUT
# ============================================================================

def print_summary(doc: ReportDocument) -> None:
    for report in doc.extensions:
        conv = report.conventions
        title = f"{conv.tag} over Q_{conv.p} ({conv.kind}, d={conv.d}, omega(-1)={conv.omega_minus_one})"

        if report.epsilon is not None:
            q = report.epsilon
            console.print(f"[bold]{title}[/bold]")
            console.print(f"chi = {q.encoding}  a(chi) = {q.conductor}  additive = {q.additive}  "
                          f"v(c) = {q.c_exponent}")
            console.print(f"raw Gauss sum (M={q.raw.M}): {q.raw.coefficients}")
            console.print(f"eps (M={q.eps.value.M}, q^({q.eps.halfpow}/2)): {q.eps.value.coefficients}")
            sign = "not real" if q.eps.sign is None else f"{q.eps.sign:+d}"
            console.print(f"sign eps(chi, {q.additive}) = {sign}")
            if q.sign_inverse is not None:
                console.print(f"sign eps(chi^-1, psi0) = {q.sign_inverse:+d}")
            continue

        if report.strata:
            table = Table(title=title, header_style="bold magenta")
            for column in ("l", "|S(l)|", "|S'(l)|", "expected total"):
                table.add_column(column, justify="right")
            for row in report.strata:
                table.add_row(str(row.conductor), str(row.S_plus), str(row.S_minus), str(row.expected_total))
            console.print(table)

        if report.censuses:
            table = Table(title=f"{conv.tag}: census", header_style="bold magenta")
            for column in ("theta", "a(ratio)", "l", "R+", "R-", "R'+", "R'-", "predicted", "verdict"):
                table.add_column(column)
            for cen in report.censuses:
                for row in cen.rows:
                    table.add_row(cen.theta, str(cen.ratio_conductor), str(row.conductor),
                                  str(row.Rplus), str(row.Rminus), str(row.RDplus), str(row.RDminus),
                                  row.predicted, _styled(row.verdict))
            console.print(table)

        checks = report.checks + report.identities
        if checks:
            table = Table(title=f"{conv.tag}: checks", header_style="bold magenta")
            table.add_column("check")
            table.add_column("checked", justify="right")
            table.add_column("verdict")
            for check in checks:
                table.add_row(check.name, str(check.checked), _styled(check.verdict))
            console.print(table)

    console.print(f"verdict: {_styled(doc.verdict)}")


def _styled(verdict: str) -> str:
    colour = {"PASS": "green", "FAIL": "red"}.get(verdict, "yellow")
    return f"[{colour}]{verdict}[/{colour}]"


# ============================================================================
# COMMANDS
# ============================================================================

@app.command("enumerate")
def enumerate_command(
    p: POption,
    ext: ExtOption,
    nmax: NmaxOption,
    output: OutputOption = None,
    formats: FormatOption = None,
    cache_dir: CacheDirOption = None,
    no_cache: NoCacheOption = False,
    workers: WorkersOption = None,
    dps: DpsOption = None,
):
    """Characters with chi|F* = omega, their epsilon signs and the S / S' tables."""
    execute("enumerate", p=p, extensions=ext, n_max=nmax, output=output, formats=formats,
            cache_dir=cache_dir, no_cache=no_cache, workers=workers, dps=dps)


@app.command("epsilon")
def epsilon_command(
    p: POption,
    ext: ExtOption,
    char: Annotated[str, typer.Option("--char", help="Character encoding N<n>/M<M>:<k1>...|<k_pi>")],
    nmax: Annotated[Optional[int], typer.Option("--nmax", help="Working level (defaults to the encoding's)")] = None,
    additive: Annotated[str, typer.Option("--additive", help="psi0 or psiF")] = "psi0",
    output: OutputOption = None,
    formats: FormatOption = None,
    cache_dir: CacheDirOption = None,
    no_cache: NoCacheOption = False,
    dps: DpsOption = None,
):
    """Gauss sum and certified epsilon sign of one character."""
    level = nmax if nmax is not None else _level_of(char)
    execute("epsilon", p=p, extensions=ext, n_max=level, character=char, additive=additive,
            output=output, formats=formats, cache_dir=cache_dir, no_cache=no_cache, dps=dps)


@app.command("census")
def census_command(
    p: POption,
    ext: ExtOption,
    nmax: NmaxOption,
    ratio_conductor: RatioOption = None,
    count: CountOption = None,
    seed: SeedOption = None,
    output: OutputOption = None,
    formats: FormatOption = None,
    cache_dir: CacheDirOption = None,
    no_cache: NoCacheOption = False,
    workers: WorkersOption = None,
    dps: DpsOption = None,
):
    """Twist census of sampled regular thetas against the closed-form predictions."""
    execute("census", p=p, extensions=ext, n_max=nmax, ratio_conductors=ratio_conductor,
            theta_count=count, seed=seed, output=output, formats=formats,
            cache_dir=cache_dir, no_cache=no_cache, workers=workers, dps=dps)


@app.command("verify")
def verify_command(
    p: POption,
    ext: ExtOption,
    nmax: NmaxOption,
    suite: Annotated[Optional[List[str]], typer.Option("--suite", help="Suite to run; repeat for several")] = None,
    ratio_conductor: RatioOption = None,
    count: CountOption = None,
    seed: SeedOption = None,
    samples: Annotated[Optional[int], typer.Option("--samples", help="Points for the main identity")] = None,
    output: OutputOption = None,
    formats: FormatOption = None,
    cache_dir: CacheDirOption = None,
    no_cache: NoCacheOption = False,
    workers: WorkersOption = None,
    dps: DpsOption = None,
):
    """Theorem suites: strata, epsilon, census, deligne, conventions, identities."""
    execute("verify", p=p, extensions=ext, n_max=nmax, suites=suite, ratio_conductors=ratio_conductor,
            theta_count=count, seed=seed, samples=samples, output=output, formats=formats,
            cache_dir=cache_dir, no_cache=no_cache, workers=workers, dps=dps)


@app.command("identities")
def identities_command(
    p: POption,
    ext: ExtOption,
    nmax: NmaxOption,
    samples: Annotated[Optional[int], typer.Option("--samples", help="Points for the main identity")] = None,
    seed: SeedOption = None,
    output: OutputOption = None,
    formats: FormatOption = None,
    cache_dir: CacheDirOption = None,
    no_cache: NoCacheOption = False,
    dps: DpsOption = None,
):
    """Sum classification and main identity checks (ramified extensions)."""
    execute("identities", p=p, extensions=ext, n_max=nmax, samples=samples, seed=seed,
            output=output, formats=formats, cache_dir=cache_dir, no_cache=no_cache, dps=dps)


def _level_of(encoding: str) -> int:
    head = encoding.strip().split("/", 1)[0]
    if not head.startswith("N") or not head[1:].isdigit():
        raise typer.BadParameter(f"malformed character encoding: {encoding!r}", param_hint="--char")
    return int(head[1:])


def run_command(argv: Sequence[str]) -> int:
    """Run the CLI on argv and return the exit status instead of exiting."""
    try:
        result = app(args=list(argv), standalone_mode=False, prog_name="twist-census")
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        return EXIT_USAGE
    return result if isinstance(result, int) else EXIT_PASS


if __name__ == "__main__":
    sys.exit(run_command(sys.argv[1:]))
