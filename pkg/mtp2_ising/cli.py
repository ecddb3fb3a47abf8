"""CLI entry point for mtp2-ising."""

import logging
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any

import click
import numpy as np

from mtp2_ising.certify import certify_general, certify_ising, fit_result_from_table
from mtp2_ising.config import Command, RunConfig, SampleFormat, Setting, Tolerances, config
from mtp2_ising.errors import ConvergenceError, ExistenceError, Mtp2Error, SampleFormatError
from mtp2_ising.ising import Graph
from mtp2_ising.report import LikelihoodRatio, Report, result_fields, subset_label, table_rows
from mtp2_ising.sample_io import parse_graph, parse_sample, parse_table, read_text
from mtp2_ising.solvers import ClassicalIpsSolver, GeneralSolver, IpsSolver, SymmetricIpsSolver
from mtp2_ising.solvers.base import FitResult
from mtp2_ising.solvers.general_mle import mle_exists_general, missing_patterns
from mtp2_ising.tables import (
    Moments,
    ProbTable,
    SampleCounts,
    is_mtp2,
    moments_from_counts,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_NONEXISTENT = 2
EXIT_NOT_CONVERGED = 3

GRAPH_KEYWORDS = {"complete", "chain", "cycle"}
MAX_VIOLATIONS = 10

Warn = Callable[[str], None]


def _echo_warning(message: str) -> None:
    click.echo(f"Warning: {message}", err=True)


def load_graph(cfg: RunConfig, dim: int, warn: Warn) -> Graph:
    """Graph from --graph (file or keyword); the complete graph when absent."""
    if cfg.graph_path is None:
        warn("no --graph given; using the complete graph")
        return Graph.complete(dim)
    text = str(cfg.graph_path)
    if text in GRAPH_KEYWORDS and not cfg.graph_path.exists():
        return parse_graph(text, dim, warn)
    return parse_graph(read_text(cfg.graph_path), dim, warn)


def _symmetric_moments(m: Moments) -> Moments:
    return Moments(mean=np.zeros(m.dim), second=m.second)


def _base(cfg: RunConfig, counts: SampleCounts, **fields: Any) -> dict[str, Any]:
    base = {"command": cfg.command.value, "dim": counts.dim, "n": counts.n, "seed": cfg.seed}
    return base | fields


def _nonexistent(cfg: RunConfig, counts: SampleCounts, exc: ExistenceError) -> Report:
    return Report(
        **_base(cfg, counts),
        status="MLE does not exist",
        exit_code=EXIT_NONEXISTENT,
        offending_edges=exc.edges,
        offending_vertices=exc.vertices,
        messages=[str(exc)],
    )


def _finish(
    cfg: RunConfig, counts: SampleCounts, fields: dict[str, Any], passed: bool | None
) -> Report:
    """Status and exit code; a passing certificate outranks the solver's convergence flag."""
    if passed:
        status, code = "certified", EXIT_OK
    elif not fields.get("converged", True):
        status, code = "not converged", EXIT_NOT_CONVERGED
    elif passed is None:
        status, code = "fitted", EXIT_OK
    else:
        status, code = "not certified", EXIT_FAILED
    return Report(**_base(cfg, counts, **fields), status=status, exit_code=code)


def _likelihood_ratio(
    cfg: RunConfig, counts: SampleCounts, graph: Graph, mtp2: FitResult
) -> LikelihoodRatio:
    assert mtp2.log_likelihood is not None
    solver = ClassicalIpsSolver(cfg.epsilon, cfg.max_sweeps)
    try:
        solver.check(counts, graph)
        unrestricted = solver.fit(counts, graph)
    except ExistenceError as exc:
        return LikelihoodRatio(loglik_mtp2=mtp2.log_likelihood, note=f"unrestricted MLE: {exc}")
    if not unrestricted.converged or unrestricted.log_likelihood is None:
        return LikelihoodRatio(
            loglik_mtp2=mtp2.log_likelihood,
            note="classical IPS did not converge; the unrestricted MLE may not exist",
        )
    return LikelihoodRatio(
        loglik_mtp2=mtp2.log_likelihood,
        loglik_unrestricted=unrestricted.log_likelihood,
        statistic=2 * (unrestricted.log_likelihood - mtp2.log_likelihood),
    )


def _run_ising(cfg: RunConfig, counts: SampleCounts, warn: Warn, symmetric: bool) -> Report:
    graph = load_graph(cfg, counts.dim, warn)
    solver = (
        SymmetricIpsSolver(cfg.epsilon, cfg.max_sweeps)
        if symmetric
        else IpsSolver(cfg.epsilon, cfg.max_sweeps)
    )
    try:
        solver.check(counts, graph)
        result = solver.fit(counts, graph)
    except ExistenceError as exc:
        return _nonexistent(cfg, counts, exc)

    moments = moments_from_counts(counts)
    if symmetric:
        moments = _symmetric_moments(moments)
    certificate = certify_ising(result, moments, graph, cfg.tolerances)
    fields = result_fields(result) | {"certificate": certificate}
    if cfg.likelihood_ratio and not symmetric:
        fields["likelihood_ratio"] = _likelihood_ratio(cfg, counts, graph, result)
    return _finish(cfg, counts, fields, certificate.passed)


def _run_general(cfg: RunConfig, counts: SampleCounts) -> Report:
    result = GeneralSolver().fit(counts)
    fields = result_fields(result)
    messages = list(fields.get("messages", []))
    if not mle_exists_general(counts):
        messages.append(
            f"pairs {missing_patterns(counts)} miss (1,-1) or (-1,1); "
            "the MLE is supported on the lattice closure of the sample"
        )
    certificate = None
    if counts.dim <= config.certify_max_dim:
        certificate = certify_general(result.table, counts, cfg.tolerances)
        fields["certificate"] = certificate
    else:
        messages.append(f"certificate skipped: d > {config.certify_max_dim}")
    fields["messages"] = messages
    return _finish(cfg, counts, fields, None if certificate is None else certificate.passed)


def _run_check_mtp2(cfg: RunConfig, counts: SampleCounts, warn: Warn) -> Report:
    if cfg.table_path is not None:
        p = parse_table(read_text(cfg.table_path), counts.dim, warn)
    else:
        p = counts.empirical()
    check = is_mtp2(p)
    d = p.dim
    violations = [
        f"p({subset_label(x & y, d)}) p({subset_label(x | y, d)}) "
        f"< p({subset_label(x, d)}) p({subset_label(y, d)})"
        for x, y in check.violations[:MAX_VIOLATIONS]
    ]
    messages = []
    if len(check.violations) > MAX_VIOLATIONS:
        messages.append(f"{len(check.violations) - MAX_VIOLATIONS} further violations omitted")
    return Report(
        **_base(cfg, counts),
        status="MTP2" if check.ok else "not MTP2",
        exit_code=EXIT_OK,
        mtp2=check.ok,
        violations=violations,
        table=table_rows(p) if d <= 12 else None,
        messages=messages,
    )


def _run_check_existence(cfg: RunConfig, counts: SampleCounts, warn: Warn) -> Report:
    edges: list[tuple[int, int]] = []
    vertices: list[int] = []
    try:
        if cfg.general:
            GeneralSolver().check(counts)
        else:
            graph = load_graph(cfg, counts.dim, warn)
            solver = SymmetricIpsSolver() if cfg.symmetric else IpsSolver()
            solver.check(counts, graph)
    except ExistenceError as exc:
        edges, vertices = exc.edges, exc.vertices
    exists = not edges and not vertices
    return Report(
        **_base(cfg, counts),
        status="MLE exists" if exists else "MLE does not exist",
        exit_code=EXIT_OK if exists else EXIT_NONEXISTENT,
        offending_edges=edges,
        offending_vertices=vertices,
    )


def _run_certify(cfg: RunConfig, counts: SampleCounts, warn: Warn) -> Report:
    if cfg.table_path is None:
        raise SampleFormatError("certify needs --table")
    p: ProbTable = parse_table(read_text(cfg.table_path), counts.dim, warn)
    if cfg.graph_path is None and not cfg.symmetric:
        certificate = certify_general(p, counts, cfg.tolerances)
    else:
        graph = load_graph(cfg, counts.dim, warn)
        moments = moments_from_counts(counts)
        if cfg.symmetric:
            moments = _symmetric_moments(moments)
        certificate = certify_ising(fit_result_from_table(p, graph), moments, graph, cfg.tolerances)
    return Report(
        **_base(cfg, counts),
        status="certified" if certificate.passed else "not certified",
        exit_code=EXIT_OK if certificate.passed else EXIT_FAILED,
        certificate=certificate,
    )


def run(cfg: RunConfig, warn: Warn = _echo_warning) -> tuple[int, Report]:
    """
    Execute one command.

    Returns:
        (exit code, report); 0 success, 1 failed certificate, 2 MLE does not
        exist, 3 no convergence

    Raises:
        Mtp2Error: For unreadable or malformed input
    """
    counts = parse_sample(read_text(cfg.input_path), cfg.input_format, cfg.dim, warn)
    logger.debug("read %d observations in d=%d", counts.n, counts.dim)

    if cfg.command == Command.FIT_GENERAL or (cfg.command == Command.FIT and cfg.general):
        report = _run_general(cfg, counts)
    elif cfg.command == Command.FIT_SYMMETRIC or (cfg.command == Command.FIT and cfg.symmetric):
        report = _run_ising(cfg, counts, warn, symmetric=True)
    elif cfg.command == Command.FIT:
        report = _run_ising(cfg, counts, warn, symmetric=False)
    elif cfg.command == Command.CHECK_MTP2:
        report = _run_check_mtp2(cfg, counts, warn)
    elif cfg.command == Command.CHECK_EXISTENCE:
        report = _run_check_existence(cfg, counts, warn)
    else:
        report = _run_certify(cfg, counts, warn)
    return report.exit_code, report


def _run_options(func: Callable[..., Any]) -> Callable[..., Any]:
    """Options shared by every data command."""
    options = [
        click.option(
            "--input",
            "-i",
            "input_path",
            required=True,
            type=click.Path(exists=True, dir_okay=False, path_type=Path),
            help="Sample file (+-1 rows, 0/1 rows or bitmask,count lines)",
        ),
        click.option(
            "--format",
            "-f",
            "input_format",
            type=click.Choice([f.value for f in SampleFormat]),
            default=None,
            help="Sample format (detected when omitted)",
        ),
        click.option("--dim", "-d", type=int, default=None, help="Dimension for counts input"),
        click.option(
            "--graph",
            "-g",
            "graph_path",
            type=click.Path(path_type=Path),
            default=None,
            help="Edge list file with 'i j' lines, or complete/chain/cycle",
        ),
        click.option(
            "--table",
            "table_path",
            type=click.Path(exists=True, dir_okay=False, path_type=Path),
            default=None,
            help="Probability table (bitmask,probability) to check or certify",
        ),
        click.option("--epsilon", type=float, default=None, help="IPS convergence precision"),
        click.option("--max-sweeps", type=int, default=None, help="IPS sweep cap"),
        click.option("--tol-primal", type=float, default=None, help="Primal tolerance"),
        click.option("--tol-dual", type=float, default=None, help="Dual tolerance"),
        click.option("--tol-slack", type=float, default=None, help="Slackness tolerance"),
        click.option("--symmetric", is_flag=True, help="Use the palindromic (h = 0) family"),
        click.option("--general", is_flag=True, help="Use the unrestricted MTP2 family"),
        click.option("--lr", "likelihood_ratio", is_flag=True, help="Report the likelihood ratio"),
        click.option(
            "--output",
            "-o",
            "output_path",
            type=click.Path(dir_okay=False, path_type=Path),
            default=None,
            help="Write the report here instead of stdout",
        ),
        click.option("--json", "output_json", is_flag=True, help="Emit the report as JSON"),
        click.option("--seed", type=int, default=None, help="Seed recorded in the report"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _invoke(command: Command, **kwargs: Any) -> None:
    """Build a RunConfig from CLI values, run it and exit with its code."""
    tolerances = Tolerances.from_config()
    overrides = {key: kwargs.pop(f"tol_{key}") for key in ("primal", "dual", "slack")}
    overrides = {key: value for key, value in overrides.items() if value is not None}
    if kwargs.get("epsilon") is None:
        kwargs["epsilon"] = config.get(Setting.EPSILON)
    if kwargs.get("max_sweeps") is None:
        kwargs["max_sweeps"] = config.get(Setting.MAX_SWEEPS)
    if kwargs.get("input_format") is not None:
        kwargs["input_format"] = SampleFormat(kwargs["input_format"])

    try:
        cfg = RunConfig(
            command=command,
            tolerances=tolerances.model_copy(update=overrides),
            **kwargs,
        )
        code, report = run(cfg)
    except ExistenceError as exc:
        click.echo(f"Error: {exc}", err=True)
        sys.exit(EXIT_NONEXISTENT)
    except ConvergenceError as exc:
        click.echo(f"Error: {exc}", err=True)
        sys.exit(EXIT_NOT_CONVERGED)
    except (Mtp2Error, ValueError) as exc:
        click.echo(f"Error: {exc}", err=True)
        sys.exit(EXIT_FAILED)

    text = report.model_dump_json(indent=2) + "\n" if cfg.output_json else report.render()
    if cfg.output_path is not None:
        cfg.output_path.write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)
    if code != EXIT_OK:
        click.echo(f"{report.status} (exit {code})", err=True)
    sys.exit(code)


@click.group()
@click.version_option()
@click.option("--verbose", "-v", is_flag=True, help="Log solver progress to stderr")
def main(verbose: bool) -> None:
    """Maximum likelihood estimation for MTP2 binary distributions and Ising models."""
    if verbose:
        logging.basicConfig(
            level=logging.DEBUG, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
        )


@main.command()
@_run_options
def fit(**kwargs: Any) -> None:
    """Fit the MTP2 Ising MLE on a graph (clamped IPS)."""
    _invoke(Command.FIT, **kwargs)


@main.command("fit-general")
@_run_options
def fit_general(**kwargs: Any) -> None:
    """Fit the unrestricted binary MTP2 MLE."""
    _invoke(Command.FIT_GENERAL, **kwargs)


@main.command("fit-symmetric")
@_run_options
def fit_symmetric(**kwargs: Any) -> None:
    """Fit the palindromic MTP2 Ising MLE on a graph."""
    _invoke(Command.FIT_SYMMETRIC, **kwargs)


@main.command("check-mtp2")
@_run_options
def check_mtp2(**kwargs: Any) -> None:
    """Check whether the empirical distribution (or --table) is MTP2."""
    _invoke(Command.CHECK_MTP2, **kwargs)


@main.command("check-existence")
@_run_options
def check_existence(**kwargs: Any) -> None:
    """Check the MLE existence conditions for the sample."""
    _invoke(Command.CHECK_EXISTENCE, **kwargs)


@main.command()
@_run_options
def certify(**kwargs: Any) -> None:
    """Certify a table (--table) as the MLE: general family, or Ising with --graph."""
    _invoke(Command.CERTIFY, **kwargs)


@main.command()
def env() -> None:
    """Show configuration environment variables."""
    click.echo(config.get_env_var_help())
