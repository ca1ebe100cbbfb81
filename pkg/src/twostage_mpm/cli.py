"""Command-line front end.

Exit codes: 0 solved, 1 input error, 2 no equilibrium, 3 numerical
non-convergence.
"""
from __future__ import annotations

import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np
from pydantic import ValidationError

from . import experiments as ex
from . import scenario_file
from .best_response import SolverConfig
from .core import Behavior, MarketError, Policy
from .dispatch import solve

EXIT_OK, EXIT_INPUT, EXIT_NONEXISTENT, EXIT_NONCONVERGED = 0, 1, 2, 3
OUTPUT_DIR_ENV = "MPM_EQ_OUTPUT_DIR"

POLICY_CHOICE = click.Choice([p.value for p in Policy])
BEHAVIOR_CHOICE = click.Choice([b.value for b in Behavior])


class InputError(click.ClickException):
    exit_code = EXIT_INPUT


def _load(path) -> scenario_file.ScenarioFile:
    try:
        return scenario_file.load(path)
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "document"
        raise InputError(f"{path}: {where}: {first['msg']} ({exc.error_count()} problem(s))")
    except (OSError, ValueError) as exc:
        raise InputError(f"{path}: {exc}")


def _flatten(prefix, value, rows):
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else k, v, rows)
    elif isinstance(value, list) and value and not isinstance(value[0], (dict, list)):
        rows.append((prefix, "  ".join(_short(v) for v in value)))
    elif value is not None:
        rows.append((prefix, _short(value)))


def _short(v):
    return f"{v:.10g}" if isinstance(v, float) else str(v)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text + "\n")
    else:
        click.echo(text)


@click.group()
def cli():
    """Two-stage electricity market equilibria under market power mitigation."""


@cli.command("solve")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--policy", type=POLICY_CHOICE, help="Override the file's policy.")
@click.option("--behavior", type=BEHAVIOR_CHOICE, help="Override the file's behavior.")
@click.option("--numeric", is_flag=True, help="Force the best-response solver (or the nonexistence probe).")
@click.option("--format", "fmt", type=click.Choice(["json", "text"]), default="json", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Write the report here instead of stdout.")
@click.option("--trace", "with_trace", is_flag=True, help="Include every best-response iteration.")
@click.option("--dump-normalized", is_flag=True,
              help="Print the fully expanded scenario document and exit.")
def cmd_solve(path, policy, behavior, numeric, fmt, out, with_trace, dump_normalized):
    """Solve the scenario in PATH and report the outcome and settlement."""
    doc = _load(path)
    if policy:
        doc.policy = Policy(policy)
    if behavior:
        doc.behavior = Behavior(behavior)
    if dump_normalized:
        _emit(json.dumps(doc.normalized(), indent=2), out)
        return EXIT_OK
    try:
        result = solve(doc.to_scenario(), numeric=numeric, config=doc.solver_config())
    except MarketError as exc:
        raise InputError(str(exc))
    report = result.to_dict(with_trace=with_trace)
    if fmt == "json":
        _emit(json.dumps(report, indent=2), out)
    else:
        rows = []
        _flatten("", report, rows)
        width = max(len(k) for k, _ in rows)
        _emit("\n".join(f"{k:<{width}}  {v}" for k, v in rows), out)
    if result.exit_code != EXIT_OK:
        click.echo(f"no equilibrium: {result.outcome.detail}", err=True)
    return result.exit_code


KINDS = ("ratio-grid", "error-sweep", "cost-hetero", "load-size")


@cli.command("experiment")
@click.argument("kind", type=click.Choice(KINDS))
@click.argument("path", required=False, type=click.Path(dir_okay=False))
@click.option("--samples", type=click.IntRange(min=1), help="Monte-Carlo sample count (default 200).")
@click.option("--seed", type=int, help="RNG seed (default 42).")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True,
              help="CSV or JSON lines.")
@click.option("--out", type=click.Path(dir_okay=False),
              help=f"Output file (default: <kind>.csv under ${OUTPUT_DIR_ENV} or the current directory).")
def cmd_experiment(kind, path, samples, seed, fmt, out):
    """Run one of the parameter studies and write its records."""
    doc = _load(path) if path else None
    exp = (doc.experiment if doc and doc.experiment else scenario_file.ExperimentEntry())
    config = doc.solver_config() if doc else SolverConfig()
    base = doc.to_scenario() if doc else ex.default_base()
    seed = seed if seed is not None else (exp.seed if exp.seed is not None else 42)
    samples = samples or exp.samples or 200
    start = time.perf_counter()
    try:
        if kind == "ratio-grid":
            result = ex.ratio_grid(ex.SweepSpec(G_range=(exp.G_min, exp.G_max), c=exp.c,
                                                eps_ratio=exp.eps_ratio, d=exp.d))
        elif kind == "error-sweep":
            spec = ex.SampleSpec(seed=seed, samples=samples, target="proportional_error",
                                 mean=0.1 if exp.mean is None else exp.mean,
                                 variance=0.025 if exp.variance is None else exp.variance,
                                 variance_is_std=exp.variance_is_std, base=base)
            result = ex.error_sensitivity_study(spec, config)
        elif kind == "cost-hetero":
            spec = ex.SampleSpec(seed=seed, samples=samples, target="cost_coefficient",
                                 mean=0.1 if exp.mean is None else exp.mean,
                                 variance=0.001 if exp.variance is None else exp.variance,
                                 variance_is_std=exp.variance_is_std, base=base)
            result = ex.cost_heterogeneity_study(spec, config)
        else:
            fractions = exp.fractions or tuple(np.linspace(0.02, 0.5, 49))
            result = ex.load_size_study(base, fractions, config)
    except (MarketError, ValueError) as exc:
        raise InputError(str(exc))
    if out is None:
        ext = "csv" if fmt == "csv" else "jsonl"
        out = Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / f"{kind}.{ext}"
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    result.write(out, "csv" if fmt == "csv" else "jsonl")
    elapsed = time.perf_counter() - start
    click.echo(f"{kind}: {len(result.records)} rows -> {out}; "
               f"exclusion rate {result.exclusion_rate:.1%}; {elapsed:.2f} s")
    for note in result.notes:
        click.echo(f"note: {note}")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        code = cli.main(args=argv, prog_name="mpm-eq", standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_INPUT
    except click.ClickException as exc:
        # usage errors would otherwise exit with 2, which means "no equilibrium" here
        exc.show()
        return EXIT_INPUT
    return code if isinstance(code, int) else EXIT_OK


def run() -> None:
    sys.exit(main())
