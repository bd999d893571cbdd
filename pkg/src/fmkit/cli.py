"""Command-line entry point.

Exit codes are stable: 0 success, 1 validation/scenario/fingerprint
problems, 2 usage or parse failures. Every subcommand is deterministic for
identical inputs and flags; there is no environment-variable configuration.
"""
from __future__ import annotations

import sys
from pathlib import Path

import click

from . import corpus as corpus_mod
from .build import ModelBuildError, build_system
from .dsl import (
    RefusesMalformed,
    Severity,
    SourceFile,
    format_source,
    parse,
)
from .export import export_model, export_trace
from .metrics import DomainError, hartley, shannon_choices, trace_metrics
from .model import SystemModel
from .report import write_report
from .simulator import (
    FingerprintMismatch,
    InvalidScenario,
    Scenario,
    ScenarioParseError,
    dump_trace,
    load_trace,
    parse_scenario,
    run as run_scenario,
)
from .validator import StrictnessProfile, render_records, render_text, validate

PROFILE_CHOICES = click.Choice(["strict", "legacy"])


def _profile(name: str) -> StrictnessProfile:
    return StrictnessProfile(name)


def _read_source(path: str) -> SourceFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: cannot read {path}: {exc.strerror}", err=True)
        sys.exit(2)
    return SourceFile(text, path)


def _load_model(path: str) -> SystemModel:
    """Parse and build a model file; exit 2 on parse errors, 1 on build errors."""
    src = _read_source(path)
    decls, diags = parse(src)
    errors = [d for d in diags if d.severity is Severity.ERROR]
    if errors:
        for diag in errors:
            click.echo(diag.render(src), err=True)
        sys.exit(2)
    try:
        return build_system(decls)
    except ModelBuildError as exc:
        for issue in exc.issues:
            click.echo(f"{path}: {issue}", err=True)
        sys.exit(1)


@click.group()
def main() -> None:
    """Model, check, simulate and draw multi-sphere flow systems."""


@main.command("validate")
@click.argument("path", type=click.Path())
@click.option("--profile", type=PROFILE_CHOICES, default="strict", show_default=True)
@click.option(
    "--format", "fmt", type=click.Choice(["text", "records"]), default="text",
    show_default=True,
)
def cmd_validate(path: str, profile: str, fmt: str) -> None:
    """Check a model file against the well-formedness rules."""
    model = _load_model(path)
    violations = validate(model, _profile(profile))
    report = render_records(violations) if fmt == "records" else render_text(violations)
    if report:
        click.echo(report, nl=False)
    errors = [v for v in violations if v.severity is Severity.ERROR]
    if errors:
        sys.exit(1)
    click.echo(f"{path}: ok ({len(violations)} warning(s))" if violations else f"{path}: ok")


@main.command("simulate")
@click.argument("model_path", type=click.Path())
@click.option("--scenario", "scenario_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--horizon", type=int, default=None, help="Override the scenario horizon.")
@click.option("--trace", "trace_out", type=click.Path(), default=None,
              help="Also write the trace to this file.")
@click.option("--metrics", "with_metrics", is_flag=True,
              help="Append a metrics summary block.")
@click.option("--profile", type=PROFILE_CHOICES, default="strict", show_default=True)
def cmd_simulate(
    model_path: str,
    scenario_path: str | None,
    seed: int | None,
    horizon: int | None,
    trace_out: str | None,
    with_metrics: bool,
    profile: str,
) -> None:
    """Run a scenario to its horizon and print the trace."""
    from dataclasses import replace

    model = _load_model(model_path)
    if scenario_path is not None:
        src = _read_source(scenario_path)
        try:
            scenario = parse_scenario(src.text, model, path=scenario_path)
        except ScenarioParseError as exc:
            for problem in exc.problems:
                click.echo(f"error: {problem}", err=True)
            sys.exit(2)
    else:
        scenario = Scenario(model=model)
    if seed is not None:
        scenario = replace(scenario, seed=seed)
    if horizon is not None:
        scenario = replace(scenario, horizon=horizon)

    try:
        trace = run_scenario(scenario, _profile(profile))
    except InvalidScenario as exc:
        for problem in exc.problems:
            click.echo(f"error: {problem}", err=True)
        sys.exit(1)

    text = dump_trace(trace)
    if with_metrics:
        text += "metrics:\n" + "".join(
            f"{line}\n" for line in trace_metrics(trace).lines()
        )
    if trace_out is not None:
        Path(trace_out).write_text(text, encoding="utf-8")
    click.echo(text, nl=False)


@main.command("export")
@click.argument("model_path", type=click.Path())
@click.option("--trace", "trace_path", type=click.Path(), default=None,
              help="Annotate the graph with counts from this trace file.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write to a file instead of standard output.")
@click.option("--profile", type=PROFILE_CHOICES, default="strict", show_default=True)
def cmd_export(
    model_path: str, trace_path: str | None, out_path: str | None, profile: str
) -> None:
    """Render a model (optionally trace-annotated) as DOT text."""
    model = _load_model(model_path)
    violations = [
        v for v in validate(model, _profile(profile)) if v.severity is Severity.ERROR
    ]
    if violations:
        click.echo(render_text(violations), nl=False, err=True)
        sys.exit(1)
    if trace_path is not None:
        try:
            trace = load_trace(_read_source(trace_path).text)
        except ValueError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        try:
            doc = export_trace(trace, model)
        except FingerprintMismatch as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
    else:
        doc = export_model(model)
    if out_path is not None:
        Path(out_path).write_text(doc, encoding="utf-8")
    else:
        click.echo(doc, nl=False)


@main.group("metrics")
def cmd_metrics() -> None:
    """Information measures."""


def _print_measure(value: float) -> None:
    click.echo(f"{value:.12g}")


@cmd_metrics.command("hartley")
@click.option("--n", type=int, required=True, help="Number of signs in the message.")
@click.option("--s", type=int, required=True, help="Vocabulary size.")
@click.option("--base", type=float, default=2.0, show_default=True)
def cmd_hartley(n: int, s: int, base: float) -> None:
    """Information in n signs over a vocabulary of s symbols."""
    try:
        _print_measure(hartley(n, s, base))
    except DomainError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


@cmd_metrics.command("choices")
@click.option("--c", type=int, required=True, help="Number of equally likely choices.")
def cmd_choices(c: int) -> None:
    """Information as reduction of uncertainty over c choices."""
    try:
        _print_measure(shannon_choices(c))
    except DomainError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)


@main.command("fmt")
@click.argument("path", type=click.Path())
@click.option("--check", is_flag=True, help="Exit 1 if the file is not canonical.")
def cmd_fmt(path: str, check: bool) -> None:
    """Rewrite a model file in canonical form (or check it with --check)."""
    src = _read_source(path)
    try:
        formatted = format_source(src)
    except RefusesMalformed as exc:
        for diag in exc.diagnostics:
            click.echo(diag.render(src), err=True)
        sys.exit(2)
    if check:
        if formatted != src.text:
            click.echo(f"{path}: not canonical")
            sys.exit(1)
        click.echo(f"{path}: canonical")
        return
    if formatted != src.text:
        Path(path).write_text(formatted, encoding="utf-8")
        click.echo(f"reformatted {path}")
    else:
        click.echo(f"{path}: unchanged")


@main.group("corpus")
def cmd_corpus() -> None:
    """Built-in model library."""


@cmd_corpus.command("list")
def cmd_corpus_list() -> None:
    """List corpus slugs."""
    for entry in corpus_mod.corpus_list():
        click.echo(entry.slug)


@cmd_corpus.command("show")
@click.argument("slug")
@click.option("--scenario", "show_scenario", is_flag=True,
              help="Print the default scenario instead of the model.")
def cmd_corpus_show(slug: str, show_scenario: bool) -> None:
    """Print a corpus model (or its scenario) to standard output."""
    try:
        if show_scenario:
            click.echo(corpus_mod.corpus_scenario_source(slug), nl=False)
        else:
            click.echo(corpus_mod.corpus_source(slug), nl=False)
    except corpus_mod.UnknownSlug:
        click.echo(f"error: unknown corpus slug '{slug}'", err=True)
        sys.exit(1)


@main.command("report")
@click.argument("model_path", type=click.Path())
@click.option("--scenario", "scenario_path", type=click.Path(), required=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--profile", type=PROFILE_CHOICES, default="strict", show_default=True)
def cmd_report(model_path: str, scenario_path: str, out_dir: str, profile: str) -> None:
    """Run a scenario and write trace, metrics and figures to a directory."""
    model = _load_model(model_path)
    src = _read_source(scenario_path)
    try:
        scenario = parse_scenario(src.text, model, path=scenario_path)
    except ScenarioParseError as exc:
        for problem in exc.problems:
            click.echo(f"error: {problem}", err=True)
        sys.exit(2)
    try:
        trace = run_scenario(scenario, _profile(profile))
    except InvalidScenario as exc:
        for problem in exc.problems:
            click.echo(f"error: {problem}", err=True)
        sys.exit(1)
    for path in write_report(trace, model, out_dir):
        click.echo(str(path))


if __name__ == "__main__":
    main()
