"""Operator CLI: serve, validate content, import labels, run analyses,
simulate synthetic cohorts.

Exit codes: 0 success, 1 validation failure, 2 I/O failure, 3 analysis
precondition not met.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import yaml

from . import content as content_mod
from . import reports
from .analyses import (
    AnalysisPrecondition,
    grader_evaluation,
    item_analysis,
    item_analysis_from_matrix,
    learning_battery,
    matrix_from_csv as item_analysis_matrix,
)
from .domain import BundleValidationError
from .engine import Engine, InvalidInput
from .psychometrics import CoverageMismatch, EmptyColumn, TooFewStudents
from .service import ServiceConfig, build_engine
from .simulate import run_simulation
from .store import CorruptLog

EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_PRECONDITION = 3


def _fail(code: int, message: str) -> None:
    click.echo(json.dumps({"error": message}), err=True)
    sys.exit(code)


def _open_engine(store_dir: str, form: str | None = None) -> Engine:
    try:
        config = ServiceConfig(store_dir=store_dir)
        if form:
            config.active_form = form
        return build_engine(config)
    except CorruptLog as exc:
        _fail(EXIT_IO, f"store is corrupt: {exc}")
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    raise AssertionError


def _resolve_form(form: str) -> str:
    return {"v1": "form-v1", "v2": "form-v2"}.get(form, form)


def _emit(text: str, payload: dict, out: str | None) -> None:
    click.echo(text)
    if out:
        Path(out).write_text(json.dumps(payload, indent=2, ensure_ascii=False), "utf-8")
        click.echo(f"\nreport written to {out}")


@click.group()
def main() -> None:
    """Prompting-literacy practice platform tools."""


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), required=False)
@click.option("--port", type=int, default=None, help="override the configured port")
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(config_path: str | None, port: int | None, host: str) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    try:
        config = ServiceConfig.from_file(config_path) if config_path else ServiceConfig()
        engine = build_engine(config)
    except BundleValidationError as exc:
        _fail(EXIT_VALIDATION, f"content invalid: {exc}")
        return
    except (OSError, CorruptLog) as exc:
        _fail(EXIT_IO, str(exc))
        return
    app = create_app(engine, frontend_dir=config.frontend_dir)
    uvicorn.run(app, host=host, port=port if port is not None else config.port)


@main.group()
def content() -> None:
    """Content bundle tools."""


@content.command("validate")
@click.argument("path", type=click.Path())
def content_validate(path: str) -> None:
    """Validate a scenario, item, or survey bundle file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
        return
    except yaml.YAMLError as exc:
        _fail(EXIT_VALIDATION, f"not valid YAML: {exc}")
        return
    if not isinstance(doc, dict):
        _fail(EXIT_VALIDATION, "bundle must be a mapping")
        return
    try:
        if "scenarios" in doc:
            scenarios = content_mod.validate_scenario_config(doc)
            click.echo(f"OK: {len(scenarios)} scenarios")
        elif "items" in doc or "forms" in doc:
            bank, forms = content_mod.validate_item_config(doc)
            click.echo(f"OK: {len(bank)} items, {len(forms)} forms")
        elif "pre_survey" in doc:
            bundle = content_mod.validate_survey_config(doc)
            click.echo(
                f"OK: {len(bundle.pre_survey)} pre-survey items, "
                f"{len(bundle.warmup)} warmup items"
            )
        else:
            _fail(EXIT_VALIDATION, "unrecognized bundle type")
            return
    except BundleValidationError as exc:
        for error in exc.errors:
            click.echo(f"error: {error}", err=True)
        sys.exit(EXIT_VALIDATION)


@main.group()
def labels() -> None:
    """Human label ingestion."""


@labels.command("import")
@click.argument("path", type=click.Path())
@click.option("--store", "store_dir", required=True, type=click.Path())
def labels_import(path: str, store_dir: str) -> None:
    """Import human grade labels and OE scores from a JSON file."""
    try:
        payload = json.loads(Path(path).read_text("utf-8"))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
        return
    except json.JSONDecodeError as exc:
        _fail(EXIT_VALIDATION, f"not valid JSON: {exc}")
        return
    engine = _open_engine(store_dir)
    try:
        counts = engine.ingest_labels(payload)
    except (InvalidInput, KeyError, TypeError, ValueError) as exc:
        _fail(EXIT_VALIDATION, f"bad label record: {exc}")
        return
    click.echo(
        f"imported {counts['grade_labels']} grade labels, {counts['oe_scores']} OE scores"
    )


@main.group()
def analyze() -> None:
    """Analyses over a deployment store."""


@analyze.command("items")
@click.option("--store", "store_dir", default=None, type=click.Path())
@click.option("--matrix", "matrix_path", default=None, type=click.Path(),
              help="analyze a response-matrix CSV instead of a store")
@click.option("--form", default="v1", show_default=True, help="v1, v2, or a form id")
@click.option("--occasion", default="post", show_default=True, type=click.Choice(["pre", "post"]))
@click.option("--out", default=None, type=click.Path(), help="also write the JSON report here")
def analyze_items(
    store_dir: str | None, matrix_path: str | None, form: str, occasion: str, out: str | None
) -> None:
    """Item difficulty/discrimination table with desired-range summary."""
    if (store_dir is None) == (matrix_path is None):
        _fail(EXIT_VALIDATION, "provide exactly one of --store or --matrix")
        return
    form_id = _resolve_form(form)
    try:
        if matrix_path is not None:
            bank, _ = content_mod.load_items()
            matrix = item_analysis_matrix(matrix_path)
            report = item_analysis_from_matrix(matrix, bank, label=matrix_path)
        else:
            engine = _open_engine(store_dir, form_id)
            report = item_analysis(engine.store, engine.forms[form_id], engine.bank, occasion)
    except KeyError:
        _fail(EXIT_VALIDATION, f"unknown form {form!r}")
        return
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
        return
    except (AnalysisPrecondition, TooFewStudents, EmptyColumn, ValueError) as exc:
        _fail(EXIT_PRECONDITION, str(exc))
        return
    _emit(reports.render_item_table(report), report.to_dict(), out)


@analyze.command("grader")
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--out", default=None, type=click.Path())
def analyze_grader(store_dir: str, out: str | None) -> None:
    """Auto-grader accuracy against imported human labels."""
    engine = _open_engine(store_dir)
    try:
        report = grader_evaluation(engine.store)
    except AnalysisPrecondition as exc:
        _fail(EXIT_PRECONDITION, str(exc))
        return
    except CoverageMismatch as exc:
        _fail(EXIT_PRECONDITION, f"label coverage mismatch: {exc}")
        return
    _emit(reports.render_grader_table(report), report.to_dict(), out)


@analyze.command("learning")
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option(
    "--source",
    default="auto_fallback",
    show_default=True,
    type=click.Choice(["human", "auto", "auto_fallback"]),
)
@click.option("--out", default=None, type=click.Path())
def analyze_learning(store_dir: str, source: str, out: str | None) -> None:
    """Cross-practice McNemar, confidence Wilcoxon, prior-use Pearson."""
    engine = _open_engine(store_dir)
    try:
        report = learning_battery(engine.store, engine.scenarios, source)
    except AnalysisPrecondition as exc:
        _fail(EXIT_PRECONDITION, str(exc))
        return
    _emit(reports.render_learning_table(report), report.to_dict(), out)


@main.command()
@click.option("--students", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--form", default="v1", show_default=True)
@click.option("--export-dir", default=None, type=click.Path())
def simulate(students: int, seed: int, store_dir: str, form: str, export_dir: str | None) -> None:
    """Drive a deterministic synthetic cohort through the full flow."""
    try:
        summary = run_simulation(
            store_dir,
            students,
            seed,
            form_id=_resolve_form(form),
            export_dir=export_dir,
        )
    except ValueError as exc:
        _fail(EXIT_VALIDATION, str(exc))
        return
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
        return
    click.echo(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
