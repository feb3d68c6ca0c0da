import json
from typing import Any, Callable, Dict, List, Optional, Tuple

import click
from pydantic import ValidationError
from pydantic_core import to_jsonable_python

from lstm_anomaly_rules.controller.config import build_batch, build_config, is_batch, read_config_file
from lstm_anomaly_rules.controller.stages import (
    run_batch,
    run_detect,
    run_errors,
    run_evaluate,
    run_pipeline,
    run_report,
    run_split,
    run_tests,
    run_train,
)
from lstm_anomaly_rules.dto.config import RULES, PipelineConfig
from lstm_anomaly_rules.errors import AnomalyRulesError
from lstm_anomaly_rules.forecaster.presets import PRESETS
from lstm_anomaly_rules.storage.artifact_client import ArtifactClient
from lstm_anomaly_rules.storage.dao.report import METRICS_TABLE_ARTIFACT, ReportDAO


def _float_list(ctx, param, value: Optional[str]) -> Optional[List[float]]:
    if value is None:
        return None
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma separated numbers, got {value!r}")


def _int_list(ctx, param, value: Optional[str]) -> Optional[List[int]]:
    if value is None:
        return None
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma separated integers, got {value!r}")


def _option(*decls, field: Tuple[str, ...], **attrs) -> Tuple[str, Tuple[str, ...], Callable]:
    """A click option together with its parameter name and the PipelineConfig field it sets."""
    names = [d for d in decls if not d.startswith("-")]
    name = names[0] if names else decls[0].split("/")[0].lstrip("-").replace("-", "_")
    return name, field, click.option(*decls, **attrs)


OPTIONS = [
    _option("--data", help="Input CSV with timestamp, value and optional label columns.", field=("dataset", "path")),
    _option("--name", help="Series name used in reports; defaults to the file name.", field=("dataset", "name")),
    _option("--timestamp-column", field=("dataset", "columns", "timestamp")),
    _option("--value-column", field=("dataset", "columns", "value")),
    _option("--label-column", field=("dataset", "columns", "label")),
    _option("--label-windows", help="JSON file of anomaly windows to label the series with.", field=("dataset", "label_windows")),
    _option("--label-key", help="Entry of the label windows file that belongs to this series.", field=("dataset", "label_key")),
    _option("--external-errors", help="CSV of (index, error) used instead of a trained model.", field=("dataset", "external_errors")),
    _option("--output-dir", help="Artifact directory, relative to $ANOMALY_RULES_OUTPUT_ROOT when set.", field=("output_dir",)),
    _option("--seed", type=int, field=("seed",)),
    _option("--train-fraction", type=float, field=("split", "train_fraction")),
    _option("--validation-fraction", type=float, field=("split", "validation_fraction")),
    _option("--test-fraction", type=float, field=("split", "test_fraction")),
    _option("--preset", type=click.Choice(sorted(PRESETS)), field=("preset",)),
    _option("--layers", callback=_int_list, help="Recurrent layer sizes, e.g. 60,30.", field=("forecaster", "recurrent_layer_sizes")),
    _option("--dropout", type=float, field=("forecaster", "dropout_rate")),
    _option("--learning-rate", type=float, field=("forecaster", "learning_rate")),
    _option("--look-back", type=int, field=("forecaster", "l_b")),
    _option("--look-ahead", type=int, field=("forecaster", "l_a")),
    _option("--epochs", type=int, field=("forecaster", "max_epochs")),
    _option("--batch-size", type=int, field=("forecaster", "batch_size")),
    _option("--patience", type=int, field=("forecaster", "early_stopping_patience")),
    _option("--horizon", type=int, help="Look-ahead position whose error is thresholded.", field=("forecaster", "horizon_index")),
    _option("--stride", type=int, help="Training window stride.", field=("forecaster", "window_stride")),
    _option("--tau-g", type=float, help="Fixed log-PD threshold instead of tuning.", field=("detectors", "tau_g")),
    _option("--level", type=float, help="Quantile level of the initial POT threshold.", field=("detectors", "level")),
    _option("--q", "risk_level", type=float, help="Fixed EVT risk level instead of calibrating.", field=("detectors", "q")),
    _option("--q-grid", callback=_float_list, field=("detectors", "q_grid")),
    _option("--fence", type=float, help="Tukey fence multiplier.", field=("detectors", "fence_multiplier")),
    _option("--alpha", type=float, field=("stat_tests", "alpha")),
    _option("--bootstrap", type=int, help="Anderson-Darling bootstrap resamples.", field=("stat_tests", "n_bootstrap")),
    _option("--shapiro-source", type=click.Choice(["all", "train"]), field=("stat_tests", "shapiro_source")),
    _option("--workers", type=int, field=("stat_tests", "max_workers")),
    _option("--tolerance", type=int, help="Timesteps a flag may miss a label by.", field=("matching", "tolerance")),
    _option("--event-level/--point-level", default=None, field=("matching", "event_level")),
]


FIELD_PATHS: Dict[str, Tuple[str, ...]] = {name: field for name, field, _ in OPTIONS}


def pipeline_options(func):
    for _, _, option in reversed(OPTIONS):
        func = option(func)
    return click.option(
        "--config",
        "config_path",
        help="JSON config; its values override command-line flags.",
    )(func)


def collect_flags(kwargs: Dict[str, Any]) -> Dict[str, Any]:
    flags: Dict[str, Any] = {}
    for name, value in kwargs.items():
        if value is None or name not in FIELD_PATHS:
            continue
        *parents, leaf = FIELD_PATHS[name]
        node = flags
        for parent in parents:
            node = node.setdefault(parent, {})
        node[leaf] = value
    return flags


def load_config(config_path: Optional[str], kwargs: Dict[str, Any]) -> PipelineConfig:
    try:
        return build_config(collect_flags(kwargs), config_path)
    except ValidationError as e:
        raise click.UsageError(f"invalid configuration: {e}")


def respond(payload: Dict[str, Any]):
    click.echo(json.dumps(payload, default=to_jsonable_python, indent=2))


def _run_stage(config: PipelineConfig, run: Callable, *args):
    client = ArtifactClient(output_dir=config.output_dir)
    with client.execute_write_transaction():
        return run(config, client, *args)


@click.command("split")
@pipeline_options
def split_series(config_path, **kwargs):
    """Load the series, split it chronologically and store the split manifest."""
    config = load_config(config_path, kwargs)
    manifest = _run_stage(config, run_split)
    respond({"message": "Successfully split series", "split": manifest})


@click.command("train")
@pipeline_options
def train_model(config_path, **kwargs):
    """Train the LSTM forecaster on the training segment."""
    config = load_config(config_path, kwargs)
    report = _run_stage(config, run_train)
    respond(
        {
            "message": "Successfully trained forecaster",
            "epochsRun": report.epochs_run,
            "bestEpoch": report.best_epoch,
            "stoppedEarly": report.stopped_early,
        }
    )


@click.command("errors")
@pipeline_options
def compute_errors(config_path, **kwargs):
    """Prediction errors from the trained model, or imported from --external-errors."""
    config = load_config(config_path, kwargs)
    errors = _run_stage(config, run_errors)
    respond({"message": "Successfully computed prediction errors", "count": len(errors)})


@click.command("detect")
@click.option("--rule", "rules", multiple=True, type=click.Choice(RULES), help="Repeat for several rules.")
@pipeline_options
def detect(config_path, rules, **kwargs):
    """Fit the detection rules and flag anomalous errors."""
    config = load_config(config_path, kwargs)
    results = _run_stage(config, run_detect, list(rules) or None)
    respond(
        {
            "message": "Successfully ran detection rules",
            "flagged": {r.detector: int(r.flagged.sum()) for r in results},
        }
    )


@click.command("test")
@click.option("--which", "which", multiple=True, type=click.Choice(["sw", "ad"]))
@pipeline_options
def stat_test(config_path, which, **kwargs):
    """Shapiro-Wilk on the errors and Anderson-Darling of the excesses against their GPD."""
    config = load_config(config_path, kwargs)
    reports = _run_stage(config, run_tests, list(which) or None)
    respond({"message": "Successfully ran statistical tests", "tests": reports})


@click.command("evaluate")
@pipeline_options
def evaluate(config_path, **kwargs):
    """Precision, recall and F1 of every stored detection."""
    config = load_config(config_path, kwargs)
    reports = _run_stage(config, run_evaluate)
    respond({"message": "Successfully evaluated detections", "metrics": reports})


@click.command("report")
@pipeline_options
def report(config_path, **kwargs):
    """Write plot data and print the metrics table and test results."""
    config = load_config(config_path, kwargs)
    frame = _run_stage(config, run_report)

    client = ArtifactClient(output_dir=config.output_dir)
    if client.exists(METRICS_TABLE_ARTIFACT):
        with open(client.locate(METRICS_TABLE_ARTIFACT)) as f:
            click.echo(f.read(), nl=False)
    for test in ReportDAO(config.output_dir, client=client).get_test_reports():
        click.echo(
            f"{test.test_name}: statistic={test.statistic:.4f} p={test.p_value_display} "
            f"reject={test.reject_null} ({test.method})"
        )
    click.echo(f"plot data: {len(frame)} rows")


@click.command("pipeline")
@pipeline_options
@click.pass_context
def pipeline(ctx, config_path, **kwargs):
    """Every stage in order. A --config holding "runs" starts a batch."""
    if config_path and is_batch(read_config_file(config_path)):
        try:
            batch = build_batch(config_path)
        except ValidationError as e:
            raise click.UsageError(f"invalid batch configuration: {e}")
        outcomes = run_batch(batch)

        failures = {out: e for out, e in outcomes.items() if isinstance(e, AnomalyRulesError)}
        respond(
            {
                "message": f"Finished {len(outcomes) - len(failures)} of {len(outcomes)} runs",
                "failed": {out: str(e) for out, e in failures.items()},
            }
        )
        if failures:
            ctx.exit(next(iter(failures.values())).exit_code)
        return

    config = load_config(config_path, kwargs)
    reports = run_pipeline(config)
    respond({"message": "Successfully ran pipeline", "metrics": reports})


COMMANDS = [split_series, train_model, compute_errors, detect, stat_test, evaluate, report, pipeline]
