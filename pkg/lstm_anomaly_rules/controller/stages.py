"""
Pipeline stages. Each stage reads the artifacts of the stages before it through the DAOs and
writes its own, so any stage can be rerun on its own or fed by an external tool.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from lstm_anomaly_rules.controller.config import derive_seeds
from lstm_anomaly_rules.detectors.evt import (
    calibrate_q,
    detect_evt,
    excesses_over,
    fit_pot,
)
from lstm_anomaly_rules.detectors.gaussian import detect_gaussian, fit_gaussian, tune_tau_g
from lstm_anomaly_rules.detectors.tukey import detect_tukey, fit_tukey
from lstm_anomaly_rules.dto.config import BatchConfig, PipelineConfig
from lstm_anomaly_rules.dto.fits import DetectionResult, GaussianFit, GpdFit, TukeyFit
from lstm_anomaly_rules.dto.forecaster import Checkpoint, TrainReport
from lstm_anomaly_rules.dto.reports import MetricsReport, TestReport
from lstm_anomaly_rules.dto.series import ErrorSeries, SplitManifest, TimeSeries
from lstm_anomaly_rules.errors import AnomalyRulesError, DataError
from lstm_anomaly_rules.evaluation.matching import match_detections
from lstm_anomaly_rules.evaluation.metrics import compute_metrics, render_metrics_table
from lstm_anomaly_rules.forecaster.training import predict_windows, train
from lstm_anomaly_rules.series.core import absolute_errors, make_windows, split, split_boundaries
from lstm_anomaly_rules.stat_tests.anderson_darling import anderson_darling_gpd
from lstm_anomaly_rules.stat_tests.shapiro_wilk import MAX_SIZE, shapiro_wilk
from lstm_anomaly_rules.storage.artifact_client import ArtifactClient
from lstm_anomaly_rules.storage.dao.detection import DetectionDAO, fit_artifact
from lstm_anomaly_rules.storage.dao.errors import ErrorDAO
from lstm_anomaly_rules.storage.dao.model import ModelDAO
from lstm_anomaly_rules.storage.dao.report import ReportDAO
from lstm_anomaly_rules.storage.dao.series import SeriesDAO

logger = logging.getLogger(__name__)

SEGMENTS = ("train", "validation", "test")


@contextmanager
def stage(name: str):
    """Tags failures with the stage they happened in."""
    try:
        yield
    except AnomalyRulesError as e:
        raise e.tagged(name)
    except ValidationError as e:
        raise DataError(str(e), stage=name)


def _load_split(config: PipelineConfig, client: ArtifactClient) -> Tuple[TimeSeries, SplitManifest]:
    dao = SeriesDAO(config.output_dir, client=client)
    manifest = dao.get_split()
    return dao.get_series(manifest.series_name), manifest


def run_split(config: PipelineConfig, client: ArtifactClient) -> SplitManifest:
    with stage("split"):
        dataset = config.dataset
        if not dataset.path:
            raise DataError("no dataset path configured")
        series = SeriesDAO.load_csv(dataset.path, dataset.columns, dataset.name)
        if dataset.label_windows:
            series = SeriesDAO.load_label_windows(dataset.label_windows, series, dataset.label_key)

        train_segment, validation, test = split(series, config.split)
        manifest = SplitManifest(
            series_name=series.name,
            spec=config.split,
            boundaries=split_boundaries(len(series), config.split),
            rejected_rows=series.rejected_rows,
            label_count=len(series.label_set),
        )
        logger.info(
            "split %s into %d/%d/%d values (%d rows rejected, %d labels)",
            series.name,
            len(train_segment),
            len(validation),
            len(test),
            series.rejected_rows,
            manifest.label_count,
        )

        dao = SeriesDAO(config.output_dir, client=client)
        dao.save_series(series)
        dao.save_split(manifest)
        return manifest


def run_train(config: PipelineConfig, client: ArtifactClient) -> TrainReport:
    with stage("train"):
        if config.uses_external_errors:
            raise DataError("external errors are configured as the error source; there is no model to train")
        series, manifest = _load_split(config, client)
        forecaster = config.resolved_forecaster()

        windows = {}
        for name in ("train", "validation"):
            segment = series.segment(*getattr(manifest.boundaries, name))
            windows[name] = make_windows(segment, forecaster.l_b, forecaster.l_a, forecaster.window_stride)

        params, report = train(forecaster, windows["train"], windows["validation"])
        logger.info(
            "trained %s: %d epochs, best epoch %d", series.name, report.epochs_run, report.best_epoch
        )

        dao = ModelDAO(config.output_dir, client=client)
        dao.save_checkpoint(Checkpoint(config=forecaster, params=params, seed=forecaster.seed))
        dao.save_train_report(report)
        return report


def run_errors(config: PipelineConfig, client: ArtifactClient) -> ErrorSeries:
    with stage("errors"):
        series, _ = _load_split(config, client)
        dao = ErrorDAO(config.output_dir, client=client)

        if config.uses_external_errors:
            errors = ErrorDAO.load_external_errors(config.dataset.external_errors)
            if errors.indices[0] < 0 or errors.indices[-1] >= len(series):
                raise DataError(
                    f"external error indices span [{errors.indices[0]}, {errors.indices[-1]}] "
                    f"outside the series of length {len(series)}"
                )
        else:
            checkpoint = ModelDAO(config.output_dir, client=client).get_checkpoint()
            forecaster = checkpoint.config
            windows, predictions = predict_windows(checkpoint.params, series, forecaster)
            errors = absolute_errors(
                windows.targets,
                predictions,
                horizon_index=forecaster.horizon_index,
                indices=windows.origin_indices + forecaster.horizon_index,
            )
            dao.save_predictions(windows, predictions, forecaster.horizon_index)

        logger.info("%d prediction errors for %s", len(errors), series.name)
        dao.save_errors(errors)
        return errors


def _detect_gaussian(config: PipelineConfig, errors: ErrorSeries, manifest: SplitManifest, labels):
    fit = fit_gaussian(errors.restrict(*manifest.boundaries.train))
    if config.detectors.tau_g is not None:
        fit = fit.model_copy(update={"tau_g": config.detectors.tau_g})
    else:
        validation = errors.restrict(*manifest.boundaries.validation)
        fit, _ = tune_tau_g(fit, validation, labels, config.matching)
    return fit, detect_gaussian(fit, errors)


def _detect_evt(config: PipelineConfig, errors: ErrorSeries, manifest: SplitManifest, labels):
    detectors = config.detectors
    init = errors.restrict(0, manifest.boundaries.initialization_stop)
    q = detectors.q
    if q is None:
        if init.labels_within(labels):
            q = calibrate_q(init, labels, detectors.q_grid, detectors.level)
        else:
            q = detectors.fallback_q
            logger.warning("no labeled anomaly in the initialization stream; using q=%g", q)
    fit = fit_pot(init, detectors.level, q)
    return fit, detect_evt(fit, errors)


def _detect_tukey(config: PipelineConfig, errors: ErrorSeries, manifest: SplitManifest, labels):
    fit = fit_tukey(errors, config.detectors.fence_multiplier)
    return fit, detect_tukey(fit, errors)


DETECTORS = {
    "gaussian": _detect_gaussian,
    "evt": _detect_evt,
    "tukey": _detect_tukey,
}


def run_detect(
    config: PipelineConfig, client: ArtifactClient, rules: Optional[Sequence[str]] = None
) -> List[DetectionResult]:
    with stage("detect"):
        series, manifest = _load_split(config, client)
        errors = ErrorDAO(config.output_dir, client=client).get_errors()
    dao = DetectionDAO(config.output_dir, client=client)

    results = []
    for rule in rules or config.detectors.rules:
        with stage(f"detect-{rule}"):
            if rule not in DETECTORS:
                raise DataError(f"unknown detection rule {rule!r}")
            fit, result = DETECTORS[rule](config, errors, manifest, series.label_set)
            logger.info("%s flagged %d of %d errors", rule, int(result.flagged.sum()), len(errors))
            dao.save_fit(rule, fit)
            dao.save_detections(result)
            results.append(result)
    return results


def _shapiro_wilk(config: PipelineConfig, client: ArtifactClient, errors, manifest, series) -> TestReport:
    sample = errors
    if config.stat_tests.shapiro_source == "train":
        sample = errors.restrict(*manifest.boundaries.train)
    if len(sample) > MAX_SIZE:
        raise DataError(
            f"{len(sample)} errors exceed the Shapiro-Wilk limit of {MAX_SIZE}; "
            f"use the training errors as the sample"
        )
    return shapiro_wilk(sample.errors, alpha=config.stat_tests.alpha, series_name=series.name)


def _anderson_darling(config: PipelineConfig, client: ArtifactClient, errors, manifest, series) -> TestReport:
    init = errors.restrict(0, manifest.boundaries.initialization_stop)
    dao = DetectionDAO(config.output_dir, client=client)
    if dao.artifact_client.exists(fit_artifact("evt")):
        fit = dao.get_fit("evt")
    else:
        fit = fit_pot(init, config.detectors.level)
    tests = config.stat_tests
    return anderson_darling_gpd(
        excesses_over(init, fit.t),
        fit.gamma_hat,
        fit.sigma_hat,
        alpha=tests.alpha,
        n_bootstrap=tests.n_bootstrap,
        seed=config.resolved_seed(),
        max_workers=tests.max_workers,
        series_name=series.name,
    )


STAT_TESTS = {
    "sw": _shapiro_wilk,
    "ad": _anderson_darling,
}


def run_tests(
    config: PipelineConfig, client: ArtifactClient, which: Optional[Sequence[str]] = None
) -> List[TestReport]:
    with stage("test"):
        series, manifest = _load_split(config, client)
        errors = ErrorDAO(config.output_dir, client=client).get_errors()

    reports = []
    for name in which or config.stat_tests.tests:
        with stage(f"test-{name}"):
            reports.append(STAT_TESTS[name](config, client, errors, manifest, series))
    ReportDAO(config.output_dir, client=client).save_test_reports(reports)
    return reports


def _regulator(fit: Union[GaussianFit, GpdFit, TukeyFit]) -> Tuple[str, Optional[float]]:
    if isinstance(fit, GaussianFit):
        return "tau_g", fit.tau_g
    if isinstance(fit, GpdFit):
        return "q", fit.q
    return "fence_multiplier", fit.fence_multiplier


def run_evaluate(config: PipelineConfig, client: ArtifactClient) -> List[MetricsReport]:
    """Scores every stored detection; flags and labels inside the training segment are left out."""
    with stage("evaluate"):
        series, manifest = _load_split(config, client)
        dao = DetectionDAO(config.output_dir, client=client)
        rules = dao.available_rules()
        if not rules:
            raise DataError("no detections to evaluate; run detect first")

        start = manifest.boundaries.train[1]
        labels = frozenset(i for i in series.label_set if i >= start)
        reports = []
        for rule in rules:
            result = dao.get_detections(rule)
            flags = result.flagged_indices
            counts = match_detections(flags[flags >= start], labels, config.matching)
            regulator, value = _regulator(dao.get_fit(rule))
            reports.append(
                compute_metrics(
                    counts,
                    detector_name=rule,
                    series_name=series.name,
                    regulator=regulator,
                    regulator_value=value,
                )
            )

        ReportDAO(config.output_dir, client=client).save_metrics(reports, render_metrics_table(reports))
        return reports


def error_threshold(fit: Union[GaussianFit, GpdFit, TukeyFit]) -> float:
    """Detection threshold on the error scale; for the gaussian rule the upper crossing."""
    if isinstance(fit, GpdFit):
        return float(fit.tau_e)
    if isinstance(fit, TukeyFit):
        return fit.tau_t
    radicand = 2.0 * fit.sigma2 * (-fit.tau_g - 0.5 * np.log(2.0 * np.pi * fit.sigma2))
    return float(fit.mu + np.sqrt(radicand)) if radicand >= 0 else float("nan")


def run_report(config: PipelineConfig, client: ArtifactClient) -> pd.DataFrame:
    """Plot-ready table: one row per error with actual, predicted, thresholds and flags."""
    with stage("report"):
        series, manifest = _load_split(config, client)
        errors = ErrorDAO(config.output_dir, client=client).get_errors()
        idx = errors.indices

        segment = np.full(idx.size, SEGMENTS[-1], dtype=object)
        for name in reversed(SEGMENTS):
            lo, hi = getattr(manifest.boundaries, name)
            segment[(idx >= lo) & (idx < hi)] = name

        frame = pd.DataFrame(
            {
                "index": idx,
                "timestamp": series.timestamps[idx],
                "segment": segment,
                "actual": series.values[idx],
                "label": np.isin(idx, sorted(series.label_set)).astype(np.int64),
            }
        )
        error_dao = ErrorDAO(config.output_dir, client=client)
        if error_dao.has_predictions():
            predictions = error_dao.get_predictions()[["index", "predicted"]]
            frame = frame.merge(predictions, on="index", how="left")
        else:
            frame["predicted"] = np.nan
        frame["error"] = errors.errors

        detection_dao = DetectionDAO(config.output_dir, client=client)
        for rule in detection_dao.available_rules():
            result = detection_dao.get_detections(rule)
            frame[f"{rule}_threshold"] = error_threshold(detection_dao.get_fit(rule))
            frame[f"{rule}_flag"] = result.flagged

        ReportDAO(config.output_dir, client=client).save_plot_data(frame)
        return frame


def run_pipeline(config: PipelineConfig, client: Optional[ArtifactClient] = None) -> List[MetricsReport]:
    """All stages in one write transaction: on failure nothing is published."""
    client = client or ArtifactClient(output_dir=config.output_dir)
    with client.execute_write_transaction():
        run_split(config, client)
        if not config.uses_external_errors:
            run_train(config, client)
        run_errors(config, client)
        run_detect(config, client)
        if config.stat_tests.tests:
            run_tests(config, client)
        reports = run_evaluate(config, client)
        run_report(config, client)
    return reports


def run_batch(batch: BatchConfig) -> Dict[str, Union[List[MetricsReport], AnomalyRulesError]]:
    """
    Runs every pipeline of a batch on a thread pool. Runs without a seed get one derived from
    the batch seed. A failing run does not stop the others.
    """
    seeds = derive_seeds(batch.seed, len(batch.runs))
    runs = [
        run if run.seed is not None else run.model_copy(update={"seed": seed})
        for run, seed in zip(batch.runs, seeds)
    ]

    def attempt(run: PipelineConfig):
        try:
            return run_pipeline(run)
        except AnomalyRulesError as e:
            logger.error("run %s failed: %s", run.output_dir, e)
            return e

    with ThreadPoolExecutor(max_workers=batch.max_workers) as executor:
        outcomes = list(executor.map(attempt, runs))
    return {run.output_dir: outcome for run, outcome in zip(runs, outcomes)}
