from typing import Iterable, Optional

from lstm_anomaly_rules.dto.reports import ConfusionCounts, MetricsReport


def harmonic_f1(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def compute_metrics(
    counts: ConfusionCounts,
    detector_name: str = "",
    series_name: str = "",
    regulator: Optional[str] = None,
    regulator_value: Optional[float] = None,
) -> MetricsReport:
    tp, fp, fn = counts.true_positives, counts.false_positives, counts.false_negatives
    zero_division = tp + fp == 0 or tp + fn == 0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return MetricsReport(
        precision=precision,
        recall=recall,
        f1=harmonic_f1(precision, recall),
        counts=counts,
        detector_name=detector_name,
        series_name=series_name,
        zero_division=zero_division,
        regulator=regulator,
        regulator_value=regulator_value,
    )


def render_metrics_table(reports: Iterable[MetricsReport]) -> str:
    """Plain-text table with one row per (series, detector)."""
    header = (
        f"{'series':<24} {'detector':<10} {'P':>6} {'R':>6} {'F1':>6} "
        f"{'TP':>5} {'FP':>5} {'FN':>5}  regulator"
    )
    lines = [header, "-" * len(header)]
    for r in reports:
        regulator = ""
        if r.regulator is not None and r.regulator_value is not None:
            regulator = f"{r.regulator}={r.regulator_value:.6g}"
        lines.append(
            f"{r.series_name:<24} {r.detector_name:<10} {r.precision:>6.2f} {r.recall:>6.2f} "
            f"{r.f1:>6.2f} {r.counts.true_positives:>5} {r.counts.false_positives:>5} "
            f"{r.counts.false_negatives:>5}  {regulator}"
        )
    return "\n".join(lines) + "\n"
