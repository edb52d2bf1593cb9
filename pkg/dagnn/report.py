"""CSV plot data, the JSON run summary and the training log."""

from csv import writer
from logging import getLogger
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from dagnn.evaluation import LayerwiseReport, SweepRow, TestMetrics
from dagnn.exceptions import DataError
from dagnn.json import dump_json
from dagnn.types import LogRow


__all__ = [
    "LAYER_HEADER",
    "LOG_HEADER",
    "METRICS_HEADER",
    "TrainingLog",
    "emit_report",
    "write_csv",
]


LOGGER = getLogger("dagnn.report")
LAYER_HEADER = ("model", "layer", "mean", "stderr")
METRICS_HEADER = (
    "model",
    "mse_x",
    "sse_x",
    "mean_violation",
    "mse_lambda",
    "duality_gap_proxy",
    "instances",
)
LOG_HEADER = LogRow._fields
CURVES = ("gradnorm", "violation", "slackness")


def write_csv(
    path: Union[Path, str], header: Sequence[str], rows: Iterable[Sequence]
) -> Path:
    """Writes a CSV file with a header row."""

    path = Path(path)

    try:
        with path.open("w", encoding="utf-8", newline="") as file:
            csv = writer(file, lineterminator="\n")
            csv.writerow(header)
            csv.writerows(rows)
    except OSError as error:
        raise DataError(path, f"Cannot write file: {error.strerror}.") from error

    LOGGER.info("Wrote %s.", path)
    return path


def _layer_rows(
    layerwise: Mapping[str, LayerwiseReport], curve: str
) -> Iterable[tuple]:
    for model, report in layerwise.items():
        for stat in getattr(report, curve):
            yield (model, stat.layer, stat.mean, stat.stderr)


def _metric_row(model: str, metrics: TestMetrics) -> tuple:
    return (model, *metrics)


def emit_report(
    out_dir: Union[Path, str],
    *,
    layerwise: Optional[Mapping[str, LayerwiseReport]] = None,
    metrics: Optional[Mapping[str, TestMetrics]] = None,
    sweeps: Optional[Sequence[SweepRow]] = None,
    summary: Optional[dict] = None,
) -> list[Path]:
    """Writes the plot data CSVs that have data plus summary.json."""

    out_dir = Path(out_dir)

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as error:
        raise DataError(out_dir, f"Cannot create directory: {error.strerror}.") from error

    written = []

    if layerwise:
        for curve in CURVES:
            written.append(
                write_csv(
                    out_dir / f"fig2_{curve}.csv",
                    LAYER_HEADER,
                    _layer_rows(layerwise, curve),
                )
            )

    if metrics:
        written.append(
            write_csv(
                out_dir / "metrics.csv",
                METRICS_HEADER,
                (_metric_row(model, values) for model, values in metrics.items()),
            )
        )

    for axis in sorted({row.axis for row in sweeps or ()}):
        written.append(
            write_csv(
                out_dir / f"fig3_{axis}.csv",
                (axis, *METRICS_HEADER),
                (
                    (row.value, *_metric_row(row.model, row.metrics))
                    for row in sweeps
                    if row.axis == axis
                ),
            )
        )

    summary = dict(summary or {})
    summary.setdefault("config", {})
    summary.setdefault("seeds", {})
    summary.setdefault("checkpoints", {})
    summary["metrics"] = {
        **summary.get("metrics", {}),
        **{model: values.to_json() for model, values in (metrics or {}).items()},
    }
    dump_json(out_dir / "summary.json", summary)
    written.append(out_dir / "summary.json")
    return written


class TrainingLog:
    """Append-only CSV log of training steps."""

    def __init__(self, path: Union[Path, str]):
        self.path = Path(path)

        if not self.path.exists():
            write_csv(self.path, LOG_HEADER, ())

    def __call__(self, row: LogRow) -> None:
        """Appends a row."""
        try:
            with self.path.open("a", encoding="utf-8", newline="") as file:
                writer(file, lineterminator="\n").writerow(row)
        except OSError as error:
            raise DataError(self.path, f"Cannot write file: {error.strerror}.") from error

        LOGGER.debug("Step %i: loss %.6g.", row.step, row.loss)
