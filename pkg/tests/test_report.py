"""Tests of CSV plot data, the run summary and the training log."""

from csv import reader
from json import loads

import pytest

from dagnn.evaluation import LayerwiseReport, SweepRow, TestMetrics
from dagnn.exceptions import DataError
from dagnn.report import (
    LAYER_HEADER,
    LOG_HEADER,
    METRICS_HEADER,
    TrainingLog,
    emit_report,
    write_csv,
)
from dagnn.types import LayerStat, LogRow


METRICS = TestMetrics(0.5, 4.0, 0.01, 0.25, 0.125, 10)
CURVE = [LayerStat(0, 1.0, 0.1), LayerStat(1, 0.5, 0.05)]
LAYERWISE = {"constrained": LayerwiseReport(CURVE, CURVE[:1], CURVE[:1])}


def _rows(path):
    with path.open(encoding="utf-8", newline="") as file:
        return list(reader(file))


def test_empty_report_writes_summary_only(tmp_path):
    written = emit_report(tmp_path)
    assert written == [tmp_path / "summary.json"]
    summary = loads((tmp_path / "summary.json").read_text())
    assert set(summary) == {"config", "seeds", "checkpoints", "metrics"}


def test_layerwise_and_metrics_files(tmp_path):
    emit_report(tmp_path, layerwise=LAYERWISE, metrics={"constrained": METRICS})
    gradnorm = _rows(tmp_path / "fig2_gradnorm.csv")
    assert tuple(gradnorm[0]) == LAYER_HEADER
    assert gradnorm[1:] == [["constrained", "0", "1.0", "0.1"], ["constrained", "1", "0.5", "0.05"]]
    assert len(_rows(tmp_path / "fig2_violation.csv")) == 2
    metrics = _rows(tmp_path / "metrics.csv")
    assert tuple(metrics[0]) == METRICS_HEADER
    assert metrics[1] == ["constrained", "0.5", "4.0", "0.01", "0.25", "0.125", "10"]
    summary = loads((tmp_path / "summary.json").read_text())
    assert summary["metrics"]["constrained"]["mseX"] == 0.5


def test_sweep_files_lead_with_the_axis(tmp_path):
    rows = [
        SweepRow("r", 0, "a", METRICS),
        SweepRow("r", 5, "a", METRICS),
        SweepRow("n", 40, "a", METRICS),
    ]
    emit_report(tmp_path, sweeps=rows)
    sweep = _rows(tmp_path / "fig3_r.csv")
    assert sweep[0] == ["r", *METRICS_HEADER]
    assert [row[0] for row in sweep[1:]] == ["0", "5"]
    assert len(_rows(tmp_path / "fig3_n.csv")) == 2


def test_reports_are_byte_identical(tmp_path):
    for name in ("first", "second"):
        emit_report(
            tmp_path / name,
            layerwise=LAYERWISE,
            metrics={"constrained": METRICS},
            summary={"seeds": {"master": 0}},
        )

    for file in ("fig2_gradnorm.csv", "metrics.csv", "summary.json"):
        assert (tmp_path / "first" / file).read_bytes() == (
            tmp_path / "second" / file
        ).read_bytes()


def test_write_failure_is_a_data_error(tmp_path):
    with pytest.raises(DataError):
        write_csv(tmp_path / "missing" / "file.csv", LAYER_HEADER, ())


def test_training_log_appends(tmp_path):
    path = tmp_path / "train.csv"
    log = TrainingLog(path)
    log(LogRow(0, "dual", 0, 1, 2.5, 0.1, 0.0, 0.2, 0.0))
    log(LogRow(0, "primal", 0, 2, 1.5, -0.1, 0.3, 0.2, 0.0))
    TrainingLog(path)(LogRow(1, "dual", 0, 3, 1.0, 0.0, 0.3, 0.2, 0.0))
    rows = _rows(path)
    assert tuple(rows[0]) == LOG_HEADER
    assert [row[1] for row in rows[1:]] == ["dual", "primal", "dual"]
    assert [row[3] for row in rows[1:]] == ["1", "2", "3"]


def test_report_file_names(tmp_path):
    written = emit_report(
        tmp_path,
        layerwise=LAYERWISE,
        metrics={"constrained": METRICS},
        sweeps=[SweepRow("m", 25, "constrained", METRICS)],
    )
    assert sorted(path.name for path in written) == [
        "fig2_gradnorm.csv",
        "fig2_slackness.csv",
        "fig2_violation.csv",
        "fig3_m.csv",
        "metrics.csv",
        "summary.json",
    ]
