"""Unit tests for CDF and summary reports."""

from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest

from cellfree_mec.campaign import MetricsTable
from cellfree_mec.report import (
    CDF_METRICS,
    empirical_cdf,
    emit_report,
    infeasibility,
    metric_samples,
    ratios,
    summarize,
)


class TestEmpiricalCdf:
    """Test class for empirical CDFs."""

    def test_sorted_probabilities(self):
        """Test values are sorted with probabilities i / n."""
        cdf = empirical_cdf([3.0, 1.0, 2.0])
        assert cdf["value"].tolist() == [1.0, 2.0, 3.0]
        assert np.allclose(cdf["probability"], [1 / 3, 2 / 3, 1.0])

    def test_nan_dropped(self):
        """Test NaN samples are excluded."""
        cdf = empirical_cdf([np.nan, 4.0])
        assert cdf["value"].tolist() == [4.0]
        assert cdf["probability"].tolist() == [1.0]

    def test_empty(self):
        """Test an empty sample gives an empty CDF."""
        assert empirical_cdf([]).empty


class TestSummaries:
    """Test class for summary, infeasibility and ratio tables."""

    def test_infeasible_excluded(self, sample_metrics):
        """Test samples of infeasible snapshots never reach a CDF."""
        power = metric_samples(sample_metrics, "power_mw", "cellfree")
        assert sorted(power) == [10.0, 30.0]
        total = metric_samples(sample_metrics, "total_power_w", "cellfree")
        assert total.tolist() == [0.04]

    def test_summary_median(self, sample_metrics):
        """Test the reported median matches sorting."""
        summary = summarize(sample_metrics)
        row = summary[(summary["mode"] == "cellfree") & (summary["metric"] == "power_mw")]
        assert row["median"].iloc[0] == pytest.approx(20.0)
        assert row["count"].iloc[0] == 2

    def test_infeasibility_rate(self, sample_metrics):
        """Test infeasible counts and rates per mode."""
        table = infeasibility(sample_metrics).set_index("mode")
        assert table.loc["cellfree", "infeasible"] == 1
        assert table.loc["cellfree", "rate"] == 0.5
        assert table.loc["fullpower", "rate"] == 0.0

    def test_ratios(self, sample_metrics):
        """Test percentile ratios between cell-free and full power."""
        table = ratios(sample_metrics)
        median = table[
            (table["metric"] == "total_power_w")
            & (table["numerator"] == "cellfree")
            & (table["denominator"] == "fullpower")
            & (table["percentile"] == 50)
        ]
        assert median["ratio"].iloc[0] == pytest.approx(0.2)
        assert set(table["percentile"]) == {5, 10, 25, 50, 75, 90, 95}
        assert "cellular" not in set(table["numerator"])


class TestEmitReport:
    """Test class for writing report files."""

    def test_files(self, sample_metrics, tmp_path):
        """Test every CDF and table file is written."""
        written = emit_report(sample_metrics, tmp_path)
        for mode in ("cellfree", "fullpower"):
            for metric in CDF_METRICS:
                assert (tmp_path / "cdf" / f"{metric}__{mode}.csv").exists()
        for name in ("summary.csv", "infeasibility.csv", "ratios.csv", "metrics_users.csv"):
            assert tmp_path / name in written

    def test_single_value_cdf(self, tmp_path):
        """Test a single sample writes one 'value,1.0' line."""
        users = pd.DataFrame(
            {
                "mode": ["cellfree"],
                "snapshot": [0],
                "user": [0],
                "power_mw": [500.0],
                "status": ["optimal"],
            }
        )
        snapshots = pd.DataFrame(
            {"mode": ["cellfree"], "snapshot": [0], "total_power_w": [0.5], "infeasible": [0]}
        )
        metrics = MetricsTable(
            users=users.reindex(columns=MetricsTable.empty().users.columns),
            snapshots=snapshots.reindex(columns=MetricsTable.empty().snapshots.columns),
        )
        emit_report(metrics, tmp_path)
        assert (tmp_path / "cdf" / "power_mw__cellfree.csv").read_text() == "500.0,1.0\n"

    def test_csv_has_no_header(self, sample_metrics, tmp_path):
        """Test CDF files are two-column without header."""
        emit_report(sample_metrics, tmp_path)
        cdf = pd.read_csv(tmp_path / "cdf" / "power_mw__fullpower.csv", header=None)
        assert cdf.shape == (4, 2)
        assert cdf[1].iloc[-1] == 1.0

    def test_empty_metrics(self, tmp_path):
        """Test an empty metrics table raises ValueError."""
        with pytest.raises(ValueError):
            emit_report(MetricsTable.empty(), tmp_path)

    def test_database(self, sample_metrics, tmp_path):
        """Test the metrics are stored when a database is given."""
        with patch("cellfree_mec.report.write_metrics") as mock_write:
            written = emit_report(sample_metrics, tmp_path, database=tmp_path / "results.db")
        mock_write.assert_called_once_with(tmp_path / "results.db", sample_metrics)
        assert tmp_path / "results.db" in written
