"""End-to-end CLI run: campaign, SQLite store and re-report from the store."""

import numpy as np
import pandas as pd
import yaml

from cellfree_mec.cli import EXIT_OK, main
from cellfree_mec.store import load_metrics, verify_database


class TestCliRoundTrip:
    """Test class for a full CLI round trip."""

    def test_run_store_and_report_again(self, small_campaign_data, tmp_path):
        """Test reports re-emitted from the database match the original run."""
        config = tmp_path / "campaign.yml"
        config.write_text(yaml.safe_dump(small_campaign_data))
        database = tmp_path / "results.db"
        first, second = tmp_path / "first", tmp_path / "second"

        code = main(["--config", str(config), "--out", str(first), "--db", str(database)])
        assert code == EXIT_OK
        assert verify_database(database)
        assert len(load_metrics(database).users) == 2 * 4 * 4

        code = main(["--config", str(config), "--out", str(second), "--report-from", str(database)])
        assert code == EXIT_OK

        for name in ("summary.csv", "infeasibility.csv", "ratios.csv"):
            pd.testing.assert_frame_equal(
                pd.read_csv(first / name), pd.read_csv(second / name), check_dtype=False
            )
        cdf = pd.read_csv(second / "cdf" / "total_power_w__fullpower.csv", header=None)
        assert len(cdf) == 2
        assert np.allclose(cdf[0], 0.4)
