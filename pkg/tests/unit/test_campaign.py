"""Unit tests for the Monte Carlo campaign driver."""

from unittest.mock import patch

import numpy as np
import pandas as pd
import pytest

from cellfree_mec.campaign import (
    SNAPSHOT_COLUMNS,
    USER_COLUMNS,
    MetricsTable,
    ergodic_se,
    run_campaign,
    simulate_snapshot,
)
from cellfree_mec.config import build_campaign_config
from cellfree_mec.errors import RoundingError


class TestErgodicSe:
    """Test class for the ergodic SE average."""

    def test_mean_over_realizations(self):
        """Test the average runs over the realization axis."""
        assert np.allclose(ergodic_se([[1.0, 2.0], [3.0, 4.0]]), [2.0, 3.0])

    def test_single_realization(self):
        """Test one realization is returned unchanged."""
        assert np.allclose(ergodic_se([[0.7, 1.1]]), [0.7, 1.1])

    def test_linear(self):
        """Test scaling every sample scales the average."""
        samples = np.random.default_rng(0).uniform(size=(5, 3))
        assert np.allclose(ergodic_se(3.0 * samples), 3.0 * ergodic_se(samples))


class TestMetricsTable:
    """Test class for metrics table helpers."""

    def test_empty(self):
        """Test an empty table has the schema columns."""
        metrics = MetricsTable.empty()
        assert list(metrics.users.columns) == list(USER_COLUMNS)
        assert list(metrics.snapshots.columns) == list(SNAPSHOT_COLUMNS)

    def test_feasibility_filters(self, sample_metrics):
        """Test infeasible snapshots are filtered and counted."""
        assert len(sample_metrics.feasible_users("cellfree")) == 2
        assert len(sample_metrics.feasible_snapshots("fullpower")) == 2
        assert sample_metrics.infeasibility_rate("cellfree") == 0.5
        assert sample_metrics.infeasibility_rate("fullpower") == 0.0
        assert np.isnan(sample_metrics.infeasibility_rate("cellular"))
        assert sample_metrics.modes == ["cellfree", "fullpower"]


class TestRunCampaign:
    """Test class for running a small campaign."""

    def test_rows(self, small_campaign):
        """Test one user row per user, snapshot and mode."""
        metrics = run_campaign(small_campaign)
        assert len(metrics.users) == 2 * 4 * 4
        assert len(metrics.snapshots) == 2 * 4
        assert list(metrics.users.columns) == list(USER_COLUMNS)
        assert set(metrics.modes) == {"cellfree", "cellular", "fullpower", "fullpower_cellular"}

    def test_full_power_total(self, small_campaign):
        """Test the full-power reference spends K p_max on both topologies."""
        metrics = run_campaign(small_campaign)
        for mode in ("fullpower", "fullpower_cellular"):
            rows = metrics.snapshots[metrics.snapshots["mode"] == mode]
            assert np.allclose(rows["total_power_w"], 4 * 0.1, rtol=1e-12)
            assert np.all(rows["infeasible"] == 0)
            assert np.all(rows["status"] == "reference")

    def test_deterministic(self, small_campaign):
        """Test equal seeds give identical metrics."""
        first = run_campaign(small_campaign)
        second = run_campaign(small_campaign)
        pd.testing.assert_frame_equal(first.users, second.users)
        pd.testing.assert_frame_equal(first.snapshots, second.snapshots)

    def test_energy_identity(self, small_campaign):
        """Test E = p / (B SE) on every feasible user row."""
        metrics = run_campaign(small_campaign)
        rows = metrics.feasible_users()
        rows = rows[rows["se"] > 0]
        energy = rows["energy_j_per_mbit"] * small_campaign.cellfree.bandwidth * rows["se"]
        assert np.allclose(energy / 1e6, rows["power_mw"] / 1e3, rtol=1e-9)

    def test_latency_certified(self, small_campaign):
        """Test feasible optimized users meet their deadline within 1e-6 s."""
        metrics = run_campaign(small_campaign)
        users = metrics.feasible_users()
        cellfree = users[users["mode"] == "cellfree"]
        cellular = users[users["mode"] == "cellular"]
        assert np.all(cellfree["latency_s"] <= 0.5 + 1e-6)
        assert np.all(cellular["latency_s"] <= 0.7 + 1e-6)

    def test_no_extra_realizations(self, small_campaign_data):
        """Test ergodic SE equals the optimized SE without extra realizations."""
        small_campaign_data["realizations"] = 0
        metrics = run_campaign(build_campaign_config(small_campaign_data))
        rows = metrics.feasible_users()
        assert np.allclose(rows["ergodic_se"], rows["se"])

    def test_workers_match_serial(self, small_campaign_data):
        """Test the process pool returns the serial result."""
        serial = run_campaign(build_campaign_config(small_campaign_data))
        small_campaign_data["workers"] = 2
        parallel = run_campaign(build_campaign_config(small_campaign_data))
        pd.testing.assert_frame_equal(serial.users, parallel.users)


class TestSimulateSnapshot:
    """Test class for a single snapshot."""

    def test_single_mode(self, small_campaign_data):
        """Test only the requested mode is simulated."""
        small_campaign_data["modes"] = ["cellular"]
        users, snapshots = simulate_snapshot(build_campaign_config(small_campaign_data), 0)
        assert set(users["mode"]) == {"cellular"}
        assert len(snapshots) == 1

    def test_failed_allocation_is_infeasible(self, small_campaign_data):
        """Test an allocation error marks the snapshot infeasible."""
        small_campaign_data["modes"] = ["cellfree"]
        config = build_campaign_config(small_campaign_data)
        with patch(
            "cellfree_mec.campaign.sca_solve_cellfree", side_effect=RoundingError("exhausted")
        ):
            users, snapshots = simulate_snapshot(config, 0)
        assert snapshots["infeasible"].tolist() == [1]
        assert set(users["status"]) == {"infeasible"}
        assert users["power_mw"].isna().all()

    @pytest.mark.parametrize("snapshot_id", [0, 1])
    def test_shared_tasks(self, small_campaign, snapshot_id):
        """Test both topologies offload the same task sizes."""
        users, _ = simulate_snapshot(small_campaign, snapshot_id)
        bandwidth = small_campaign.cellfree.bandwidth
        bits = {}
        for mode in ("fullpower", "fullpower_cellular"):
            rows = users[users["mode"] == mode]
            bits[mode] = (rows["transmission_s"] * bandwidth * rows["se"]).to_numpy()
        assert np.allclose(bits["fullpower"], bits["fullpower_cellular"], rtol=1e-9)
        assert np.all(np.isin(np.round(bits["fullpower"]), [1e6, 2e6]))
