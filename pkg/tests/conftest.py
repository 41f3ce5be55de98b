"""Shared fixtures: a small two-topology campaign and a hand-made metrics table."""

import numpy as np
import pandas as pd
import pytest

from cellfree_mec.campaign import SNAPSHOT_COLUMNS, USER_COLUMNS, MetricsTable
from cellfree_mec.config import build_campaign_config


SMALL_CAMPAIGN = {
    "snapshots": 2,
    "realizations": 1,
    "cellfree": {
        "coverage_side": 200.0,
        "num_aps": 4,
        "antennas_per_ap": 2,
        "num_users": 4,
        "tau_p": 2,
        "tau_u": 198,
    },
    "cellular": {
        "coverage_side": 200.0,
        "num_aps": 1,
        "antennas_per_ap": 8,
        "num_users": 4,
        "tau_p": 2,
        "tau_u": 198,
    },
    "offload": {"task_bits_max": 2_000_000},
}


@pytest.fixture
def small_campaign_data():
    """Raw mapping of a four-user campaign on a 200 m square"""
    return {
        key: dict(value) if isinstance(value, dict) else value
        for key, value in SMALL_CAMPAIGN.items()
    }


@pytest.fixture
def small_campaign(small_campaign_data):
    return build_campaign_config(small_campaign_data)


def _user_rows(mode, snapshot, power_mw, status="optimal"):
    power_mw = np.asarray(power_mw, dtype=float)
    count = power_mw.size
    infeasible = status == "infeasible"
    value = np.nan if infeasible else 1.0
    return pd.DataFrame(
        {
            "mode": mode,
            "snapshot": snapshot,
            "user": np.arange(count),
            "power_mw": np.nan if infeasible else power_mw,
            "se": value * 2.0,
            "ergodic_se": value * 2.5,
            "energy_j_per_mbit": value * 0.01,
            "f_cpu_ghz": value * 3.0,
            "f_ap_ghz": value * 1.0,
            "f_total_ghz": value * 4.0,
            "transmission_s": value * 0.01,
            "computation_s": value * 0.02,
            "fronthaul_s": value * 0.003,
            "latency_s": value * 0.033,
            "status": status,
        }
    )[list(USER_COLUMNS)]


def _snapshot_row(mode, snapshot, total_power_w, status="optimal"):
    infeasible = status == "infeasible"
    return {
        "mode": mode,
        "snapshot": snapshot,
        "total_power_w": np.nan if infeasible else total_power_w,
        "total_compute_ghz": np.nan if infeasible else 8.0,
        "min_se": np.nan if infeasible else 2.0,
        "infeasible": int(infeasible),
        "sca_iters": 3,
        "objective": np.nan if infeasible else -1.0,
        "kkt_residual": np.nan if infeasible else 1e-8,
        "status": status,
    }


@pytest.fixture
def sample_metrics():
    """Two users, two snapshots; the second cell-free snapshot is infeasible"""
    users = pd.concat(
        [
            _user_rows("cellfree", 0, [10.0, 30.0]),
            _user_rows("cellfree", 1, [20.0, 20.0], status="infeasible"),
            _user_rows("fullpower", 0, [100.0, 100.0], status="reference"),
            _user_rows("fullpower", 1, [100.0, 100.0], status="reference"),
        ],
        ignore_index=True,
    )
    snapshots = pd.DataFrame(
        [
            _snapshot_row("cellfree", 0, 0.04),
            _snapshot_row("cellfree", 1, 0.04, status="infeasible"),
            _snapshot_row("fullpower", 0, 0.2, status="reference"),
            _snapshot_row("fullpower", 1, 0.2, status="reference"),
        ]
    )[list(SNAPSHOT_COLUMNS)]
    return MetricsTable(users=users, snapshots=snapshots)
