# -*- coding: utf-8 -*-

# Copyright: (c) 2024, Cell-Free MEC Contributors
# GNU General Public License v3.0+ (see COPYING or
# https://www.gnu.org/licenses/gpl-3.0.txt)

"""Monte Carlo campaign over network snapshots and allocation modes"""

from __future__ import annotations

import logging
import math

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np
import pandas as pd

from cellfree_mec.allocator import (
    Allocation,
    cellular_budgets,
    draw_budgets,
    draw_tasks,
    full_power_allocation,
    latency_breakdown,
    sca_solve_cellfree,
    sca_solve_cellular,
)
from cellfree_mec.clustering import assign_cellular, assign_pilots_and_clusters
from cellfree_mec.config import CELLULAR_MODES, CampaignConfig
from cellfree_mec.errors import CellFreeMecError
from cellfree_mec.estimation import (
    lmmse_combiner,
    mmse_estimate,
    pmmse_combiner,
    sinr_coefficients,
)
from cellfree_mec.geometry import drop_network, realize_channels, snapshot_rng

logger = logging.getLogger(__name__)

USER_COLUMNS = {
    "mode": "TEXT",
    "snapshot": "INTEGER",
    "user": "INTEGER",
    "power_mw": "REAL",
    "se": "REAL",
    "ergodic_se": "REAL",
    "energy_j_per_mbit": "REAL",
    "f_cpu_ghz": "REAL",
    "f_ap_ghz": "REAL",
    "f_total_ghz": "REAL",
    "transmission_s": "REAL",
    "computation_s": "REAL",
    "fronthaul_s": "REAL",
    "latency_s": "REAL",
    "status": "TEXT",
}

SNAPSHOT_COLUMNS = {
    "mode": "TEXT",
    "snapshot": "INTEGER",
    "total_power_w": "REAL",
    "total_compute_ghz": "REAL",
    "min_se": "REAL",
    "infeasible": "INTEGER",
    "sca_iters": "INTEGER",
    "objective": "REAL",
    "kkt_residual": "REAL",
    "status": "TEXT",
}


@dataclass
class MetricsTable:
    """Per-user and per-snapshot campaign metrics"""

    users: pd.DataFrame
    snapshots: pd.DataFrame

    @classmethod
    def empty(cls):
        return cls(
            users=pd.DataFrame(columns=list(USER_COLUMNS)),
            snapshots=pd.DataFrame(columns=list(SNAPSHOT_COLUMNS)),
        )

    @property
    def modes(self):
        return sorted(self.snapshots["mode"].unique())

    def feasible_users(self, mode=None):
        """User rows of feasible snapshots, optionally of one mode"""
        rows = self.users[self.users["status"] != "infeasible"]
        if mode is not None:
            rows = rows[rows["mode"] == mode]
        return rows

    def feasible_snapshots(self, mode=None):
        rows = self.snapshots[self.snapshots["infeasible"] == 0]
        if mode is not None:
            rows = rows[rows["mode"] == mode]
        return rows

    def infeasibility_rate(self, mode):
        rows = self.snapshots[self.snapshots["mode"] == mode]
        if rows.empty:
            return math.nan
        return float(rows["infeasible"].mean())


def ergodic_se(per_realization_se):
    """Mean instantaneous SE over channel realizations of one drop (axis 0)"""
    return np.mean(np.asarray(per_realization_se, dtype=float), axis=0)


@dataclass
class _Deployment:
    sim: object
    offload: object
    snapshot: object
    assignment: object
    estimates: object
    budgets: object
    label: str


def _deployment(config: CampaignConfig, snapshot_id, cellular, budgets):
    sim = config.cellular if cellular else config.cellfree
    label = "cellular" if cellular else "cellfree"
    seed = config.seed
    snapshot = drop_network(sim, snapshot_id)
    pilots = snapshot_rng(seed, snapshot_id, f"pilots-{label}")
    if cellular:
        assignment = assign_cellular(snapshot, sim.tau_p, pilots)
        budgets = cellular_budgets(budgets, sim.num_aps)
    else:
        assignment = assign_pilots_and_clusters(snapshot, sim.tau_p, pilots)
    realization = realize_channels(snapshot, snapshot_rng(seed, snapshot_id, f"channel-{label}"))
    estimates = mmse_estimate(
        realization,
        snapshot,
        assignment,
        sim.pilot_power,
        sim.noise_power,
        snapshot_rng(seed, snapshot_id, f"pilot-noise-{label}"),
    )
    return _Deployment(sim, config.offload, snapshot, assignment, estimates, budgets, label)


def _realization_se(config, deployment, snapshot_id, p):
    # SE of the fixed powers on extra channel realizations of the same drop
    sim = deployment.sim
    combine = lmmse_combiner if sim.is_cellular else pmmse_combiner
    samples = []
    for index in range(config.realizations):
        stream = f"ergodic-{deployment.label}-{index}"
        rng = snapshot_rng(config.seed, snapshot_id, stream)
        realization = realize_channels(deployment.snapshot, rng)
        estimates = mmse_estimate(
            realization,
            deployment.snapshot,
            deployment.assignment,
            sim.pilot_power,
            sim.noise_power,
            rng,
        )
        combiners = combine(estimates, deployment.assignment, p)
        coeffs = sinr_coefficients(estimates, combiners, deployment.assignment)
        samples.append(coeffs.se(p, sim.uplink_fraction))
    return samples


def _allocate(mode, deployment, tasks, config):
    args = (
        deployment.estimates,
        deployment.assignment,
        tasks,
        deployment.budgets,
        deployment.sim,
        deployment.offload,
    )
    try:
        if mode == "cellfree":
            return sca_solve_cellfree(*args, config.solver)
        if mode == "cellular":
            return sca_solve_cellular(*args, config.solver)
        return full_power_allocation(*args)
    except CellFreeMecError as error:
        snapshot_id = deployment.snapshot.snapshot_id
        logger.warning("Snapshot %d mode %s failed: %s", snapshot_id, mode, error)
        return None


def _rows(mode, snapshot_id, allocation: Allocation, ergodic, tasks, deployment):
    num_users = tasks.num_users
    if allocation is None or not allocation.feasible:
        users = pd.DataFrame(
            {
                "mode": mode,
                "snapshot": snapshot_id,
                "user": np.arange(num_users),
                **{name: math.nan for name in list(USER_COLUMNS)[3:-1]},
                "status": "infeasible",
            }
        )
        snapshot = {
            "mode": mode,
            "snapshot": snapshot_id,
            "total_power_w": math.nan,
            "total_compute_ghz": math.nan,
            "min_se": math.nan,
            "infeasible": 1,
            "sca_iters": 0 if allocation is None else allocation.sca_iters,
            "objective": math.nan,
            "kkt_residual": math.nan,
            "status": "infeasible",
        }
        return users, snapshot

    breakdown = latency_breakdown(allocation, tasks, deployment.sim, deployment.offload)
    bandwidth = deployment.sim.bandwidth
    rate = bandwidth * np.where(allocation.se > 0, allocation.se, 1.0)
    energy = np.where(allocation.se > 0, allocation.p / rate * 1e6, np.inf)
    f_ap = allocation.f_ap.sum(axis=0)
    users = pd.DataFrame(
        {
            "mode": mode,
            "snapshot": snapshot_id,
            "user": np.arange(num_users),
            "power_mw": allocation.p * 1e3,
            "se": allocation.se,
            "ergodic_se": ergodic,
            "energy_j_per_mbit": energy,
            "f_cpu_ghz": allocation.f_cpu / 1e9,
            "f_ap_ghz": f_ap / 1e9,
            "f_total_ghz": allocation.f_total / 1e9,
            "transmission_s": breakdown.transmission,
            "computation_s": breakdown.computation,
            "fronthaul_s": breakdown.fronthaul,
            "latency_s": breakdown.total,
            "status": allocation.status,
        }
    )
    snapshot = {
        "mode": mode,
        "snapshot": snapshot_id,
        "total_power_w": float(allocation.p.sum()),
        "total_compute_ghz": float(allocation.f_total.sum()) / 1e9,
        "min_se": float(allocation.se.min()),
        "infeasible": 0,
        "sca_iters": allocation.sca_iters,
        "objective": allocation.objective,
        "kkt_residual": allocation.kkt_residual,
        "status": allocation.status,
    }
    return users, snapshot


def simulate_snapshot(config: CampaignConfig, snapshot_id):
    """Run every requested mode on one snapshot; returns (user rows, snapshot rows)"""
    offload = config.offload
    tasks = draw_tasks(offload, config.num_users, config.seed, snapshot_id)
    budgets = draw_budgets(offload, config.cellfree.num_aps, config.seed, snapshot_id)

    deployments = {}
    user_frames, snapshot_rows = [], []
    for mode in config.modes:
        cellular = mode in CELLULAR_MODES
        if cellular not in deployments:
            deployments[cellular] = _deployment(config, snapshot_id, cellular, budgets)
        deployment = deployments[cellular]

        allocation = _allocate(mode, deployment, tasks, config)
        ergodic = None
        if allocation is not None and allocation.feasible:
            samples = [allocation.se]
            samples.extend(_realization_se(config, deployment, snapshot_id, allocation.p))
            ergodic = ergodic_se(samples)
        else:
            logger.warning("Snapshot %d infeasible in mode %s", snapshot_id, mode)

        users, snapshot = _rows(mode, snapshot_id, allocation, ergodic, tasks, deployment)
        user_frames.append(users)
        snapshot_rows.append(snapshot)
        logger.info("Snapshot %d mode %s done (%s)", snapshot_id, mode, snapshot["status"])
    return pd.concat(user_frames, ignore_index=True), pd.DataFrame(snapshot_rows)


def run_campaign(config: CampaignConfig):
    """Simulate all snapshots, in parallel when more than one worker is configured"""
    snapshot_ids = range(config.snapshots)
    job = partial(simulate_snapshot, config)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            results = list(executor.map(job, snapshot_ids))
    else:
        results = [job(snapshot_id) for snapshot_id in snapshot_ids]

    # executor.map keeps submission order, so rows are sorted by snapshot id
    users = pd.concat([result[0] for result in results], ignore_index=True)
    snapshots = pd.concat([result[1] for result in results], ignore_index=True)
    users = users[list(USER_COLUMNS)]
    snapshots = snapshots[list(SNAPSHOT_COLUMNS)]
    logger.info(
        "Campaign finished: %d snapshots, modes %s", config.snapshots, ", ".join(config.modes)
    )
    return MetricsTable(users=users, snapshots=snapshots)
