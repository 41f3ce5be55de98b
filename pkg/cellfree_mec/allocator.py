# -*- coding: utf-8 -*-

# Copyright: (c) 2024, Cell-Free MEC Contributors
# GNU General Public License v3.0+ (see COPYING or
# https://www.gnu.org/licenses/gpl-3.0.txt)

"""
Joint uplink power and compute allocation by successive convex approximation.

Each outer iteration freezes the combiners at the previous powers, rebuilds the SINR
coefficients, expands the SE bound around the previous powers and solves the
resulting convex problem. Compute rates are rounded to integers at the end.
"""

from __future__ import annotations

import logging
import math

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
import pandas as pd

from cellfree_mec.config import OffloadConfig, SimConfig, SolverConfig
from cellfree_mec.convex import (
    ConvexSubproblem,
    InnerSolution,
    SolverStatus,
    barrier_solve,
    is_strictly_feasible,
    phase1_init,
)
from cellfree_mec.errors import RoundingError
from cellfree_mec.estimation import lmmse_combiner, pmmse_combiner, sinr_coefficients
from cellfree_mec.geometry import snapshot_rng

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OffloadTasks:
    """Per-user task size (bits), workload (cycles) and deadlines (s)"""

    bits: np.ndarray
    cycles: np.ndarray
    deadline: np.ndarray
    deadline_cellular: np.ndarray

    @property
    def num_users(self):
        return self.bits.size


@dataclass(frozen=True)
class ComputeBudgets:
    """Integer compute budgets in cycles/s; cpu = 0 means no central server"""

    cpu: int
    ap: np.ndarray

    @property
    def total(self):
        return int(self.cpu) + int(np.sum(self.ap))


@dataclass(frozen=True)
class LatencyBreakdown:
    """Per-user latency terms in seconds"""

    transmission: np.ndarray
    computation: np.ndarray
    fronthaul: np.ndarray

    @property
    def total(self):
        return self.transmission + self.computation + self.fronthaul


@dataclass(frozen=True)
class Allocation:
    """Outcome of one allocation run for one snapshot and mode"""

    p: np.ndarray
    f_cpu: np.ndarray
    f_ap: np.ndarray
    nu: np.ndarray
    se: np.ndarray
    latency: np.ndarray
    objective_trace: tuple
    sca_iters: int
    status: str
    mode: str
    kkt_residual: float = math.nan

    @property
    def feasible(self):
        return self.status != SolverStatus.INFEASIBLE.value

    @property
    def objective(self):
        return self.objective_trace[-1] if self.objective_trace else math.nan

    @property
    def f_total(self):
        """Compute rate each user receives (cycles/s)"""
        return self.f_cpu + self.f_ap.sum(axis=0)


def draw_tasks(offload: OffloadConfig, num_users, seed, snapshot_id):
    """b_k uniform over the multiples of the task granularity inside the range"""
    rng = snapshot_rng(seed, snapshot_id, "tasks")
    step = offload.task_bits_step
    low = -(-offload.task_bits_min // step)
    high = offload.task_bits_max // step
    bits = step * rng.integers(low, high + 1, size=num_users, dtype=np.int64)
    return OffloadTasks(
        bits=bits,
        cycles=offload.cycles_per_bit * bits.astype(float),
        deadline=np.full(num_users, offload.deadline),
        deadline_cellular=np.full(num_users, offload.deadline_cellular),
    )


def draw_budgets(offload: OffloadConfig, num_aps, seed, snapshot_id):
    """f_AP_l uniform integers in the configured range, fixed CPU budget"""
    rng = snapshot_rng(seed, snapshot_id, "budgets")
    ap = rng.integers(
        offload.ap_budget_min, offload.ap_budget_max + 1, size=num_aps, dtype=np.int64
    )
    return ComputeBudgets(cpu=int(offload.cpu_budget), ap=ap)


def cellular_budgets(budgets: ComputeBudgets, num_bs):
    """Per-BS budget ceil((sum f_AP + f_CPU) / L_BS) so both deployments hold equal compute"""
    per_bs = -(-budgets.total // int(num_bs))
    return ComputeBudgets(cpu=0, ap=np.full(num_bs, per_bs, dtype=np.int64))


def fronthaul_latency(tasks: OffloadTasks, sim: SimConfig, offload: OffloadConfig):
    """2 b_k M xi / C_FH, zero for the cellular benchmark"""
    if sim.is_cellular:
        return np.zeros(tasks.num_users)
    return (
        2.0 * tasks.bits * sim.antennas_per_ap * offload.quantization_bits
        / offload.fronthaul_capacity
    )


def effective_deadlines(tasks: OffloadTasks, sim: SimConfig, offload: OffloadConfig):
    """Deadline left for transmission and computation"""
    deadline = tasks.deadline_cellular if sim.is_cellular else tasks.deadline
    return deadline - fronthaul_latency(tasks, sim, offload)


def latency_breakdown(allocation: Allocation, tasks: OffloadTasks, sim, offload):
    """Transmission, computation and fronthaul latency of every user"""
    se = np.asarray(allocation.se, dtype=float)
    rate = sim.bandwidth * np.where(se > 0, se, 1.0)
    transmission = np.where(se > 0, tasks.bits / rate, np.inf)
    compute = allocation.f_total.astype(float)
    computation = np.where(compute > 0, tasks.cycles / np.where(compute > 0, compute, 1.0), np.inf)
    return LatencyBreakdown(
        transmission=transmission,
        computation=computation,
        fronthaul=fronthaul_latency(tasks, sim, offload),
    )


def shrink_compute(f_real, problem: ConvexSubproblem, transmission_latency):
    """
    Scale each user's relaxed compute down to the least rate meeting its deadline.

    Compute carries no cost in the objective, so the barrier leaves it near the
    centre of the budget polytope. The least rate at the final SE is
    w_k / (deadline_k - transmission_k). Entries of a user are scaled by one factor
    in (0, 1], which keeps every budget row satisfied.
    """
    f = np.array(f_real, dtype=float)
    totals = problem.compute_selector @ f
    remaining = problem.deadlines - np.asarray(transmission_latency, dtype=float)
    need = np.full(problem.num_users, np.inf)
    np.divide(problem.cycles, remaining, out=need, where=remaining > 0)
    scale = np.ones(problem.num_users)
    np.divide(need, totals, out=scale, where=(totals > need) & np.isfinite(need))

    offset = problem.pair_offset
    if problem.cpu_enabled:
        f[:offset] *= scale
    f[offset:] *= scale[problem.pair_user]
    logger.debug("Compute shrunk from %.6g to %.6g cycles/s", totals.sum(), f.sum())
    return f


def round_compute(f_real, problem: ConvexSubproblem, transmission_latency, tolerance=1e-6):
    """
    Integer compute rates (cycles/s) from the relaxed solution.

    Entries are floored, budgets are re-checked in integer arithmetic and any
    latency violation above the tolerance is repaired from the remaining slack.
    """
    f = np.floor(np.asarray(f_real, dtype=float)).astype(np.int64)
    f = np.maximum(f, 0)
    K = problem.num_users
    offset = problem.pair_offset
    pair_budget = problem.ap_budgets.astype(np.int64)
    cpu_budget = int(problem.cpu_budget)

    def cpu_used():
        return int(f[:K].sum()) if problem.cpu_enabled else 0

    def ap_used():
        return np.bincount(problem.pair_ap, weights=f[offset:], minlength=pair_budget.size)

    if problem.cpu_enabled:
        while cpu_used() > cpu_budget:
            f[int(np.argmax(f[:K]))] -= 1
    for l in np.flatnonzero(ap_used() > pair_budget):
        pairs = offset + np.flatnonzero(problem.pair_ap == l)
        excess = int(f[pairs].sum()) - int(pair_budget[l])
        while excess > 0:
            f[pairs[int(np.argmax(f[pairs]))]] -= 1
            excess -= 1

    totals = problem.compute_selector @ f.astype(float)
    deadlines = problem.deadlines
    for k in range(K):
        total = int(round(totals[k]))
        latency = transmission_latency[k] + problem.cycles[k] / max(total, 1)
        if latency <= deadlines[k] + tolerance:
            continue
        remaining = deadlines[k] - transmission_latency[k]
        if remaining <= 0:
            raise RoundingError(f"User {k} misses its deadline on transmission alone")
        deficit = int(math.ceil(problem.cycles[k] / remaining)) - total
        # CPU slack first, then the user's serving APs
        if problem.cpu_enabled and deficit > 0:
            extra = min(deficit, cpu_budget - cpu_used())
            f[k] += extra
            deficit -= extra
        for index in offset + np.flatnonzero(problem.pair_user == k):
            if deficit <= 0:
                break
            l = problem.pair_ap[index - offset]
            extra = min(deficit, int(pair_budget[l] - ap_used()[l]))
            if extra > 0:
                f[index] += extra
                deficit -= extra
        if deficit > 0:
            raise RoundingError(f"Compute budgets exhausted while repairing user {k}")
        logger.debug("Repaired rounded compute of user %d", k)
    return f


def _user_groups(assignment, cellular):
    if not cellular:
        return np.zeros(assignment.num_users, dtype=int)
    _, groups = np.unique(assignment.masters, return_inverse=True)
    return groups


def _infeasible(num_users, num_aps, mode, trace=()):
    return Allocation(
        p=np.full(num_users, math.nan),
        f_cpu=np.zeros(num_users, dtype=np.int64),
        f_ap=np.zeros((num_aps, num_users), dtype=np.int64),
        nu=np.array([]),
        se=np.full(num_users, math.nan),
        latency=np.full(num_users, math.inf),
        objective_trace=tuple(trace),
        sca_iters=len(trace),
        status=SolverStatus.INFEASIBLE.value,
        mode=mode,
    )


def _sca(
    estimates,
    assignment,
    tasks: OffloadTasks,
    budgets: ComputeBudgets,
    sim: SimConfig,
    offload: OffloadConfig,
    solver: SolverConfig,
    combine: Callable,
    mode: str,
):
    cellular = sim.is_cellular
    num_aps, num_users = assignment.num_aps, assignment.num_users
    deadlines = effective_deadlines(tasks, sim, offload)
    groups = _user_groups(assignment, cellular)

    def build(coeffs, expansion):
        return ConvexSubproblem.from_coefficients(
            coeffs,
            expansion,
            prefactor=sim.uplink_fraction,
            bits=tasks.bits,
            cycles=tasks.cycles,
            deadlines=deadlines,
            bandwidth=sim.bandwidth,
            cpu_budget=0 if cellular else budgets.cpu,
            ap_budgets=budgets.ap,
            pair_user=assignment.pair_user,
            pair_ap=assignment.pair_ap,
            p_max=sim.p_max,
            weight=offload.power_weight,
            user_group=groups,
        )

    p_prev = np.full(num_users, sim.p_max)
    trace = []
    accepted: Optional[InnerSolution] = None
    accepted_problem = None
    accepted_coeffs = None

    for iteration in range(1, solver.sca_max_iter + 1):
        coeffs = sinr_coefficients(estimates, combine(estimates, assignment, p_prev), assignment)
        problem = build(coeffs, p_prev)
        if accepted is None:
            init = phase1_init(problem, solver)
            if not init.feasible:
                logger.warning("Phase 1 found no feasible point (%s)", mode)
                return _infeasible(num_users, num_aps, mode)
        else:
            if not is_strictly_feasible(problem, accepted.x):
                logger.warning(
                    "Refreshed combiners make the previous iterate infeasible (%s, iteration %d), "
                    "keeping the previous combiners",
                    mode,
                    iteration,
                )
                coeffs = accepted_coeffs
                problem = build(coeffs, p_prev)
                if not is_strictly_feasible(problem, accepted.x):
                    logger.warning("Previous iterate not strictly feasible, stopping SCA")
                    break
            init = InnerSolution.from_vector(problem, accepted.x, SolverStatus.FEASIBLE)

        solution = barrier_solve(problem, init, solver)
        if trace and solution.objective > trace[-1]:
            logger.debug(
                "SCA iteration %d increased the objective (%.12g > %.12g), stopping",
                iteration,
                solution.objective,
                trace[-1],
            )
            break

        trace.append(solution.objective)
        accepted, accepted_problem, accepted_coeffs = solution, problem, coeffs
        p_prev = solution.p
        logger.debug("SCA %s iteration %d objective %.9g", mode, iteration, solution.objective)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= solver.sca_tolerance * abs(trace[-2]):
            break

    problem = accepted_problem
    p = accepted.p
    se = problem.true_se(p)
    transmission = tasks.bits / (sim.bandwidth * se)

    f_real = np.concatenate(
        [accepted.f_cpu if problem.cpu_enabled else np.zeros(0), accepted.f_pair]
    )
    f_real = shrink_compute(f_real, problem, transmission)
    f = round_compute(f_real, problem, transmission, solver.latency_tolerance)
    f_cpu = f[:num_users] if problem.cpu_enabled else np.zeros(num_users, dtype=np.int64)
    f_ap = np.zeros((num_aps, num_users), dtype=np.int64)
    f_ap[assignment.pair_ap, assignment.pair_user] = f[problem.pair_offset :]

    allocation = Allocation(
        p=p,
        f_cpu=f_cpu,
        f_ap=f_ap,
        nu=accepted.nu,
        se=se,
        latency=np.zeros(num_users),
        objective_trace=tuple(trace),
        sca_iters=len(trace),
        status=accepted.status.value,
        mode=mode,
        kkt_residual=accepted.kkt_residual,
    )
    latency = latency_breakdown(allocation, tasks, sim, offload).total
    deadline = tasks.deadline_cellular if cellular else tasks.deadline
    late = latency > deadline + solver.latency_tolerance
    if np.any(late):
        logger.warning("Users %s exceed their deadline after rounding", np.flatnonzero(late))
    return replace(allocation, latency=latency)


def sca_solve_cellfree(
    estimates,
    assignment,
    tasks: OffloadTasks,
    budgets: ComputeBudgets,
    sim: SimConfig,
    offload: OffloadConfig,
    solver: Optional[SolverConfig] = None,
):
    """Cell-free allocation: P-MMSE combining, CPU plus serving-AP compute, common min SE"""
    return _sca(
        estimates,
        assignment,
        tasks,
        budgets,
        sim,
        offload,
        solver or SolverConfig(),
        pmmse_combiner,
        "cellfree",
    )


def sca_solve_cellular(
    estimates,
    assignment,
    tasks: OffloadTasks,
    budgets: ComputeBudgets,
    sim: SimConfig,
    offload: OffloadConfig,
    solver: Optional[SolverConfig] = None,
):
    """Cellular allocation: L-MMSE combining, serving-BS compute only, per-cell min SE"""
    return _sca(
        estimates,
        assignment,
        tasks,
        budgets,
        sim,
        offload,
        solver or SolverConfig(),
        lmmse_combiner,
        "cellular",
    )


def full_power_allocation(
    estimates, assignment, tasks: OffloadTasks, budgets: ComputeBudgets, sim, offload
):
    """Reference allocation: p = p_max for everybody and equal compute splits"""
    num_aps, num_users = assignment.num_aps, assignment.num_users
    cellular = sim.is_cellular
    p = np.full(num_users, sim.p_max)
    combine = lmmse_combiner if cellular else pmmse_combiner
    coeffs = sinr_coefficients(estimates, combine(estimates, assignment, p), assignment)
    se = coeffs.se(p, sim.uplink_fraction)

    f_cpu = np.zeros(num_users, dtype=np.int64)
    if not cellular and budgets.cpu > 0:
        f_cpu[:] = int(budgets.cpu) // num_users
    f_ap = np.zeros((num_aps, num_users), dtype=np.int64)
    load = assignment.serving.sum(axis=1)
    for l in np.flatnonzero(load):
        f_ap[l, assignment.serving[l]] = int(budgets.ap[l]) // int(load[l])

    groups = _user_groups(assignment, cellular)
    min_se = np.array([se[groups == g].min() for g in np.unique(groups)])
    objective = float(p.sum() - offload.power_weight * min_se.sum())
    allocation = Allocation(
        p=p,
        f_cpu=f_cpu,
        f_ap=f_ap,
        nu=min_se,
        se=se,
        latency=np.zeros(num_users),
        objective_trace=(objective,),
        sca_iters=0,
        status="reference",
        mode="fullpower_cellular" if cellular else "fullpower",
    )
    return replace(allocation, latency=latency_breakdown(allocation, tasks, sim, offload).total)


def write_allocation_csv(allocation: Allocation, tasks: OffloadTasks, sim, offload, path):
    """One row per user: power, compute, SE, latency terms and status"""
    breakdown = latency_breakdown(allocation, tasks, sim, offload)
    frame = pd.DataFrame(
        {
            "user": np.arange(allocation.p.size),
            "power_w": allocation.p,
            "f_cpu": allocation.f_cpu,
            "f_ap": allocation.f_ap.sum(axis=0),
            "f_total": allocation.f_total,
            "se": allocation.se,
            "transmission_s": breakdown.transmission,
            "computation_s": breakdown.computation,
            "fronthaul_s": breakdown.fronthaul,
            "latency_s": breakdown.total,
            "status": allocation.status,
        }
    )
    frame.to_csv(path, index=False)
    return path
