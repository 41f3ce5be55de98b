# -*- coding: utf-8 -*-

# Copyright: (c) 2024, Cell-Free MEC Contributors
# GNU General Public License v3.0+ (see COPYING or
# https://www.gnu.org/licenses/gpl-3.0.txt)

"""
Convex inner problem of the SCA loop and its feasible-start log-barrier solver.

The problem is

    minimize    1'p - weight * sum_g nu_g
    subject to  b_k / (B SE~_k(p)) + w_k / phi_k(f) <= L~_k     (latency)
                SE~_k(p) >= nu_{group(k)}                      (min SE)
                sum_k f_cpu_k <= f_CPU,  sum_{k in K_l} f_lk <= f_AP_l
                0 <= p <= p_max,  f > 0

where SE~_k is the concave lower bound of the SE around the expansion point and
phi_k is the total compute rate user k receives. Compute variables hold only the
CPU entries and the serving (AP, user) pairs, in GHz.
"""

from __future__ import annotations

import enum
import logging
import math

from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional

import numpy as np
import pandas as pd

from scipy import optimize, sparse

from cellfree_mec.config import SolverConfig
from cellfree_mec.errors import InfeasibleProblemError
from cellfree_mec.linalg import solve_hermitian

logger = logging.getLogger(__name__)

COMPUTE_UNIT = 1e9
LN2 = math.log(2.0)


class SolverStatus(str, enum.Enum):
    """Outcome of phase 1, the barrier solve or a whole SCA run"""

    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    MAX_ITER = "max_iter"


@dataclass(frozen=True, eq=False)
class ConvexSubproblem:
    """Data of one inner problem; SINR coefficients are normalized so that noise = 1"""

    gain: np.ndarray
    interference: np.ndarray
    noise: np.ndarray
    expansion_point: np.ndarray
    prefactor: float
    bits: np.ndarray
    cycles: np.ndarray
    deadlines: np.ndarray
    bandwidth: float
    cpu_budget: float
    ap_budgets: np.ndarray
    pair_user: np.ndarray
    pair_ap: np.ndarray
    p_max: float
    weight: float
    user_group: np.ndarray

    @classmethod
    def from_coefficients(
        cls,
        coeffs,
        expansion_point,
        prefactor,
        bits,
        cycles,
        deadlines,
        bandwidth,
        cpu_budget,
        ap_budgets,
        pair_user,
        pair_ap,
        p_max,
        weight,
        user_group=None,
    ):
        """Normalize SinrCoefficients and bundle the remaining problem data"""
        noise = np.asarray(coeffs.noise, dtype=float)
        scale = np.where(noise > 0, 1.0 / np.where(noise > 0, noise, 1.0), 0.0)
        num_users = noise.size
        if user_group is None:
            user_group = np.zeros(num_users, dtype=int)
        return cls(
            gain=np.asarray(coeffs.gain, dtype=float) * scale,
            interference=np.asarray(coeffs.interference, dtype=float) * scale[:, None],
            noise=np.ones(num_users),
            expansion_point=np.asarray(expansion_point, dtype=float),
            prefactor=float(prefactor),
            bits=np.asarray(bits, dtype=float),
            cycles=np.asarray(cycles, dtype=float),
            deadlines=np.asarray(deadlines, dtype=float),
            bandwidth=float(bandwidth),
            cpu_budget=float(cpu_budget),
            ap_budgets=np.asarray(ap_budgets, dtype=float),
            pair_user=np.asarray(pair_user, dtype=int),
            pair_ap=np.asarray(pair_ap, dtype=int),
            p_max=float(p_max),
            weight=float(weight),
            user_group=np.asarray(user_group, dtype=int),
        )

    # layout

    @property
    def num_users(self):
        return self.gain.size

    @property
    def num_pairs(self):
        return self.pair_user.size

    @property
    def cpu_enabled(self):
        return self.cpu_budget > 0

    @property
    def num_groups(self):
        if self.weight == 0:
            return 0
        return int(self.user_group.max()) + 1

    @property
    def num_compute(self):
        return (self.num_users if self.cpu_enabled else 0) + self.num_pairs

    @property
    def dimension(self):
        return self.num_users + self.num_compute + self.num_groups

    @property
    def slice_p(self):
        return slice(0, self.num_users)

    @property
    def slice_f(self):
        return slice(self.num_users, self.num_users + self.num_compute)

    @property
    def slice_nu(self):
        return slice(self.num_users + self.num_compute, self.dimension)

    @property
    def pair_offset(self):
        return self.num_users if self.cpu_enabled else 0

    def split(self, x):
        """Return (p, f in GHz, nu) views of a solver vector"""
        return x[self.slice_p], x[self.slice_f], x[self.slice_nu]

    # derived data

    @cached_property
    def coupling(self):
        """q_k = a_k + g_k e_k as rows"""
        return self.interference + np.diag(self.gain)

    @cached_property
    def expansion_denominator(self):
        return self.interference @ self.expansion_point + self.noise

    @cached_property
    def transmission_coefficient(self):
        return self.bits / (self.bandwidth * self.deadlines)

    @cached_property
    def computation_coefficient(self):
        return self.cycles / (COMPUTE_UNIT * self.deadlines)

    @cached_property
    def compute_selector(self):
        """K x F sparse map from compute variables to per-user compute (GHz)"""
        K = self.num_users
        rows, cols = [], []
        if self.cpu_enabled:
            rows.append(np.arange(K))
            cols.append(np.arange(K))
        rows.append(self.pair_user)
        cols.append(self.pair_offset + np.arange(self.num_pairs))
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        data = np.ones(rows.size)
        return sparse.csr_matrix((data, (rows, cols)), shape=(K, self.num_compute))

    @cached_property
    def linear_constraints(self):
        """(A, b) with A x - b <= 0 for budgets, power box and compute positivity"""
        K, F, n = self.num_users, self.num_compute, self.dimension
        blocks, bounds = [], []

        if self.cpu_enabled:
            row = np.zeros(n)
            row[self.slice_f.start : self.slice_f.start + K] = COMPUTE_UNIT / self.cpu_budget
            blocks.append(sparse.csr_matrix(row[None, :]))
            bounds.append(np.ones(1))

        active_aps = np.unique(self.pair_ap)
        if active_aps.size:
            rows = np.searchsorted(active_aps, self.pair_ap)
            cols = self.slice_f.start + self.pair_offset + np.arange(self.num_pairs)
            data = COMPUTE_UNIT / self.ap_budgets[self.pair_ap]
            blocks.append(sparse.csr_matrix((data, (rows, cols)), shape=(active_aps.size, n)))
            bounds.append(np.ones(active_aps.size))

        power = sparse.csr_matrix(
            (np.ones(K) / self.p_max, (np.arange(K), np.arange(K))), shape=(K, n)
        )
        blocks.extend([-power, power])
        bounds.extend([np.zeros(K), np.ones(K)])

        compute = sparse.csr_matrix(
            (-np.ones(F), (np.arange(F), self.slice_f.start + np.arange(F))), shape=(F, n)
        )
        blocks.append(compute)
        bounds.append(np.zeros(F))
        return sparse.vstack(blocks, format="csr"), np.concatenate(bounds)

    @property
    def num_nonlinear(self):
        return self.num_users * (2 if self.num_groups else 1)

    @property
    def num_constraints(self):
        return self.num_nonlinear + self.linear_constraints[1].size

    @cached_property
    def objective_vector(self):
        c = np.zeros(self.dimension)
        c[self.slice_p] = 1.0
        c[self.slice_nu] = -self.weight
        return c

    # SE bound

    def true_se(self, p):
        """SE at fixed combiners"""
        p = np.asarray(p, dtype=float)
        denominator = self.interference @ p + self.noise
        return self.prefactor * np.log2(1.0 + p * self.gain / denominator)

    def se_bound(self, p):
        """Concave lower bound of every user's SE around the expansion point"""
        p = np.asarray(p, dtype=float)
        u = self.coupling @ p + self.noise
        d0 = self.expansion_denominator
        linear = self.interference @ (p - self.expansion_point) / (LN2 * d0)
        return self.prefactor * (np.log2(u) - np.log2(d0) - linear)

    def se_bound_gradient(self, p):
        """Rows are the gradients of the bound with respect to p"""
        u = self.coupling @ np.asarray(p, dtype=float) + self.noise
        kappa = self.prefactor / LN2
        return kappa * (
            self.coupling / u[:, None] - self.interference / self.expansion_denominator[:, None]
        )

    def objective(self, x):
        return float(self.objective_vector @ x)

    def transmission_latency(self, p):
        """b_k / (B SE~_k) evaluated on the bound"""
        return self.bits / (self.bandwidth * self.se_bound(p))

    def user_compute(self, f):
        """Total compute rate per user in GHz"""
        return self.compute_selector @ f


def se_lower_bound(p, subproblem, k):
    """Concave SE lower bound of user k at power vector p"""
    return float(subproblem.se_bound(p)[k])


@dataclass(frozen=True, eq=False)
class InnerSolution:
    """Iterate returned by phase 1 or by the barrier method"""

    p: np.ndarray
    f_cpu: np.ndarray
    f_pair: np.ndarray
    nu: np.ndarray
    objective: float
    status: SolverStatus
    x: Optional[np.ndarray] = None
    kkt_residual: float = math.nan
    newton_iters: int = 0
    duals: Optional[np.ndarray] = None
    outer_objectives: tuple = ()
    trace: tuple = ()
    barrier_t: float = math.nan

    @classmethod
    def from_vector(cls, problem, x, status, **kwargs):
        p, f, nu = problem.split(x)
        K = problem.num_users
        f_cpu = f[:K] * COMPUTE_UNIT if problem.cpu_enabled else np.zeros(K)
        f_pair = f[problem.pair_offset :] * COMPUTE_UNIT
        return cls(
            p=p.copy(),
            f_cpu=f_cpu,
            f_pair=f_pair,
            nu=nu.copy(),
            objective=problem.objective(x),
            status=status,
            x=x.copy(),
            **kwargs,
        )

    @classmethod
    def infeasible(cls, problem):
        K = problem.num_users
        return cls(
            p=np.full(K, math.nan),
            f_cpu=np.full(K, math.nan),
            f_pair=np.full(problem.num_pairs, math.nan),
            nu=np.full(problem.num_groups, math.nan),
            objective=math.nan,
            status=SolverStatus.INFEASIBLE,
        )

    @property
    def feasible(self):
        return self.status != SolverStatus.INFEASIBLE


class _LogBarrier:
    """Barrier function, derivatives and slacks of one subproblem"""

    def __init__(self, problem: ConvexSubproblem):
        self.problem = problem
        self.A, self.b = problem.linear_constraints
        self.c = problem.objective_vector
        self.selector = problem.compute_selector
        self.selector_dense = self.selector.toarray()
        self.kappa = problem.prefactor / LN2

    def nonlinear(self, x):
        """Constraint values and intermediate terms, None outside the domain"""
        problem = self.problem
        p, f, nu = problem.split(x)
        u = problem.coupling @ p + problem.noise
        if np.any(u <= 0):
            return None
        s = problem.se_bound(p)
        phi = self.selector @ f
        if np.any(s <= 0) or np.any(phi <= 0):
            return None
        latency = (
            problem.transmission_coefficient / s + problem.computation_coefficient / phi - 1.0
        )
        values = [latency]
        if problem.num_groups:
            values.append(nu[problem.user_group] - s)
        return np.concatenate(values), (s, u, phi)

    def slacks(self, x):
        """Positive slacks -h(x) of every constraint, None outside the domain"""
        evaluated = self.nonlinear(x)
        if evaluated is None:
            return None
        values, parts = evaluated
        return np.concatenate([-values, self.b - self.A @ x]), parts

    def jacobian(self, x, parts):
        problem = self.problem
        s, u, phi = parts
        K, n = problem.num_users, problem.dimension
        grad_s = problem.se_bound_gradient(x[problem.slice_p])
        alpha = problem.transmission_coefficient
        beta = problem.computation_coefficient

        J = np.zeros((problem.num_nonlinear, n))
        J[:K, problem.slice_p] = -(alpha / s**2)[:, None] * grad_s
        J[:K, problem.slice_f] = -(beta / phi**2)[:, None] * self.selector_dense
        if problem.num_groups:
            J[K:, problem.slice_p] = -grad_s
            J[K + np.arange(K), problem.slice_nu.start + problem.user_group] = 1.0
        return J, grad_s

    def newton_system(self, x, t, slack, parts):
        """Gradient and Hessian of t c'x - sum log(slack)"""
        problem = self.problem
        s, u, phi = parts
        K = problem.num_users
        m_nl = problem.num_nonlinear
        J, grad_s = self.jacobian(x, parts)
        inv_nl = 1.0 / slack[:m_nl]
        inv_lin = 1.0 / slack[m_nl:]

        gradient = t * self.c + J.T @ inv_nl + self.A.T @ inv_lin

        hessian = (J.T * inv_nl**2) @ J
        hessian += (self.A.T @ sparse.diags(inv_lin**2) @ self.A).toarray()

        # curvature of the nonlinear constraints weighted by 1 / slack
        alpha = problem.transmission_coefficient
        beta = problem.computation_coefficient
        weight_lat = inv_nl[:K]
        coef_grad = weight_lat * 2.0 * alpha / s**3
        coef_coupling = weight_lat * alpha * self.kappa / (s**2 * u**2)
        if problem.num_groups:
            coef_coupling = coef_coupling + inv_nl[K:] * self.kappa / u**2
        Q = problem.coupling
        sp = problem.slice_p
        hessian[sp, sp] += grad_s.T @ (coef_grad[:, None] * grad_s)
        hessian[sp, sp] += Q.T @ (coef_coupling[:, None] * Q)
        sf = problem.slice_f
        coef_compute = weight_lat * 2.0 * beta / phi**3
        hessian[sf, sf] += self.selector_dense.T @ (coef_compute[:, None] * self.selector_dense)
        return gradient, hessian, J

    def max_step(self, slack, dx):
        """Largest step keeping the linear constraints strictly satisfied"""
        growth = self.A @ dx
        linear_slack = slack[self.problem.num_nonlinear :]
        increasing = growth > 0
        if not np.any(increasing):
            return 1.0
        return min(1.0, 0.99 * float(np.min(linear_slack[increasing] / growth[increasing])))


def phase1_init(subproblem: ConvexSubproblem, solver: Optional[SolverConfig] = None):
    """
    Strictly feasible starting point or an infeasible marker.

    Starts from p = scale * p_max with equal compute splits; when a latency
    constraint is violated, compute is re-split in proportion to each user's need.
    """
    solver = solver or SolverConfig()
    problem = subproblem
    K = problem.num_users
    if np.any(problem.deadlines <= 0):
        logger.debug("Non-positive effective deadline, instance rejected")
        return InnerSolution.infeasible(problem)

    scale = solver.interior_scale
    p = np.full(K, scale * problem.p_max)
    s = problem.se_bound(p)
    if np.any(~np.isfinite(s)) or np.any(s <= 0):
        return InnerSolution.infeasible(problem)

    weights = np.ones(K)
    f = _split_compute(problem, weights, scale)
    phi = problem.user_compute(f)
    radio_share = problem.transmission_coefficient / s
    slack = 1.0 - radio_share - problem.computation_coefficient / phi
    if np.any(slack <= 0):
        remaining = 1.0 - radio_share
        if np.any(remaining <= 0):
            logger.debug("Transmission alone exceeds the deadline for some user")
            return InnerSolution.infeasible(problem)
        need = problem.computation_coefficient / remaining
        f = _split_compute(problem, need, scale)
        phi = problem.user_compute(f)
        slack = 1.0 - radio_share - problem.computation_coefficient / phi
        if np.any(slack <= 0):
            return InnerSolution.infeasible(problem)

    groups = problem.num_groups
    nu = np.zeros(groups)
    for group in range(groups):
        nu[group] = s[problem.user_group == group].min() - solver.init_margin
    x = np.concatenate([p, f, nu])
    return InnerSolution.from_vector(problem, x, SolverStatus.FEASIBLE)


def _split_compute(problem, weights, scale):
    # each budget is shared among its users in proportion to weights
    K = problem.num_users
    f = np.zeros(problem.num_compute)
    if problem.cpu_enabled:
        f[:K] = scale * problem.cpu_budget / COMPUTE_UNIT * weights / weights.sum()
    pair_weight = weights[problem.pair_user]
    per_ap = np.bincount(problem.pair_ap, weights=pair_weight, minlength=problem.ap_budgets.size)
    budget = problem.ap_budgets[problem.pair_ap] / COMPUTE_UNIT
    f[problem.pair_offset :] = scale * budget * pair_weight / per_ap[problem.pair_ap]
    return f


def is_strictly_feasible(subproblem, x):
    """Whether x lies in the interior of the feasible set"""
    evaluated = _LogBarrier(subproblem).slacks(np.asarray(x, dtype=float))
    return evaluated is not None and bool(np.all(evaluated[0] > 0))


def barrier_solve(
    subproblem: ConvexSubproblem, init: InnerSolution, solver: Optional[SolverConfig] = None
):
    """Feasible-start log-barrier method with damped Newton centering"""
    solver = solver or SolverConfig()
    problem = subproblem
    barrier = _LogBarrier(problem)
    m = problem.num_constraints
    x0 = np.asarray(init.x, dtype=float)
    if not is_strictly_feasible(problem, x0):
        raise InfeasibleProblemError("barrier_solve needs a strictly feasible starting point")

    gap_target = solver.gap_tolerance * (1.0 + abs(problem.objective(x0)))
    t0 = solver.barrier_t0
    restarts = 0

    while True:
        x = x0.copy()
        trace = []
        t = t0
        newton_iters = 0
        outer_objectives = []
        status = None
        broken = False
        while status is None:
            x, steps, broken = _center(barrier, x, t, solver, trace, newton_iters)
            newton_iters += steps
            if broken:
                break
            outer_objectives.append(problem.objective(x))
            if m / t < gap_target:
                status = SolverStatus.OPTIMAL
            elif newton_iters >= solver.newton_max_iter:
                status = SolverStatus.MAX_ITER
            else:
                t *= solver.barrier_mu
        if not broken:
            break
        restarts += 1
        if restarts > 3:
            logger.warning("Barrier restarts exhausted, returning the starting point")
            return replace(init, status=SolverStatus.MAX_ITER)
        t0 /= 10.0
        logger.debug("Non-finite Newton system, restarting barrier with t0=%.3e", t0)

    if status == SolverStatus.MAX_ITER:
        logger.warning("Barrier method hit %d Newton steps (gap %.3e)", newton_iters, m / t)

    duals = _dual_estimate(barrier, x, t)
    solution = InnerSolution.from_vector(
        problem,
        x,
        status,
        newton_iters=newton_iters,
        duals=duals,
        outer_objectives=tuple(outer_objectives),
        trace=tuple(trace) if solver.record_trace else (),
        barrier_t=t,
    )
    return replace(solution, kkt_residual=kkt_residual(problem, solution))


def _center(barrier, x, t, solver, trace, offset):
    """Newton centering at fixed t; returns (x, steps, broken)"""
    problem = barrier.problem
    steps = 0
    slack, parts = barrier.slacks(x)
    while steps < solver.centering_max_iter and offset + steps < solver.newton_max_iter:
        gradient, hessian, _ = barrier.newton_system(x, t, slack, parts)
        if not (np.all(np.isfinite(gradient)) and np.all(np.isfinite(hessian))):
            return x, steps, True
        dx = -solve_hermitian(hessian, gradient)
        decrement = float(-gradient @ dx)
        if not np.isfinite(decrement):
            return x, steps, True
        steps += 1
        if solver.record_trace:
            trace.append((offset + steps, problem.objective(x), t, decrement / 2.0))
        if decrement / 2.0 <= solver.newton_tolerance:
            break

        step = barrier.max_step(slack, dx)
        slope = float(gradient @ dx)
        accepted = False
        while step > 1e-14:
            candidate = x + step * dx
            evaluated = barrier.slacks(candidate)
            if evaluated is not None and np.all(evaluated[0] > 0):
                change = t * step * float(barrier.c @ dx) - float(
                    np.sum(np.log(evaluated[0] / slack))
                )
                if change <= solver.armijo_alpha * step * slope:
                    accepted = True
                    break
            step *= solver.armijo_beta
        if not accepted:
            # no progress possible at this t
            break
        x = candidate
        slack, parts = evaluated
    return x, steps, False


def _dual_estimate(barrier, x, t):
    # Newton-corrected multipliers lambda_i = (1 + grad h_i' dx / r_i) / (t r_i)
    slack, parts = barrier.slacks(x)
    gradient, hessian, J = barrier.newton_system(x, t, slack, parts)
    dx = -solve_hermitian(hessian, gradient)
    if not np.all(np.isfinite(dx)):
        dx = np.zeros_like(x)
    direction = np.concatenate([J @ dx, barrier.A @ dx])
    duals = (1.0 + direction / slack) / (t * slack)
    return np.maximum(duals, 0.0)


def _full_jacobian(problem, x):
    barrier = _LogBarrier(problem)
    evaluated = barrier.nonlinear(x)
    if evaluated is None:
        return None
    values, parts = evaluated
    J, _ = barrier.jacobian(x, parts)
    constraints = np.concatenate([values, barrier.A @ x - barrier.b])
    return np.vstack([J, barrier.A.toarray()]), constraints


def kkt_residual(subproblem, solution):
    """
    Scaled KKT residual: max of stationarity, complementarity and primal violation.

    Uses the multipliers stored on the solution, or the nonnegative least-squares
    multipliers when none are available.
    """
    problem = subproblem
    x = solution.x
    if x is None or not np.all(np.isfinite(x)):
        return math.inf
    full = _full_jacobian(problem, x)
    if full is None:
        return math.inf
    J, h = full
    c = problem.objective_vector

    duals = solution.duals
    if duals is None:
        system = np.vstack([J.T, np.diag(-h)])
        target = np.concatenate([-c, np.zeros(h.size)])
        duals, _ = optimize.nnls(system, target)

    stationarity = np.max(np.abs(c + J.T @ duals)) / max(1.0, np.max(np.abs(c)))
    complementarity = float(np.max(np.abs(duals * h))) if h.size else 0.0
    primal = float(max(np.max(h), 0.0)) if h.size else 0.0
    return float(max(stationarity, complementarity, primal))


def write_solver_trace(solution, path):
    """Write the barrier trace (step, objective, t, half squared decrement) as CSV"""
    frame = pd.DataFrame(
        list(solution.trace), columns=["newton_step", "objective", "barrier_t", "decrement"]
    )
    frame.to_csv(path, index=False)
    return path
