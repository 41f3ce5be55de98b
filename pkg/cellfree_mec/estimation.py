# -*- coding: utf-8 -*-

# Copyright: (c) 2024, Cell-Free MEC Contributors
# GNU General Public License v3.0+ (see COPYING or
# https://www.gnu.org/licenses/gpl-3.0.txt)

"""
MMSE channel estimation, receive combiners and instantaneous SINR/SE.

Combiners are stored as a (K, L, M) array masked by the serving matrix, so the
combiner of user k is zero on every AP outside its cluster.
"""

from __future__ import annotations

import logging

from dataclasses import dataclass

import numpy as np

from scipy.linalg import block_diag

from cellfree_mec.linalg import hermitize, solve_hermitian

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChannelEstimates:
    """MMSE estimates h_hat (L, K, M) and error covariances C (L, K, M, M)"""

    h_hat: np.ndarray
    C: np.ndarray
    noise_power: float

    @property
    def num_aps(self):
        return self.h_hat.shape[0]

    @property
    def num_users(self):
        return self.h_hat.shape[1]

    @property
    def antennas_per_ap(self):
        return self.h_hat.shape[2]


@dataclass(frozen=True)
class CombinerSet:
    """Receive combiners v (K, L, M) and the scheme that produced them"""

    v: np.ndarray
    scheme: str


@dataclass(frozen=True)
class SinrCoefficients:
    """SINR_k(p) = p_k gain_k / (interference_k . p + noise_k)"""

    gain: np.ndarray
    interference: np.ndarray
    noise: np.ndarray

    def sinr(self, p):
        p = np.asarray(p, dtype=float)
        numerator = p * self.gain
        denominator = self.interference @ p + self.noise
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(denominator > 0, numerator / denominator, 0.0)
        return ratio

    def se(self, p, prefactor):
        return prefactor * np.log2(1.0 + self.sinr(p))


def mmse_estimate(realization, snapshot, assignment, pilot_power, noise_power, rng):
    """
    Pilot transmission followed by per-AP MMSE estimation.

    y_lt = sum_{i on t} sqrt(p_p tau_p) h_li + n_lt with n_lt ~ CN(0, sigma^2 I),
    h_hat_lk = sqrt(p_p tau_p) R_lk Psi_lt^-1 y_lt and
    C_lk = R_lk - p_p tau_p R_lk Psi_lt^-1 R_lk.
    """
    R = np.asarray(snapshot.R)
    h = realization.h
    num_aps, num_users, num_antennas = h.shape
    tau_p = assignment.tau_p
    pilot_of = assignment.pilot_of
    gain = pilot_power * tau_p
    identity = np.eye(num_antennas)

    shape = (num_aps, tau_p, num_antennas)
    draw = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    noise = np.sqrt(noise_power / 2.0) * draw

    h_hat = np.zeros_like(h, dtype=complex)
    C = np.zeros((num_aps, num_users, num_antennas, num_antennas), dtype=complex)
    for t in range(tau_p):
        users = np.flatnonzero(pilot_of == t)
        if users.size == 0:
            continue
        for l in range(num_aps):
            psi = gain * R[l, users].sum(axis=0) + noise_power * identity
            y = np.sqrt(gain) * h[l, users].sum(axis=0) + noise[l, t]
            # one factorization for y and every R_lk sharing the pilot
            rhs = np.concatenate([y[:, None]] + [R[l, k] for k in users], axis=1)
            solved = solve_hermitian(psi, rhs)
            psi_inv_y = solved[:, 0]
            for index, k in enumerate(users):
                psi_inv_r = solved[:, 1 + index * num_antennas : 1 + (index + 1) * num_antennas]
                h_hat[l, k] = np.sqrt(gain) * R[l, k] @ psi_inv_y
                C[l, k] = hermitize(R[l, k] - gain * R[l, k] @ psi_inv_r)
    return ChannelEstimates(h_hat=h_hat, C=C, noise_power=float(noise_power))


def _stacked(h_hat, aps, users):
    # (|aps| M, |users|) with AP-major blocks
    block = h_hat[np.ix_(aps, users)]
    return block.transpose(0, 2, 1).reshape(-1, len(users))


def mrc_combiner(estimates, assignment):
    """v_k = D_k h_hat_k"""
    v = np.transpose(estimates.h_hat, (1, 0, 2)) * assignment.serving.T[:, :, None]
    return CombinerSet(v=v, scheme="mrc")


def pmmse_combiner(estimates, assignment, p):
    """
    Partial MMSE combining on the serving subspace of every user.

    Only interferers in S_k are suppressed. The combiner is scaled by p_k; with
    p_k = 0 the unscaled solution is returned so the direction stays defined.
    """
    p = np.asarray(p, dtype=float)
    h_hat, C = estimates.h_hat, estimates.C
    num_aps, num_users, num_antennas = h_hat.shape
    v = np.zeros((num_users, num_aps, num_antennas), dtype=complex)

    for k in range(num_users):
        aps = assignment.serving_aps[k]
        if aps.size == 0:
            continue
        partial = assignment.partial_sets[k]
        H = _stacked(h_hat, aps, partial)
        weights = p[partial]
        Z = block_diag(*[np.tensordot(weights, C[l, partial], axes=1) for l in aps])
        A = (H * weights) @ H.conj().T + Z + estimates.noise_power * np.eye(H.shape[0])
        target = h_hat[aps, k].reshape(-1)
        u = solve_hermitian(A, target)
        if not np.all(np.isfinite(u)):
            logger.debug("P-MMSE solve for user %d not finite, using MRC", k)
            u = target
        scale = p[k] if p[k] > 0 else 1.0
        v[k, aps] = (scale * u).reshape(aps.size, num_antennas)
    return CombinerSet(v=v, scheme="pmmse")


def lmmse_combiner(estimates, assignment, p):
    """
    Local MMSE combining, every AP uses only its own estimates.

    v_lk = p_k (sum_i p_i (h_hat_li h_hat_li^H + C_li) + sigma^2 I)^-1 h_hat_lk.
    """
    p = np.asarray(p, dtype=float)
    h_hat, C = estimates.h_hat, estimates.C
    num_aps, num_users, num_antennas = h_hat.shape
    v = np.zeros((num_users, num_aps, num_antennas), dtype=complex)
    scale = np.where(p > 0, p, 1.0)

    for l in range(num_aps):
        users = assignment.served_users[l]
        if users.size == 0:
            continue
        local = h_hat[l]
        A = (
            (local.T * p) @ local.conj()
            + np.tensordot(p, C[l], axes=1)
            + estimates.noise_power * np.eye(num_antennas)
        )
        u = solve_hermitian(A, local[users].T)
        v[users, l] = (u * scale[users]).T
    return CombinerSet(v=v, scheme="lmmse")


def sinr_coefficients(estimates, combiners, assignment, noise_power=None):
    """Affine decomposition of the uplink SINR at fixed combiners"""
    if noise_power is None:
        noise_power = estimates.noise_power
    v = combiners.v * assignment.serving.T[:, :, None]
    cross = np.einsum("klm,lim->ki", v.conj(), estimates.h_hat, optimize=True)
    quad = np.einsum("klm,limn,kln->ki", v.conj(), estimates.C, v, optimize=True).real
    power = np.abs(cross) ** 2

    gain = np.diag(power).copy()
    interference = power.copy()
    np.fill_diagonal(interference, 0.0)
    interference += np.maximum(quad, 0.0)
    noise = noise_power * np.sum(np.abs(v) ** 2, axis=(1, 2))
    return SinrCoefficients(gain=gain, interference=interference, noise=noise)


def instantaneous_se(coeffs, p, tau_u, tau_c):
    """SE_k = (tau_u / tau_c) log2(1 + SINR_k(p))"""
    return coeffs.se(p, tau_u / tau_c)
