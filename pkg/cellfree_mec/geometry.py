# -*- coding: utf-8 -*-

# Copyright: (c) 2024, Cell-Free MEC Contributors
# GNU General Public License v3.0+ (see COPYING or
# https://www.gnu.org/licenses/gpl-3.0.txt)

"""
Network geometry and channel generation.

APs sit on a regular grid, users are dropped uniformly at random and every distance
is measured under the wrap-around (toroidal) metric. Large-scale fading follows the
urban-microcell pathloss law with log-normal shadowing; spatial correlation follows
the Gaussian local scattering model for a half-wavelength ULA.
"""

from __future__ import annotations

import logging
import math
import zlib

from dataclasses import dataclass

import numpy as np

from cellfree_mec.config import SimConfig
from cellfree_mec.errors import ConfigurationError
from cellfree_mec.linalg import clip_psd, hermitize, psd_sqrt_factor

logger = logging.getLogger(__name__)


def snapshot_rng(seed, snapshot_id, stream):
    """Independent random generator for one named stream of one snapshot"""
    key = zlib.crc32(stream.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(snapshot_id), key]))


def wrapped_displacement(origin, target, side):
    """Shortest displacement from origin to target on a torus of the given side"""
    delta = np.asarray(target, dtype=float) - np.asarray(origin, dtype=float)
    return (delta + side / 2.0) % side - side / 2.0


def wrap_around_distance(origin, target, side):
    """Euclidean norm of the wrapped displacement"""
    return np.linalg.norm(wrapped_displacement(origin, target, side), axis=-1)


def ap_grid(num_aps, side):
    """Regular sqrt(L) x sqrt(L) grid of AP positions, cell-centred"""
    per_row = math.isqrt(num_aps)
    if per_row * per_row != num_aps:
        raise ConfigurationError(f"AP count {num_aps} is not a perfect square, grid undefined")
    spacing = side / per_row
    coords = (np.arange(per_row) + 0.5) * spacing
    xs, ys = np.meshgrid(coords, coords, indexing="xy")
    return np.column_stack([xs.ravel(), ys.ravel()])


def pathloss_db(distance, shadowing_db=0.0, intercept=-30.5, slope=36.7, min_distance=1.0):
    """Channel gain in dB at the given distance (m)"""
    distance = np.maximum(np.asarray(distance, dtype=float), min_distance)
    return intercept - slope * np.log10(distance) + shadowing_db


def pathloss(
    distance, rng_shadow=None, shadow_sigma=4.0, intercept=-30.5, slope=36.7, min_distance=1.0
):
    """
    Linear large-scale gain beta.

    Shadowing is i.i.d. N(0, shadow_sigma^2) in dB per entry; pass ``rng_shadow=None``
    to disable it.
    """
    distance = np.asarray(distance, dtype=float)
    shadowing = 0.0
    if rng_shadow is not None and shadow_sigma > 0:
        shadowing = rng_shadow.normal(0.0, shadow_sigma, size=distance.shape)
    gain_db = pathloss_db(distance, shadowing, intercept, slope, min_distance)
    return 10.0 ** (gain_db / 10.0)


def _local_scattering(beta, angle, asd, num_antennas):
    beta = np.asarray(beta, dtype=float)[..., None, None]
    angle = np.asarray(angle, dtype=float)[..., None, None]
    index = np.arange(num_antennas)
    diff = (index[:, None] - index[None, :]).astype(float)
    phase = np.exp(1j * np.pi * diff * np.sin(angle))
    spread = np.exp(-(asd**2 / 2.0) * (np.pi * diff * np.cos(angle)) ** 2)
    return hermitize(beta * phase * spread)


def _repair_psd(matrices, beta, num_antennas):
    # matrices (N, M, M), beta (N,)
    values = np.linalg.eigvalsh(matrices)
    broken = values.min(axis=-1) < -1e-12 * beta * num_antennas
    if not np.any(broken):
        return matrices
    logger.debug("Repairing %d correlation matrices with negative eigenvalues", int(broken.sum()))
    clipped = clip_psd(matrices[broken])
    # keep trace = M * beta
    trace = np.trace(clipped, axis1=-2, axis2=-1).real
    clipped *= (num_antennas * beta[broken] / trace)[:, None, None]
    fixed = matrices.copy()
    fixed[broken] = clipped
    return fixed


def spatial_correlation(beta, nominal_angle, asd, num_antennas):
    """
    Local scattering correlation matrix of an M-antenna half-wavelength ULA.

    Entry (m, n) is beta * exp(j pi (m-n) sin phi) * exp(-(asd^2 / 2) (pi (m-n) cos phi)^2).
    Works elementwise over arrays of beta and angles (trailing M x M axes are added).
    """
    beta, nominal_angle = np.broadcast_arrays(
        np.asarray(beta, dtype=float), np.asarray(nominal_angle, dtype=float)
    )
    shape = beta.shape
    flat_beta = beta.reshape(-1)
    matrices = _local_scattering(flat_beta, nominal_angle.reshape(-1), asd, num_antennas)
    if num_antennas > 1:
        matrices = _repair_psd(matrices, flat_beta, num_antennas)
    return matrices.reshape(shape + (num_antennas, num_antennas))


@dataclass(frozen=True)
class NetworkSnapshot:
    """AP/user geometry, large-scale gains and correlation matrices of one user drop"""

    ap_positions: np.ndarray
    user_positions: np.ndarray
    beta: np.ndarray
    R: np.ndarray
    snapshot_id: int
    coverage_side: float

    def __post_init__(self):
        for array in (self.ap_positions, self.user_positions, self.beta, self.R):
            array.setflags(write=False)

    @property
    def num_aps(self):
        return self.beta.shape[0]

    @property
    def num_users(self):
        return self.beta.shape[1]

    @property
    def antennas_per_ap(self):
        return self.R.shape[-1]


@dataclass(frozen=True)
class ChannelRealization:
    """One coherence block of small-scale fading, h has shape (L, K, M)"""

    h: np.ndarray


def drop_users(config: SimConfig, snapshot_id):
    """Uniform user positions; depend only on (seed, snapshot_id, side, K)"""
    rng = snapshot_rng(config.seed, snapshot_id, "users")
    return rng.uniform(0.0, config.coverage_side, size=(config.num_users, 2))


def drop_network(config: SimConfig, snapshot_id):
    """Build the NetworkSnapshot for one (seed, snapshot_id)"""
    if snapshot_id < 0:
        raise ConfigurationError(f"snapshot_id must be non-negative, got {snapshot_id}")

    side = config.coverage_side
    ap_positions = ap_grid(config.num_aps, side)
    user_positions = drop_users(config, snapshot_id)

    displacement = wrapped_displacement(ap_positions[:, None, :], user_positions[None, :, :], side)
    distance = np.linalg.norm(displacement, axis=-1)
    angle = np.arctan2(displacement[..., 1], displacement[..., 0])

    shadow_rng = snapshot_rng(config.seed, snapshot_id, f"shadowing-{config.num_aps}")
    beta = pathloss(
        distance,
        shadow_rng,
        config.shadow_sigma,
        config.pathloss_intercept,
        config.pathloss_slope,
        config.min_distance,
    )
    R = spatial_correlation(beta, angle, config.asd, config.antennas_per_ap)

    logger.debug(
        "Dropped snapshot %d: L=%d K=%d M=%d",
        snapshot_id,
        config.num_aps,
        config.num_users,
        config.antennas_per_ap,
    )
    return NetworkSnapshot(
        ap_positions=ap_positions,
        user_positions=user_positions,
        beta=beta,
        R=R,
        snapshot_id=int(snapshot_id),
        coverage_side=float(side),
    )


def realize_channels(snapshot: NetworkSnapshot, rng):
    """Draw h_lk ~ CN(0, R_lk) independently over (l, k)"""
    factors = psd_sqrt_factor(snapshot.R)
    shape = snapshot.R.shape[:-1]
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    h = np.einsum("lkmn,lkn->lkm", factors, z)
    return ChannelRealization(h=h)
