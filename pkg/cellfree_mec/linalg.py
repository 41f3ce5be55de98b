# -*- coding: utf-8 -*-

# Copyright: (c) 2024, Cell-Free MEC Contributors
# GNU General Public License v3.0+ (see COPYING or
# https://www.gnu.org/licenses/gpl-3.0.txt)

"""Hermitian positive (semi)definite solves with equilibration and ridge retry"""

from __future__ import annotations

import logging

import numpy as np

from scipy import linalg

logger = logging.getLogger(__name__)


def hermitize(matrix):
    """Return (A + A^H) / 2 over the last two axes"""
    return 0.5 * (matrix + np.conj(np.swapaxes(matrix, -1, -2)))


def solve_hermitian(matrix, rhs, ridge=1e-12):
    """
    Solve A X = B for Hermitian PSD A.

    A is Jacobi-equilibrated and Cholesky-factored. When the factorization fails a
    ridge of ``ridge * trace / n`` is added to the scaled matrix and the solve is
    retried; as a last resort a least-squares solution is returned.
    """
    matrix = np.asarray(matrix)
    rhs = np.asarray(rhs)
    size = matrix.shape[0]
    if size == 0:
        return np.zeros_like(rhs, dtype=np.result_type(matrix, rhs))

    diag = np.real(np.diag(matrix)).copy()
    diag[diag <= 0] = 1.0
    scale = 1.0 / np.sqrt(diag)
    scaled = hermitize(matrix * scale[:, None] * scale[None, :])
    scaled_rhs = rhs * (scale[:, None] if rhs.ndim == 2 else scale)

    try:
        factor = linalg.cho_factor(scaled, lower=True, check_finite=False)
        solution = linalg.cho_solve(factor, scaled_rhs, check_finite=False)
    except linalg.LinAlgError:
        shift = ridge * max(np.real(np.trace(scaled)) / size, 1.0)
        logger.debug("Cholesky failed on %dx%d system, retrying with ridge %.3e", size, size, shift)
        try:
            factor = linalg.cho_factor(
                scaled + shift * np.eye(size), lower=True, check_finite=False
            )
            solution = linalg.cho_solve(factor, scaled_rhs, check_finite=False)
        except linalg.LinAlgError:
            logger.debug("Ridge retry failed, using least squares")
            solution = linalg.lstsq(scaled, scaled_rhs, check_finite=False)[0]

    return solution * (scale[:, None] if rhs.ndim == 2 else scale)


def psd_sqrt_factor(matrices):
    """
    Batched square-root factors S with S S^H = R for a stack of PSD matrices.

    Uses Cholesky for the whole stack; on failure falls back to an
    eigendecomposition with negative eigenvalues clipped to zero.
    """
    matrices = np.asarray(matrices)
    try:
        return np.linalg.cholesky(matrices)
    except np.linalg.LinAlgError:
        logger.debug("Batched Cholesky failed, falling back to clipped eigendecomposition")
        values, vectors = np.linalg.eigh(hermitize(matrices))
        values = np.clip(values, 0.0, None)
        return vectors * np.sqrt(values)[..., None, :]


def clip_psd(matrix):
    """Project Hermitian matrices (trailing two axes) onto the PSD cone by eigenvalue clipping"""
    values, vectors = np.linalg.eigh(hermitize(matrix))
    values = np.clip(values, 0.0, None)
    return hermitize((vectors * values[..., None, :]) @ np.conj(np.swapaxes(vectors, -1, -2)))
