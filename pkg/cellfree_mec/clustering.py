# -*- coding: utf-8 -*-

# Copyright: (c) 2024, Cell-Free MEC Contributors
# GNU General Public License v3.0+ (see COPYING or
# https://www.gnu.org/licenses/gpl-3.0.txt)

"""
Joint pilot assignment and user-centric cluster formation.

Every user appoints its strongest AP as master, which hands out the pilot with the
least accumulated interference at that AP. Afterwards each AP serves, on every pilot,
the strongest user using it; master appointments always stand.
"""

from __future__ import annotations

import logging

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClusterAssignment:
    """Pilot map and serving matrix (serving[l, k] is True when AP l serves user k)"""

    pilot_of: np.ndarray
    serving: np.ndarray
    masters: np.ndarray
    tau_p: int

    @classmethod
    def from_serving(cls, pilot_of, serving, tau_p, masters=None):
        """Build an assignment from an explicit serving matrix"""
        serving = np.asarray(serving, dtype=bool)
        if masters is None:
            masters = np.argmax(serving, axis=0)
        return cls(
            pilot_of=np.asarray(pilot_of, dtype=int),
            serving=serving,
            masters=np.asarray(masters, dtype=int),
            tau_p=int(tau_p),
        )

    @property
    def num_aps(self):
        return self.serving.shape[0]

    @property
    def num_users(self):
        return self.serving.shape[1]

    @cached_property
    def serving_aps(self):
        """M_k for every user"""
        return [np.flatnonzero(self.serving[:, k]) for k in range(self.num_users)]

    @cached_property
    def served_users(self):
        """K_l for every AP"""
        return [np.flatnonzero(self.serving[l]) for l in range(self.num_aps)]

    @cached_property
    def overlap(self):
        """K x K boolean matrix, True when two users share a serving AP"""
        counts = self.serving.T.astype(np.int64) @ self.serving.astype(np.int64)
        return counts > 0

    @cached_property
    def partial_sets(self):
        """S_k = {i : M_k and M_i intersect}"""
        return [np.flatnonzero(self.overlap[k]) for k in range(self.num_users)]

    def _pair_slot(self):
        users, aps = np.nonzero(self.serving.T)
        return self.num_users + users * self.num_aps + aps, users, aps

    @cached_property
    def selector_b(self):
        """Rows b_k = [e_k ; b_hat_k] of length K + K L"""
        K, L = self.num_users, self.num_aps
        selector = np.zeros((K, K + K * L), dtype=np.int8)
        selector[np.arange(K), np.arange(K)] = 1
        slots, users, _ = self._pair_slot()
        selector[users, slots] = 1
        return selector

    @cached_property
    def selector_c(self):
        """Rows c_l with zeros on the CPU slots and ones on the pairs AP l serves"""
        K, L = self.num_users, self.num_aps
        selector = np.zeros((L, K + K * L), dtype=np.int8)
        slots, _, aps = self._pair_slot()
        selector[aps, slots] = 1
        return selector

    @cached_property
    def pair_user(self):
        """User index of every serving pair, user-major order"""
        return np.nonzero(self.serving.T)[0]

    @cached_property
    def pair_ap(self):
        """AP index of every serving pair, user-major order"""
        return np.nonzero(self.serving.T)[1]

    @property
    def num_pairs(self):
        return int(self.pair_user.size)


def _assign_pilots(beta, tau_p, rng):
    num_users = beta.shape[1]
    masters = np.argmax(beta, axis=0)
    pilot_of = np.full(num_users, -1, dtype=int)
    for k in rng.permutation(num_users):
        master = masters[k]
        interference = np.zeros(tau_p)
        assigned = pilot_of >= 0
        np.add.at(interference, pilot_of[assigned], beta[master, assigned])
        pilot_of[k] = int(np.argmin(interference))
    return pilot_of, masters


def assign_pilots_and_clusters(snapshot, tau_p, rng):
    """User-centric clusters with pilot reuse for a cell-free snapshot"""
    beta = np.asarray(snapshot.beta)
    num_aps, num_users = beta.shape
    pilot_of, masters = _assign_pilots(beta, tau_p, rng)

    serving = np.zeros((num_aps, num_users), dtype=bool)
    for l in range(num_aps):
        for t in range(tau_p):
            users = np.flatnonzero(pilot_of == t)
            if users.size == 0:
                continue
            appointed = users[masters[users] == l]
            if appointed.size:
                serving[l, appointed] = True
            else:
                serving[l, users[np.argmax(beta[l, users])]] = True

    logger.debug(
        "Clustered %d users on %d APs, mean cluster size %.2f",
        num_users,
        num_aps,
        serving.sum() / num_users,
    )
    return ClusterAssignment(pilot_of=pilot_of, serving=serving, masters=masters, tau_p=tau_p)


def assign_cellular(snapshot, tau_p, rng):
    """Cellular association: same pilot procedure, each user served by its strongest BS only"""
    beta = np.asarray(snapshot.beta)
    num_aps, num_users = beta.shape
    pilot_of, masters = _assign_pilots(beta, tau_p, rng)
    serving = np.zeros((num_aps, num_users), dtype=bool)
    serving[masters, np.arange(num_users)] = True
    return ClusterAssignment(pilot_of=pilot_of, serving=serving, masters=masters, tau_p=tau_p)


def write_assignment_csv(assignment, path):
    """Dump the assignment as CSV: user, pilot, master, serving APs separated by ';'"""
    frame = pd.DataFrame(
        {
            "user": np.arange(assignment.num_users),
            "pilot": assignment.pilot_of,
            "master": assignment.masters,
            "serving_aps": [";".join(str(l) for l in aps) for aps in assignment.serving_aps],
        }
    )
    frame.to_csv(path, index=False)
    return path
