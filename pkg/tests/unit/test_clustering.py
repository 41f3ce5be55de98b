"""Unit tests for pilot assignment and user-centric clustering."""

from types import SimpleNamespace

import numpy as np
import pandas as pd

from cellfree_mec.clustering import (
    ClusterAssignment,
    assign_cellular,
    assign_pilots_and_clusters,
    write_assignment_csv,
)
from cellfree_mec.config import SimConfig
from cellfree_mec.geometry import drop_network


def _default_assignment(snapshot_id=0):
    snapshot = drop_network(SimConfig(), snapshot_id)
    rng = np.random.default_rng(snapshot_id)
    return snapshot, assign_pilots_and_clusters(snapshot, 10, rng)


class TestPilotAssignment:
    """Test class for pilot assignment."""

    def test_orthogonal_when_enough_pilots(self):
        """Test K <= tau_p gives every user its own pilot."""
        rng = np.random.default_rng(0)
        snapshot = SimpleNamespace(beta=rng.uniform(size=(9, 6)))
        assignment = assign_pilots_and_clusters(snapshot, 6, np.random.default_rng(1))
        assert sorted(assignment.pilot_of) == list(range(6))

    def test_co_located_users_split(self):
        """Test two users with the same master AP get different pilots."""
        snapshot = SimpleNamespace(beta=np.array([[1.0, 1.0], [1e-3, 1e-3]]))
        assignment = assign_pilots_and_clusters(snapshot, 2, np.random.default_rng(2))
        assert assignment.pilot_of[0] != assignment.pilot_of[1]
        assert list(assignment.masters) == [0, 0]

    def test_least_interference_at_master(self):
        """Test each user takes the pilot with least accumulated gain at its master."""
        snapshot = drop_network(SimConfig(), 4)
        beta = np.asarray(snapshot.beta)
        assignment = assign_pilots_and_clusters(snapshot, 10, np.random.default_rng(4))
        order = np.random.default_rng(4).permutation(beta.shape[1])
        for position, k in enumerate(order):
            earlier = order[:position]
            interference = np.zeros(10)
            master = assignment.masters[k]
            np.add.at(interference, assignment.pilot_of[earlier], beta[master, earlier])
            assert interference[assignment.pilot_of[k]] == interference.min()

    def test_pilots_in_range(self):
        """Test pilot indices stay below tau_p."""
        _, assignment = _default_assignment()
        assert assignment.pilot_of.min() >= 0
        assert assignment.pilot_of.max() < 10


class TestClusters:
    """Test class for serving clusters."""

    def test_master_serves(self):
        """Test every user is served, at least by its master AP."""
        snapshot, assignment = _default_assignment(1)
        users = np.arange(assignment.num_users)
        assert np.all(assignment.serving[assignment.masters, users])
        assert np.all(assignment.masters == np.argmax(snapshot.beta, axis=0))

    def test_one_user_per_pilot_per_ap(self):
        """Test no AP serves two users on the same pilot."""
        _, assignment = _default_assignment(2)
        for users in assignment.served_users:
            pilots = assignment.pilot_of[users]
            assert len(set(pilots)) == len(pilots)
            assert len(users) <= assignment.tau_p

    def test_partial_sets_symmetric(self):
        """Test S_k contains k and i in S_k iff k in S_i."""
        _, assignment = _default_assignment(3)
        overlap = assignment.overlap
        assert np.all(np.diag(overlap))
        assert np.array_equal(overlap, overlap.T)
        for k, partial in enumerate(assignment.partial_sets):
            assert k in partial

    def test_selectors(self):
        """Test b_k' f equals CPU share plus serving-AP shares."""
        serving = np.array([[True, False], [True, True], [False, True]])
        assignment = ClusterAssignment.from_serving([0, 1], serving, 2)
        K, L = 2, 3
        f = np.arange(1.0, K + K * L + 1)
        expected = [
            f[0] + f[K + 0 * L + 0] + f[K + 0 * L + 1],
            f[1] + f[K + 1 * L + 1] + f[K + 1 * L + 2],
        ]
        assert np.allclose(assignment.selector_b @ f, expected)
        assert np.all(assignment.selector_c[:, :K] == 0)
        assert assignment.selector_c[1] @ f == f[K + 1] + f[K + L + 1]

    def test_pairs_user_major(self):
        """Test serving pairs are listed user by user."""
        serving = np.array([[True, False], [True, True], [False, True]])
        assignment = ClusterAssignment.from_serving([0, 1], serving, 2)
        assert list(assignment.pair_user) == [0, 0, 1, 1]
        assert list(assignment.pair_ap) == [0, 1, 1, 2]
        assert assignment.num_pairs == 4


class TestCellularAssociation:
    """Test class for the cellular benchmark association."""

    def test_single_serving_bs(self):
        """Test each user is served by its strongest BS only."""
        snapshot = drop_network(SimConfig(num_aps=4, antennas_per_ap=100, mode="cellular"), 0)
        assignment = assign_cellular(snapshot, 10, np.random.default_rng(0))
        assert np.all(assignment.serving.sum(axis=0) == 1)
        assert np.array_equal(np.argmax(assignment.serving, axis=0), np.argmax(snapshot.beta, 0))


class TestWriteAssignment:
    """Test class for the assignment CSV dump."""

    def test_csv(self, tmp_path):
        """Test columns and serving AP lists."""
        serving = np.array([[True, False], [True, True], [False, True]])
        assignment = ClusterAssignment.from_serving([0, 1], serving, 2)
        path = write_assignment_csv(assignment, tmp_path / "clusters.csv")
        frame = pd.read_csv(path, dtype={"serving_aps": str})
        assert list(frame.columns) == ["user", "pilot", "master", "serving_aps"]
        assert list(frame["serving_aps"]) == ["0;1", "1;2"]
