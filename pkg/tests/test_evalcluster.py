"""
Tests for KIES distances, k-medoids clustering and the evaluation metrics.
"""

import json
import unittest

import numpy as np
import pytest
import scipy.sparse as sp

from kiesgcn.errors import (
    ArtifactError,
    ConfigError,
    SchemaError,
    ShapeError,
    WeightsError,
)
from kiesgcn.evalcluster import (
    MetricsReport,
    detection_metrics,
    kies_distance_matrix,
    kmedoids,
    nearest_neighbor_baseline,
    nmi,
    write_assignment_csv,
    write_metrics,
)
from kiesgcn.hin import EventDocument, ingest_corpus
from kiesgcn.metapath import KiesWeights, compute_dice_stack, enumerate_metapaths
from kiesgcn.ppgcn import NEW_CLASS
from tests.conftest import IKI, INI, IUI


def block_distances(sizes):
    """0 within a block, 1 across blocks."""
    labels = np.repeat(np.arange(len(sizes)), sizes)
    return (labels[:, None] != labels[None, :]).astype(np.float64), labels


def random_points(seed: int, n: int = 30):
    rng = np.random.default_rng(seed)
    points = rng.normal(size=(n, 2))
    return np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)


# =============================================================================
# Distances
# =============================================================================


class TestKiesDistance:
    def test_tiny_graph(self, tiny_stack):
        weights = KiesWeights.uniform([IKI, INI, IUI])
        distances = kies_distance_matrix(tiny_stack, weights)
        assert distances[0, 1] == pytest.approx(1 / 9, abs=1e-12)
        assert distances[1, 0] == distances[0, 1]
        np.testing.assert_array_equal(np.diag(distances), [0.0, 0.0])

    def test_disjoint_events(self):
        hin = ingest_corpus(
            [EventDocument("e1", keywords=["a"]), EventDocument("e2", keywords=["b"])]
        )
        catalog = enumerate_metapaths(hin.schema, 1)
        distances = kies_distance_matrix(
            compute_dice_stack(hin, catalog), KiesWeights.uniform(catalog.signatures)
        )
        assert distances[0, 1] == 1.0

    def test_unnormalized_weights_rejected(self, tiny_stack):
        weights = KiesWeights((1.0, 1.0, 1.0), (IKI, INI, IUI))
        with pytest.raises(WeightsError):
            kies_distance_matrix(tiny_stack, weights)

    def test_weights_aligned_to_catalog(self, tiny_stack):
        weights = KiesWeights((0.5, 0.25, 0.25), (IUI, IKI, INI), True)
        aligned = kies_distance_matrix(tiny_stack, weights, (IKI, INI, IUI))
        expected = 1.0 - (0.25 * 2 / 3 + 0.25 + 0.5)
        assert aligned[0, 1] == pytest.approx(expected, abs=1e-12)

    def test_mismatched_signatures(self, tiny_stack):
        weights = KiesWeights.uniform([IKI, INI])
        with pytest.raises(WeightsError):
            kies_distance_matrix(tiny_stack, weights, (IKI, INI, IUI))

    def test_similarity_above_one_is_an_error(self):
        # what an odd-length synonym path yields on a two-event graph
        dice = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 0.0]]))
        with pytest.raises(SchemaError):
            kies_distance_matrix([dice], KiesWeights.uniform([IKI]))

    def test_small_world_range_and_symmetry(self, small_world):
        weights = KiesWeights.uniform(small_world["catalog"].signatures)
        distances = kies_distance_matrix(small_world["stack"], weights)
        assert distances.min() >= 0.0
        assert distances.max() <= 1.0
        np.testing.assert_array_equal(distances, distances.T)
        np.testing.assert_array_equal(np.diag(distances), 0.0)


# =============================================================================
# k-medoids
# =============================================================================


class TestKmedoids(unittest.TestCase):
    def test_two_blocks(self):
        distances, labels = block_distances([4, 3])
        clustering = kmedoids(distances, 2, seed=0)
        np.testing.assert_array_equal(clustering.assignment, labels)
        self.assertEqual(clustering.medoids, [0, 4])
        self.assertEqual(clustering.cost, 0.0)

    def test_k_equals_n(self):
        distances = random_points(0, n=6)
        clustering = kmedoids(distances, 6, seed=1)
        self.assertEqual(sorted(clustering.assignment.tolist()), list(range(6)))
        self.assertEqual(clustering.cost, 0.0)

    def test_single_cluster(self):
        clustering = kmedoids(random_points(2, n=5), 1)
        self.assertTrue(np.all(clustering.assignment == 0))

    def test_deterministic(self):
        distances = random_points(3)
        first = kmedoids(distances, 4, seed=7)
        second = kmedoids(distances, 4, seed=7)
        np.testing.assert_array_equal(first.assignment, second.assignment)
        self.assertEqual(first.medoids, second.medoids)

    def test_dense_ids_and_medoid_membership(self):
        clustering = kmedoids(random_points(4), 5, seed=0)
        self.assertEqual(set(clustering.assignment.tolist()), set(range(5)))
        for cluster, medoid in enumerate(clustering.medoids):
            self.assertEqual(clustering.assignment[medoid], cluster)
        self.assertEqual(clustering.medoids, sorted(clustering.medoids))

    def test_k_out_of_range(self):
        with self.assertRaises(ConfigError):
            kmedoids(np.zeros((3, 3)), 4)
        with self.assertRaises(ConfigError):
            kmedoids(np.zeros((3, 3)), 0)

    def test_non_square(self):
        with self.assertRaises(ShapeError):
            kmedoids(np.zeros((3, 2)), 1)

    def test_iteration_cap(self):
        clustering = kmedoids(random_points(5, n=40), 6, seed=0, max_iterations=1)
        self.assertEqual(clustering.iterations, 1)


@pytest.mark.parametrize("seed", range(10))
def test_kmedoids_cost_never_increases(seed):
    clustering = kmedoids(random_points(seed, n=40), 5, seed=seed)
    history = clustering.cost_history
    assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))
    assert clustering.cost == history[-1]


def test_assignment_csv(tmp_path):
    distances, _ = block_distances([2, 2])
    clustering = kmedoids(distances, 2)
    path = write_assignment_csv(tmp_path / "a.csv", ["w", "x", "y", "z"], clustering)
    assert path.read_text().splitlines() == [
        "event_id,cluster",
        "w,0",
        "x,0",
        "y,1",
        "z,1",
    ]
    with pytest.raises(ShapeError):
        write_assignment_csv(tmp_path / "b.csv", ["w"], clustering)


# =============================================================================
# Metrics
# =============================================================================


class TestNmi(unittest.TestCase):
    def test_identical_partitions(self):
        self.assertAlmostEqual(nmi([0, 0, 1, 1, 2], [0, 0, 1, 1, 2]), 1.0)

    def test_renamed_clusters(self):
        self.assertAlmostEqual(nmi([0, 0, 1, 1], ["b", "b", "a", "a"]), 1.0)

    def test_single_cluster_against_split(self):
        self.assertEqual(nmi([0, 0, 0, 0], [0, 1, 0, 1]), 0.0)

    def test_identical_single_clusters(self):
        self.assertEqual(nmi([5, 5, 5], [1, 1, 1]), 1.0)

    def test_worked_example(self):
        self.assertAlmostEqual(nmi([0, 0, 1, 1], [0, 1, 1, 1]), 0.345592, places=6)
        self.assertAlmostEqual(
            nmi([0, 0, 1, 1], [0, 1, 1, 1], average="arithmetic"), 0.343711, places=6
        )

    def test_symmetric(self):
        rng = np.random.default_rng(0)
        a = rng.integers(4, size=30).tolist()
        b = rng.integers(3, size=30).tolist()
        self.assertAlmostEqual(nmi(a, b), nmi(b, a), places=12)

    def test_length_mismatch(self):
        with self.assertRaises(ShapeError):
            nmi([0, 1], [0])

    def test_empty(self):
        with self.assertRaises(ShapeError):
            nmi([], [])

    def test_unknown_average(self):
        with self.assertRaises(ValueError):
            nmi([0, 1], [0, 1], average="max")


class TestDetectionMetrics(unittest.TestCase):
    def test_perfect(self):
        report = detection_metrics(["a", "b", "b"], ["a", "b", "b"])
        self.assertEqual(
            (report.accuracy, report.micro_f1, report.macro_f1), (1.0, 1.0, 1.0)
        )

    def test_all_new_class(self):
        report = detection_metrics([NEW_CLASS] * 3, ["a", "b", "b"])
        self.assertEqual(report.accuracy, 0.0)
        self.assertEqual(report.macro_f1, 0.0)

    def test_worked_example(self):
        report = detection_metrics([0, 0, 1], [0, 1, 1])
        self.assertAlmostEqual(report.accuracy, 2 / 3)
        self.assertAlmostEqual(report.micro_f1, 2 / 3)
        self.assertAlmostEqual(report.macro_f1, 2 / 3)
        self.assertEqual(report.per_class["1"]["support"], 2)
        self.assertAlmostEqual(report.per_class["0"]["precision"], 0.5)

    def test_macro_over_gold_classes_only(self):
        report = detection_metrics(["a", "c"], ["a", "b"])
        self.assertEqual(set(report.per_class), {"a", "b"})
        self.assertAlmostEqual(report.macro_f1, 0.5)

    def test_length_mismatch(self):
        with self.assertRaises(ShapeError):
            detection_metrics(["a"], ["a", "b"])


def test_metrics_file(tmp_path):
    report = detection_metrics(["a", "b"], ["a", "a"])
    report.nmi = 0.25
    path = write_metrics(tmp_path / "metrics.json", report, {"command": "detect"})
    document = json.loads(path.read_text())
    assert document["format"] == "kiesgcn-metrics"
    assert document["accuracy"] == 0.5
    assert document["nmi"] == 0.25
    assert document["meta"] == {"command": "detect"}


def test_metrics_out_of_range_rejected():
    with pytest.raises(ArtifactError):
        MetricsReport(accuracy=1.5).to_dict()


def test_nearest_neighbor_baseline():
    vectors = np.array([[1.0, 0.0], [0.0, 1.0], [0.9, 0.1], [0.2, 0.8]])
    labels = ["x", "y", None, None]
    assert nearest_neighbor_baseline(vectors, [0, 1], labels, [2, 3]) == ["x", "y"]
    assert nearest_neighbor_baseline(vectors, [0, 1], labels, []) == []
    with pytest.raises(ShapeError):
        nearest_neighbor_baseline(vectors, [], labels, [2])


def test_nearest_neighbor_baseline_without_text():
    vectors = sp.csr_matrix((4, 0), dtype=np.float64)
    labels = ["x", "y", None, None]
    assert nearest_neighbor_baseline(vectors, [1, 0], labels, [2, 3]) == ["y", "y"]
