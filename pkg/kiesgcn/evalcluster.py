"""
KIES-distance clustering and evaluation metrics.

KIES gives a pairwise distance rather than coordinates, so events are
clustered with k-medoids (seeded k-medoids++ start, alternating assignment
and medoid update). Detection runs are scored with accuracy and micro/macro
F1, clusterings with NMI; all of these come from scikit-learn.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Hashable, List, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
from sklearn.metrics import (
    accuracy_score,
    f1_score,
    normalized_mutual_info_score,
    precision_recall_fscore_support,
)
from sklearn.metrics.pairwise import cosine_similarity

from .artifacts import atomic_write_json, write_csv
from .config import substream
from .errors import ConfigError, SchemaError, ShapeError, WeightsError
from .metapath import KiesWeights, weighted_sum
from .schemas import METRICS_REPORT_SCHEMA, validate_document

logger = logging.getLogger(__name__)

METRICS_FORMAT = "kiesgcn-metrics"
METRICS_VERSION = 1

MAX_ITERATIONS = 100

# Rounding slack above 1 allowed in summed Dice values
SIMILARITY_TOLERANCE = 1e-9

NMI_AVERAGES = ("geometric", "arithmetic")


@dataclass
class Clustering:
    """
    Cluster id per event, dense in ``0..k-1``.

    Cluster ``c`` is the one whose medoid has the ``c``-th smallest index.
    """

    assignment: np.ndarray
    k: int
    medoids: List[int]
    cost: float
    cost_history: List[float] = field(default_factory=list)
    iterations: int = 0


@dataclass
class MetricsReport:
    """Detection and/or clustering scores; every value lies in [0, 1]."""

    accuracy: Optional[float] = None
    micro_f1: Optional[float] = None
    macro_f1: Optional[float] = None
    nmi: Optional[float] = None
    per_class: Dict[str, Dict[str, float]] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self, meta: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        document: Dict[str, Any] = {
            "format": METRICS_FORMAT,
            "version": METRICS_VERSION,
            "accuracy": self.accuracy,
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "nmi": self.nmi,
            "per_class": self.per_class,
            "extra": self.extra,
        }
        if meta is not None:
            document["meta"] = meta
        validate_document(document, METRICS_REPORT_SCHEMA, "metrics report")
        return document


def write_metrics(
    path: Union[str, Path],
    report: MetricsReport,
    meta: Optional[Dict[str, Any]] = None,
) -> Path:
    return atomic_write_json(path, report.to_dict(meta))


# ----------------------------------------------------------------------
# Distances and clustering
# ----------------------------------------------------------------------


def kies_distance_matrix(
    dice_stack: Sequence[sp.spmatrix],
    weights: KiesWeights,
    signatures: Optional[Sequence[str]] = None,
) -> np.ndarray:
    """
    Dense ``D = 1 - KIES`` with a zero diagonal.

    Args:
        dice_stack: Dice matrices in catalog order
        weights: Normalised meta-path weights, possibly trained elsewhere
        signatures: Catalog signatures of ``dice_stack``; when given the
            weights are aligned to them

    Raises:
        WeightsError: Unnormalised weights, or signatures that do not match
        SchemaError: A similarity above 1, which only a path that is not
            its own inverse can produce
    """
    if not weights.normalized:
        raise WeightsError("KIES distances need normalized weights (sum 1)")
    if signatures is not None:
        weights = weights.align(signatures)
    similarity = weighted_sum(dice_stack, weights).toarray()
    if similarity.size and similarity.max() > 1.0 + SIMILARITY_TOLERANCE:
        raise SchemaError(
            f"KIES similarity {similarity.max():.6g} exceeds 1; every catalog "
            "path must be an event-to-event Q.Q^-1"
        )
    distances = np.clip(1.0 - similarity, 0.0, 1.0)
    np.fill_diagonal(distances, 0.0)
    return distances


def _check_distances(distances: np.ndarray, k: int) -> int:
    if distances.ndim != 2 or distances.shape[0] != distances.shape[1]:
        raise ShapeError(f"Distance matrix must be square, got {distances.shape}")
    n = distances.shape[0]
    if k < 1 or k > n:
        raise ConfigError(f"k must lie in [1, {n}], got {k}", k=k)
    return n


def _kpp_init(distances: np.ndarray, k: int, rng: np.random.Generator) -> List[int]:
    """k-medoids++: each next medoid drawn with probability proportional to D^2."""
    n = distances.shape[0]
    medoids = [int(rng.integers(n))]
    nearest = distances[medoids[0]] ** 2
    while len(medoids) < k:
        total = nearest.sum()
        if total > 0:
            choice = int(rng.choice(n, p=nearest / total))
        else:
            chosen = set(medoids)
            choice = next(i for i in range(n) if i not in chosen)
        medoids.append(choice)
        nearest = np.minimum(nearest, distances[choice] ** 2)
    return sorted(medoids)


def _assign(distances: np.ndarray, medoids: List[int]) -> np.ndarray:
    assignment = np.argmin(distances[:, medoids], axis=1)
    assignment[medoids] = np.arange(len(medoids))
    return assignment


def _cost(distances: np.ndarray, medoids: List[int], assignment: np.ndarray) -> float:
    rows = np.arange(distances.shape[0])
    return float(distances[rows, np.asarray(medoids)[assignment]].sum())


def kmedoids(
    distances: np.ndarray,
    k: int,
    seed: int = 0,
    max_iterations: int = MAX_ITERATIONS,
) -> Clustering:
    """
    Cluster a precomputed distance matrix around ``k`` medoids.

    Alternates assigning every point to its nearest medoid and moving each
    medoid to the member with the smallest summed distance to its cluster,
    until the medoids stop changing or ``max_iterations`` is reached. Ties
    go to the lowest index.

    Args:
        distances: N x N distance matrix
        k: Number of clusters, 1 <= k <= N
        seed: Master seed (the ``kmedoids`` stream drives the start)
        max_iterations: Iteration cap

    Returns:
        Clustering with the objective recorded after every assignment
    """
    distances = np.asarray(distances, dtype=np.float64)
    _check_distances(distances, k)
    rng = substream(seed, "kmedoids")
    medoids = _kpp_init(distances, k, rng)

    history: List[float] = []
    iterations = 0
    assignment = _assign(distances, medoids)
    history.append(_cost(distances, medoids, assignment))
    while iterations < max_iterations:
        iterations += 1
        updated = []
        for cluster in range(k):
            members = np.flatnonzero(assignment == cluster)
            within = distances[np.ix_(members, members)].sum(axis=1)
            updated.append(int(members[int(np.argmin(within))]))
        updated.sort()
        if updated == medoids:
            break
        medoids = updated
        assignment = _assign(distances, medoids)
        history.append(_cost(distances, medoids, assignment))

    logger.info(
        "k-medoids: k=%d, %d iterations, cost %.6f", k, iterations, history[-1]
    )
    return Clustering(
        assignment=assignment,
        k=k,
        medoids=medoids,
        cost=history[-1],
        cost_history=history,
        iterations=iterations,
    )


def write_assignment_csv(
    path: Union[str, Path],
    event_ids: Sequence[str],
    clustering: Clustering,
    meta: Optional[Dict[str, Any]] = None,
) -> Path:
    if len(event_ids) != len(clustering.assignment):
        raise ShapeError(
            f"{len(event_ids)} ids for {len(clustering.assignment)} assignments"
        )
    rows = [(i, int(c)) for i, c in zip(event_ids, clustering.assignment)]
    return write_csv(path, ("event_id", "cluster"), rows, meta)


# ----------------------------------------------------------------------
# Metrics
# ----------------------------------------------------------------------


def nmi(
    labels_a: Sequence[Hashable],
    labels_b: Sequence[Hashable],
    average: str = "geometric",
) -> float:
    """
    Normalised mutual information with natural-log entropies.

    Two identical single-cluster partitions score 1; otherwise a partition
    with zero entropy scores 0.

    Args:
        average: ``"geometric"`` (sqrt(H(A) H(B))) or ``"arithmetic"``
    """
    if len(labels_a) != len(labels_b):
        raise ShapeError(
            f"Label lists differ in length: {len(labels_a)} vs {len(labels_b)}"
        )
    if not labels_a:
        raise ShapeError("NMI needs at least one label")
    if average not in NMI_AVERAGES:
        raise ValueError(f"Unknown NMI average: {average}")
    a = [str(v) for v in labels_a]
    b = [str(v) for v in labels_b]
    return float(
        normalized_mutual_info_score(a, b, average_method=average)
    )


def detection_metrics(
    predictions: Sequence[Hashable], golds: Sequence[Hashable]
) -> MetricsReport:
    """
    Accuracy, micro-F1 and macro-F1 (over gold classes) of a detection run.

    A ``NEW_CLASS`` prediction never matches a gold label.
    """
    if len(predictions) != len(golds):
        raise ShapeError(f"{len(predictions)} predictions for {len(golds)} golds")
    if not golds:
        raise ShapeError("Cannot score an empty prediction list")
    predicted = [str(p) for p in predictions]
    gold = [str(g) for g in golds]
    classes = sorted(set(gold))
    precision, recall, f1, support = precision_recall_fscore_support(
        gold, predicted, labels=classes, zero_division=0
    )
    per_class = {
        label: {
            "precision": float(precision[n]),
            "recall": float(recall[n]),
            "f1": float(f1[n]),
            "support": int(support[n]),
        }
        for n, label in enumerate(classes)
    }
    return MetricsReport(
        accuracy=float(accuracy_score(gold, predicted)),
        micro_f1=float(f1_score(gold, predicted, average="micro", zero_division=0)),
        macro_f1=float(
            f1_score(
                gold, predicted, labels=classes, average="macro", zero_division=0
            )
        ),
        per_class=per_class,
    )


def nearest_neighbor_baseline(
    vectors: Union[np.ndarray, sp.spmatrix],
    gallery: Sequence[int],
    labels: Sequence[Optional[str]],
    queries: Sequence[int],
) -> List[str]:
    """
    Label each query with the class of its most cosine-similar gallery event.

    Ties go to the earliest gallery entry, so vectors with no columns (a
    corpus without text) label every query with the first gallery class.
    """
    if not gallery:
        raise ShapeError("Nearest-neighbour baseline needs a non-empty gallery")
    if not queries:
        return []
    if vectors.shape[1] == 0:
        similarity = np.zeros((len(queries), len(gallery)))
    else:
        similarity = cosine_similarity(vectors[list(queries)], vectors[list(gallery)])
    best = np.argmax(similarity, axis=1)
    return [str(labels[gallery[int(b)]]) for b in best]
