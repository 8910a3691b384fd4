"""
Pairwise-popularity GCN (PP-GCN).

Training draws anchor events from the labeled training set, pairs each with
one same-class and one other-class partner, and minimises binary
cross-entropy of a pairwise head over GCN outputs. The popularity head
compares vector moduli; the angle head (ablation) compares directions.

Meta-path weights are learned jointly with the GCN: ``omega = softplus(raw)``
builds the event adjacency ``A = sum_m omega_m S_m`` that the GCN propagates
over, and the gradient of the loss w.r.t. ``A_hat`` is folded back onto
``raw``.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .artifacts import atomic_write_json, read_csv, read_json, write_csv
from .config import TrainConfig, substream
from .errors import ArtifactError, SamplingError, ShapeError, WeightsError
from .metapath import KiesWeights, build_event_adjacency, off_diagonal
from .nn import (
    GcnParams,
    degree_inv_sqrt,
    gcn_backward,
    gcn_forward,
    init_params,
    normalize_adjacency,
    sgd_step,
)
from .schemas import MODEL_CHECKPOINT_SCHEMA

logger = logging.getLogger(__name__)

__all__ = [
    "NEW_CLASS",
    "HEADS",
    "PairSample",
    "EpochPairs",
    "TrainConfig",
    "Model",
    "HeadScore",
    "Prediction",
    "TraceRow",
    "sample_epoch_pairs",
    "popularity_score",
    "angle_score",
    "pairwise_loss_and_grad",
    "omega_gradient",
    "train",
    "predict_class",
    "predict_many",
    "export_weights",
    "save_model",
    "load_model",
    "write_trace_csv",
    "read_trace_csv",
    "windowed_variance",
]

NEW_CLASS = "<NEW_CLASS>"

HEADS = ("popularity", "angle")

MODEL_FORMAT = "kiesgcn-model"
MODEL_VERSION = 1

TRACE_HEADER = ("epoch", "loss", "dev_accuracy", "head")

# loss charged for a degenerate positive pair (p forced to 0)
_LOG_EPS = -math.log(1e-12)

_LN10 = math.log(10.0)


def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def inverse_softplus(y: float) -> float:
    return float(y + math.log(-math.expm1(-y)))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -x))


# ----------------------------------------------------------------------
# Pair sampling
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class PairSample:
    """Two labeled events; ``positive`` when they share a class."""

    i: int
    j: int
    positive: bool

    def __post_init__(self) -> None:
        if self.i == self.j:
            raise SamplingError(
                f"A pair needs two distinct events, got ({self.i}, {self.j})"
            )


@dataclass
class EpochPairs:
    """The 2R-pair pool of one epoch and its E x B batch schedule."""

    pool: List[PairSample]
    batches: np.ndarray

    def batch(self, index: int) -> List[PairSample]:
        return [self.pool[k] for k in self.batches[index]]


def _class_members(
    labels: Sequence[Optional[str]], candidates: Optional[Sequence[int]]
) -> Dict[str, List[int]]:
    indices = range(len(labels)) if candidates is None else candidates
    members: Dict[str, List[int]] = {}
    for index in indices:
        label = labels[index]
        if label is not None:
            members.setdefault(label, []).append(int(index))
    return members


def sample_epoch_pairs(
    labels: Sequence[Optional[str]],
    config: TrainConfig,
    rng: np.random.Generator,
    candidates: Optional[Sequence[int]] = None,
) -> EpochPairs:
    """
    Draw one epoch's pair pool and batch schedule.

    Each of ``config.anchors`` anchors is drawn uniformly from the labeled
    candidates (an anchor whose class has no other member is redrawn) and
    contributes one positive then one negative pair. Each of the
    ``config.batches_per_epoch`` batches draws ``config.batch_size`` pool
    positions uniformly with replacement.

    Args:
        labels: Class label per event index (None = unlabeled)
        config: Supplies R, B and E
        rng: Sampler stream
        candidates: Event indices eligible for pairing (default: all)

    Returns:
        Pool of exactly R positive and R negative pairs plus the schedule

    Raises:
        SamplingError: Fewer than two classes, or no class with two members
    """
    members = _class_members(labels, candidates)
    if len(members) < 2:
        raise SamplingError(
            f"Pair sampling needs at least 2 labeled classes, found {len(members)}"
        )
    if all(len(m) < 2 for m in members.values()):
        raise SamplingError("No class has two labeled instances: no positive pairs")

    eligible = sorted(index for group in members.values() for index in group)
    label_of = {index: labels[index] for index in eligible}
    others_of = {
        label: [i for i in eligible if label_of[i] != label] for label in members
    }

    pool: List[PairSample] = []
    for _ in range(config.anchors):
        anchor = eligible[int(rng.integers(len(eligible)))]
        while len(members[label_of[anchor]]) < 2:
            anchor = eligible[int(rng.integers(len(eligible)))]
        label = label_of[anchor]

        same = members[label]
        offset = int(rng.integers(len(same) - 1))
        position = same.index(anchor)
        partner = same[offset if offset < position else offset + 1]
        pool.append(PairSample(anchor, partner, True))

        others = others_of[label]
        pool.append(PairSample(anchor, others[int(rng.integers(len(others)))], False))

    batches = rng.integers(
        len(pool), size=(config.batches_per_epoch, config.batch_size)
    )
    return EpochPairs(pool, batches)


# ----------------------------------------------------------------------
# Heads
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class HeadScore:
    """A head's verdict on one pair; ``degenerate`` marks zero vectors."""

    p: float
    positive: bool
    x: Optional[float] = None
    f: Optional[float] = None
    cosine: Optional[float] = None
    degenerate: bool = False


def popularity_score(vi: np.ndarray, vj: np.ndarray, c: float = 0.01) -> HeadScore:
    """
    Modulus-ratio head.

    ``x = max(|vi|, |vj|) / min(|vi|, |vj|)``, ``f = -log10(x - 1 + c)``,
    ``p = sigmoid(f)``. The pair is predicted positive iff ``x < 2 - c``.

    Both moduli zero is degenerate: ``p = 0`` and the result is flagged.
    """
    ni = float(np.linalg.norm(vi))
    nj = float(np.linalg.norm(vj))
    if ni == 0.0 and nj == 0.0:
        return HeadScore(p=0.0, positive=False, degenerate=True)
    low, high = min(ni, nj), max(ni, nj)
    if low == 0.0:
        return HeadScore(p=0.0, positive=False, x=math.inf, f=-math.inf)
    x = high / low
    f = -math.log10(x - 1.0 + c)
    p = float(_sigmoid(np.asarray(f)))
    return HeadScore(p=p, positive=x < 2.0 - c, x=x, f=f)


def angle_score(
    vi: np.ndarray, vj: np.ndarray, kappa: float = 10.0, tau: float = 0.5
) -> HeadScore:
    """
    Angle head: ``p = sigmoid(kappa * (cos(vi, vj) - tau))``.

    A zero vector gives ``p = 0`` and is flagged.
    """
    ni = float(np.linalg.norm(vi))
    nj = float(np.linalg.norm(vj))
    if ni == 0.0 or nj == 0.0:
        return HeadScore(p=0.0, positive=False, degenerate=True)
    cosine = float(np.dot(vi, vj)) / (ni * nj)
    p = float(_sigmoid(np.asarray(kappa * (cosine - tau))))
    return HeadScore(p=p, positive=p >= 0.5, cosine=cosine)


def _pair_arrays(
    pairs: Sequence[PairSample],
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    i = np.fromiter((p.i for p in pairs), dtype=np.int64, count=len(pairs))
    j = np.fromiter((p.j for p in pairs), dtype=np.int64, count=len(pairs))
    y = np.fromiter((p.positive for p in pairs), dtype=np.float64, count=len(pairs))
    return i, j, y


def _popularity_terms(
    vi: np.ndarray, vj: np.ndarray, c: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised logits and their gradients w.r.t. each vector."""
    ni = np.linalg.norm(vi, axis=1)
    nj = np.linalg.norm(vj, axis=1)
    valid = (ni > 0) & (nj > 0)
    safe_i = np.where(valid, ni, 1.0)
    safe_j = np.where(valid, nj, 1.0)
    i_high = safe_i >= safe_j
    high = np.where(i_high, safe_i, safe_j)
    low = np.where(i_high, safe_j, safe_i)
    x = high / low
    shifted = x - 1.0 + c
    logits = -np.log10(shifted)

    # d logit / d|v| for the larger and smaller modulus
    d_x = -1.0 / (shifted * _LN10)
    d_high = d_x / low
    d_low = -d_x * high / low**2
    d_ni = np.where(i_high, d_high, d_low)
    d_nj = np.where(i_high, d_low, d_high)
    grad_i = (d_ni / safe_i)[:, None] * vi
    grad_j = (d_nj / safe_j)[:, None] * vj
    return logits, valid, grad_i, grad_j


def _angle_terms(
    vi: np.ndarray, vj: np.ndarray, kappa: float, tau: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    ni = np.linalg.norm(vi, axis=1)
    nj = np.linalg.norm(vj, axis=1)
    valid = (ni > 0) & (nj > 0)
    safe_i = np.where(valid, ni, 1.0)[:, None]
    safe_j = np.where(valid, nj, 1.0)[:, None]
    cosine = np.sum(vi * vj, axis=1)[:, None] / (safe_i * safe_j)
    logits = kappa * (cosine[:, 0] - tau)
    grad_i = kappa * (vj / (safe_i * safe_j) - cosine * vi / safe_i**2)
    grad_j = kappa * (vi / (safe_i * safe_j) - cosine * vj / safe_j**2)
    return logits, valid, grad_i, grad_j


def pairwise_loss_and_grad(
    z: np.ndarray,
    pairs: Sequence[PairSample],
    head: str = "popularity",
    c: float = 0.01,
    kappa: float = 10.0,
    tau: float = 0.5,
) -> Tuple[float, np.ndarray, int]:
    """
    Mean binary cross-entropy of a head over pairs, and its gradient.

    Args:
        z: N x F GCN output
        pairs: Pairs to score
        head: ``"popularity"`` or ``"angle"``

    Returns:
        Tuple of (mean loss, dL/dZ, number of degenerate pairs)
    """
    if head not in HEADS:
        raise ValueError(f"Unknown head: {head}")
    if not pairs:
        raise SamplingError("Cannot compute a loss over zero pairs")
    i, j, y = _pair_arrays(pairs)
    vi, vj = z[i], z[j]
    if head == "popularity":
        logits, valid, grad_i, grad_j = _popularity_terms(vi, vj, c)
    else:
        logits, valid, grad_i, grad_j = _angle_terms(vi, vj, kappa, tau)

    losses = np.where(
        valid,
        y * np.logaddexp(0.0, -logits) + (1.0 - y) * np.logaddexp(0.0, logits),
        y * _LOG_EPS,
    )
    d_logit = np.where(valid, _sigmoid(logits) - y, 0.0) / len(pairs)
    grad = np.zeros_like(z)
    np.add.at(grad, i, d_logit[:, None] * grad_i)
    np.add.at(grad, j, d_logit[:, None] * grad_j)
    return float(np.mean(losses)), grad, int(np.count_nonzero(~valid))


def pair_probabilities(
    z: np.ndarray, t: int, others: np.ndarray, config: TrainConfig
) -> np.ndarray:
    """Head probability of ``t`` paired with each event in ``others``."""
    vi = np.repeat(z[t][None, :], len(others), axis=0)
    vj = z[others]
    if config.head == "popularity":
        logits, valid, _, _ = _popularity_terms(vi, vj, config.c)
    else:
        logits, valid, _, _ = _angle_terms(vi, vj, config.kappa, config.tau)
    return np.where(valid, _sigmoid(logits), 0.0)


# ----------------------------------------------------------------------
# Model
# ----------------------------------------------------------------------


@dataclass
class Model:
    """Trained GCN weights, meta-path weight parameters and settings."""

    gcn: GcnParams
    omega_raw: np.ndarray
    signatures: Tuple[str, ...]
    config: TrainConfig

    def __post_init__(self) -> None:
        self.omega_raw = np.asarray(self.omega_raw, dtype=np.float64)
        self.signatures = tuple(self.signatures)
        if self.omega_raw.shape != (len(self.signatures),):
            raise WeightsError(
                f"{self.omega_raw.size} omega parameters for "
                f"{len(self.signatures)} meta-paths"
            )

    @property
    def omega(self) -> np.ndarray:
        return softplus(self.omega_raw)

    def adjacency(self, dice_stack: Sequence[sp.spmatrix]) -> sp.csr_matrix:
        return normalize_adjacency(build_event_adjacency(dice_stack, self.omega))

    def embed(
        self, dice_stack: Sequence[sp.spmatrix], features: np.ndarray
    ) -> np.ndarray:
        """Z over the full graph."""
        z, _ = gcn_forward(self.adjacency(dice_stack), features, self.gcn)
        return z

    def copy(self) -> "Model":
        return Model(
            self.gcn.copy(), self.omega_raw.copy(), self.signatures, self.config
        )


def initial_model(
    signatures: Sequence[str], feature_dim: int, config: TrainConfig
) -> Model:
    """Glorot-initialised GCN and uniform ``omega = 1/M``."""
    rng = substream(config.seed, "init")
    gcn = init_params(
        [feature_dim, config.hidden, config.out_dim],
        [config.hidden_activation, "identity"],
        rng,
    )
    count = len(signatures)
    if count == 0:
        raise WeightsError("Cannot train over an empty meta-path catalog")
    omega_raw = np.full(count, inverse_softplus(1.0 / count))
    return Model(gcn, omega_raw, tuple(signatures), config)


def omega_gradient(
    grad_adjacency_hat: np.ndarray,
    adjacency: sp.spmatrix,
    off_stack: Sequence[sp.spmatrix],
    omega_raw: np.ndarray,
    exact_normalization: bool = False,
) -> np.ndarray:
    """
    Fold dL/dA_hat back onto the raw meta-path weight parameters.

    With ``exact_normalization`` off, ``D~^(-1/2)`` is held constant; with it
    on, the dependence of the degrees on ``A`` is differentiated too.

    Args:
        grad_adjacency_hat: Dense dL/dA_hat
        adjacency: A (zero diagonal) the forward pass normalised
        off_stack: Dice matrices with zero diagonals, catalog order
        omega_raw: Current raw parameters

    Returns:
        dL/d omega_raw
    """
    dinv = degree_inv_sqrt(adjacency)
    grad_tilde = grad_adjacency_hat * np.outer(dinv, dinv)
    if exact_normalization:
        tilde = adjacency.toarray() + np.eye(adjacency.shape[0])
        weighted = grad_adjacency_hat * tilde
        inner = weighted @ dinv + weighted.T @ dinv
        grad_tilde = grad_tilde + (-0.5 * dinv**3 * inner)[:, None]
    grad_omega = np.array(
        [float(np.asarray(s.multiply(grad_tilde).sum())) for s in off_stack]
    )
    return grad_omega * _sigmoid(omega_raw)


# ----------------------------------------------------------------------
# Training
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class TraceRow:
    """
    One epoch of training.

    ``loss`` is measured on the fixed monitoring pool; ``batch_loss`` is the
    mean over the epoch's SGD batches and is not written to trace files.
    """

    epoch: int
    loss: float
    dev_accuracy: Optional[float]
    head: str
    batch_loss: Optional[float] = None


def _restrict(stack: Sequence[sp.spmatrix], keep: Sequence[int]) -> List[sp.csr_matrix]:
    """Zero every row and column outside ``keep``."""
    n = stack[0].shape[0]
    mask = np.zeros(n)
    mask[list(keep)] = 1.0
    projector = sp.diags(mask)
    return [sp.csr_matrix(projector @ s @ projector) for s in stack]


def _check_inputs(
    dice_stack: Sequence[sp.spmatrix],
    features: np.ndarray,
    labels: Sequence[Optional[str]],
    signatures: Sequence[str],
) -> None:
    n = features.shape[0]
    if len(dice_stack) != len(signatures):
        raise ShapeError(
            f"{len(dice_stack)} Dice matrices for {len(signatures)} meta-paths"
        )
    for dice in dice_stack:
        if dice.shape != (n, n):
            raise ShapeError(f"Dice matrix {dice.shape} does not match {n} events")
    if len(labels) != n:
        raise ShapeError(f"{len(labels)} labels for {n} events")


def _batch_step(
    model: Model,
    train_stack: Sequence[sp.csr_matrix],
    off_stack: Sequence[sp.csr_matrix],
    features: np.ndarray,
    pairs: Sequence[PairSample],
) -> float:
    config = model.config
    adjacency = build_event_adjacency(train_stack, model.omega)
    z, cache = gcn_forward(normalize_adjacency(adjacency), features, model.gcn)
    loss, grad_z, _ = pairwise_loss_and_grad(
        z, pairs, config.head, config.c, config.kappa, config.tau
    )
    grads = gcn_backward(cache, grad_z, with_adjacency=config.learn_omega)
    params = list(model.gcn.weights)
    updates = list(grads.weights)
    if config.learn_omega:
        params.append(model.omega_raw)
        updates.append(
            omega_gradient(
                grads.adjacency,  # type: ignore[arg-type]
                adjacency,
                off_stack,
                model.omega_raw,
                config.exact_normalization,
            )
        )
    sgd_step(params, updates, config.lr)
    return loss


def _accuracy(
    model: Model,
    z: np.ndarray,
    labels: Sequence[Optional[str]],
    gallery: Sequence[int],
    queries: Sequence[int],
) -> float:
    predictions = predict_many(queries, model, gallery, z, labels)
    hits = sum(p.label == labels[q] for p, q in zip(predictions, queries))
    return hits / len(queries)


def train(
    dice_stack: Sequence[sp.spmatrix],
    features: np.ndarray,
    labels: Sequence[Optional[str]],
    signatures: Sequence[str],
    config: TrainConfig,
    train_indices: Sequence[int],
    dev_indices: Sequence[int] = (),
    model: Optional[Model] = None,
) -> Tuple[Model, List[TraceRow]]:
    """
    Train PP-GCN by SGD over sampled pair batches.

    Every batch rebuilds ``A`` from the current meta-path weights,
    normalises it, runs the GCN over all events, scores the batch's pairs
    and updates both the layer weights and the raw meta-path weights.
    Non-train events take part in propagation (when ``transductive``) but
    never in pairs.

    Args:
        dice_stack: Dice matrices S_m, catalog order
        features: N x d feature matrix X
        labels: Class label per event (None = unlabeled)
        signatures: Catalog signatures aligned with ``dice_stack``
        config: Training settings
        train_indices: Labeled events pairs are drawn from
        dev_indices: Events whose accuracy is traced and drives early stopping
        model: Starting point (default: fresh initialisation)

    Returns:
        Tuple of (model, per-epoch trace)
    """
    features = np.asarray(features, dtype=np.float64)
    _check_inputs(dice_stack, features, labels, signatures)
    model = model.copy() if model is not None else initial_model(
        signatures, features.shape[1], config
    )
    model.config = config
    full_stack = [sp.csr_matrix(s, dtype=np.float64) for s in dice_stack]
    train_stack = (
        full_stack if config.transductive else _restrict(full_stack, train_indices)
    )
    off_stack = [off_diagonal(s) for s in train_stack]

    sampler = substream(config.seed, "sampler")
    monitor = sample_epoch_pairs(
        labels,
        config.replace(anchors=config.monitor_pairs, batches_per_epoch=1, batch_size=1),
        substream(config.seed, "monitor"),
        candidates=train_indices,
    ).pool
    dev = [i for i in dev_indices if labels[i] is not None]
    gallery = [i for i in train_indices if labels[i] is not None]

    logger.info(
        "Training %s head: %d events, %d train, %d dev, %d meta-paths, %d epochs",
        config.head,
        features.shape[0],
        len(gallery),
        len(dev),
        len(signatures),
        config.epochs,
    )
    trace: List[TraceRow] = []
    best_accuracy = -1.0
    best_model = model.copy()
    best_epoch = 0
    for epoch in range(1, config.epochs + 1):
        pairs = sample_epoch_pairs(labels, config, sampler, candidates=train_indices)
        batch_losses = [
            _batch_step(model, train_stack, off_stack, features, pairs.batch(b))
            for b in range(config.batches_per_epoch)
        ]

        z_train = model.embed(train_stack, features)
        loss, _, degenerate = pairwise_loss_and_grad(
            z_train, monitor, config.head, config.c, config.kappa, config.tau
        )
        if degenerate:
            logger.debug("Epoch %d: %d degenerate monitor pairs", epoch, degenerate)
        accuracy = None
        if dev:
            z_full = (
                z_train
                if config.transductive
                else model.embed(full_stack, features)
            )
            accuracy = _accuracy(model, z_full, labels, gallery, dev)
        trace.append(
            TraceRow(epoch, loss, accuracy, config.head, float(np.mean(batch_losses)))
        )
        logger.debug("Epoch %d: loss=%.6f dev_accuracy=%s", epoch, loss, accuracy)

        if accuracy is not None and config.patience is not None:
            if accuracy > best_accuracy:
                best_accuracy, best_model, best_epoch = accuracy, model.copy(), epoch
            elif epoch - best_epoch >= config.patience:
                logger.info(
                    "Early stop at epoch %d; restoring epoch %d (dev accuracy %.4f)",
                    epoch,
                    best_epoch,
                    best_accuracy,
                )
                break

    if dev and config.patience is not None and best_epoch:
        model = best_model
    logger.info("Training finished after %d epochs", len(trace))
    return model, trace


# ----------------------------------------------------------------------
# Inference
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class Prediction:
    """Predicted class (or ``NEW_CLASS``) and per-class probabilities."""

    index: int
    label: str
    probabilities: Dict[str, float]


def predict_class(
    t: int,
    model: Model,
    gallery: Sequence[int],
    z: np.ndarray,
    labels: Sequence[Optional[str]],
) -> Prediction:
    """
    Assign event ``t`` to the gallery class it most likely belongs to.

    A class's probability is the mean head score between ``t`` and each of
    its gallery members (``t`` itself excluded). Ties go to the
    lexicographically smallest label; a best probability below 0.5 yields
    ``NEW_CLASS``.

    Raises:
        SamplingError: Empty gallery
    """
    members = _class_members(labels, [g for g in gallery if g != t])
    if not members:
        raise SamplingError("Cannot predict against an empty gallery")
    probabilities = {
        label: float(np.mean(pair_probabilities(z, t, np.asarray(idx), model.config)))
        for label, idx in sorted(members.items())
    }
    best_label = NEW_CLASS
    best = -1.0
    for label, probability in probabilities.items():
        if probability > best:
            best_label, best = label, probability
    if best < 0.5:
        best_label = NEW_CLASS
    return Prediction(t, best_label, probabilities)


def predict_many(
    queries: Sequence[int],
    model: Model,
    gallery: Sequence[int],
    z: np.ndarray,
    labels: Sequence[Optional[str]],
) -> List[Prediction]:
    return [predict_class(int(t), model, gallery, z, labels) for t in queries]


def export_weights(model: Model) -> KiesWeights:
    """Softplus of the raw parameters, normalised to sum 1."""
    return KiesWeights(tuple(model.omega), model.signatures).normalize()


# ----------------------------------------------------------------------
# Files
# ----------------------------------------------------------------------


def model_to_dict(
    model: Model, meta: Optional[Dict[str, Any]] = None
) -> Dict[str, Any]:
    document: Dict[str, Any] = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "gcn": model.gcn.to_dict(),
        "omega_raw": model.omega_raw.tolist(),
        "signatures": list(model.signatures),
        "config": model.config.to_dict(),
    }
    if meta is not None:
        document["meta"] = meta
    return document


def save_model(
    path: Union[str, Path], model: Model, meta: Optional[Dict[str, Any]] = None
) -> Path:
    return atomic_write_json(path, model_to_dict(model, meta))


def load_model(path: Union[str, Path]) -> Model:
    """
    Read a checkpoint written by ``save_model``.

    Raises:
        ArtifactError: Invalid JSON or schema violation
    """
    document = read_json(path, MODEL_CHECKPOINT_SCHEMA)
    return Model(
        GcnParams.from_dict(document["gcn"], str(path)),
        np.asarray(document["omega_raw"], dtype=np.float64),
        tuple(document["signatures"]),
        TrainConfig.from_dict(document["config"]),
    )


def write_trace_csv(
    path: Union[str, Path],
    trace: Sequence[TraceRow],
    meta: Optional[Dict[str, Any]] = None,
) -> Path:
    rows = [(r.epoch, r.loss, r.dev_accuracy, r.head) for r in trace]
    return write_csv(path, TRACE_HEADER, rows, meta)


def read_trace_csv(path: Union[str, Path]) -> List[TraceRow]:
    _, rows = read_csv(path)
    trace = []
    for number, row in enumerate(rows, start=2):
        try:
            trace.append(
                TraceRow(
                    int(row["epoch"]),
                    float(row["loss"]),
                    float(row["dev_accuracy"]) if row["dev_accuracy"] else None,
                    row["head"],
                )
            )
        except (KeyError, ValueError) as e:
            raise ArtifactError(
                f"{path}: bad trace row {number}: {e}", source=str(path), line=number
            ) from None
    return trace


def windowed_variance(values: Sequence[float], window: int = 50) -> float:
    """Mean population variance over all sliding windows of ``window`` values."""
    data = np.asarray(values, dtype=np.float64)
    if window < 1 or len(data) < window:
        raise ValueError(f"Need at least {window} values, got {len(data)}")
    windows = np.lib.stride_tricks.sliding_window_view(data, window)
    return float(np.mean(np.var(windows, axis=1)))
