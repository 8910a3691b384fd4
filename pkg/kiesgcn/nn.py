"""
GCN numeric kernel: adjacency normalisation, forward/backward passes with
hand-written gradients, and plain SGD.

Each layer computes ``H' = act((A_hat @ H) @ W)``: the sparse-dense product
first, then the dense-dense product, then the activation. All arithmetic is
float64.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError, ShapeError, StaleCacheError
from .schemas import GCN_PARAMS_SCHEMA, validate_document

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "identity", "sigmoid")

SYMMETRY_TOLERANCE = 1e-12


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    exp_x = np.exp(x[~positive])
    out[~positive] = exp_x / (1.0 + exp_x)
    return out


def activate(name: str, x: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "identity":
        return x
    if name == "sigmoid":
        return _sigmoid(x)
    raise ValueError(f"Unknown activation: {name}")


def activation_grad(name: str, pre: np.ndarray, post: np.ndarray) -> np.ndarray:
    """Derivative of the activation, evaluated elementwise."""
    if name == "relu":
        return (pre > 0).astype(np.float64)
    if name == "identity":
        return np.ones_like(pre)
    if name == "sigmoid":
        return post * (1.0 - post)
    raise ValueError(f"Unknown activation: {name}")


@dataclass
class GcnParams:
    """Layer weight matrices W^(l) and one activation tag per layer."""

    weights: List[np.ndarray]
    activations: List[str]

    def __post_init__(self) -> None:
        if not self.weights:
            raise ShapeError("A GCN needs at least one layer")
        if len(self.weights) != len(self.activations):
            raise ShapeError(
                f"{len(self.weights)} layers but {len(self.activations)} activations"
            )
        for tag in self.activations:
            if tag not in ACTIVATIONS:
                raise ValueError(f"Unknown activation: {tag}")
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        for layer, (left, right) in enumerate(zip(self.weights, self.weights[1:])):
            if left.shape[1] != right.shape[0]:
                raise ShapeError(
                    f"Layer {layer} outputs {left.shape[1]} columns but layer "
                    f"{layer + 1} expects {right.shape[0]}"
                )

    @property
    def dims(self) -> List[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self) -> "GcnParams":
        return GcnParams([w.copy() for w in self.weights], list(self.activations))

    def to_dict(self) -> Dict[str, Any]:
        """Layer shapes, activation tags and row-major float64 payloads."""
        return {
            "activations": list(self.activations),
            "weights": [
                {"shape": list(w.shape), "data": w.ravel(order="C").tolist()}
                for w in self.weights
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], source: str = "<params>") -> "GcnParams":
        validate_document(data, GCN_PARAMS_SCHEMA, source)
        weights = []
        for layer, block in enumerate(data["weights"]):
            rows, cols = block["shape"]
            payload = np.asarray(block["data"], dtype=np.float64)
            if payload.size != rows * cols:
                raise ShapeError(
                    f"{source}: layer {layer} declares {rows}x{cols} but carries "
                    f"{payload.size} values"
                )
            weights.append(payload.reshape(rows, cols))
        return cls(weights, list(data["activations"]))


def init_params(
    dims: Sequence[int], activations: Sequence[str], rng: np.random.Generator
) -> GcnParams:
    """
    Glorot-uniform initialisation.

    Args:
        dims: Layer widths ``[d, h_1, ..., F]``
        activations: One tag per layer
        rng: Random generator

    Returns:
        Fresh parameters
    """
    weights = []
    for fan_in, fan_out in zip(dims, dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
    return GcnParams(weights, list(activations))


def degree_inv_sqrt(adjacency: sp.spmatrix) -> np.ndarray:
    """``diag(D~)^(-1/2)`` where ``D~`` holds the row sums of ``A + I``."""
    degrees = np.asarray(adjacency.sum(axis=1), dtype=np.float64).ravel() + 1.0
    return 1.0 / np.sqrt(degrees)


def normalize_adjacency(adjacency: sp.spmatrix) -> sp.csr_matrix:
    """
    Symmetric GCN normalisation ``D~^(-1/2) (A + I) D~^(-1/2)``.

    Args:
        adjacency: Square, symmetric, non-negative matrix

    Returns:
        Normalised CSR matrix

    Raises:
        ShapeError: Non-square input
        ValueError: Asymmetric or negative input
    """
    rows, cols = adjacency.shape
    if rows != cols:
        raise ShapeError(f"Adjacency must be square, got {adjacency.shape}")
    adjacency = sp.csr_matrix(adjacency, dtype=np.float64)
    if adjacency.nnz and adjacency.data.min() < 0:
        raise ValueError("Adjacency has negative entries")
    asymmetry = abs(adjacency - adjacency.T)
    if asymmetry.nnz and asymmetry.max() > SYMMETRY_TOLERANCE:
        raise ValueError("Adjacency is not symmetric")

    tilde = adjacency + sp.identity(rows, dtype=np.float64, format="csr")
    scale = sp.diags(degree_inv_sqrt(adjacency))
    normalized = sp.csr_matrix(scale @ tilde @ scale)
    normalized.sort_indices()
    return normalized


@dataclass
class ForwardCache:
    """Per-layer inputs, propagated inputs and pre-activations of one pass."""

    adjacency: sp.csr_matrix
    params: GcnParams
    inputs: List[np.ndarray] = field(default_factory=list)
    propagated: List[np.ndarray] = field(default_factory=list)
    pre_activations: List[np.ndarray] = field(default_factory=list)
    outputs: List[np.ndarray] = field(default_factory=list)
    consumed: bool = False


@dataclass
class Gradients:
    """Gradients of a scalar loss w.r.t. every GCN input."""

    weights: List[np.ndarray]
    features: np.ndarray
    adjacency: Optional[np.ndarray] = None


def gcn_forward(
    adjacency_hat: sp.spmatrix, features: np.ndarray, params: GcnParams
) -> Tuple[np.ndarray, ForwardCache]:
    """
    Multi-layer GCN forward pass.

    Args:
        adjacency_hat: Normalised N x N adjacency
        features: N x d input matrix H^(0)
        params: Layer weights and activations

    Returns:
        Tuple of (Z, cache) where Z is N x F

    Raises:
        ShapeError: Dimensions do not chain
        NumericalError: A layer produced a non-finite value
    """
    adjacency_hat = sp.csr_matrix(adjacency_hat, dtype=np.float64)
    hidden = np.asarray(features, dtype=np.float64)
    n = adjacency_hat.shape[0]
    if adjacency_hat.shape != (n, n) or hidden.ndim != 2 or hidden.shape[0] != n:
        raise ShapeError(
            f"Adjacency {adjacency_hat.shape} does not match features {hidden.shape}"
        )
    if hidden.shape[1] != params.weights[0].shape[0]:
        raise ShapeError(
            f"Features have {hidden.shape[1]} columns, layer 0 expects "
            f"{params.weights[0].shape[0]}"
        )

    cache = ForwardCache(adjacency=adjacency_hat, params=params)
    for layer, (weight, tag) in enumerate(zip(params.weights, params.activations)):
        propagated = np.asarray(adjacency_hat @ hidden)
        pre = propagated @ weight
        post = activate(tag, pre)
        if not np.all(np.isfinite(post)):
            raise NumericalError(
                f"Non-finite activation in GCN layer {layer}", layer=layer
            )
        cache.inputs.append(hidden)
        cache.propagated.append(propagated)
        cache.pre_activations.append(pre)
        cache.outputs.append(post)
        hidden = post
    return hidden, cache


def gcn_backward(
    cache: ForwardCache, grad_output: np.ndarray, with_adjacency: bool = False
) -> Gradients:
    """
    Reverse-mode gradients of the forward composition.

    Args:
        cache: Cache of the matching forward pass (consumed by this call)
        grad_output: dL/dZ, same shape as Z
        with_adjacency: Also return dL/dA_hat as a dense N x N matrix

    Returns:
        Gradients for every layer weight, the features and optionally A_hat

    Raises:
        StaleCacheError: The cache was already used
        ShapeError: ``grad_output`` does not match Z
    """
    if cache.consumed:
        raise StaleCacheError("Forward cache already consumed by a backward pass")
    output = cache.outputs[-1]
    grad = np.asarray(grad_output, dtype=np.float64)
    if grad.shape != output.shape:
        raise ShapeError(f"dZ has shape {grad.shape}, Z has shape {output.shape}")
    cache.consumed = True

    adjacency_t = cache.adjacency.T.tocsr()
    n = cache.adjacency.shape[0]
    grad_adjacency = np.zeros((n, n)) if with_adjacency else None
    weight_grads: List[np.ndarray] = [np.empty(0)] * len(cache.params.weights)
    for layer in reversed(range(len(cache.params.weights))):
        tag = cache.params.activations[layer]
        grad_pre = grad * activation_grad(
            tag, cache.pre_activations[layer], cache.outputs[layer]
        )
        weight_grads[layer] = cache.propagated[layer].T @ grad_pre
        grad_propagated = grad_pre @ cache.params.weights[layer].T
        if grad_adjacency is not None:
            grad_adjacency += grad_propagated @ cache.inputs[layer].T
        grad = np.asarray(adjacency_t @ grad_propagated)
    return Gradients(weights=weight_grads, features=grad, adjacency=grad_adjacency)


def sgd_step(
    params: Sequence[np.ndarray], gradients: Sequence[np.ndarray], lr: float
) -> None:
    """
    In-place update ``p <- p - lr * g`` for every parameter array.

    Raises:
        ShapeError: Mismatched parameter/gradient shapes
        ValueError: Negative learning rate
    """
    if lr < 0:
        raise ValueError(f"Learning rate must be >= 0, got {lr}")
    if len(params) != len(gradients):
        raise ShapeError(f"{len(params)} parameters but {len(gradients)} gradients")
    for index, (param, grad) in enumerate(zip(params, gradients)):
        if np.shape(param) != np.shape(grad):
            raise ShapeError(
                f"Parameter {index} has shape {np.shape(param)}, gradient "
                f"{np.shape(grad)}"
            )
    for param, grad in zip(params, gradients):
        param -= lr * np.asarray(grad, dtype=np.float64)
