"""
Meta-paths over the event HIN and the KIES similarity built on them.

A meta-path is a sequence of relation steps starting and ending at
EventInstance. Its CouP matrix counts path instances between every pair of
events and is the chain product of the typed adjacency matrices along the
path. Dice normalisation makes counts comparable across paths, and KIES is
the weighted sum of the per-path Dice matrices.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .artifacts import atomic_write_json, atomic_write_text
from .errors import ArtifactError, ConfigError, SchemaError, ShapeError, WeightsError
from .hin import EVENT, Hin, MetaSchema, NodeType, RelationType
from .schemas import WEIGHTS_SCHEMA, validate_document

logger = logging.getLogger(__name__)

INVERSE_MARK = "^-1"

WEIGHTS_FORMAT = "kiesgcn-weights"
WEIGHTS_VERSION = 1

NORMALIZATION_TOLERANCE = 1e-9

ABBREVIATIONS = {
    "EventInstance": "I",
    "Keyword": "K",
    "Entity": "N",
    "Topic": "T",
    "User": "U",
}


@dataclass(frozen=True)
class Step:
    """One traversal of a relation, forward or inverse."""

    relation: RelationType
    inverse: bool = False

    def __post_init__(self) -> None:
        if self.inverse and self.relation.symmetric and self.relation.is_homogeneous:
            # a symmetric same-type relation is its own inverse
            object.__setattr__(self, "inverse", False)

    @property
    def source(self) -> NodeType:
        return self.relation.dst if self.inverse else self.relation.src

    @property
    def target(self) -> NodeType:
        return self.relation.src if self.inverse else self.relation.dst

    @property
    def token(self) -> str:
        return self.relation.name + (INVERSE_MARK if self.inverse else "")

    def inverted(self) -> "Step":
        return Step(self.relation, not self.inverse)


@dataclass(frozen=True)
class MetaPath:
    """
    A typed path template ``A1 -R1-> A2 -R2-> ... -RL-> A(L+1)``.

    The signature spells out node types and relation tokens, e.g.
    ``EventInstance-contains-Keyword-contains^-1-EventInstance``.
    """

    steps: Tuple[Step, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise SchemaError("A meta-path needs at least one relation")
        for left, right in zip(self.steps, self.steps[1:]):
            if left.target != right.source:
                raise SchemaError(
                    f"Meta-path steps do not chain: {left.token} ends at "
                    f"{left.target}, {right.token} starts at {right.source}"
                )

    @property
    def node_types(self) -> List[NodeType]:
        return [self.steps[0].source] + [s.target for s in self.steps]

    @property
    def relation_types(self) -> List[RelationType]:
        return [s.relation for s in self.steps]

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def signature(self) -> str:
        parts = [self.steps[0].source.name]
        for step in self.steps:
            parts.extend([step.token, step.target.name])
        return "-".join(parts)

    @property
    def abbrev(self) -> str:
        return "".join(
            ABBREVIATIONS.get(t.name, t.name[:1].upper()) for t in self.node_types
        )

    @property
    def is_palindromic(self) -> bool:
        return self.steps == tuple(s.inverted() for s in reversed(self.steps))

    def inverse(self) -> "MetaPath":
        return MetaPath(tuple(s.inverted() for s in reversed(self.steps)))

    @classmethod
    def parse(cls, signature: str, schema: MetaSchema) -> "MetaPath":
        """
        Parse a signature against a schema.

        A forward token written against a symmetric relation's declared
        direction is read as its inverse.

        Raises:
            SchemaError: Unknown types/relations or a malformed signature
        """
        placeholder = "\x00"
        tokens = [
            t.replace(placeholder, INVERSE_MARK)
            for t in signature.strip().replace(INVERSE_MARK, placeholder).split("-")
        ]
        if len(tokens) < 3 or len(tokens) % 2 == 0:
            raise SchemaError(f"Malformed meta-path signature: {signature!r}")
        steps = []
        for position in range(1, len(tokens), 2):
            left = schema.node_type(tokens[position - 1]).name
            right = schema.node_type(tokens[position + 1]).name
            token = tokens[position]
            inverse = token.endswith(INVERSE_MARK)
            name = token[: -len(INVERSE_MARK)] if inverse else token
            steps.append(cls._resolve_step(schema, name, left, right, inverse))
        return cls(tuple(steps))

    @staticmethod
    def _resolve_step(
        schema: MetaSchema, name: str, left: str, right: str, inverse: bool
    ) -> Step:
        src, dst = (right, left) if inverse else (left, right)
        try:
            return Step(schema.relation(name, src, dst), inverse)
        except SchemaError:
            relation = schema.relation(name, dst, src)
            if not relation.symmetric:
                raise
            return Step(relation, not inverse)

    def __str__(self) -> str:
        return self.signature


class MetaPathCatalog:
    """Ordered collection of meta-paths; weight vectors align by position."""

    def __init__(self, paths: Sequence[MetaPath]):
        self.paths: Tuple[MetaPath, ...] = tuple(paths)
        positions: Dict[str, int] = {}
        for index, path in enumerate(self.paths):
            if path.signature in positions:
                raise SchemaError(f"Duplicate meta-path in catalog: {path.signature}")
            positions[path.signature] = index
        self._positions = positions

    @property
    def signatures(self) -> Tuple[str, ...]:
        return tuple(p.signature for p in self.paths)

    def index(self, signature: str) -> int:
        try:
            return self._positions[signature]
        except KeyError:
            raise WeightsError(
                f"Meta-path not in catalog: {signature}", signature=signature
            ) from None

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self) -> Iterator[MetaPath]:
        return iter(self.paths)

    def __getitem__(self, index: int) -> MetaPath:
        return self.paths[index]

    def __repr__(self) -> str:
        return f"MetaPathCatalog({len(self.paths)} paths)"


def _steps_from(schema: MetaSchema, node_type: NodeType) -> List[Step]:
    steps = []
    for relation in schema.relation_types:
        if relation.src == node_type:
            steps.append(Step(relation, False))
        if relation.dst == node_type and not (
            relation.symmetric and relation.is_homogeneous
        ):
            steps.append(Step(relation, True))
    return steps


def check_symmetric_event_path(path: MetaPath) -> None:
    """
    Require ``path`` to be an event-to-event ``Q . Q^-1``.

    Only such paths give Dice values in ``[0, 1]``.

    Raises:
        SchemaError: The path is not bounded by EventInstance or is not
            its own inverse
    """
    if path.node_types[0] != EVENT or path.node_types[-1] != EVENT:
        raise SchemaError(
            f"Meta-path {path.signature} must start and end at {EVENT.name}"
        )
    if path.length % 2 or not path.is_palindromic:
        raise SchemaError(f"Meta-path {path.signature} is not of the form Q.Q^-1")


def enumerate_metapaths(schema: MetaSchema, max_hops: int = 2) -> MetaPathCatalog:
    """
    Enumerate every palindromic event-to-event meta-path ``Q . Q^-1``.

    The half-path ``Q`` starts at EventInstance, has between 1 and
    ``max_hops`` steps, and never returns to EventInstance.

    Args:
        schema: Meta-schema to enumerate over
        max_hops: Maximum length of the half-path

    Returns:
        Catalog sorted lexicographically by signature
    """
    if max_hops < 1:
        raise ConfigError(f"max_hops must be >= 1, got {max_hops}")
    start = schema.node_type(EVENT)
    halves: List[Tuple[Step, ...]] = []
    frontier: List[Tuple[Step, ...]] = [()]
    for _ in range(max_hops):
        extended = []
        for prefix in frontier:
            current = prefix[-1].target if prefix else start
            for step in _steps_from(schema, current):
                if step.target == start:
                    continue
                extended.append(prefix + (step,))
        halves.extend(extended)
        frontier = extended

    paths = {}
    for half in halves:
        path = MetaPath(half + tuple(s.inverted() for s in reversed(half)))
        paths[path.signature] = path
    catalog = MetaPathCatalog([paths[s] for s in sorted(paths)])
    logger.info("Enumerated %d meta-paths (max_hops=%d)", len(catalog), max_hops)
    return catalog


# ----------------------------------------------------------------------
# CouP and Dice
# ----------------------------------------------------------------------


class CoupEngine:
    """
    Computes CouP count matrices with a cache of shared path prefixes.

    Products associate left to right, so paths sharing a prefix reuse its
    partial product. The cache is filled by the calling thread only.
    """

    def __init__(self, hin: Hin):
        self.hin = hin
        self._prefixes: Dict[Tuple[Step, ...], sp.csr_matrix] = {}

    def _step_matrix(self, step: Step) -> sp.csr_matrix:
        return self.hin.adjacency(step.relation, inverse=step.inverse)

    def _check(self, path: MetaPath) -> None:
        for relation in path.relation_types:
            if not self.hin.schema.has_relation(relation):
                raise SchemaError(
                    f"Meta-path {path.signature} uses relation {relation.key} "
                    "absent from the graph schema",
                    relation=relation.name,
                )

    def matrix(self, path: MetaPath, associate: str = "left") -> sp.csr_matrix:
        """
        CouP matrix of ``path``.

        Args:
            path: Meta-path whose relations exist in the graph schema
            associate: ``"left"`` (cached) or ``"right"`` association order

        Returns:
            Integer CSR matrix of path-instance counts
        """
        self._check(path)
        if associate == "left":
            product = self._left_product(path.steps)
        elif associate == "right":
            product = self._step_matrix(path.steps[-1])
            for step in reversed(path.steps[:-1]):
                product = self._step_matrix(step) @ product
        else:
            raise ValueError(f"associate must be 'left' or 'right', got {associate!r}")
        result = sp.csr_matrix(product, dtype=np.int64, copy=True)
        result.eliminate_zeros()
        result.sort_indices()
        return result

    def _left_product(self, steps: Tuple[Step, ...]) -> sp.csr_matrix:
        depth = len(steps)
        while depth > 0 and steps[:depth] not in self._prefixes:
            depth -= 1
        product = self._prefixes[steps[:depth]] if depth else None
        for k in range(depth, len(steps)):
            factor = self._step_matrix(steps[k])
            product = factor if product is None else (product @ factor).tocsr()
            self._prefixes[steps[: k + 1]] = product
        return product

    def clear(self) -> None:
        self._prefixes.clear()


def coup_matrix(
    hin: Hin,
    path: MetaPath,
    engine: Optional[CoupEngine] = None,
    associate: str = "left",
) -> sp.csr_matrix:
    """Count matrix M_P of meta-path instances between events."""
    return (engine or CoupEngine(hin)).matrix(path, associate=associate)


def dice_matrix(counts: sp.spmatrix) -> sp.csr_matrix:
    """
    Dice-normalise a square count matrix on its nonzero support.

    ``S[i, j] = 2 M[i, j] / (M[i, i] + M[j, j])``; 0 where the denominator
    is 0.

    Raises:
        ShapeError: Non-square input
    """
    rows, cols = counts.shape
    if rows != cols:
        raise ShapeError(
            f"Dice normalisation needs a square matrix, got {counts.shape}"
        )
    coo = sp.coo_matrix(counts)
    diagonal = np.asarray(counts.diagonal(), dtype=np.float64)
    denominator = diagonal[coo.row] + diagonal[coo.col]
    values = np.zeros(coo.nnz, dtype=np.float64)
    mask = denominator > 0
    values[mask] = 2.0 * coo.data[mask].astype(np.float64) / denominator[mask]
    result = sp.csr_matrix((values, (coo.row, coo.col)), shape=counts.shape)
    result.eliminate_zeros()
    result.sort_indices()
    return result


def compute_dice_stack(
    hin: Hin, catalog: MetaPathCatalog, engine: Optional[CoupEngine] = None
) -> List[sp.csr_matrix]:
    """Dice matrices S_m for every catalog path, in catalog order."""
    engine = engine or CoupEngine(hin)
    stack = []
    for path in catalog:
        counts = engine.matrix(path)
        dice = dice_matrix(counts)
        logger.debug("%s: CouP nnz=%d, Dice nnz=%d", path.abbrev, counts.nnz, dice.nnz)
        stack.append(dice)
    return stack


# ----------------------------------------------------------------------
# Weights and KIES
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class KiesWeights:
    """Non-negative meta-path weights, one per catalog signature."""

    values: Tuple[float, ...]
    signatures: Tuple[str, ...]
    normalized: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "signatures", tuple(self.signatures))
        if len(self.values) != len(self.signatures):
            raise WeightsError(
                f"{len(self.values)} weights for {len(self.signatures)} meta-paths"
            )
        for signature, value in zip(self.signatures, self.values):
            if not math.isfinite(value) or value < 0:
                raise WeightsError(
                    f"Weight of {signature} must be finite and >= 0, got {value}",
                    signature=signature,
                )
        if self.normalized:
            total = math.fsum(self.values)
            if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
                raise WeightsError(f"Normalized weights sum to {total}, not 1")

    @classmethod
    def uniform(cls, signatures: Sequence[str]) -> "KiesWeights":
        count = len(signatures)
        return cls(tuple([1.0 / count] * count), tuple(signatures), True)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def normalize(self) -> "KiesWeights":
        """Scale the weights onto the simplex."""
        total = math.fsum(self.values)
        if total <= 0:
            raise WeightsError("Cannot normalize all-zero weights")
        return KiesWeights(
            tuple(v / total for v in self.values), self.signatures, True
        )

    def align(self, signatures: Sequence[str]) -> "KiesWeights":
        """
        Reorder the weights to match a catalog's signatures.

        Raises:
            WeightsError: If the signature sets differ; names the first
                mismatched signature
        """
        signatures = tuple(signatures)
        if signatures == self.signatures:
            return self
        mine = dict(zip(self.signatures, self.values))
        for signature in signatures:
            if signature not in mine:
                raise WeightsError(
                    f"Weights lack catalog meta-path {signature}",
                    signature=signature,
                )
        for signature in self.signatures:
            if signature not in set(signatures):
                raise WeightsError(
                    f"Weights name meta-path {signature} absent from the catalog",
                    signature=signature,
                )
        return KiesWeights(
            tuple(mine[s] for s in signatures), signatures, self.normalized
        )

    def to_dict(self, meta: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        document: Dict[str, Any] = {
            "format": WEIGHTS_FORMAT,
            "version": WEIGHTS_VERSION,
            "normalized": self.normalized,
            "signatures": list(self.signatures),
            "weights": dict(zip(self.signatures, self.values)),
        }
        if meta is not None:
            document["meta"] = meta
        return document

    @classmethod
    def from_dict(
        cls, data: Dict[str, Any], source: str = "<weights>"
    ) -> "KiesWeights":
        validate_document(data, WEIGHTS_SCHEMA, source, error_cls=WeightsError)
        signatures = data["signatures"]
        weights = data["weights"]
        if set(signatures) != set(weights):
            raise WeightsError(f"{source}: signature list and weight map disagree")
        return cls(
            tuple(weights[s] for s in signatures), tuple(signatures), data["normalized"]
        )


WeightsLike = Union[KiesWeights, Sequence[float], np.ndarray]


def _weight_array(weights: WeightsLike, count: int) -> np.ndarray:
    values = (
        weights.as_array()
        if isinstance(weights, KiesWeights)
        else np.asarray(weights, dtype=np.float64)
    )
    if values.shape != (count,):
        raise WeightsError(
            f"{values.shape[0] if values.ndim else 0} weights for {count} meta-paths"
        )
    return values


def kies(
    i: int, j: int, dice_stack: Sequence[sp.spmatrix], weights: WeightsLike
) -> float:
    """
    KIES similarity of events ``i`` and ``j``: ``sum_m w_m S_m[i, j]``.

    The sum runs in catalog order, so ``kies(i, j) == kies(j, i)`` exactly
    for symmetric Dice matrices.
    """
    values = _weight_array(weights, len(dice_stack))
    total = 0.0
    for weight, dice in zip(values, dice_stack):
        total += float(weight) * float(dice[i, j])
    return total


def _check_stack(dice_stack: Sequence[sp.spmatrix]) -> int:
    if not dice_stack:
        raise ShapeError("Empty Dice stack")
    size = dice_stack[0].shape[0]
    for dice in dice_stack:
        if dice.shape != (size, size):
            raise ShapeError(
                f"Dice matrices must all be {size}x{size}, got {dice.shape}"
            )
    return size


def weighted_sum(
    dice_stack: Sequence[sp.spmatrix], weights: WeightsLike
) -> sp.csr_matrix:
    """``sum_m w_m S_m`` including the diagonal, accumulated in catalog order."""
    size = _check_stack(dice_stack)
    values = _weight_array(weights, len(dice_stack))
    total = sp.csr_matrix((size, size), dtype=np.float64)
    for weight, dice in zip(values, dice_stack):
        total = total + float(weight) * dice
    return sp.csr_matrix(total)


def off_diagonal(matrix: sp.spmatrix) -> sp.csr_matrix:
    """Copy of ``matrix`` with its diagonal removed."""
    result = sp.csr_matrix(matrix, dtype=np.float64, copy=True)
    result.setdiag(0)
    result.eliminate_zeros()
    result.sort_indices()
    return result


def build_event_adjacency(
    dice_stack: Sequence[sp.spmatrix], weights: WeightsLike
) -> sp.csr_matrix:
    """
    Weighted event adjacency ``A = sum_m w_m S_m`` with a zero diagonal.

    Self-loops are added later by the GCN normalisation.
    """
    return off_diagonal(weighted_sum(dice_stack, weights))


# ----------------------------------------------------------------------
# Files
# ----------------------------------------------------------------------


def parse_catalog(
    text: str, schema: MetaSchema, source: str = "<catalog>"
) -> MetaPathCatalog:
    """
    One signature per line; blank lines and ``#`` comments are ignored.

    Every path must be an event-to-event ``Q . Q^-1``.
    """
    paths = []
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            path = MetaPath.parse(stripped, schema)
            check_symmetric_event_path(path)
            paths.append(path)
        except SchemaError as e:
            raise ArtifactError(
                f"{source}:{number}: {e.message}", line=number
            ) from None
    return MetaPathCatalog(paths)


def read_catalog(path: Union[str, Path], schema: MetaSchema) -> MetaPathCatalog:
    return parse_catalog(Path(path).read_text(encoding="utf-8"), schema, str(path))


def format_catalog(catalog: MetaPathCatalog) -> str:
    return "".join(f"{signature}\n" for signature in catalog.signatures)


def write_catalog(path: Union[str, Path], catalog: MetaPathCatalog) -> Path:
    return atomic_write_text(path, format_catalog(catalog))


def catalog_hash(catalog: MetaPathCatalog) -> str:
    return hashlib.sha256(format_catalog(catalog).encode("utf-8")).hexdigest()


def read_weights(path: Union[str, Path]) -> KiesWeights:
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ArtifactError(
                f"{path}: invalid JSON: {e.msg}", source=str(path)
            ) from None
    return KiesWeights.from_dict(data, str(path))


def write_weights(
    path: Union[str, Path],
    weights: KiesWeights,
    meta: Optional[Dict[str, Any]] = None,
) -> Path:
    return atomic_write_json(path, weights.to_dict(meta))
