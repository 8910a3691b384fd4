"""
Event-instance feature matrix X.

``fit_features`` builds TF-IDF vectors over text tokens plus type-prefixed
element tokens and projects them to ``d`` dimensions with a seeded Gaussian
random projection; rows are L2-normalised. ``load_embeddings`` plugs in
externally trained document vectors instead.
"""

import logging
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from sklearn.exceptions import DataDimensionalityWarning
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.preprocessing import normalize
from sklearn.random_projection import GaussianRandomProjection

from .errors import EmbeddingError, ShapeError
from .hin import EventDocument

logger = logging.getLogger(__name__)

DEFAULT_DIMENSION = 128

ELEMENT_PREFIXES = (("keywords", "kw"), ("entities", "ent"), ("topics", "topic"))


@dataclass
class FeatureMatrix:
    """N x d features; row order matches event node indices."""

    ids: Tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        self.ids = tuple(self.ids)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != len(self.ids):
            raise ShapeError(
                f"Feature matrix of shape {self.values.shape} for {len(self.ids)} ids"
            )
        if not np.all(np.isfinite(self.values)):
            raise EmbeddingError("Feature matrix contains non-finite values")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]


def text_tokens(doc: EventDocument) -> List[str]:
    return doc.text.lower().split()


def document_tokens(doc: EventDocument) -> List[str]:
    """Lower-cased whitespace text tokens followed by prefixed element tokens."""
    tokens = text_tokens(doc)
    for attr, prefix in ELEMENT_PREFIXES:
        tokens.extend(f"{prefix}:{element}" for element in getattr(doc, attr))
    return tokens


def tfidf_vectors(
    corpus: Sequence[EventDocument], elements: bool = True
) -> sp.csr_matrix:
    """
    Sparse TF-IDF matrix of the corpus (rows in corpus order).

    With ``elements=False`` only the free text is vectorised, which is what
    the nearest-neighbour reference detector compares.
    A corpus with no tokens at all yields an N x 0 matrix.
    """
    analyzer = document_tokens if elements else text_tokens
    vectorizer = TfidfVectorizer(analyzer=analyzer, norm="l2")
    try:
        matrix = vectorizer.fit_transform(list(corpus))
    except ValueError:
        # empty vocabulary
        return sp.csr_matrix((len(corpus), 0), dtype=np.float64)
    return sp.csr_matrix(matrix, dtype=np.float64)


def fit_features(
    corpus: Sequence[EventDocument], d: int = DEFAULT_DIMENSION, seed: int = 0
) -> FeatureMatrix:
    """
    Deterministic d-dimensional features for every document.

    Args:
        corpus: Non-empty list of documents
        d: Output dimension
        seed: Seed of the Gaussian projection

    Returns:
        Row-normalised features; documents without tokens get a zero row

    Raises:
        ShapeError: Empty corpus or d < 1
    """
    if not corpus:
        raise ShapeError("Cannot fit features on an empty corpus")
    if d < 1:
        raise ShapeError(f"Feature dimension must be >= 1, got {d}")
    ids = tuple(doc.id for doc in corpus)
    tfidf = tfidf_vectors(corpus)
    if tfidf.shape[1] == 0:
        logger.warning("Corpus has no tokens; features are all zero")
        return FeatureMatrix(ids, np.zeros((len(corpus), d)))

    projection = GaussianRandomProjection(n_components=d, random_state=seed)
    with warnings.catch_warnings():
        # d may exceed the vocabulary size on small corpora
        warnings.simplefilter("ignore", DataDimensionalityWarning)
        projected = projection.fit_transform(tfidf)
    if sp.issparse(projected):
        projected = projected.toarray()
    values = normalize(np.asarray(projected, dtype=np.float64), norm="l2", axis=1)
    logger.info(
        "Fitted %dx%d features from a %d-term vocabulary",
        values.shape[0],
        d,
        tfidf.shape[1],
    )
    return FeatureMatrix(ids, values)


def load_embeddings(
    path: Union[str, Path], expected_ids: Sequence[str]
) -> FeatureMatrix:
    """
    Read ``id v1 ... vd`` lines and order rows by ``expected_ids``.

    Raises:
        EmbeddingError: Unparseable or non-finite values, ragged rows,
            duplicate, missing or extra ids
    """
    rows = {}
    dimension = None
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            node_id, tokens = parts[0], parts[1:]
            try:
                vector = [float(t) for t in tokens]
            except ValueError as e:
                raise EmbeddingError(
                    f"{path}:{number}: {e}", source=str(path), line=number
                ) from None
            if not all(math.isfinite(v) for v in vector):
                raise EmbeddingError(
                    f"{path}:{number}: non-finite value", source=str(path), line=number
                )
            if dimension is None:
                dimension = len(vector)
                if dimension == 0:
                    raise EmbeddingError(
                        f"{path}:{number}: row has no values", line=number
                    )
            elif len(vector) != dimension:
                raise EmbeddingError(
                    f"{path}:{number}: expected {dimension} values, got {len(vector)}",
                    source=str(path),
                    line=number,
                )
            if node_id in rows:
                raise EmbeddingError(
                    f"{path}:{number}: duplicate id {node_id}", line=number, id=node_id
                )
            rows[node_id] = vector

    for node_id in expected_ids:
        if node_id not in rows:
            raise EmbeddingError(
                f"{path}: no embedding for id {node_id}", source=str(path), id=node_id
            )
    expected = set(expected_ids)
    for node_id in rows:
        if node_id not in expected:
            raise EmbeddingError(
                f"{path}: embedding for unknown id {node_id}",
                source=str(path),
                id=node_id,
            )
    values = np.array([rows[i] for i in expected_ids], dtype=np.float64)
    logger.info("Loaded %dx%d embeddings from %s", len(expected_ids), dimension, path)
    return FeatureMatrix(tuple(expected_ids), values.reshape(len(expected_ids), -1))
