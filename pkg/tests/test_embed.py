"""
Tests for the event feature matrix.
"""

import unittest

import numpy as np
import pytest

from kiesgcn.embed import (
    FeatureMatrix,
    document_tokens,
    fit_features,
    load_embeddings,
    text_tokens,
    tfidf_vectors,
)
from kiesgcn.errors import EmbeddingError, ShapeError
from kiesgcn.hin import EventDocument


def _corpus(n: int = 100):
    """n documents, each with its own private vocabulary."""
    return [
        EventDocument(
            f"e{i}",
            text=" ".join(f"w{i}_{k}" for k in range(5)),
            keywords=[f"k{i}"],
        )
        for i in range(n)
    ]


class TestTokens(unittest.TestCase):
    def test_text_then_prefixed_elements(self):
        doc = EventDocument(
            "e1", "Quake hits", ["quake"], ["China"], ["disaster"], "alice"
        )
        self.assertEqual(
            document_tokens(doc),
            ["quake", "hits", "kw:quake", "ent:China", "topic:disaster"],
        )

    def test_keyword_and_word_stay_distinct(self):
        matrix = tfidf_vectors([EventDocument("e1", "quake", ["quake"])])
        self.assertEqual(matrix.shape, (1, 2))

    def test_empty_vocabulary(self):
        matrix = tfidf_vectors([EventDocument("e1"), EventDocument("e2")])
        self.assertEqual(matrix.shape, (2, 0))

    def test_text_only_vectors_ignore_elements(self):
        corpus = [
            EventDocument("e1", "rain", ["quake"], ["China"]),
            EventDocument("e2", "rain", ["flood"], ["Peru"]),
        ]
        self.assertEqual(text_tokens(corpus[0]), ["rain"])
        matrix = tfidf_vectors(corpus, elements=False)
        self.assertEqual(matrix.shape, (2, 1))
        np.testing.assert_allclose(matrix.toarray(), [[1.0], [1.0]])
        self.assertEqual(tfidf_vectors(corpus).shape, (2, 5))


class TestFitFeatures(unittest.TestCase):
    def test_shape_ids_and_norms(self):
        features = fit_features(_corpus(10), d=32, seed=0)
        self.assertEqual(features.shape, (10, 32))
        self.assertEqual(features.ids[0], "e0")
        np.testing.assert_allclose(
            np.linalg.norm(features.values, axis=1), np.ones(10), atol=1e-12
        )

    def test_deterministic_for_a_seed(self):
        first = fit_features(_corpus(10), d=16, seed=5).values
        second = fit_features(_corpus(10), d=16, seed=5).values
        np.testing.assert_array_equal(first, second)

    def test_seed_changes_projection(self):
        first = fit_features(_corpus(10), d=16, seed=0).values
        second = fit_features(_corpus(10), d=16, seed=1).values
        self.assertFalse(np.allclose(first, second))

    def test_duplicate_documents_give_identical_rows(self):
        corpus = _corpus(5)
        corpus.append(EventDocument("copy", corpus[2].text, corpus[2].keywords))
        values = fit_features(corpus, d=16, seed=0).values
        np.testing.assert_allclose(values[2], values[5], rtol=0, atol=1e-12)

    def test_disjoint_vocabularies_are_nearly_orthogonal(self):
        values = fit_features(_corpus(100), d=128, seed=0).values
        self.assertLess(abs(float(values[0] @ values[1])), 0.5)

    def test_document_without_tokens_gets_zero_row(self):
        corpus = _corpus(3) + [EventDocument("blank")]
        values = fit_features(corpus, d=8, seed=0).values
        np.testing.assert_array_equal(values[3], np.zeros(8))

    def test_corpus_without_tokens(self):
        features = fit_features([EventDocument("e1")], d=4)
        np.testing.assert_array_equal(features.values, np.zeros((1, 4)))

    def test_empty_corpus(self):
        with self.assertRaises(ShapeError):
            fit_features([], d=4)

    def test_dimension_must_be_positive(self):
        with self.assertRaises(ShapeError):
            fit_features(_corpus(2), d=0)


class TestFeatureMatrix(unittest.TestCase):
    def test_row_count_must_match_ids(self):
        with self.assertRaises(ShapeError):
            FeatureMatrix(("a", "b"), np.zeros((3, 2)))

    def test_non_finite_rejected(self):
        with self.assertRaises(EmbeddingError):
            FeatureMatrix(("a",), np.array([[np.nan]]))


def test_load_embeddings_orders_rows(tmp_path):
    path = tmp_path / "emb.txt"
    path.write_text("b 3 4\na 1 2\n\n")
    features = load_embeddings(path, ["a", "b"])
    assert features.ids == ("a", "b")
    np.testing.assert_array_equal(features.values, [[1, 2], [3, 4]])


@pytest.mark.parametrize(
    "content,expected_ids,message",
    [
        ("a 1 2\nb 3\n", ["a", "b"], "expected 2 values"),
        ("a 1 x\n", ["a"], "could not convert"),
        ("a 1 inf\n", ["a"], "non-finite"),
        ("a 1\na 2\n", ["a"], "duplicate id a"),
        ("a 1\n", ["a", "b"], "no embedding for id b"),
        ("a 1\nc 2\n", ["a"], "unknown id c"),
        ("a\n", ["a"], "no values"),
    ],
)
def test_load_embeddings_errors(tmp_path, content, expected_ids, message):
    path = tmp_path / "emb.txt"
    path.write_text(content)
    with pytest.raises(EmbeddingError, match=message):
        load_embeddings(path, expected_ids)
