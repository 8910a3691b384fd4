"""
Pytest configuration and shared fixtures for kiesgcn tests.

This module provides:
- Path configuration (project root in sys.path)
- Pytest markers configuration
- Shared fixtures: the two-event graph and a small planted-class world
- Common test utilities
"""

import sys
from pathlib import Path
from typing import Any, List, Optional, Tuple

import pytest
from deepdiff import DeepDiff

# Add the project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from kiesgcn.config import SynthConfig, TrainConfig  # noqa: E402
from kiesgcn.embed import fit_features  # noqa: E402
from kiesgcn.hin import EventDocument, ingest_corpus, load_relations  # noqa: E402
from kiesgcn.metapath import (  # noqa: E402
    MetaPath,
    MetaPathCatalog,
    compute_dice_stack,
    enumerate_metapaths,
)
from kiesgcn.synth import gen_synthetic_corpus  # noqa: E402

# =============================================================================
# Path Constants
# =============================================================================

TESTS_DIR = Path(__file__).parent
TEST_CASES_DIR = TESTS_DIR / "test_cases"

IKI = "EventInstance-contains-Keyword-contains^-1-EventInstance"
INI = "EventInstance-mentions-Entity-mentions^-1-EventInstance"
IUI = "EventInstance-posted_by-User-posted_by^-1-EventInstance"


# =============================================================================
# Pytest Configuration
# =============================================================================


def pytest_configure(config):
    """Configure pytest markers."""
    config.addinivalue_line(
        "markers", "slow: marks tests as slow (deselected unless '-m slow' is given)"
    )
    config.addinivalue_line("markers", "integration: marks tests that drive the CLI")


# =============================================================================
# Shared Utilities
# =============================================================================


def compare_documents(
    actual: Any, expected: Any, test_id: str = "unknown"
) -> Tuple[bool, Optional[str]]:
    """
    Compare two JSON-like documents with detailed error reporting.

    Floats are compared to 12 significant digits.

    Returns:
        Tuple of (is_match, error_message). error_message is None if match.
    """
    diff = DeepDiff(expected, actual, significant_digits=12)

    if not diff:
        return True, None

    msg_parts = [f"\n\nDocument mismatch for '{test_id}':"]

    if "values_changed" in diff:
        msg_parts.append("\nValues changed:")
        for path, change in diff["values_changed"].items():
            msg_parts.append(
                f"  {path}: {change['old_value']} -> {change['new_value']}"
            )

    if "dictionary_item_added" in diff:
        msg_parts.append("\nExtra items in actual:")
        for item in diff["dictionary_item_added"]:
            msg_parts.append(f"  {item}")

    if "dictionary_item_removed" in diff:
        msg_parts.append("\nMissing items from actual:")
        for item in diff["dictionary_item_removed"]:
            msg_parts.append(f"  {item}")

    if "type_changes" in diff:
        msg_parts.append("\nType changes:")
        for path, change in diff["type_changes"].items():
            old = type(change["old_value"]).__name__
            new = type(change["new_value"]).__name__
            msg_parts.append(f"  {path}: {old} -> {new}")

    msg_parts.append(f"\nRaw diff: {diff}")
    return False, "\n".join(msg_parts)


def tiny_documents() -> List[EventDocument]:
    """e1 {k1, k2, n1, u1} and e2 {k2, n1, u1}."""
    return [
        EventDocument("e1", "", ["k1", "k2"], ["n1"], [], "u1", "a"),
        EventDocument("e2", "", ["k2"], ["n1"], [], "u1", "a"),
    ]


SMALL_SYNTH = SynthConfig(
    classes=3,
    instances_per_class=4,
    keywords=18,
    entities=9,
    topics=6,
    users=6,
    filler_words=30,
    words_per_text=4,
    p_in=0.7,
    p_out=0.05,
    seed=3,
)

SMALL_TRAIN = TrainConfig(
    anchors=16,
    batch_size=8,
    batches_per_epoch=2,
    epochs=3,
    hidden=8,
    out_dim=4,
    patience=None,
    monitor_pairs=8,
)


# =============================================================================
# Fixtures
# =============================================================================


@pytest.fixture
def tiny_hin():
    return ingest_corpus(tiny_documents())


@pytest.fixture
def tiny_catalog(tiny_hin):
    """IKI, INI and IUI in that order."""
    signatures = (IKI, INI, IUI)
    return MetaPathCatalog([MetaPath.parse(s, tiny_hin.schema) for s in signatures])


@pytest.fixture
def tiny_stack(tiny_hin, tiny_catalog):
    return compute_dice_stack(tiny_hin, tiny_catalog)


@pytest.fixture(scope="session")
def small_world():
    """Twelve planted events in three classes, with stack, features and labels."""
    corpus = gen_synthetic_corpus(SMALL_SYNTH)
    hin = ingest_corpus(corpus.documents)
    load_relations(hin, corpus.relations)
    catalog = enumerate_metapaths(hin.schema, max_hops=1)
    return {
        "documents": corpus.documents,
        "hin": hin,
        "catalog": catalog,
        "stack": compute_dice_stack(hin, catalog),
        "features": fit_features(corpus.documents, d=16, seed=0).values,
        "labels": [doc.label for doc in corpus.documents],
    }


@pytest.fixture
def small_train_config():
    return SMALL_TRAIN
