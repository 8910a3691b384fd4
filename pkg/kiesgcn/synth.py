"""
Planted-class synthetic corpora.

Every class owns a slice of each element vocabulary. An instance includes
each element of its class pool with probability ``p_in``; for every pool
slot it also picks up, with probability ``p_out``, an element from another
class's pool. Element relationships are chains inside each class pool plus
cross-class noise edges at rate ``p_out``. Text is uniform filler words and
carries no class signal. Everything is drawn from the ``synth`` random
stream, so a seed fixes the files byte for byte.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .artifacts import atomic_write_text, meta_header, write_csv
from .config import SynthConfig, substream
from .errors import ConfigError
from .hin import EventDocument, RelationRow, write_corpus

logger = logging.getLogger(__name__)

__all__ = [
    "SynthConfig",
    "SynthCorpus",
    "gen_synthetic_corpus",
    "write_synthetic_corpus",
]

CORPUS_FILE = "corpus.jsonl"
RELATIONS_FILE = "relations.tsv"
GOLD_FILE = "gold.csv"

# element kind -> id prefix
_KINDS = {
    "keywords": "kw",
    "entities": "ent",
    "topics": "topic",
    "users": "user",
}


@dataclass
class SynthCorpus:
    """Generated documents, relation rows and gold labels."""

    documents: List[EventDocument]
    relations: List[RelationRow]
    gold: List[Tuple[str, str]]


def _pools(config: SynthConfig, kind: str) -> List[List[str]]:
    total = getattr(config, kind)
    size = total // config.classes
    if size < 1:
        raise ConfigError(
            f"{total} {kind} cannot give each of {config.classes} classes a pool",
            key=kind,
        )
    prefix = _KINDS[kind]
    return [
        [f"{prefix}{c * size + n:04d}" for n in range(size)]
        for c in range(config.classes)
    ]


def _draw_elements(
    pools: List[List[str]], cls: int, config: SynthConfig, rng: np.random.Generator
) -> List[str]:
    own = pools[cls]
    chosen = [e for e in own if rng.random() < config.p_in]
    if not chosen:
        chosen.append(own[int(rng.integers(len(own)))])
    for _ in own:
        if rng.random() < config.p_out:
            chosen.append(_foreign(pools, cls, rng))
    seen: Dict[str, None] = {}
    for element in chosen:
        seen.setdefault(element, None)
    return list(seen)


def _foreign(pools: List[List[str]], cls: int, rng: np.random.Generator) -> str:
    other = int(rng.integers(len(pools) - 1))
    other = other if other < cls else other + 1
    pool = pools[other]
    return pool[int(rng.integers(len(pool)))]


def _chain(
    pools: List[List[str]],
    node_type: str,
    relation: str,
    config: SynthConfig,
    rng: np.random.Generator,
) -> List[RelationRow]:
    rows: List[RelationRow] = []
    for cls, pool in enumerate(pools):
        for left, right in zip(pool, pool[1:]):
            rows.append((node_type, left, relation, node_type, right))
            if rng.random() < config.p_out:
                rows.append(
                    (node_type, left, relation, node_type, _foreign(pools, cls, rng))
                )
    return rows


def _links(
    src_pools: List[List[str]],
    src_type: str,
    relation: str,
    dst_pools: List[List[str]],
    dst_type: str,
    config: SynthConfig,
    rng: np.random.Generator,
) -> List[RelationRow]:
    rows: List[RelationRow] = []
    for cls, (sources, targets) in enumerate(zip(src_pools, dst_pools)):
        for n, source in enumerate(sources):
            target = targets[n % len(targets)]
            rows.append((src_type, source, relation, dst_type, target))
            if rng.random() < config.p_out:
                rows.append(
                    (
                        src_type,
                        source,
                        relation,
                        dst_type,
                        _foreign(dst_pools, cls, rng),
                    )
                )
    return rows


def _hierarchy(
    pools: List[List[str]], node_type: str, relation: str
) -> List[RelationRow]:
    """Every non-root element of a class pool points at the pool's first one."""
    return [
        (node_type, element, relation, node_type, pool[0])
        for pool in pools
        for element in pool[1:]
    ]


def gen_synthetic_corpus(config: SynthConfig) -> SynthCorpus:
    """
    Generate a planted-class corpus.

    Args:
        config: Class count, vocabulary sizes, sharing probabilities, seed

    Returns:
        Documents (labels set), relation rows and ``(event_id, label)`` pairs

    Raises:
        ConfigError: A vocabulary too small to give every class a pool
    """
    rng = substream(config.seed, "synth")
    pools = {kind: _pools(config, kind) for kind in _KINDS}
    filler = [f"w{n:04d}" for n in range(config.filler_words)]

    documents: List[EventDocument] = []
    gold: List[Tuple[str, str]] = []
    for cls in range(config.classes):
        label = f"event{cls:03d}"
        for _ in range(config.instances_per_class):
            doc_id = f"ev{len(documents):05d}"
            keywords = _draw_elements(pools["keywords"], cls, config, rng)
            entities = _draw_elements(pools["entities"], cls, config, rng)
            topics = _draw_elements(pools["topics"], cls, config, rng)
            users = pools["users"]
            if rng.random() < config.p_out:
                user = _foreign(users, cls, rng)
            else:
                user = users[cls][int(rng.integers(len(users[cls])))]
            words = [
                filler[int(i)]
                for i in rng.integers(len(filler), size=config.words_per_text)
            ]
            text = " ".join(words)
            documents.append(
                EventDocument(doc_id, text, keywords, entities, topics, user, label)
            )
            gold.append((doc_id, label))

    relations: List[RelationRow] = []
    relations += _chain(pools["keywords"], "Keyword", "synonym", config, rng)
    relations += _chain(pools["entities"], "Entity", "related_to", config, rng)
    relations += _chain(pools["users"], "User", "friend_of", config, rng)
    relations += _links(
        pools["keywords"],
        "Keyword",
        "refers_to",
        pools["entities"],
        "Entity",
        config,
        rng,
    )
    relations += _links(
        pools["keywords"],
        "Keyword",
        "in_topic",
        pools["topics"],
        "Topic",
        config,
        rng,
    )
    relations += _hierarchy(pools["entities"], "Entity", "located_in")
    relations += _hierarchy(pools["topics"], "Topic", "subtopic_of")

    logger.info(
        "Generated %d documents in %d classes with %d relation rows",
        len(documents),
        config.classes,
        len(relations),
    )
    return SynthCorpus(documents, relations, gold)


def format_relations(rows: Sequence[RelationRow]) -> str:
    return "".join("\t".join(row) + "\n" for row in rows)


def write_synthetic_corpus(
    out_dir: Union[str, Path],
    corpus: SynthCorpus,
    meta: Optional[Dict[str, Any]] = None,
) -> Dict[str, Path]:
    """
    Write ``corpus.jsonl``, ``relations.tsv`` and ``gold.csv``.

    Returns:
        Mapping of file role to written path
    """
    out = Path(out_dir)
    header = meta_header(meta) if meta is not None else ""
    paths = {
        "corpus": write_corpus(out / CORPUS_FILE, corpus.documents),
        "relations": atomic_write_text(
            out / RELATIONS_FILE, header + format_relations(corpus.relations)
        ),
        "gold": write_csv(out / GOLD_FILE, ("event_id", "label"), corpus.gold, meta),
    }
    for role, path in paths.items():
        logger.info("Wrote %s to %s", role, path)
    return paths
