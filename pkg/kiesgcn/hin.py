"""
Typed heterogeneous information network (HIN) for social event modeling.

An event instance is a hyper-edge over its event-oriented elements
(keywords, entities, topics, the posting user). This module holds the
meta-schema that governs which node and relation types may appear, the
graph itself with per-type dense node indices, and ingestion of annotated
corpora (JSON lines) and pre-extracted element relationships (TSV).
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .artifacts import atomic_write_text
from .errors import ArtifactError, GraphError, SchemaError
from .schemas import EVENT_DOCUMENT_SCHEMA, GRAPH_SNAPSHOT_SCHEMA, validate_document

logger = logging.getLogger(__name__)

SNAPSHOT_FORMAT = "kiesgcn-hin"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True, order=True)
class NodeType:
    """A node type of the meta-schema (e.g. ``Keyword``)."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class RelationType:
    """
    A relation type between two node types.

    Every relation can be traversed in both directions; traversing it from
    ``dst`` to ``src`` is the inverse relation. ``symmetric`` relations
    between a type and itself store each undirected edge once.
    """

    name: str
    src: NodeType
    dst: NodeType
    symmetric: bool = False

    @property
    def key(self) -> Tuple[str, str, str]:
        return (self.name, self.src.name, self.dst.name)

    @property
    def is_homogeneous(self) -> bool:
        return self.src == self.dst


EVENT = NodeType("EventInstance")
KEYWORD = NodeType("Keyword")
ENTITY = NodeType("Entity")
TOPIC = NodeType("Topic")
USER = NodeType("User")

CANONICAL_NODE_TYPES = (EVENT, KEYWORD, ENTITY, TOPIC, USER)

CONTAINS = RelationType("contains", EVENT, KEYWORD, True)
MENTIONS = RelationType("mentions", EVENT, ENTITY, True)
ABOUT = RelationType("about", EVENT, TOPIC, True)
POSTED_BY = RelationType("posted_by", EVENT, USER, True)

INCIDENCE_RELATIONS = (CONTAINS, MENTIONS, ABOUT, POSTED_BY)

ELEMENT_RELATIONS = (
    RelationType("synonym", KEYWORD, KEYWORD, True),
    RelationType("related_to", ENTITY, ENTITY, True),
    RelationType("located_in", ENTITY, ENTITY, False),
    RelationType("subtopic_of", TOPIC, TOPIC, False),
    RelationType("friend_of", USER, USER, True),
    RelationType("refers_to", KEYWORD, ENTITY, True),
    RelationType("in_topic", KEYWORD, TOPIC, True),
)


class MetaSchema:
    """
    The type-level graph of a HIN: declared node types and relation types.

    Node type names are unique, ``(name, src, dst)`` is unique per relation,
    and every relation endpoint must be a declared node type.
    """

    def __init__(
        self,
        node_types: Iterable[NodeType],
        relation_types: Iterable[RelationType],
    ):
        self.node_types: Tuple[NodeType, ...] = tuple(node_types)
        self.relation_types: Tuple[RelationType, ...] = tuple(relation_types)

        self._types: Dict[str, NodeType] = {}
        for node_type in self.node_types:
            if node_type.name in self._types:
                raise SchemaError(f"Duplicate node type: {node_type.name}")
            self._types[node_type.name] = node_type

        self._relations: Dict[Tuple[str, str, str], RelationType] = {}
        for relation in self.relation_types:
            for endpoint in (relation.src, relation.dst):
                if endpoint.name not in self._types:
                    raise SchemaError(
                        f"Relation {relation.name} references undeclared node "
                        f"type {endpoint.name}",
                        relation=relation.name,
                    )
            if relation.key in self._relations:
                raise SchemaError(f"Duplicate relation type: {relation.key}")
            self._relations[relation.key] = relation

    def node_type(self, node_type: Union[NodeType, str]) -> NodeType:
        """Resolve a node type (or its name) against the schema."""
        name = node_type.name if isinstance(node_type, NodeType) else node_type
        try:
            return self._types[name]
        except KeyError:
            raise SchemaError(f"Unknown node type: {name}", node_type=name) from None

    def has_relation(self, relation: RelationType) -> bool:
        return self._relations.get(relation.key) == relation

    def relation(self, name: str, src: str, dst: str) -> RelationType:
        """Look up a relation by name and endpoint type names."""
        try:
            return self._relations[(name, src, dst)]
        except KeyError:
            raise SchemaError(
                f"Unknown relation: {src}-{name}-{dst}", relation=name
            ) from None

    def resolve(self, name: str, src: str, dst: str) -> Tuple[RelationType, bool]:
        """
        Find the relation a ``src -name-> dst`` row refers to.

        Args:
            name: Relation name
            src: Source node type name as written in the row
            dst: Destination node type name as written in the row

        Returns:
            Tuple of (relation, swapped). ``swapped`` is True when the row is
            written in the reverse direction of a symmetric relation.

        Raises:
            SchemaError: If no declared relation matches
        """
        relation = self._relations.get((name, src, dst))
        if relation is not None:
            return relation, False
        reverse = self._relations.get((name, dst, src))
        if reverse is not None and reverse.symmetric:
            return reverse, True
        if any(key[0] == name for key in self._relations):
            raise SchemaError(
                f"Relation {name} does not connect {src} to {dst}",
                relation=name,
            )
        raise SchemaError(f"Unknown relation: {name}", relation=name)

    def relations_touching(self, node_type: NodeType) -> List[RelationType]:
        """Relations with ``node_type`` as either endpoint, in declaration order."""
        return [
            r for r in self.relation_types if node_type in (r.src, r.dst)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "node_types": [t.name for t in self.node_types],
            "relation_types": [
                {
                    "name": r.name,
                    "src": r.src.name,
                    "dst": r.dst.name,
                    "symmetric": r.symmetric,
                }
                for r in self.relation_types
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MetaSchema":
        types = {name: NodeType(name) for name in data["node_types"]}
        relations = []
        for r in data["relation_types"]:
            if r["src"] not in types or r["dst"] not in types:
                raise SchemaError(
                    f"Relation {r['name']} references undeclared node type"
                )
            relations.append(
                RelationType(
                    r["name"], types[r["src"]], types[r["dst"]], r["symmetric"]
                )
            )
        return cls(types.values(), relations)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MetaSchema):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self) -> str:
        return (
            f"MetaSchema({len(self.node_types)} node types, "
            f"{len(self.relation_types)} relation types)"
        )


def default_schema() -> MetaSchema:
    """The event meta-schema: five canonical node types and their relations."""
    return MetaSchema(CANONICAL_NODE_TYPES, INCIDENCE_RELATIONS + ELEMENT_RELATIONS)


@dataclass
class EventDocument:
    """One annotated event instance of a corpus."""

    id: str
    text: str = ""
    keywords: List[str] = field(default_factory=list)
    entities: List[str] = field(default_factory=list)
    topics: List[str] = field(default_factory=list)
    user: Optional[str] = None
    label: Optional[str] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EventDocument":
        return cls(
            id=data["id"],
            text=data.get("text", ""),
            keywords=list(data.get("keywords", [])),
            entities=list(data.get("entities", [])),
            topics=list(data.get("topics", [])),
            user=data.get("user"),
            label=data.get("label"),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "text": self.text,
            "keywords": list(self.keywords),
            "entities": list(self.entities),
            "topics": list(self.topics),
            "user": self.user,
            "label": self.label,
        }


TypeRef = Union[NodeType, str]


class Hin:
    """
    A heterogeneous information network conforming to a ``MetaSchema``.

    Nodes live in per-type tables: each type maps external string ids to
    dense integer indices assigned in insertion order. Edges are binary and
    kept per relation; a symmetric relation between a type and itself stores
    each undirected edge once as ``(min, max)``.
    """

    def __init__(self, schema: Optional[MetaSchema] = None):
        self.schema = schema if schema is not None else default_schema()
        self._ids: Dict[str, List[str]] = {t.name: [] for t in self.schema.node_types}
        self._index: Dict[str, Dict[str, int]] = {
            t.name: {} for t in self.schema.node_types
        }
        # dict used as an insertion-ordered set of index pairs
        self._edges: Dict[Tuple[str, str, str], Dict[Tuple[int, int], None]] = {
            r.key: {} for r in self.schema.relation_types
        }
        self._adjacency_cache: Dict[Tuple[str, str, str], sp.csr_matrix] = {}

    # ------------------------------------------------------------------
    # Nodes
    # ------------------------------------------------------------------

    def add_node(self, node_type: TypeRef, node_id: str) -> int:
        """
        Add a node, or return the index of the existing one.

        Args:
            node_type: Declared node type (or its name)
            node_id: External string id, unique within the type

        Returns:
            Dense per-type integer index of the node

        Raises:
            SchemaError: If the type is not declared
        """
        name = self.schema.node_type(node_type).name
        index = self._index[name]
        existing = index.get(node_id)
        if existing is not None:
            return existing
        position = len(self._ids[name])
        index[node_id] = position
        self._ids[name].append(node_id)
        self._adjacency_cache.clear()
        return position

    def has_node(self, node_type: TypeRef, node_id: str) -> bool:
        name = self.schema.node_type(node_type).name
        return node_id in self._index[name]

    def node_index(self, node_type: TypeRef, node_id: str) -> int:
        """Index of an existing node; raises ``GraphError`` if absent."""
        name = self.schema.node_type(node_type).name
        try:
            return self._index[name][node_id]
        except KeyError:
            raise GraphError(
                f"Missing {name} node: {node_id}", node_type=name, node_id=node_id
            ) from None

    def node_ids(self, node_type: TypeRef) -> List[str]:
        """External ids of a type, in index order."""
        return list(self._ids[self.schema.node_type(node_type).name])

    def num_nodes(self, node_type: Optional[TypeRef] = None) -> int:
        if node_type is None:
            return sum(len(ids) for ids in self._ids.values())
        return len(self._ids[self.schema.node_type(node_type).name])

    def event_ids(self) -> List[str]:
        return self.node_ids(EVENT)

    def event_index(self, event_id: str) -> int:
        return self.node_index(EVENT, event_id)

    # ------------------------------------------------------------------
    # Edges
    # ------------------------------------------------------------------

    def _check_relation(self, relation: RelationType) -> None:
        if not self.schema.has_relation(relation):
            raise SchemaError(
                f"Relation not declared in schema: {relation.key}",
                relation=relation.name,
            )

    def add_edge(
        self,
        relation: RelationType,
        src_id: str,
        dst_id: str,
        src_type: Optional[TypeRef] = None,
        dst_type: Optional[TypeRef] = None,
    ) -> bool:
        """
        Add a binary edge between two existing nodes.

        Endpoint types default to the relation's declared endpoints. When they
        are given in reverse order for a symmetric relation, the endpoints are
        swapped; any other mismatch is a schema violation.

        Args:
            relation: A relation declared in the schema
            src_id: Id of the source node
            dst_id: Id of the destination node
            src_type: Optional explicit type of ``src_id``
            dst_type: Optional explicit type of ``dst_id``

        Returns:
            True if the edge is new, False if it already existed

        Raises:
            SchemaError: Unknown relation or endpoint type mismatch
            GraphError: Missing endpoint node
        """
        self._check_relation(relation)
        src_name = (
            self.schema.node_type(src_type).name if src_type is not None
            else relation.src.name
        )
        dst_name = (
            self.schema.node_type(dst_type).name if dst_type is not None
            else relation.dst.name
        )
        if (src_name, dst_name) != (relation.src.name, relation.dst.name):
            if relation.symmetric and (dst_name, src_name) == (
                relation.src.name,
                relation.dst.name,
            ):
                src_id, dst_id = dst_id, src_id
            else:
                raise SchemaError(
                    f"Relation {relation.name} expects {relation.src.name} -> "
                    f"{relation.dst.name}, got {src_name} -> {dst_name}",
                    relation=relation.name,
                )

        i = self.node_index(relation.src, src_id)
        j = self.node_index(relation.dst, dst_id)
        pair = (min(i, j), max(i, j)) if self._undirected(relation) else (i, j)
        edges = self._edges[relation.key]
        if pair in edges:
            return False
        edges[pair] = None
        self._adjacency_cache.clear()
        return True

    @staticmethod
    def _undirected(relation: RelationType) -> bool:
        return relation.symmetric and relation.is_homogeneous

    def edges(self, relation: RelationType) -> List[Tuple[int, int]]:
        """Stored index pairs of a relation, in insertion order."""
        self._check_relation(relation)
        return list(self._edges[relation.key])

    def num_edges(self, relation: Optional[RelationType] = None) -> int:
        if relation is None:
            return sum(len(e) for e in self._edges.values())
        self._check_relation(relation)
        return len(self._edges[relation.key])

    def neighbors(
        self, node_type: TypeRef, node_id: str, relation: RelationType
    ) -> List[Tuple[str, str]]:
        """
        Neighbours of a node through ``relation`` in either direction.

        Returns:
            List of ``(node_type_name, node_id)`` pairs in edge order
        """
        self._check_relation(relation)
        name = self.schema.node_type(node_type).name
        index = self.node_index(name, node_id)
        found: List[Tuple[str, str]] = []
        src, dst = relation.src.name, relation.dst.name
        for i, j in self._edges[relation.key]:
            if src == name and i == index:
                found.append((dst, self._ids[dst][j]))
            elif dst == name and j == index:
                found.append((src, self._ids[src][i]))
        return found

    def degree(self, node_type: TypeRef, node_id: str, relation: RelationType) -> int:
        return len(self.neighbors(node_type, node_id, relation))

    def adjacency(self, relation: RelationType, inverse: bool = False) -> sp.csr_matrix:
        """
        Typed 0/1 adjacency matrix of a relation.

        Args:
            relation: Declared relation
            inverse: Return the matrix of the inverse relation (dst x src)

        Returns:
            CSR matrix of shape (|src|, |dst|), or its transpose if ``inverse``
        """
        self._check_relation(relation)
        matrix = self._adjacency_cache.get(relation.key)
        if matrix is None:
            matrix = self._build_adjacency(relation)
            self._adjacency_cache[relation.key] = matrix
        return matrix.T.tocsr() if inverse else matrix

    def _build_adjacency(self, relation: RelationType) -> sp.csr_matrix:
        shape = (self.num_nodes(relation.src), self.num_nodes(relation.dst))
        pairs = self._edges[relation.key]
        rows = [i for i, _ in pairs]
        cols = [j for _, j in pairs]
        if self._undirected(relation):
            rows, cols = rows + cols, cols + rows
        matrix = sp.csr_matrix(
            (np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=shape
        )
        matrix.sum_duplicates()
        # self-loops appear twice in the symmetrised lists
        matrix.data[:] = 1
        matrix.sort_indices()
        return matrix

    def check_closure(self) -> None:
        """
        Assert that every stored edge conforms to the schema.

        Raises:
            SchemaError: If an edge's relation is undeclared
            GraphError: If an edge references a missing node
        """
        for key, pairs in self._edges.items():
            relation = self.schema.relation(*key)
            n_src = self.num_nodes(relation.src)
            n_dst = self.num_nodes(relation.dst)
            for i, j in pairs:
                if not (0 <= i < n_src and 0 <= j < n_dst):
                    raise GraphError(f"Edge {key} ({i}, {j}) references a missing node")

    # ------------------------------------------------------------------
    # Snapshot
    # ------------------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        """Versioned JSON snapshot: schema, node tables and edge lists."""
        return {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "schema": self.schema.to_dict(),
            "nodes": {name: list(ids) for name, ids in self._ids.items()},
            "edges": [
                {
                    "relation": r.name,
                    "src": r.src.name,
                    "dst": r.dst.name,
                    "pairs": [[i, j] for i, j in self._edges[r.key]],
                }
                for r in self.schema.relation_types
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], source: str = "<snapshot>") -> "Hin":
        """Rebuild a graph from ``to_dict`` output, validating it first."""
        validate_document(data, GRAPH_SNAPSHOT_SCHEMA, source)
        hin = cls(MetaSchema.from_dict(data["schema"]))
        for name, ids in data["nodes"].items():
            for node_id in ids:
                hin.add_node(name, node_id)
        for block in data["edges"]:
            relation = hin.schema.relation(
                block["relation"], block["src"], block["dst"]
            )
            src_ids = hin._ids[relation.src.name]
            dst_ids = hin._ids[relation.dst.name]
            for i, j in block["pairs"]:
                if i >= len(src_ids) or j >= len(dst_ids):
                    raise GraphError(
                        f"{source}: edge ({i}, {j}) of {relation.name} "
                        "references a missing node"
                    )
                hin.add_edge(relation, src_ids[i], dst_ids[j])
        return hin

    def __repr__(self) -> str:
        return f"Hin({self.num_nodes()} nodes, {self.num_edges()} edges)"


def graph_hash(hin: Hin) -> str:
    """SHA-256 of the canonical JSON snapshot."""
    payload = json.dumps(hin.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# ----------------------------------------------------------------------
# Ingestion
# ----------------------------------------------------------------------


def ingest_corpus(
    documents: Sequence[EventDocument], schema: Optional[MetaSchema] = None
) -> Hin:
    """
    Build a HIN from annotated event documents.

    Every document becomes an EventInstance node (indices follow corpus
    order); every distinct keyword, entity, topic and user string becomes one
    node, linked to the event through the symmetric incidence relations.

    Args:
        documents: Corpus with unique document ids
        schema: Meta-schema to use (default: ``default_schema()``)

    Returns:
        The constructed graph

    Raises:
        GraphError: If a document id is repeated
    """
    seen: Dict[str, int] = {}
    for position, doc in enumerate(documents):
        if doc.id in seen:
            raise GraphError(
                f"Duplicate document id: {doc.id} (documents {seen[doc.id]} "
                f"and {position})",
                document_id=doc.id,
            )
        seen[doc.id] = position

    hin = Hin(schema)
    for doc in documents:
        hin.add_node(EVENT, doc.id)

    incidence = (
        (CONTAINS, "keywords"),
        (MENTIONS, "entities"),
        (ABOUT, "topics"),
    )
    for doc in documents:
        for relation, attr in incidence:
            for element in getattr(doc, attr):
                hin.add_node(relation.dst, element)
                hin.add_edge(relation, doc.id, element)
        if doc.user is not None:
            hin.add_node(USER, doc.user)
            hin.add_edge(POSTED_BY, doc.id, doc.user)

    logger.info(
        "Ingested %d documents: %s, %d incidence edges",
        len(documents),
        ", ".join(f"{t.name}={hin.num_nodes(t)}" for t in hin.schema.node_types),
        hin.num_edges(),
    )
    return hin


RelationRow = Tuple[str, str, str, str, str]


def load_relations(hin: Hin, rows: Iterable[Sequence[str]]) -> int:
    """
    Add pre-extracted element relationships to a graph.

    Each row is ``(src_type, src_id, relation, dst_type, dst_id)``; missing
    nodes are created on the fly.

    Args:
        hin: Graph to extend
        rows: Relationship rows

    Returns:
        Number of edges that were not already present

    Raises:
        ArtifactError: Malformed row
        SchemaError: Relation or endpoint types not declared
    """
    added = 0
    for number, row in enumerate(rows, start=1):
        if len(row) != 5 or any(not str(cell).strip() for cell in row):
            raise ArtifactError(
                f"Malformed relation row {number}: expected 5 non-empty fields, "
                f"got {list(row)!r}",
                row=number,
            )
        src_type, src_id, name, dst_type, dst_id = (str(cell).strip() for cell in row)
        relation, swapped = hin.schema.resolve(name, src_type, dst_type)
        if swapped:
            src_type, src_id, dst_type, dst_id = dst_type, dst_id, src_type, src_id
        hin.add_node(src_type, src_id)
        hin.add_node(dst_type, dst_id)
        if hin.add_edge(relation, src_id, dst_id, src_type, dst_type):
            added += 1
    logger.info("Loaded %d new relation edges", added)
    return added


# ----------------------------------------------------------------------
# Files
# ----------------------------------------------------------------------


def read_corpus(path: Union[str, Path]) -> List[EventDocument]:
    """
    Read a JSON-lines corpus, validating every line.

    Raises:
        ArtifactError: Invalid JSON or a line violating the document schema
    """
    documents: List[EventDocument] = []
    with open(path, "r", encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as e:
                raise ArtifactError(
                    f"{path}:{number}: invalid JSON: {e.msg}",
                    source=str(path),
                    line=number,
                ) from None
            validate_document(data, EVENT_DOCUMENT_SCHEMA, str(path), line=number)
            documents.append(EventDocument.from_dict(data))
    return documents


def write_corpus(path: Union[str, Path], documents: Iterable[EventDocument]) -> Path:
    """Serialize documents as JSON lines."""
    text = "".join(
        json.dumps(doc.to_dict(), ensure_ascii=False) + "\n" for doc in documents
    )
    return atomic_write_text(path, text)


def parse_relations(text: str, source: str = "<relations>") -> List[RelationRow]:
    """
    Parse relation TSV text: five tab-separated columns, ``#`` comments.

    Raises:
        ArtifactError: A row without exactly five columns
    """
    rows: List[RelationRow] = []
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        cells = stripped.split("\t") if "\t" in stripped else stripped.split()
        if len(cells) != 5:
            raise ArtifactError(
                f"{source}:{number}: expected 5 columns "
                "(src_type src_id relation dst_type dst_id), "
                f"got {len(cells)}",
                source=source,
                line=number,
            )
        rows.append(tuple(c.strip() for c in cells))  # type: ignore[arg-type]
    return rows


def read_relations(path: Union[str, Path]) -> List[RelationRow]:
    return parse_relations(Path(path).read_text(encoding="utf-8"), str(path))
