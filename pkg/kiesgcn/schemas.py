"""
JSON Schema documents for every JSON input and artifact kiesgcn reads.

All schemas use JSON Schema draft 2020-12 and are checked with
``jsonschema.Draft202012Validator``. ``validate_document`` turns the first
validation failure into an ``ArtifactError`` (or a caller-chosen error type)
that names the offending JSON path.
"""

from typing import Any, Dict, List, Optional, Type

from jsonschema import Draft202012Validator

from .errors import ArtifactError, KiesGcnError

SCHEMA_VERSION = "https://json-schema.org/draft/2020-12/schema"

_STRING_LIST = {"type": "array", "items": {"type": "string"}}

_META = {"type": "object"}


def _versioned(
    fmt: str, properties: Dict[str, Any], required: List[str]
) -> Dict[str, Any]:
    """Wrap properties in the envelope shared by all versioned artifacts."""
    return {
        "$schema": SCHEMA_VERSION,
        "type": "object",
        "properties": {
            "format": {"const": fmt},
            "version": {"const": 1},
            "meta": _META,
            **properties,
        },
        "required": ["format", "version", *required],
        "additionalProperties": False,
    }


EVENT_DOCUMENT_SCHEMA: Dict[str, Any] = {
    "$schema": SCHEMA_VERSION,
    "type": "object",
    "properties": {
        "id": {"type": "string", "minLength": 1},
        "text": {"type": "string"},
        "keywords": _STRING_LIST,
        "entities": _STRING_LIST,
        "topics": _STRING_LIST,
        "user": {"type": ["string", "null"]},
        "label": {"type": ["string", "null"]},
    },
    "required": ["id"],
    "additionalProperties": False,
}

_NODE_TYPE = {"type": "string", "minLength": 1}

GRAPH_SNAPSHOT_SCHEMA: Dict[str, Any] = _versioned(
    "kiesgcn-hin",
    {
        "schema": {
            "type": "object",
            "properties": {
                "node_types": {"type": "array", "items": _NODE_TYPE},
                "relation_types": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "name": {"type": "string", "minLength": 1},
                            "src": _NODE_TYPE,
                            "dst": _NODE_TYPE,
                            "symmetric": {"type": "boolean"},
                        },
                        "required": ["name", "src", "dst", "symmetric"],
                        "additionalProperties": False,
                    },
                },
            },
            "required": ["node_types", "relation_types"],
            "additionalProperties": False,
        },
        "nodes": {
            "type": "object",
            "additionalProperties": _STRING_LIST,
        },
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "relation": {"type": "string"},
                    "src": _NODE_TYPE,
                    "dst": _NODE_TYPE,
                    "pairs": {
                        "type": "array",
                        "items": {
                            "type": "array",
                            "items": {"type": "integer", "minimum": 0},
                            "minItems": 2,
                            "maxItems": 2,
                        },
                    },
                },
                "required": ["relation", "src", "dst", "pairs"],
                "additionalProperties": False,
            },
        },
    },
    ["schema", "nodes", "edges"],
)

WEIGHTS_SCHEMA: Dict[str, Any] = _versioned(
    "kiesgcn-weights",
    {
        "normalized": {"type": "boolean"},
        "signatures": _STRING_LIST,
        "weights": {
            "type": "object",
            "additionalProperties": {"type": "number", "minimum": 0},
        },
    },
    ["normalized", "signatures", "weights"],
)

_MATRIX = {
    "type": "object",
    "properties": {
        "shape": {
            "type": "array",
            "items": {"type": "integer", "minimum": 1},
            "minItems": 2,
            "maxItems": 2,
        },
        "data": {"type": "array", "items": {"type": "number"}},
    },
    "required": ["shape", "data"],
    "additionalProperties": False,
}

GCN_PARAMS_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "activations": {
            "type": "array",
            "items": {"enum": ["relu", "identity", "sigmoid"]},
        },
        "weights": {"type": "array", "items": _MATRIX},
    },
    "required": ["activations", "weights"],
    "additionalProperties": False,
}

TRAIN_CONFIG_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "properties": {
        "anchors": {"type": "integer", "minimum": 1},
        "batch_size": {"type": "integer", "minimum": 1},
        "batches_per_epoch": {"type": "integer", "minimum": 1},
        "epochs": {"type": "integer", "minimum": 0},
        "lr": {"type": "number", "minimum": 0},
        "c": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "head": {"enum": ["popularity", "angle"]},
        "seed": {"type": "integer", "minimum": 0},
        "hidden": {"type": "integer", "minimum": 1},
        "out_dim": {"type": "integer", "minimum": 1},
        "hidden_activation": {"enum": ["relu", "sigmoid", "identity"]},
        "patience": {"type": ["integer", "null"], "minimum": 1},
        "exact_normalization": {"type": "boolean"},
        "learn_omega": {"type": "boolean"},
        "transductive": {"type": "boolean"},
        "kappa": {"type": "number", "exclusiveMinimum": 0},
        "tau": {"type": "number"},
        "monitor_pairs": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}

MODEL_CHECKPOINT_SCHEMA: Dict[str, Any] = _versioned(
    "kiesgcn-model",
    {
        "gcn": GCN_PARAMS_SCHEMA,
        "omega_raw": {"type": "array", "items": {"type": "number"}},
        "signatures": _STRING_LIST,
        "config": TRAIN_CONFIG_SCHEMA,
    },
    ["gcn", "omega_raw", "signatures", "config"],
)

RUN_CONFIG_SCHEMA: Dict[str, Any] = {
    "$schema": SCHEMA_VERSION,
    "type": "object",
    "properties": {
        "corpus": {"type": ["string", "null"]},
        "relations": {"type": ["string", "null"]},
        "catalog": {"type": ["string", "null"]},
        "weights": {"type": ["string", "null"]},
        "checkpoint": {"type": ["string", "null"]},
        "embeddings": {"type": ["string", "null"]},
        "graph": {"type": ["string", "null"]},
        "out_dir": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "d": {"type": "integer", "minimum": 1},
        "max_hops": {"type": "integer", "minimum": 1},
        "k": {"type": ["integer", "null"], "minimum": 1},
        "split": {
            "type": "array",
            "items": {"type": "number", "minimum": 0, "maximum": 1},
            "minItems": 3,
            "maxItems": 3,
        },
        "train": TRAIN_CONFIG_SCHEMA,
        "synth": {
            "type": "object",
            "properties": {
                "classes": {"type": "integer", "minimum": 2},
                "instances_per_class": {"type": "integer", "minimum": 1},
                "keywords": {"type": "integer", "minimum": 1},
                "entities": {"type": "integer", "minimum": 1},
                "topics": {"type": "integer", "minimum": 1},
                "users": {"type": "integer", "minimum": 1},
                "filler_words": {"type": "integer", "minimum": 1},
                "words_per_text": {"type": "integer", "minimum": 0},
                "p_in": {"type": "number", "minimum": 0, "maximum": 1},
                "p_out": {"type": "number", "minimum": 0, "maximum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

METRICS_REPORT_SCHEMA: Dict[str, Any] = _versioned(
    "kiesgcn-metrics",
    {
        "accuracy": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "micro_f1": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "macro_f1": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "nmi": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "per_class": {"type": "object"},
        "extra": {"type": "object"},
    },
    [],
)


def validate_document(
    document: Any,
    schema: Dict[str, Any],
    source: str,
    error_cls: Type[KiesGcnError] = ArtifactError,
    line: Optional[int] = None,
) -> None:
    """
    Validate a decoded JSON document against one of the schemas above.

    Args:
        document: Decoded JSON value
        schema: Schema to validate against
        source: Human-readable origin (file path or description)
        error_cls: Error type raised on failure
        line: Optional line number for line-oriented formats

    Raises:
        KiesGcnError: The first validation error, as ``error_cls``
    """
    validator = Draft202012Validator(schema)
    errors = sorted(
        validator.iter_errors(document), key=lambda e: [str(p) for p in e.path]
    )
    if not errors:
        return
    first = errors[0]
    location = "/".join(str(p) for p in first.path) or "<root>"
    context: Dict[str, Any] = {"source": source, "path": location}
    if line is not None:
        context["line"] = line
    where = f"{source}:{line}" if line is not None else source
    raise error_cls(
        f"{where}: invalid value at {location}: {first.message}", **context
    )
