"""
Exception hierarchy for kiesgcn.

Every error carries a stable ``code`` so the CLI can report it as a
machine-readable JSON object. Each class also derives from the closest
builtin exception, so callers may catch either.
"""

from typing import Any, Dict


class KiesGcnError(Exception):
    """Base class for all kiesgcn errors."""

    code = "error"

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self) -> Dict[str, Any]:
        """Serialize the error for the CLI's stderr report."""
        payload: Dict[str, Any] = {"error": self.code, "message": self.message}
        for key, value in self.context.items():
            payload[key] = value
        return payload


class SchemaError(KiesGcnError, ValueError):
    """A node, edge or relation violates the meta-schema."""

    code = "schema_violation"


class GraphError(KiesGcnError, KeyError):
    """A referenced node is missing or an identifier is duplicated."""

    code = "graph"

    def __str__(self) -> str:
        # KeyError would otherwise quote the message
        return self.message


class ShapeError(KiesGcnError, ValueError):
    """Operands have incompatible dimensions."""

    code = "shape_mismatch"


class NumericalError(KiesGcnError, ArithmeticError):
    """A non-finite value appeared in a numeric kernel."""

    code = "non_finite"


class StaleCacheError(KiesGcnError, RuntimeError):
    """Cached state no longer matches the computation asking for it."""

    code = "stale_cache"


class StaleDiceCacheError(StaleCacheError):
    """An on-disk Dice cache was built for another graph or catalog."""


class SamplingError(KiesGcnError, ValueError):
    """Labels do not admit the requested pair sampling."""

    code = "sampling"


class WeightsError(KiesGcnError, ValueError):
    """Meta-path weights are invalid or do not match the catalog."""

    code = "weights"


class ConfigError(KiesGcnError, ValueError):
    """Configuration failed validation."""

    code = "config"


class ArtifactError(KiesGcnError, ValueError):
    """An input or output file is malformed."""

    code = "artifact"


class EmbeddingError(ArtifactError):
    """An embedding file is malformed or inconsistent with the corpus."""

    code = "embedding"
