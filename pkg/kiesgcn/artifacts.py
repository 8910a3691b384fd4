"""
Artifact persistence: atomic writes, embedded run metadata and the on-disk
cache of Dice matrices.

JSON artifacts carry a ``meta`` object; CSV/TSV artifacts start with one
``# {json}`` comment line holding the same metadata. Metadata never contains
wall-clock timestamps, so identical runs produce identical files.
"""

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Type, Union

import numpy as np
import scipy.sparse as sp

from .errors import ArtifactError, KiesGcnError, StaleDiceCacheError
from .schemas import validate_document

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CACHE_DIR = "cache"
META_PREFIX = "# "


def run_meta(
    command: str, seed: Optional[int], config: Optional[Dict[str, Any]] = None
) -> Dict[str, Any]:
    """Metadata recorded in every artifact a command writes."""
    from . import __version__

    meta: Dict[str, Any] = {"command": command, "seed": seed, "version": __version__}
    if config is not None:
        meta["config"] = config
    return meta


def atomic_write_text(path: PathLike, text: str) -> Path:
    """
    Write ``text`` to ``path`` through a temporary file and ``os.replace``.

    Returns:
        The written path
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(
        dir=str(target.parent), prefix=f".{target.name}.", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug("Wrote %s", target)
    return target


def dump_json(document: Any) -> str:
    return json.dumps(document, indent=2, sort_keys=False) + "\n"


def atomic_write_json(path: PathLike, document: Any) -> Path:
    return atomic_write_text(path, dump_json(document))


def read_json(
    path: PathLike,
    schema: Optional[Dict[str, Any]] = None,
    error_cls: Type[KiesGcnError] = ArtifactError,
) -> Any:
    """
    Load a JSON file and validate it against ``schema`` when given.

    Raises:
        ArtifactError: Invalid JSON (or ``error_cls`` on schema violations)
        FileNotFoundError: Missing file
    """
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise ArtifactError(
                f"{path}: invalid JSON at line {e.lineno}: {e.msg}",
                source=str(path),
                line=e.lineno,
            ) from None
    if schema is not None:
        validate_document(document, schema, str(path), error_cls=error_cls)
    return document


def meta_header(meta: Dict[str, Any]) -> str:
    return META_PREFIX + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n"


def split_meta_header(text: str) -> Tuple[Optional[Dict[str, Any]], str]:
    """Separate a leading ``# {json}`` line from the body of a CSV/TSV text."""
    first, _, rest = text.partition("\n")
    if not first.startswith(META_PREFIX + "{"):
        return None, text
    try:
        meta = json.loads(first[len(META_PREFIX) :])
    except json.JSONDecodeError:
        return None, text
    return meta, rest


def write_csv(
    path: PathLike,
    header: Sequence[str],
    rows: Sequence[Sequence[Any]],
    meta: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Comma-separated rows under a metadata line and a header row.

    Cells are quoted as needed, so identifiers may contain commas.
    """
    buffer = io.StringIO()
    if meta is not None:
        buffer.write(meta_header(meta))
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([_csv_cell(value) for value in row] for row in rows)
    return atomic_write_text(path, buffer.getvalue())


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_csv(path: PathLike) -> Tuple[Optional[Dict[str, Any]], List[Dict[str, str]]]:
    """
    Read a CSV written by ``write_csv``.

    Returns:
        Tuple of (metadata or None, rows as header-keyed dicts)

    Raises:
        ArtifactError: Missing header, a row of the wrong width or bad quoting
    """
    meta, body = split_meta_header(Path(path).read_text(encoding="utf-8"))
    reader = csv.reader(io.StringIO(body, newline=""), strict=True)
    header: Optional[List[str]] = None
    rows = []
    try:
        for cells in reader:
            if not any(cell.strip() for cell in cells):
                continue
            if header is None:
                header = cells
                continue
            if len(cells) != len(header):
                raise ArtifactError(
                    f"{path}: row {reader.line_num} has {len(cells)} fields, "
                    f"expected {len(header)}",
                    source=str(path),
                    line=reader.line_num,
                )
            rows.append(dict(zip(header, cells)))
    except csv.Error as e:
        raise ArtifactError(
            f"{path}: line {reader.line_num}: {e}",
            source=str(path),
            line=reader.line_num,
        ) from None
    if header is None:
        raise ArtifactError(f"{path}: missing CSV header", source=str(path))
    return meta, rows


# ----------------------------------------------------------------------
# Dice stack cache
# ----------------------------------------------------------------------


def cache_path(out_dir: PathLike, graph_digest: str, catalog_digest: str) -> Path:
    return (
        Path(out_dir)
        / CACHE_DIR
        / f"dice-{graph_digest[:16]}-{catalog_digest[:16]}.npz"
    )


def save_dice_stack(
    path: PathLike,
    stack: Sequence[sp.spmatrix],
    signatures: Sequence[str],
    graph_digest: str,
    catalog_digest: str,
) -> Path:
    """Store all Dice matrices in one compressed ``.npz`` archive."""
    arrays: Dict[str, np.ndarray] = {
        "signatures": np.asarray(list(signatures), dtype=np.str_),
        "graph_hash": np.asarray(graph_digest),
        "catalog_hash": np.asarray(catalog_digest),
        "count": np.asarray(len(stack)),
    }
    for m, matrix in enumerate(stack):
        csr = sp.csr_matrix(matrix, dtype=np.float64)
        arrays[f"data_{m}"] = csr.data
        arrays[f"indices_{m}"] = csr.indices
        arrays[f"indptr_{m}"] = csr.indptr
        arrays[f"shape_{m}"] = np.asarray(csr.shape)

    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(target.parent), suffix=".npz")
    try:
        with os.fdopen(fd, "wb") as f:
            np.savez_compressed(f, **arrays)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.info("Cached %d Dice matrices at %s", len(stack), target)
    return target


def load_dice_stack(
    path: PathLike, graph_digest: str, catalog_digest: str
) -> List[sp.csr_matrix]:
    """
    Load a cached Dice stack, checking it was built from the same inputs.

    Raises:
        StaleDiceCacheError: The cache belongs to another graph or catalog
    """
    with np.load(path, allow_pickle=False) as archive:
        if (
            str(archive["graph_hash"]) != graph_digest
            or str(archive["catalog_hash"]) != catalog_digest
        ):
            raise StaleDiceCacheError(
                f"{path}: cache was built for a different graph or catalog",
                source=str(path),
            )
        stack = []
        for m in range(int(archive["count"])):
            shape = tuple(int(v) for v in archive[f"shape_{m}"])
            stack.append(
                sp.csr_matrix(
                    (
                        archive[f"data_{m}"],
                        archive[f"indices_{m}"],
                        archive[f"indptr_{m}"],
                    ),
                    shape=shape,
                )
            )
    logger.info("Loaded %d cached Dice matrices from %s", len(stack), path)
    return stack
