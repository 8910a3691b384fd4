"""
Run configuration.

Values are layered: built-in defaults, then a JSON config file, then
``PPGCN_*`` environment variables, then command-line flags. Every layer is
validated with the JSON Schemas in ``kiesgcn.schemas``.

All randomness flows from one master seed through named sub-streams, so a
component (the split, the pair sampler, the initialiser, ...) can be re-run
in isolation and still draw the same numbers.
"""

import dataclasses
import logging
import math
import os
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ConfigError
from .schemas import RUN_CONFIG_SCHEMA, TRAIN_CONFIG_SCHEMA, validate_document

logger = logging.getLogger(__name__)

STREAMS = ("split", "sampler", "init", "kmedoids", "synth", "embed", "monitor")

ENV_PREFIX = "PPGCN_"

# environment variable suffix -> (section, key); section None is the top level
ENV_KEYS: Dict[str, Tuple[Optional[str], str]] = {
    "SEED": (None, "seed"),
    "OUT_DIR": (None, "out_dir"),
    "D": (None, "d"),
    "MAX_HOPS": (None, "max_hops"),
    "K": (None, "k"),
    "EPOCHS": ("train", "epochs"),
    "LR": ("train", "lr"),
    "HEAD": ("train", "head"),
    "PATIENCE": ("train", "patience"),
}


def _seed_sequence(seed: int, name: str) -> np.random.SeedSequence:
    if name not in STREAMS:
        raise ConfigError(f"Unknown random stream: {name}")
    if seed < 0:
        raise ConfigError(f"Seed must be >= 0, got {seed}")
    return np.random.SeedSequence([seed, zlib.crc32(name.encode("utf-8"))])


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named component."""
    return np.random.default_rng(_seed_sequence(seed, name))


def stream_seed(seed: int, name: str) -> int:
    """32-bit integer seed of a named stream, for APIs that take ints."""
    return int(_seed_sequence(seed, name).generate_state(1)[0])


@dataclass
class TrainConfig:
    """
    PP-GCN training settings.

    ``anchors`` (R), ``batch_size`` (B), ``batches_per_epoch`` (E) and ``c``
    default to the pairwise-training constants; the rest are documented
    choices.
    """

    anchors: int = 1000
    batch_size: int = 64
    batches_per_epoch: int = 32
    epochs: int = 7000
    lr: float = 0.01
    c: float = 0.01
    head: str = "popularity"
    seed: int = 0
    hidden: int = 64
    out_dim: int = 32
    hidden_activation: str = "relu"
    patience: Optional[int] = 200
    exact_normalization: bool = False
    learn_omega: bool = True
    transductive: bool = True
    kappa: float = 10.0
    tau: float = 0.5
    monitor_pairs: int = 128

    def __post_init__(self) -> None:
        validate_document(
            self.to_dict(), TRAIN_CONFIG_SCHEMA, "train config", error_cls=ConfigError
        )

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrainConfig":
        validate_document(
            dict(data), TRAIN_CONFIG_SCHEMA, "train config", error_cls=ConfigError
        )
        return cls(**data)

    def replace(self, **changes: Any) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class SynthConfig:
    """
    Planted-class corpus settings.

    Vocabulary sizes are totals per element type, split evenly into one pool
    per class.
    """

    classes: int = 20
    instances_per_class: int = 5
    keywords: int = 200
    entities: int = 100
    topics: int = 40
    users: int = 60
    filler_words: int = 500
    words_per_text: int = 12
    p_in: float = 0.6
    p_out: float = 0.05
    seed: int = 0

    def __post_init__(self) -> None:
        validate_document(
            self.to_dict(),
            RUN_CONFIG_SCHEMA["properties"]["synth"],
            "synth config",
            error_cls=ConfigError,
        )
        if not 0 <= self.p_out < self.p_in <= 1:
            raise ConfigError(
                f"Need 0 <= p_out < p_in <= 1, got p_out={self.p_out}, "
                f"p_in={self.p_in}"
            )

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass
class RunConfig:
    """Input paths, split fractions and component settings of one run."""

    corpus: Optional[str] = None
    relations: Optional[str] = None
    catalog: Optional[str] = None
    weights: Optional[str] = None
    checkpoint: Optional[str] = None
    embeddings: Optional[str] = None
    graph: Optional[str] = None
    out_dir: str = "out"
    seed: int = 0
    d: int = 128
    max_hops: int = 2
    k: Optional[int] = None
    split: Tuple[float, float, float] = (0.6, 0.2, 0.2)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def __post_init__(self) -> None:
        self.split = tuple(float(f) for f in self.split)  # type: ignore[assignment]
        if len(self.split) != 3 or any(f < 0 for f in self.split):
            raise ConfigError(f"split needs three non-negative fractions: {self.split}")
        if abs(math.fsum(self.split) - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {self.split}")

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data["split"] = list(self.split)
        return data

    def require(self, *names: str) -> None:
        """Fail unless every named path is set and exists."""
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"--{name.replace('_', '-')} is required", key=name)
            if not Path(value).exists():
                raise ConfigError(f"{name} file not found: {value}", key=name)


def _coerce(value: str, schema: Dict[str, Any], name: str) -> Any:
    types = schema.get("type", "string")
    types = types if isinstance(types, list) else [types]
    if "null" in types and value.strip().lower() in ("", "null", "none"):
        return None
    try:
        if "integer" in types:
            return int(value)
        if "number" in types:
            return float(value)
    except ValueError:
        raise ConfigError(
            f"{name}={value!r} is not a valid {types[0]}", variable=name
        ) from None
    if "boolean" in types:
        lowered = value.strip().lower()
        if lowered not in ("true", "false", "1", "0"):
            raise ConfigError(f"{name}={value!r} is not a boolean", variable=name)
        return lowered in ("true", "1")
    return value


def env_overrides(environ: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    """Translate ``PPGCN_*`` variables into a partial config document."""
    environ = os.environ if environ is None else environ
    document: Dict[str, Any] = {}
    for suffix, (section, key) in ENV_KEYS.items():
        name = ENV_PREFIX + suffix
        if name not in environ:
            continue
        if section is None:
            schema = RUN_CONFIG_SCHEMA["properties"][key]
            document[key] = _coerce(environ[name], schema, name)
        else:
            schema = TRAIN_CONFIG_SCHEMA["properties"][key]
            document.setdefault(section, {})[key] = _coerce(
                environ[name], schema, name
            )
    return document


def _merge(base: Dict[str, Any], layer: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in layer.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(
    path: Optional[Union[str, Path]] = None,
    environ: Optional[Mapping[str, str]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Build the effective run configuration.

    Args:
        path: Optional JSON config file
        environ: Environment mapping (default: ``os.environ``)
        overrides: Values from command-line flags; ``None`` values are
            ignored, nested ``train``/``synth`` mappings are merged

    Returns:
        Validated ``RunConfig``

    Raises:
        ConfigError: Invalid file, environment value or flag
    """
    from .artifacts import read_json

    document = RunConfig().to_dict()
    layers: List[Tuple[str, Mapping[str, Any]]] = []
    if path is not None:
        layers.append((str(path), read_json(path)))
    layers.append(("environment", env_overrides(environ)))
    if overrides:
        layers.append(("command line", _drop_none(overrides)))

    for source, layer in layers:
        validate_document(layer, RUN_CONFIG_SCHEMA, source, error_cls=ConfigError)
        document = _merge(document, layer)
    validate_document(document, RUN_CONFIG_SCHEMA, "config", error_cls=ConfigError)

    train = TrainConfig.from_dict(document.pop("train"))
    synth = SynthConfig(**document.pop("synth"))
    config = RunConfig(train=train, synth=synth, **document)
    logger.debug("Effective config: %s", config.to_dict())
    return config


def _drop_none(values: Mapping[str, Any]) -> Dict[str, Any]:
    cleaned: Dict[str, Any] = {}
    for key, value in values.items():
        if isinstance(value, Mapping):
            nested = _drop_none(value)
            if nested:
                cleaned[key] = nested
        elif value is not None:
            cleaned[key] = value
    return cleaned


@dataclass(frozen=True)
class Split:
    """Event indices of the train, dev and test partitions (each sorted)."""

    train: Tuple[int, ...]
    dev: Tuple[int, ...]
    test: Tuple[int, ...]


def split_indices(
    ids: Sequence[str],
    labels: Sequence[Optional[str]],
    fractions: Sequence[float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> Split:
    """
    Stratified train/dev/test split.

    Each class is shuffled with the ``split`` stream and cut by the
    fractions (floors for dev and test, remainder to train). Unlabeled
    instances go to test.

    Raises:
        ConfigError: Fractions that do not sum to 1 or mismatched lengths
    """
    if len(ids) != len(labels):
        raise ConfigError(f"{len(ids)} ids but {len(labels)} labels")
    if len(fractions) != 3 or abs(math.fsum(fractions) - 1.0) > 1e-9:
        raise ConfigError("split fractions must be three values summing to 1")
    _, dev_fraction, test_fraction = fractions
    rng = substream(seed, "split")

    members: Dict[str, List[int]] = {}
    unlabeled: List[int] = []
    for index, label in enumerate(labels):
        if label is None:
            unlabeled.append(index)
        else:
            members.setdefault(label, []).append(index)

    train: List[int] = []
    dev: List[int] = []
    test: List[int] = list(unlabeled)
    for label in sorted(members):
        indices = np.asarray(members[label])
        shuffled = indices[rng.permutation(len(indices))].tolist()
        n_dev = int(math.floor(len(shuffled) * dev_fraction))
        n_test = int(math.floor(len(shuffled) * test_fraction))
        dev.extend(shuffled[:n_dev])
        test.extend(shuffled[n_dev : n_dev + n_test])
        train.extend(shuffled[n_dev + n_test :])
    return Split(tuple(sorted(train)), tuple(sorted(dev)), tuple(sorted(test)))
