"""
Tests for layered configuration, random sub-streams and the data split.
"""

import json
import unittest

import numpy as np
import pytest

from kiesgcn.config import (
    RunConfig,
    SynthConfig,
    TrainConfig,
    env_overrides,
    load_config,
    split_indices,
    stream_seed,
    substream,
)
from kiesgcn.errors import ConfigError


class TestStreams(unittest.TestCase):
    def test_same_name_same_numbers(self):
        first = substream(3, "sampler").random(5)
        second = substream(3, "sampler").random(5)
        np.testing.assert_array_equal(first, second)

    def test_names_are_independent(self):
        first = substream(3, "sampler").random(5)
        second = substream(3, "init").random(5)
        self.assertFalse(np.array_equal(first, second))

    def test_seed_changes_stream(self):
        self.assertNotEqual(stream_seed(0, "embed"), stream_seed(1, "embed"))

    def test_unknown_stream(self):
        with self.assertRaises(ConfigError):
            substream(0, "dropout")

    def test_negative_seed(self):
        with self.assertRaises(ConfigError):
            substream(-1, "init")


class TestTrainConfig(unittest.TestCase):
    def test_defaults(self):
        config = TrainConfig()
        self.assertEqual(
            (config.anchors, config.batch_size, config.batches_per_epoch, config.c),
            (1000, 64, 32, 0.01),
        )
        self.assertEqual(config.head, "popularity")

    def test_invalid_values(self):
        for changes in ({"c": 1.0}, {"anchors": 0}, {"head": "dot"}, {"lr": -1.0}):
            with self.assertRaises(ConfigError, msg=str(changes)):
                TrainConfig(**changes)

    def test_unknown_key(self):
        with self.assertRaises(ConfigError):
            TrainConfig.from_dict({"momentum": 0.9})

    def test_dict_round_trip(self):
        config = TrainConfig(head="angle", patience=None, seed=11)
        self.assertEqual(TrainConfig.from_dict(config.to_dict()), config)


class TestSynthConfig(unittest.TestCase):
    def test_p_out_below_p_in(self):
        with self.assertRaises(ConfigError):
            SynthConfig(p_in=0.3, p_out=0.3)

    def test_needs_two_classes(self):
        with self.assertRaises(ConfigError):
            SynthConfig(classes=1)


class TestRunConfig(unittest.TestCase):
    def test_split_must_sum_to_one(self):
        with self.assertRaises(ConfigError):
            RunConfig(split=(0.5, 0.2, 0.2))

    def test_require_missing_path(self):
        with self.assertRaises(ConfigError) as ctx:
            RunConfig().require("corpus")
        self.assertEqual(ctx.exception.context["key"], "corpus")

    def test_require_nonexistent_file(self):
        with self.assertRaises(ConfigError):
            RunConfig(corpus="/nonexistent/corpus.jsonl").require("corpus")


def test_env_overrides_coerce_types():
    document = env_overrides(
        {"PPGCN_SEED": "7", "PPGCN_LR": "0.5", "PPGCN_PATIENCE": "none", "HOME": "/"}
    )
    assert document == {"seed": 7, "train": {"lr": 0.5, "patience": None}}


def test_env_override_bad_number():
    with pytest.raises(ConfigError) as excinfo:
        env_overrides({"PPGCN_EPOCHS": "many"})
    assert excinfo.value.context["variable"] == "PPGCN_EPOCHS"


def test_layer_precedence(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(
        json.dumps({"seed": 1, "d": 32, "train": {"epochs": 5, "lr": 0.2}})
    )
    config = load_config(
        path,
        environ={"PPGCN_SEED": "2", "PPGCN_EPOCHS": "6"},
        overrides={"seed": 3, "k": None, "train": {"head": "angle", "lr": None}},
    )
    assert config.seed == 3
    assert config.d == 32
    assert config.k is None
    assert config.train.epochs == 6
    assert config.train.lr == 0.2
    assert config.train.head == "angle"
    assert config.train.anchors == 1000


def test_defaults_without_layers():
    config = load_config(environ={})
    assert config.to_dict() == RunConfig().to_dict()


def test_config_file_schema_violation(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"train": {"epochs": "ten"}}))
    with pytest.raises(ConfigError) as excinfo:
        load_config(path, environ={})
    assert excinfo.value.context["path"] == "train/epochs"


def test_config_file_unknown_key(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"dropout": 0.5}))
    with pytest.raises(ConfigError):
        load_config(path, environ={})


# =============================================================================
# Split
# =============================================================================


class TestSplit(unittest.TestCase):
    def setUp(self):
        self.labels = ["a"] * 10 + ["b"] * 5 + [None] * 2
        self.ids = [f"e{i}" for i in range(len(self.labels))]

    def test_partition(self):
        split = split_indices(self.ids, self.labels, (0.6, 0.2, 0.2), seed=0)
        everything = split.train + split.dev + split.test
        self.assertEqual(sorted(everything), list(range(len(self.labels))))

    def test_stratified_counts(self):
        split = split_indices(self.ids, self.labels, (0.6, 0.2, 0.2), seed=0)
        dev_labels = [self.labels[i] for i in split.dev]
        self.assertEqual(dev_labels.count("a"), 2)
        self.assertEqual(dev_labels.count("b"), 1)
        self.assertEqual(len(split.train), 6 + 3)

    def test_unlabeled_go_to_test(self):
        split = split_indices(self.ids, self.labels, (0.6, 0.2, 0.2), seed=0)
        self.assertIn(15, split.test)
        self.assertIn(16, split.test)

    def test_deterministic_and_seeded(self):
        first = split_indices(self.ids, self.labels, (0.6, 0.2, 0.2), seed=4)
        self.assertEqual(
            first, split_indices(self.ids, self.labels, (0.6, 0.2, 0.2), seed=4)
        )
        self.assertEqual(list(first.train), sorted(first.train))

    def test_bad_fractions(self):
        with self.assertRaises(ConfigError):
            split_indices(self.ids, self.labels, (0.6, 0.3, 0.3))

    def test_length_mismatch(self):
        with self.assertRaises(ConfigError):
            split_indices(self.ids[:3], self.labels)
