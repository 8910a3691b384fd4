"""
kiesgcn - HIN-based social event similarity and detection

Builds a heterogeneous information network of event instances and their
keywords, entities, topics and users; measures event similarity with
meta-path instance counts (KIES); trains a pairwise-popularity GCN that
learns event representations and meta-path weights jointly; and clusters
events by KIES distance.
"""

__version__ = "0.1.0"

from .errors import KiesGcnError
from .hin import EventDocument, Hin, MetaSchema, default_schema, ingest_corpus
from .metapath import (
    KiesWeights,
    MetaPath,
    MetaPathCatalog,
    compute_dice_stack,
    coup_matrix,
    dice_matrix,
    enumerate_metapaths,
    kies,
)
from .embed import FeatureMatrix, fit_features, load_embeddings
from .nn import GcnParams, gcn_backward, gcn_forward, normalize_adjacency, sgd_step
from .config import RunConfig, SynthConfig, TrainConfig, load_config
from .ppgcn import (
    NEW_CLASS,
    Model,
    angle_score,
    export_weights,
    popularity_score,
    predict_class,
    sample_epoch_pairs,
    train,
)
from .evalcluster import detection_metrics, kies_distance_matrix, kmedoids, nmi
from .synth import gen_synthetic_corpus
from .cli import main as cli_main

__all__ = [
    "KiesGcnError",
    "EventDocument",
    "Hin",
    "MetaSchema",
    "default_schema",
    "ingest_corpus",
    "KiesWeights",
    "MetaPath",
    "MetaPathCatalog",
    "compute_dice_stack",
    "coup_matrix",
    "dice_matrix",
    "enumerate_metapaths",
    "kies",
    "FeatureMatrix",
    "fit_features",
    "load_embeddings",
    "GcnParams",
    "gcn_backward",
    "gcn_forward",
    "normalize_adjacency",
    "sgd_step",
    "RunConfig",
    "SynthConfig",
    "TrainConfig",
    "load_config",
    "NEW_CLASS",
    "Model",
    "angle_score",
    "export_weights",
    "popularity_score",
    "predict_class",
    "sample_epoch_pairs",
    "train",
    "detection_metrics",
    "kies_distance_matrix",
    "kmedoids",
    "nmi",
    "gen_synthetic_corpus",
    "cli_main",
]
