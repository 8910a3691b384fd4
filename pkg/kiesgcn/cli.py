#!/usr/bin/env python3
"""
Command-line interface for kiesgcn.

Usage:
    kiesgcn synth   --out-dir data
    kiesgcn build   --corpus data/corpus.jsonl --relations data/relations.tsv
    kiesgcn train   --corpus data/corpus.jsonl --relations data/relations.tsv
    kiesgcn detect  --corpus ... --checkpoint out/model.json
    kiesgcn cluster --corpus ... --k 20 [--weights other/weights.json]
    kiesgcn inspect --corpus ...
"""

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import scipy.sparse as sp

from .artifacts import (
    atomic_write_json,
    cache_path,
    load_dice_stack,
    read_json,
    run_meta,
    save_dice_stack,
    write_csv,
)
from .config import RunConfig, load_config, split_indices, stream_seed
from .embed import fit_features, load_embeddings, tfidf_vectors
from .errors import ConfigError, GraphError, KiesGcnError, StaleDiceCacheError
from .evalcluster import (
    MetricsReport,
    detection_metrics,
    kies_distance_matrix,
    kmedoids,
    nearest_neighbor_baseline,
    nmi,
    write_assignment_csv,
    write_metrics,
)
from .hin import (
    EventDocument,
    Hin,
    graph_hash,
    ingest_corpus,
    load_relations,
    read_corpus,
    read_relations,
)
from .metapath import (
    KiesWeights,
    MetaPathCatalog,
    catalog_hash,
    compute_dice_stack,
    enumerate_metapaths,
    read_catalog,
    read_weights,
    write_catalog,
    write_weights,
)
from .ppgcn import (
    Model,
    export_weights,
    load_model,
    predict_many,
    save_model,
    train,
    write_trace_csv,
)
from .schemas import GRAPH_SNAPSHOT_SCHEMA
from .synth import gen_synthetic_corpus, write_synthetic_corpus

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


@dataclass
class Workspace:
    """Inputs shared by the graph-based commands."""

    config: RunConfig
    documents: List[EventDocument]
    hin: Hin
    catalog: MetaPathCatalog

    @property
    def ids(self) -> List[str]:
        return [doc.id for doc in self.documents]

    @property
    def labels(self) -> List[Optional[str]]:
        return [doc.label for doc in self.documents]

    @property
    def out_dir(self) -> Path:
        return Path(self.config.out_dir)

    def meta(self, command: str) -> Dict[str, Any]:
        return run_meta(command, self.config.seed, self.config.to_dict())


def load_workspace(config: RunConfig) -> Workspace:
    """
    Read the corpus, build (or load) the HIN and resolve the catalog.

    Raises:
        ConfigError: No corpus given
        GraphError: A ``--graph`` snapshot whose events differ from the corpus
    """
    config.require("corpus")
    documents = read_corpus(config.corpus)  # type: ignore[arg-type]
    if config.graph is not None:
        snapshot = read_json(config.graph, GRAPH_SNAPSHOT_SCHEMA)
        hin = Hin.from_dict(snapshot, config.graph)
        if hin.event_ids() != [doc.id for doc in documents]:
            raise GraphError(
                f"Graph snapshot {config.graph} does not hold the corpus events "
                "in corpus order"
            )
    else:
        hin = ingest_corpus(documents)
        if config.relations is not None:
            load_relations(hin, read_relations(config.relations))
    if config.catalog is not None:
        catalog = read_catalog(config.catalog, hin.schema)
    else:
        catalog = enumerate_metapaths(hin.schema, config.max_hops)
    logger.info("Catalog holds %d meta-paths", len(catalog))
    return Workspace(config, documents, hin, catalog)


def dice_stack(ws: Workspace) -> List[sp.csr_matrix]:
    """S_all for the workspace, read from or written to the on-disk cache."""
    graph_digest = graph_hash(ws.hin)
    catalog_digest = catalog_hash(ws.catalog)
    path = cache_path(ws.out_dir, graph_digest, catalog_digest)
    if path.exists():
        try:
            stack = load_dice_stack(path, graph_digest, catalog_digest)
            logger.info("Dice cache hit: %s", path)
            return stack
        except StaleDiceCacheError:
            logger.warning("Dice cache %s is stale; recomputing", path)
    logger.info("Dice cache miss; computing %d CouP matrices", len(ws.catalog))
    stack = compute_dice_stack(ws.hin, ws.catalog)
    save_dice_stack(path, stack, ws.catalog.signatures, graph_digest, catalog_digest)
    return stack


def features(ws: Workspace) -> Any:
    config = ws.config
    if config.embeddings is not None:
        return load_embeddings(config.embeddings, ws.ids).values
    return fit_features(
        ws.documents, config.d, seed=stream_seed(config.seed, "embed")
    ).values


def aligned_stack(
    ws: Workspace, stack: List[sp.csr_matrix], signatures: List[str]
) -> List[sp.csr_matrix]:
    """Reorder S_all to ``signatures``; fails on the first foreign signature."""
    KiesWeights.uniform(list(signatures)).align(ws.catalog.signatures)
    return [stack[ws.catalog.index(s)] for s in signatures]


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------


def cmd_synth(config: RunConfig) -> None:
    corpus = gen_synthetic_corpus(config.synth)
    meta = run_meta("synth", config.synth.seed, config.synth.to_dict())
    write_synthetic_corpus(config.out_dir, corpus, meta)


def cmd_build(config: RunConfig) -> None:
    ws = load_workspace(config)
    dice_stack(ws)
    snapshot = ws.hin.to_dict()
    snapshot["meta"] = ws.meta("build")
    atomic_write_json(ws.out_dir / "graph.json", snapshot)
    write_catalog(ws.out_dir / "catalog.txt", ws.catalog)
    logger.info("Wrote graph snapshot and catalog to %s", ws.out_dir)


def cmd_train(config: RunConfig) -> None:
    ws = load_workspace(config)
    stack = dice_stack(ws)
    split = split_indices(ws.ids, ws.labels, config.split, config.seed)
    train_config = config.train.replace(seed=config.seed)
    model, trace = train(
        stack,
        features(ws),
        ws.labels,
        ws.catalog.signatures,
        train_config,
        split.train,
        split.dev,
    )
    meta = ws.meta("train")
    save_model(ws.out_dir / "model.json", model, meta)
    write_weights(ws.out_dir / "weights.json", export_weights(model), meta)
    write_trace_csv(ws.out_dir / f"trace_{train_config.head}.csv", trace, meta)
    logger.info("Wrote model, weights and trace to %s", ws.out_dir)


def _checkpoint(config: RunConfig) -> Model:
    config.require("checkpoint")
    return load_model(config.checkpoint)  # type: ignore[arg-type]


def cmd_detect(config: RunConfig) -> None:
    ws = load_workspace(config)
    model = _checkpoint(config)
    stack = aligned_stack(ws, dice_stack(ws), list(model.signatures))
    split = split_indices(ws.ids, ws.labels, config.split, config.seed)
    labels = ws.labels
    gallery = [i for i in split.train if labels[i] is not None]

    z = model.embed(stack, features(ws))
    predictions = predict_many(split.test, model, gallery, z, labels)
    rows = [
        (
            ws.ids[p.index],
            p.label,
            labels[p.index] or "",
            max(p.probabilities.values()),
        )
        for p in predictions
    ]
    meta = ws.meta("detect")
    write_csv(
        ws.out_dir / "predictions.csv",
        ("event_id", "predicted", "gold", "probability"),
        rows,
        meta,
    )

    scored = [p for p in predictions if labels[p.index] is not None]
    if scored:
        report = detection_metrics(
            [p.label for p in scored], [labels[p.index] for p in scored]
        )
        baseline = nearest_neighbor_baseline(
            tfidf_vectors(ws.documents, elements=False),
            gallery,
            labels,
            [p.index for p in scored],
        )
        report.extra["baseline_accuracy"] = detection_metrics(
            baseline, [labels[p.index] for p in scored]
        ).accuracy
    else:
        report = MetricsReport()
    report.extra["test_size"] = len(split.test)
    write_metrics(ws.out_dir / "detection_metrics.json", report, meta)
    logger.info("Detection accuracy: %s", report.accuracy)


def _cluster_weights(config: RunConfig, ws: Workspace) -> KiesWeights:
    if config.weights is not None:
        return read_weights(config.weights)
    if config.checkpoint is not None:
        return export_weights(load_model(config.checkpoint))
    logger.info("No weights given; using uniform meta-path weights")
    return KiesWeights.uniform(ws.catalog.signatures)


def cmd_cluster(config: RunConfig) -> None:
    if config.k is None:
        raise ConfigError("--k is required for cluster", key="k")
    ws = load_workspace(config)
    stack = dice_stack(ws)
    weights = _cluster_weights(config, ws)
    distances = kies_distance_matrix(stack, weights, ws.catalog.signatures)
    clustering = kmedoids(distances, config.k, config.seed)

    meta = ws.meta("cluster")
    write_assignment_csv(ws.out_dir / "clusters.csv", ws.ids, clustering, meta)
    labeled = [i for i, label in enumerate(ws.labels) if label is not None]
    report = MetricsReport(
        nmi=(
            nmi(
                [ws.labels[i] for i in labeled],
                [int(clustering.assignment[i]) for i in labeled],
            )
            if labeled
            else None
        ),
        extra={
            "k": clustering.k,
            "cost": clustering.cost,
            "iterations": clustering.iterations,
            "weights": config.weights or config.checkpoint or "uniform",
        },
    )
    write_metrics(ws.out_dir / "cluster_metrics.json", report, meta)
    logger.info("Clustering NMI: %s", report.nmi)


def cmd_inspect(config: RunConfig) -> None:
    ws = load_workspace(config)
    summary = {
        "nodes": {t.name: ws.hin.num_nodes(t) for t in ws.hin.schema.node_types},
        "edges": {
            f"{r.src.name}-{r.name}-{r.dst.name}": ws.hin.num_edges(r)
            for r in ws.hin.schema.relation_types
        },
        "labeled": sum(label is not None for label in ws.labels),
        "classes": len({label for label in ws.labels if label is not None}),
        "catalog": [
            {"signature": p.signature, "abbrev": p.abbrev, "length": p.length}
            for p in ws.catalog
        ],
    }
    print(json.dumps(summary, indent=2))


COMMANDS: Dict[str, Callable[[RunConfig], None]] = {
    "synth": cmd_synth,
    "build": cmd_build,
    "train": cmd_train,
    "detect": cmd_detect,
    "cluster": cmd_cluster,
    "inspect": cmd_inspect,
}


# ----------------------------------------------------------------------
# Argument handling
# ----------------------------------------------------------------------


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration file")
    common.add_argument("--out-dir", help="Directory for artifacts")
    common.add_argument("--seed", type=int, help="Master random seed")

    inputs = common.add_argument_group("inputs")
    inputs.add_argument("--corpus", help="Event corpus (JSON lines)")
    inputs.add_argument("--relations", help="Element relations (TSV)")
    inputs.add_argument("--catalog", help="Meta-path catalog (one signature per line)")
    inputs.add_argument("--weights", help="Meta-path weights (JSON)")
    inputs.add_argument("--checkpoint", help="Trained model checkpoint (JSON)")
    inputs.add_argument("--embeddings", help="External document vectors")
    inputs.add_argument("--graph", help="Graph snapshot written by build")

    model = common.add_argument_group("model")
    model.add_argument("--d", type=int, help="Feature dimension (default: 128)")
    model.add_argument("--max-hops", type=int, help="Half-path length (default: 2)")
    model.add_argument("--k", type=int, help="Number of clusters")
    model.add_argument("--head", choices=["popularity", "angle"], help="Pair head")
    model.add_argument("--epochs", type=int, help="Training epochs")
    model.add_argument("--lr", type=float, help="SGD learning rate")
    model.add_argument("--patience", type=int, help="Early-stopping patience")

    synth = common.add_argument_group("synth")
    synth.add_argument("--classes", type=int, help="Number of planted classes")
    synth.add_argument("--per-class", type=int, help="Instances per class")
    synth.add_argument("--p-in", type=float, help="Within-class element probability")
    synth.add_argument("--p-out", type=float, help="Cross-class element probability")

    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Debug logs")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Warnings only")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kiesgcn",
        description="HIN event similarity (KIES), PP-GCN event detection "
        "and KIES clustering",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Generate a planted-class corpus
  %(prog)s synth --out-dir data --classes 20 --per-class 5

  # Train, then detect on the held-out split
  %(prog)s train --corpus data/corpus.jsonl --relations data/relations.tsv
  %(prog)s detect --corpus data/corpus.jsonl --relations data/relations.tsv \\
      --checkpoint out/model.json

  # Cluster with weights learned on another corpus
  %(prog)s cluster --corpus data/corpus.jsonl --k 20 --weights other/weights.json
        """,
    )
    common = _common_parser()
    commands = parser.add_subparsers(dest="command", required=True)
    helps = {
        "synth": "Generate a synthetic corpus",
        "build": "Build the HIN, catalog and Dice cache",
        "train": "Train PP-GCN",
        "detect": "Predict event classes of the test split",
        "cluster": "Cluster events by KIES distance",
        "inspect": "Print graph and catalog statistics",
    }
    for name in COMMANDS:
        commands.add_parser(name, parents=[common], help=helps[name])
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Flag values as a partial config document (unset flags are None)."""
    return {
        "out_dir": args.out_dir,
        "seed": args.seed,
        "corpus": args.corpus,
        "relations": args.relations,
        "catalog": args.catalog,
        "weights": args.weights,
        "checkpoint": args.checkpoint,
        "embeddings": args.embeddings,
        "graph": args.graph,
        "d": args.d,
        "max_hops": args.max_hops,
        "k": args.k,
        "train": {
            "head": args.head,
            "epochs": args.epochs,
            "lr": args.lr,
            "patience": args.patience,
        },
        "synth": {
            "classes": args.classes,
            "instances_per_class": args.per_class,
            "p_in": args.p_in,
            "p_out": args.p_out,
            "seed": args.seed,
        },
    }


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _report(payload: Dict[str, Any]) -> int:
    print(json.dumps(payload, default=str), file=sys.stderr)
    return 1


def main(argv: Optional[list] = None) -> int:
    """
    Main CLI entry point.

    Args:
        argv: Command-line arguments (default: sys.argv)

    Returns:
        Exit code (0 for success, 1 for error; argparse usage errors exit 2)
    """
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        config = load_config(args.config, overrides=_overrides(args))
        COMMANDS[args.command](config)
        return 0
    except KiesGcnError as e:
        return _report(e.to_dict())
    except FileNotFoundError as e:
        return _report(
            {"error": "file_not_found", "message": str(e), "path": e.filename}
        )
    except json.JSONDecodeError as e:
        return _report({"error": "invalid_json", "message": str(e)})
    except Exception as e:
        logger.debug("Unhandled error", exc_info=True)
        return _report(
            {"error": "internal", "message": str(e), "type": type(e).__name__}
        )


if __name__ == "__main__":
    sys.exit(main())
