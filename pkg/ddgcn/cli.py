"""This module implements the command line interface for ddgcn."""

import logging
from collections.abc import Iterator
from contextlib import contextmanager
from enum import Enum
from pathlib import Path

import typer
from dotenv import load_dotenv
from rich import traceback
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from ddgcn import const
from ddgcn.config import Config, PropagationFilter, config_path_from_env, read_config, updated
from ddgcn.context import DdgcnContext
from ddgcn.data import (
    Dataset,
    DatasetRole,
    Sample,
    generate_synthetic,
    label_matrix,
    load_dataset,
    save_dataset,
)
from ddgcn.errors import ConfigurationError, DdgcnError, GraphError
from ddgcn.graphbuild import (
    DifferentialGroups,
    GraphKind,
    LabelGraph,
    LabelVocabulary,
    PropagationMatrix,
    build_cooccurrence_graph,
    build_knowledge_graph,
    default_groups_path,
    default_vocabulary,
    list_annotators,
    load_differential_groups,
    load_graph,
    load_vocabulary,
    propagation_pair,
    random_graph,
    save_graph,
    save_vocabulary,
)
from ddgcn.metrics import evaluate, evaluate_scores, save_report
from ddgcn.model.checkpoint import load_embeddings, read_checkpoint, save_checkpoint, save_history
from ddgcn.model.gcn import GcnHead, GcnModel, init_model
from ddgcn.model.train import fit_linear_baseline, train as train_gcn
from ddgcn.pipeline import (
    ComparisonRecord,
    ComparisonRow,
    ExperimentPipeline,
    ProximitySummary,
    analyze_proximity,
)
from ddgcn.proximity import load_clusters, save_clusters, save_proximity
from ddgcn.utils.io import atomic_write_text, platform_info, read_matrix_tsv

app = typer.Typer(add_completion=False)
console = Console()


def _load_env_and_config_path() -> str:
    """Load .env from CWD and return the resolved config file path."""
    env_path = Path.cwd() / ".env"
    load_dotenv(str(env_path))
    return config_path_from_env()


class ModelChoice(str, Enum):
    """Heads that ``train`` can fit."""

    GCN = "gcn"
    LINEAR = "linear"


def configure_logging(value: bool | None):
    """Set logging level."""
    traceback.install()
    if value:
        level = logging.INFO
    else:
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[
            RichHandler(
                rich_tracebacks=True,
                markup=True,
            )
        ],
        force=True,
    )
    if value:
        logging.info("Verbosity turned on! This is suitable for debugging")
        logging.info(platform_info())


def _loud_option():
    return typer.Option(
        None,
        "--loud",
        "-l",
        callback=configure_logging,
        envvar="LOUD",
        help="Increase output verbosity.",
    )


def _vocab_option():
    return typer.Option(
        None, "--vocab", help="Vocabulary file, one label per line.", show_default="shipped 80 conditions"
    )


def _seed_option():
    return typer.Option(None, "--seed", help="Random seed.", show_default="0")


def _filter_option():
    return typer.Option(
        None, "--filter", help="Basis of the order-k propagation filter.", show_default="power"
    )


@contextmanager
def _diagnostics() -> Iterator[None]:
    """Turn library failures into one ``ddgcn-error: <Class>: <message>`` line and exit 1."""
    try:
        yield
    except (DdgcnError, OSError) as err:
        message = " ".join(str(err).split())
        typer.echo(f"{const.ERROR_PREFIX}: {type(err).__name__}: {message}", err=True)
        raise typer.Exit(code=1) from err


def _context(subcommand: str, flags: dict[str, object]) -> DdgcnContext:
    config_path = _load_env_and_config_path()
    config = read_config(config_path)
    flags = {key: val for key, val in flags.items() if key != "verbose"}
    return DdgcnContext(config=config, config_path=config_path, subcommand=subcommand, flags=flags)


def _vocabulary(path: Path | None) -> LabelVocabulary:
    return load_vocabulary(path) if path else default_vocabulary()


def _groups(
    path_a: Path | None, path_b: Path | None, vocab: LabelVocabulary
) -> tuple[DifferentialGroups, DifferentialGroups]:
    """Annotator ``a`` from the first file and ``b`` from the second, or each file's sole annotator."""

    def load(path: Path | None, preferred: str) -> DifferentialGroups:
        path = path or default_groups_path()
        annotator = preferred if preferred in list_annotators(path) else None
        return load_differential_groups(path, vocab, annotator)

    return load(path_a, "a"), load(path_b, "b")


def _graph_for(path: Path, vocab: LabelVocabulary) -> LabelGraph:
    graph = load_graph(path)
    if graph.size != len(vocab):
        raise GraphError(f"graph {path} has {graph.size} nodes, vocabulary has {len(vocab)}")
    return graph


def _apply_flags(ctx: DdgcnContext, **flags) -> Config:
    """Merge the shared model and training flags into the context config."""
    cfg = ctx.config
    cfg = updated(
        cfg,
        train=updated(
            cfg.train,
            learning_rate=flags.get("lr"),
            epochs=flags.get("epochs"),
            batch_size=flags.get("batch_size"),
            seed=flags.get("seed"),
        ),
        gcn=updated(
            cfg.gcn,
            d0=flags.get("d0"),
            d1=flags.get("d1"),
            d_feat=flags.get("d_feat"),
            use_feature_adapter=flags.get("adapter"),
        ),
        graph=updated(
            cfg.graph, t=flags.get("t"), density=flags.get("density"), filter=flags.get("filter")
        ),
    )
    ctx.config = cfg
    ctx.seed = cfg.train.seed
    return cfg


def _trained_operators(
    ctx: DdgcnContext,
    graph: Path,
    labels: LabelVocabulary,
    model: GcnModel,
    trained: PropagationFilter,
    requested: PropagationFilter | None,
) -> tuple[PropagationMatrix, PropagationMatrix]:
    """Rebuild the operators a checkpoint was trained with; ``--filter`` may only repeat it."""
    if requested is not None and requested is not trained:
        raise ConfigurationError(
            f"checkpoint was trained with the {trained.value} filter, --filter asks for {requested.value}"
        )
    ctx.config = updated(ctx.config, graph=updated(ctx.config.graph, filter=trained))
    return propagation_pair(_graph_for(graph, labels), model.config.orders, trained)


@app.command()
def synth(
    out_dir: Path = typer.Option(..., "--out-dir", help="Directory for the generated files."),
    labels: int = typer.Option(None, "--labels", help="Number of labels C.", show_default="40"),
    clusters: int = typer.Option(
        None, "--clusters", help="Number of planted label clusters.", show_default="8"
    ),
    n_train: int = typer.Option(None, "--n-train", help="Training samples.", show_default="5000"),
    n_test: int = typer.Option(None, "--n-test", help="Test samples.", show_default="1000"),
    d_feat: int = typer.Option(None, "--d-feat", help="Feature dimension.", show_default="2048"),
    sigma: float = typer.Option(None, "--sigma", help="Feature noise scale.", show_default="1.0"),
    label_signal: float = typer.Option(
        None, "--label-signal", help="Weight of per-label feature directions.", show_default="0.0"
    ),
    seed: int = _seed_option(),
    verbose: bool | None = _loud_option(),  # pylint: disable=unused-argument
):
    """Generate planted-cluster train/test datasets with incomplete training labels.

    Writes vocab.txt, train.jsonl, test.jsonl, train_complete.jsonl (unmasked
    training labels) and true_groups.tsv into --out-dir.
    """
    with _diagnostics():
        ctx = _context("synth", locals())
        cfg = updated(
            ctx.config.synth,
            C=labels,
            n_clusters=clusters,
            n_train=n_train,
            n_test=n_test,
            d_feat=d_feat,
            sigma=sigma,
            label_signal=label_signal,
            seed=seed,
        )
        ctx.config = updated(ctx.config, synth=cfg)
        ctx.seed = cfg.seed
        result = generate_synthetic(cfg)

        out_dir.mkdir(parents=True, exist_ok=True)
        vocab = result.train.vocab
        complete = Dataset(
            vocab,
            tuple(
                Sample(sample.id, sample.features, complete_labels)
                for sample, complete_labels in zip(result.train.samples, result.complete_train_labels)
            ),
            DatasetRole.TRAIN,
        )
        save_vocabulary(vocab, out_dir / "vocab.txt")
        save_dataset(result.train, out_dir / "train.jsonl")
        save_dataset(result.test, out_dir / "test.jsonl")
        save_dataset(complete, out_dir / "train_complete.jsonl")
        save_clusters(result.true_groups, vocab.labels, out_dir / "true_groups.tsv")
        ctx.record_run(out_dir)
    console.print(
        f"Wrote {cfg.n_train} training and {cfg.n_test} test samples over {cfg.C} labels to {out_dir}"
    )


@app.command("build-graph")
def build_graph(
    graph: Path = typer.Option(..., "--graph", help="Output graph file."),
    source: GraphKind = typer.Option(GraphKind.COOCCURRENCE, "--source", help="Graph source."),
    dataset: Path = typer.Option(
        None, "--dataset", help="Training dataset (required for cooccurrence)."
    ),
    vocab: Path = _vocab_option(),
    groups_a: Path = typer.Option(
        None, "--groups-a", help="Groups file of the first annotator.", show_default="shipped groups"
    ),
    groups_b: Path = typer.Option(
        None, "--groups-b", help="Groups file of the second annotator.", show_default="shipped groups"
    ),
    t: float = typer.Option(
        None, "--t", help="Inclusive co-occurrence threshold.", show_default=str(const.DEFAULT_T)
    ),
    density: float = typer.Option(
        None, "--density", help="Edge probability of a random graph.", show_default="0.1"
    ),
    seed: int = _seed_option(),
    verbose: bool | None = _loud_option(),  # pylint: disable=unused-argument
):
    """Build a label graph from co-occurrences, differential groups or at random."""
    with _diagnostics():
        ctx = _context("build-graph", locals())
        cfg = _apply_flags(ctx, t=t, density=density, seed=seed)
        labels = _vocabulary(vocab)
        if source is GraphKind.COOCCURRENCE:
            if dataset is None:
                raise ConfigurationError("--dataset is required for --source cooccurrence")
            samples = load_dataset(dataset, labels)
            result = build_cooccurrence_graph(samples.label_sets(), labels, cfg.graph.t)
        elif source is GraphKind.KNOWLEDGE:
            result = build_knowledge_graph(*_groups(groups_a, groups_b, labels), labels)
        else:
            result = random_graph(len(labels), cfg.graph.density, cfg.train.seed)
        save_graph(result, graph)
        ctx.record_run(graph)
    console.print(f"Wrote {source.value} graph with {result.edge_count()} edges to {graph}")


@app.command()
def train(
    dataset: Path = typer.Option(..., "--dataset", help="Training dataset."),
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Output checkpoint file."),
    model: ModelChoice = typer.Option(ModelChoice.GCN, "--model", help="Head to train."),
    graph: Path = typer.Option(None, "--graph", help="Label graph (required for gcn)."),
    vocab: Path = _vocab_option(),
    epochs: int = typer.Option(
        None, "--epochs", help="Training epochs.", show_default=str(const.DEFAULT_EPOCHS)
    ),
    lr: float = typer.Option(None, "--lr", help="Learning rate.", show_default=str(const.DEFAULT_LR)),
    batch_size: int = typer.Option(None, "--batch-size", help="Mini-batch size.", show_default="32"),
    seed: int = _seed_option(),
    d0: int = typer.Option(
        None, "--d0", help="Label embedding width.", show_default=str(const.DEFAULT_D0)
    ),
    d1: int = typer.Option(
        None, "--d1", help="Hidden GCN layer width.", show_default=str(const.DEFAULT_D1)
    ),
    adapter: bool = typer.Option(
        None, "--adapter/--no-adapter", help="Train a linear feature adapter.", show_default="adapter"
    ),
    embeddings: Path = typer.Option(
        None, "--embeddings", help="C x d0 label embeddings (TSV).", show_default="random"
    ),
    filter_: PropagationFilter = _filter_option(),
    val_dataset: Path = typer.Option(
        None, "--val-dataset", help="Dataset for per-epoch validation mAP."
    ),
    verbose: bool | None = _loud_option(),  # pylint: disable=unused-argument
):
    """Train the GCN head or the linear baseline; writes a checkpoint and its history.

    The feature width d_feat (2048 for the reference backbone) is taken from
    the dataset.
    """
    with _diagnostics():
        ctx = _context("train", locals())
        labels = _vocabulary(vocab)
        samples = load_dataset(dataset, labels)
        val = load_dataset(val_dataset, labels, DatasetRole.TEST) if val_dataset else None
        cfg = _apply_flags(
            ctx,
            lr=lr,
            epochs=epochs,
            batch_size=batch_size,
            seed=seed,
            d0=d0,
            d1=d1,
            d_feat=samples.d_feat,
            adapter=adapter,
            filter=filter_,
        )
        if model is ModelChoice.LINEAR:
            fitted, history = fit_linear_baseline(samples, cfg.train, val_dataset=val)
        else:
            if graph is None:
                raise ConfigurationError("--graph is required for --model gcn")
            P1, P2 = propagation_pair(_graph_for(graph, labels), cfg.gcn.orders, cfg.graph.filter)
            Z = load_embeddings(embeddings, len(labels), cfg.gcn.d0) if embeddings else None
            initial = init_model(cfg.gcn, len(labels), cfg.train.seed, Z)
            fitted, history = train_gcn(samples, P1, P2, initial, cfg.train, val)
        save_checkpoint(fitted, labels, checkpoint, cfg.graph.filter)
        save_history(history, checkpoint.with_name(checkpoint.name + const.HISTORY_SUFFIX))
        ctx.record_run(checkpoint)
    console.print(f"Final training loss {history.losses[-1]:.6f}; checkpoint written to {checkpoint}")


@app.command("eval")
def eval_(
    dataset: Path = typer.Option(..., "--dataset", help="Evaluation dataset."),
    report: Path = typer.Option(..., "--report", help="Output report file (JSON)."),
    checkpoint: Path = typer.Option(None, "--checkpoint", help="Trained checkpoint."),
    graph: Path = typer.Option(None, "--graph", help="Label graph (required for gcn checkpoints)."),
    scores: Path = typer.Option(
        None, "--scores", help="Precomputed n x C scores (TSV) instead of a checkpoint."
    ),
    vocab: Path = _vocab_option(),
    threshold: float = typer.Option(
        None, "--threshold", help="Hamming loss binarization threshold.", show_default="0.5"
    ),
    top_n: list[int] = typer.Option(
        [], "--top-n", help="Extra top-n ranks to report (repeatable)."
    ),
    filter_: PropagationFilter = _filter_option(),
    verbose: bool | None = _loud_option(),  # pylint: disable=unused-argument
):
    """Score a dataset and write a metrics report."""
    with _diagnostics():
        ctx = _context("eval", locals())
        cfg = _apply_flags(ctx)
        settings = updated(cfg.eval, threshold=threshold, extra_ranks=top_n or None)
        ctx.config = updated(cfg, eval=settings)
        labels = _vocabulary(vocab)
        samples = load_dataset(dataset, labels, DatasetRole.TEST)

        if scores is not None:
            result = evaluate_scores(
                read_matrix_tsv(scores), label_matrix(samples), settings.threshold, settings.extra_ranks
            )
        elif checkpoint is not None:
            head, trained_filter = read_checkpoint(checkpoint, labels)
            if isinstance(head, GcnModel):
                if graph is None:
                    raise ConfigurationError("--graph is required for a gcn checkpoint")
                P1, P2 = _trained_operators(ctx, graph, labels, head, trained_filter, filter_)
                head = GcnHead(head, P1, P2)
            result = evaluate(head, samples, settings.threshold, settings.extra_ranks)
        else:
            raise ConfigurationError("either --checkpoint or --scores is required")
        save_report(result, report)
        ctx.record_run(report)
    console.print(
        f"top-1 {result.top1_acc:.4f}  top-5 {result.top5_acc:.4f}  mAP {result.mean_ap:.4f}"
    )


@app.command()
def proximity(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Trained gcn checkpoint."),
    graph: Path = typer.Option(..., "--graph", help="Label graph the model was trained with."),
    out_dir: Path = typer.Option(..., "--out-dir", help="Directory for matrices and clusters."),
    vocab: Path = _vocab_option(),
    threshold: float = typer.Option(
        None, "--threshold", help="Proximity threshold linking two labels.", show_default="0.5"
    ),
    true_groups: Path = typer.Option(
        None, "--true-groups", help="Planted groups to score the clusters against."
    ),
    filter_: PropagationFilter = _filter_option(),
    verbose: bool | None = _loud_option(),  # pylint: disable=unused-argument
):
    """Write GCN-0 and GCN-2 node-proximity matrices, their delta and extracted clusters."""
    with _diagnostics():
        ctx = _context("proximity", locals())
        cfg = _apply_flags(ctx)
        ctx.config = updated(cfg, eval=updated(cfg.eval, cluster_threshold=threshold))
        labels = _vocabulary(vocab)
        model, trained_filter = read_checkpoint(checkpoint, labels)
        if not isinstance(model, GcnModel):
            raise ConfigurationError(f"{checkpoint} is not a gcn checkpoint")
        P1, P2 = _trained_operators(ctx, graph, labels, model, trained_filter, filter_)
        planted = load_clusters(true_groups, labels.labels) if true_groups else None
        analysis = analyze_proximity(
            model, P1, P2, ctx.config.eval.cluster_threshold, labels.labels, planted
        )

        out_dir.mkdir(parents=True, exist_ok=True)
        save_proximity(analysis.p0, labels.labels, out_dir / "proximity_gcn0.tsv")
        save_proximity(analysis.p2, labels.labels, out_dir / "proximity_gcn2.tsv")
        save_proximity(analysis.delta, labels.labels, out_dir / "proximity_delta.tsv")
        save_clusters(analysis.clusters0, labels.labels, out_dir / "clusters_gcn0.tsv")
        save_clusters(analysis.clusters2, labels.labels, out_dir / "clusters_gcn2.tsv")
        summary = ProximitySummary.of(analysis)
        atomic_write_text(out_dir / "proximity.json", summary.model_dump_json(indent=2) + "\n")
        ctx.record_run(out_dir)
    console.print(
        f"{summary.clusters_gcn0} clusters at GCN-0, {summary.clusters_gcn2} at GCN-2; "
        f"written to {out_dir}"
    )


def _comparison_table(rows: list[ComparisonRow]) -> Table:
    table = Table(title="Baseline vs GCN heads")
    table.add_column("Method")
    for column in ("top-1", "top-3", "top-5", "mAP", "Hamming", "Ranking", "One-error", "Edges"):
        table.add_column(column, justify="right")
    for row in rows:
        rep = row.report
        metrics = (
            rep.top1_acc,
            rep.top3_acc,
            rep.top5_acc,
            rep.mean_ap,
            rep.hamming_loss,
            rep.ranking_loss,
            rep.one_error,
        )
        edges = "-" if row.edge_count is None else str(row.edge_count)
        cells = ("-" if value is None else f"{value:.3f}" for value in metrics)
        table.add_row(row.method.title, *cells, edges)
    return table


@app.command()
def compare(
    dataset: Path = typer.Option(..., "--dataset", help="Training dataset."),
    test_dataset: Path = typer.Option(..., "--test-dataset", help="Evaluation dataset."),
    out_dir: Path = typer.Option(..., "--out-dir", help="Directory for compare.json."),
    source: list[GraphKind] = typer.Option(
        [GraphKind.COOCCURRENCE], "--source", help="Graph sources for GCN rows (repeatable)."
    ),
    with_random: bool = typer.Option(
        False, "--with-random", help="Add a GCN row trained on a random graph."
    ),
    vocab: Path = _vocab_option(),
    groups_a: Path = typer.Option(
        None, "--groups-a", help="Groups file of the first annotator.", show_default="shipped groups"
    ),
    groups_b: Path = typer.Option(
        None, "--groups-b", help="Groups file of the second annotator.", show_default="shipped groups"
    ),
    t: float = typer.Option(
        None, "--t", help="Inclusive co-occurrence threshold.", show_default=str(const.DEFAULT_T)
    ),
    density: float = typer.Option(
        None, "--density", help="Edge probability of the random graph.", show_default="0.1"
    ),
    seed: int = _seed_option(),
    epochs: int = typer.Option(
        None, "--epochs", help="Training epochs.", show_default=str(const.DEFAULT_EPOCHS)
    ),
    lr: float = typer.Option(None, "--lr", help="Learning rate.", show_default=str(const.DEFAULT_LR)),
    batch_size: int = typer.Option(None, "--batch-size", help="Mini-batch size.", show_default="32"),
    d0: int = typer.Option(
        None, "--d0", help="Label embedding width.", show_default=str(const.DEFAULT_D0)
    ),
    d1: int = typer.Option(
        None, "--d1", help="Hidden GCN layer width.", show_default=str(const.DEFAULT_D1)
    ),
    adapter: bool = typer.Option(
        None, "--adapter/--no-adapter", help="Train a linear feature adapter.", show_default="adapter"
    ),
    embeddings: Path = typer.Option(
        None, "--embeddings", help="C x d0 label embeddings (TSV).", show_default="random"
    ),
    threshold: float = typer.Option(
        None, "--threshold", help="Hamming loss binarization threshold.", show_default="0.5"
    ),
    top_n: list[int] = typer.Option(
        [], "--top-n", help="Extra top-n ranks to report (repeatable)."
    ),
    filter_: PropagationFilter = _filter_option(),
    verbose: bool | None = _loud_option(),  # pylint: disable=unused-argument
):
    """Train the linear baseline and GCN heads on the same data and compare them."""
    with _diagnostics():
        ctx = _context("compare", locals())
        labels = _vocabulary(vocab)
        train_set = load_dataset(dataset, labels)
        test_set = load_dataset(test_dataset, labels, DatasetRole.TEST)
        cfg = _apply_flags(
            ctx,
            t=t,
            density=density,
            seed=seed,
            epochs=epochs,
            lr=lr,
            batch_size=batch_size,
            d0=d0,
            d1=d1,
            d_feat=train_set.d_feat,
            adapter=adapter,
            filter=filter_,
        )
        ctx.config = updated(
            cfg, eval=updated(cfg.eval, threshold=threshold, extra_ranks=top_n or None)
        )

        kinds = list(dict.fromkeys([*source, *([GraphKind.RANDOM] if with_random else [])]))
        groups = _groups(groups_a, groups_b, labels) if GraphKind.KNOWLEDGE in kinds else None
        Z = load_embeddings(embeddings, len(labels), ctx.config.gcn.d0) if embeddings else None
        pipeline = ExperimentPipeline(ctx.config, train_set, test_set, Z, groups)
        rows = pipeline.run(kinds)

        out_dir.mkdir(parents=True, exist_ok=True)
        atomic_write_text(out_dir / "compare.json", ComparisonRecord.of(rows).to_json() + "\n")
        ctx.record_run(out_dir)
    console.print(_comparison_table(rows))
