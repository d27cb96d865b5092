"""Experiment orchestration shared by the CLI and the acceptance runs.

An ``ExperimentPipeline`` owns one train/test split and one config. It builds
label graphs, trains the linear baseline and GCN heads on them and evaluates
every head on the same test set, yielding one ``ComparisonRow`` per method.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ddgcn.config import Config, DdgcnModel, updated
from ddgcn.data import Dataset
from ddgcn.errors import ConfigurationError
from ddgcn.graphbuild import (
    DifferentialGroups,
    GraphKind,
    LabelGraph,
    PropagationMatrix,
    build_cooccurrence_graph,
    build_knowledge_graph,
    propagation_pair,
    random_graph,
)
from ddgcn.metrics import MetricsReport, evaluate
from ddgcn.model.baseline import LinearBaseline
from ddgcn.model.gcn import GcnHead, GcnModel, gcn_forward, init_model
from ddgcn.model.train import TrainHistory, fit_linear_baseline, train
from ddgcn.proximity import (
    ClusterSet,
    agreement_score,
    extract_clusters,
    proximity_delta,
    proximity_matrix,
)


class Method(str, Enum):
    """Rows of the comparison table."""

    BASELINE = "baseline"
    COOCCURRENCE = "cooccurrence"
    KNOWLEDGE = "knowledge"
    RANDOM = "random"

    @property
    def title(self) -> str:
        if self is Method.BASELINE:
            return "Baseline (linear head)"
        return f"GCN ({self.value} graph)"


@dataclass
class ComparisonRow:
    method: Method
    report: MetricsReport
    history: TrainHistory
    edge_count: int | None = None


def build_graph(
    kind: GraphKind,
    dataset: Dataset,
    config: Config,
    groups: tuple[DifferentialGroups, DifferentialGroups] | None = None,
) -> LabelGraph:
    """Build the label graph of ``kind`` over ``dataset.vocab``.

    Raises:
        ConfigurationError: If a knowledge graph is requested without groups.
    """
    if kind is GraphKind.COOCCURRENCE:
        return build_cooccurrence_graph(dataset.label_sets(), dataset.vocab, config.graph.t)
    if kind is GraphKind.KNOWLEDGE:
        if groups is None:
            raise ConfigurationError("a knowledge graph needs differential groups from two annotators")
        return build_knowledge_graph(*groups, dataset.vocab)
    return random_graph(len(dataset.vocab), config.graph.density, config.train.seed)


@dataclass
class ProximityAnalysis:
    """Node proximity of the label embeddings (GCN-0) and classifiers (GCN-2)."""

    p0: np.ndarray
    p2: np.ndarray
    delta: np.ndarray
    clusters0: ClusterSet
    clusters2: ClusterSet
    agreement0: float | None = None
    agreement2: float | None = None


def analyze_proximity(
    model: GcnModel,
    P1: PropagationMatrix,
    P2: PropagationMatrix,
    threshold: float,
    labels: tuple[str, ...] | None = None,
    planted: ClusterSet | None = None,
) -> ProximityAnalysis:
    """Proximity matrices before and after the GCN and the clusters they induce."""
    W_tilde, _ = gcn_forward(model, P1, P2)
    p0 = proximity_matrix(model.Z, labels)
    p2 = proximity_matrix(W_tilde, labels)
    analysis = ProximityAnalysis(
        p0=p0,
        p2=p2,
        delta=proximity_delta(p0, p2),
        clusters0=extract_clusters(p0, threshold),
        clusters2=extract_clusters(p2, threshold),
    )
    if planted is not None:
        analysis.agreement0 = agreement_score(analysis.clusters0, planted)
        analysis.agreement2 = agreement_score(analysis.clusters2, planted)
        logging.info(
            f"Agreement with planted groups: GCN-0 {analysis.agreement0:.4f}, "
            f"GCN-2 {analysis.agreement2:.4f}"
        )
    return analysis


@dataclass
class ExperimentPipeline:
    """Train and evaluate every requested method on one train/test split."""

    config: Config
    train_set: Dataset
    test_set: Dataset
    embeddings: np.ndarray | None = None
    groups: tuple[DifferentialGroups, DifferentialGroups] | None = None
    heads: dict[Method, GcnHead | LinearBaseline] = field(default_factory=dict)

    def __post_init__(self) -> None:
        # the classifier width always follows the features on disk
        if self.config.gcn.d_feat != self.train_set.d_feat:
            logging.info(f"Using d_feat={self.train_set.d_feat} from the training features")
            self.config = updated(self.config, gcn=updated(self.config.gcn, d_feat=self.train_set.d_feat))

    def _evaluate(self, scorer: GcnHead | LinearBaseline) -> MetricsReport:
        settings = self.config.eval
        return evaluate(scorer, self.test_set, settings.threshold, settings.extra_ranks)

    def run_baseline(self) -> ComparisonRow:
        baseline, history = fit_linear_baseline(self.train_set, self.config.train)
        self.heads[Method.BASELINE] = baseline
        return ComparisonRow(Method.BASELINE, self._evaluate(baseline), history)

    def run_gcn(self, kind: GraphKind) -> ComparisonRow:
        graph = build_graph(kind, self.train_set, self.config, self.groups)
        P1, P2 = propagation_pair(graph, self.config.gcn.orders, self.config.graph.filter)
        model = init_model(
            self.config.gcn, len(self.train_set.vocab), self.config.train.seed, self.embeddings
        )
        model, history = train(self.train_set, P1, P2, model, self.config.train)
        head = GcnHead(model, P1, P2)
        method = Method(kind.value)
        self.heads[method] = head
        return ComparisonRow(method, self._evaluate(head), history, graph.edge_count())

    def run(self, kinds: list[GraphKind], with_baseline: bool = True) -> list[ComparisonRow]:
        rows = [self.run_baseline()] if with_baseline else []
        rows.extend(self.run_gcn(kind) for kind in kinds)
        for row in rows:
            logging.info(
                f"{row.method.title}: mAP={row.report.mean_ap:.4f} top1={row.report.top1_acc:.4f}"
            )
        return rows


class ProximitySummary(DdgcnModel):
    threshold: float
    clusters_gcn0: int
    clusters_gcn2: int
    agreement_gcn0: float | None = None
    agreement_gcn2: float | None = None

    @classmethod
    def of(cls, analysis: ProximityAnalysis) -> "ProximitySummary":
        return cls(
            threshold=analysis.clusters2.threshold,
            clusters_gcn0=len(analysis.clusters0.clusters),
            clusters_gcn2=len(analysis.clusters2.clusters),
            agreement_gcn0=analysis.agreement0,
            agreement_gcn2=analysis.agreement2,
        )


class ComparisonRecord(DdgcnModel):
    """``compare.json``: one report per method, in table order."""

    reports: dict[str, MetricsReport]
    edges: dict[str, int]

    @classmethod
    def of(cls, rows: list[ComparisonRow]) -> "ComparisonRecord":
        return cls(
            reports={row.method.value: row.report for row in rows},
            edges={row.method.value: row.edge_count for row in rows if row.edge_count is not None},
        )

    def to_json(self) -> str:
        return self.model_dump_json(indent=2, by_alias=True)
