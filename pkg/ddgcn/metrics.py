"""Multi-label evaluation metrics.

Conventions shared by every metric here:

- ``scores`` and ``targets`` are n x C arrays, targets are 0/1.
- ranking ties resolve to the lowest label index (top-n, one-error) or the
  lowest sample index (average precision).
- ranking loss counts a relevant label scored equal to an irrelevant one as
  mis-ordered.
- Hamming loss binarizes with ``score > threshold``.
"""

import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Protocol

import numpy as np
from pydantic import Field

from ddgcn import const
from ddgcn.config import DdgcnModel
from ddgcn.data import Dataset, label_matrix
from ddgcn.errors import MetricDomainError, ShapeError
from ddgcn.utils.io import atomic_write_text, read_text


class Scorer(Protocol):
    def scores(self, features: np.ndarray) -> np.ndarray: ...


def _check(scores: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    targets = np.asarray(targets)
    if scores.ndim != 2 or scores.shape != targets.shape:
        raise ShapeError(f"scores {scores.shape} and targets {targets.shape} must be equal n x C")
    if scores.shape[0] < 1:
        raise ShapeError("need at least one sample")
    if not np.isfinite(scores).all():
        raise MetricDomainError("scores must be finite")
    if not np.isin(targets, (0, 1)).all():
        raise MetricDomainError("targets must be 0 or 1")
    return scores, targets.astype(np.int64)


def _ranking(scores: np.ndarray) -> np.ndarray:
    """Label indices per row, best first, ties to the lowest index."""
    return np.argsort(-scores, axis=1, kind="stable")


def binarize(scores: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    return (np.asarray(scores) > threshold).astype(np.int64)


def hamming_loss(pred_binary: np.ndarray, targets: np.ndarray) -> float:
    """Mean disagreement over all n x C positions."""
    pred_binary, targets = _check(pred_binary, targets)
    if not np.isin(pred_binary, (0, 1)).all():
        raise MetricDomainError("predictions must be 0 or 1")
    return float(np.mean(pred_binary != targets))


def ranking_loss_rows(scores: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row ranking loss and the mask of rows where it is defined."""
    scores, targets = _check(scores, targets)
    relevant = targets.sum(axis=1)
    valid = (relevant > 0) & (relevant < targets.shape[1])
    misordered = scores[:, :, None] <= scores[:, None, :]
    pairs = (targets[:, :, None] == 1) & (targets[:, None, :] == 0)
    counts = (misordered & pairs).sum(axis=(1, 2))
    denominator = relevant * (targets.shape[1] - relevant)
    values = np.where(valid, counts / np.maximum(denominator, 1), np.nan)
    return values, valid


def ranking_loss(scores: np.ndarray, targets: np.ndarray) -> float:
    """Average fraction of (relevant, irrelevant) label pairs scored in the wrong order.

    Raises:
        MetricDomainError: Naming the first row whose targets are all 0 or all 1.
    """
    values, valid = ranking_loss_rows(scores, targets)
    if not valid.all():
        row = int(np.flatnonzero(~valid)[0])
        raise MetricDomainError(f"row {row} needs at least one relevant and one irrelevant label")
    return float(values.mean())


def _require_relevant(targets: np.ndarray) -> None:
    empty = np.flatnonzero(targets.sum(axis=1) == 0)
    if empty.size:
        raise MetricDomainError(f"row {int(empty[0])} has no relevant label")


def one_error(scores: np.ndarray, targets: np.ndarray) -> float:
    """Fraction of samples whose top-scored label is not relevant."""
    scores, targets = _check(scores, targets)
    _require_relevant(targets)
    top = np.argmax(scores, axis=1)
    return float(np.mean(targets[np.arange(len(top)), top] == 0))


def top_n_accuracy(scores: np.ndarray, targets: np.ndarray, n_rank: int) -> float:
    """Fraction of samples whose ``n_rank`` best labels hit the relevant set.

    Raises:
        MetricDomainError: If ``n_rank`` is outside [1, C].
    """
    scores, targets = _check(scores, targets)
    if not 1 <= n_rank <= scores.shape[1]:
        raise MetricDomainError(f"n_rank must be within [1, {scores.shape[1]}], got {n_rank}")
    top = _ranking(scores)[:, :n_rank]
    hits = np.take_along_axis(targets, top, axis=1).any(axis=1)
    return float(np.mean(hits))


def average_precision_per_class(
    scores: np.ndarray, targets: np.ndarray
) -> tuple[dict[int, float], list[int]]:
    """Rank-precision AP for every class with a positive, plus the skipped classes."""
    scores, targets = _check(scores, targets)
    ranks = np.arange(1, scores.shape[0] + 1)
    aps: dict[int, float] = {}
    skipped: list[int] = []
    for label in range(scores.shape[1]):
        order = np.argsort(-scores[:, label], kind="stable")
        hits = targets[order, label] == 1
        if not hits.any():
            skipped.append(label)
            continue
        precision = np.cumsum(hits)[hits] / ranks[hits]
        aps[label] = float(precision.mean())
    return aps, skipped


def mean_average_precision(scores: np.ndarray, targets: np.ndarray) -> float:
    """Unweighted mean of per-class AP over classes with at least one positive.

    Raises:
        MetricDomainError: If no class has a positive sample.
    """
    aps, skipped = average_precision_per_class(scores, targets)
    if not aps:
        raise MetricDomainError("no class has a positive sample")
    if skipped:
        logging.info(f"mAP skipped {len(skipped)} classes without positives: {skipped}")
    return float(np.mean(list(aps.values())))


class MetricsReport(DdgcnModel):
    """One row of the comparison tables."""

    top1_acc: float
    top3_acc: float
    top5_acc: float
    mean_ap: float = Field(alias="map")
    hamming_loss: float
    ranking_loss: float | None
    one_error: float
    n: int
    n_labels: int = Field(alias="C")
    threshold: float
    excluded_rows: dict[str, int] = {}
    skipped_classes: list[int] = []
    extra_top_n: dict[str, float] = {}

    def to_json(self) -> str:
        return self.model_dump_json(indent=2, by_alias=True)


def evaluate_scores(
    scores: np.ndarray,
    targets: np.ndarray,
    threshold: float = 0.5,
    extra_ranks: Sequence[int] = (),
) -> MetricsReport:
    """Assemble a MetricsReport from a score matrix.

    Rows that break a metric's precondition are left out of that metric only
    and counted in ``excluded_rows``.
    """
    scores, targets = _check(scores, targets)
    size = scores.shape[1]
    has_relevant = targets.sum(axis=1) > 0
    if not has_relevant.any():
        raise MetricDomainError("no row has a relevant label")
    ranked_scores, ranked_targets = scores[has_relevant], targets[has_relevant]

    def top(rank: int) -> float:
        return top_n_accuracy(ranked_scores, ranked_targets, min(rank, size))

    rl_values, rl_valid = ranking_loss_rows(scores, targets)
    aps, skipped = average_precision_per_class(scores, targets)
    if not aps:
        raise MetricDomainError("no class has a positive sample")
    excluded = {
        "ranking_loss": int((~rl_valid).sum()),
        "one_error": int((~has_relevant).sum()),
        "top_n": int((~has_relevant).sum()),
    }
    if any(excluded.values()):
        logging.warning(f"Rows excluded per metric: {excluded}")

    return MetricsReport(
        top1_acc=top(const.REPORT_RANKS[0]),
        top3_acc=top(const.REPORT_RANKS[1]),
        top5_acc=top(const.REPORT_RANKS[2]),
        mean_ap=float(np.mean(list(aps.values()))),
        hamming_loss=hamming_loss(binarize(scores, threshold), targets),
        ranking_loss=float(rl_values[rl_valid].mean()) if rl_valid.any() else None,
        one_error=one_error(ranked_scores, ranked_targets),
        n=int(scores.shape[0]),
        n_labels=size,
        threshold=threshold,
        excluded_rows=excluded,
        skipped_classes=skipped,
        extra_top_n={f"top{rank}_acc": top(rank) for rank in extra_ranks},
    )


def evaluate(
    model: Scorer,
    dataset: Dataset,
    threshold: float = 0.5,
    extra_ranks: Sequence[int] = (),
) -> MetricsReport:
    """Score ``dataset`` once and compute every metric."""
    scores = model.scores(dataset.features())
    return evaluate_scores(scores, label_matrix(dataset), threshold, extra_ranks)


def save_report(report: MetricsReport, path: str | Path) -> None:
    atomic_write_text(path, report.to_json() + "\n")


def load_report(path: str | Path) -> MetricsReport:
    return MetricsReport.model_validate_json(read_text(path))
