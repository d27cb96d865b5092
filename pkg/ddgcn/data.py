"""Datasets of precomputed feature vectors with (possibly incomplete) label sets.

Dataset files are JSON Lines, one sample per line::

    {"id": "train-00000", "features": [0.1, -2.3], "labels": ["Acne", "Comedo"]}

The synthetic generator plants label clusters and reproduces the
single-reader training / multi-reader test label-size regime.
"""

import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ValidationError  # pylint: disable=no-name-in-module

from ddgcn.config import SynthConfig
from ddgcn.errors import DataFormatError, NonFiniteError, ShapeError, VocabularyError
from ddgcn.graphbuild import LabelVocabulary, default_vocabulary
from ddgcn.proximity import ClusterSet, canonical_clusters
from ddgcn.utils.io import atomic_write_text


class DatasetRole(str, Enum):
    TRAIN = "train"
    TEST = "test"


@dataclass(frozen=True, eq=False)
class Sample:
    id: str
    features: np.ndarray
    labels: frozenset[int]

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 1:
            raise ShapeError(f"sample {self.id}: features must be a vector")
        if not np.isfinite(features).all():
            raise NonFiniteError(f"sample {self.id} features")
        if not self.labels:
            raise DataFormatError(f"sample {self.id} has no labels")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", frozenset(int(label) for label in self.labels))


@dataclass(eq=False)
class Dataset:
    vocab: LabelVocabulary
    samples: tuple[Sample, ...]
    role: DatasetRole = DatasetRole.TRAIN
    _features: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        self.samples = tuple(self.samples)
        if not self.samples:
            raise DataFormatError("dataset holds no samples")
        d_feat = self.samples[0].features.shape[0]
        for sample in self.samples:
            if sample.features.shape[0] != d_feat:
                raise ShapeError(
                    f"sample {sample.id} has {sample.features.shape[0]} features, expected {d_feat}"
                )
            if max(sample.labels) >= len(self.vocab) or min(sample.labels) < 0:
                raise VocabularyError(f"sample {sample.id} has a label outside the vocabulary")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def d_feat(self) -> int:
        return int(self.samples[0].features.shape[0])

    def features(self) -> np.ndarray:
        """n x d_feat matrix of all feature vectors, in sample order."""
        if self._features is None:
            self._features = np.stack([sample.features for sample in self.samples])
        return self._features

    def label_sets(self) -> list[frozenset[int]]:
        return [sample.labels for sample in self.samples]

    def label_names(self, sample: Sample) -> list[str]:
        return [self.vocab.labels[label] for label in sorted(sample.labels)]


def label_matrix(dataset: Dataset) -> np.ndarray:
    """n x C 0/1 matrix with row i set at the labels of sample i."""
    matrix = np.zeros((len(dataset), len(dataset.vocab)), dtype=np.int64)
    for row, sample in enumerate(dataset.samples):
        matrix[row, sorted(sample.labels)] = 1
    return matrix


class _SampleRecord(BaseModel):
    id: str
    features: list[float]
    labels: list[str]


def load_dataset(
    path: str | Path, vocab: LabelVocabulary, role: DatasetRole = DatasetRole.TRAIN
) -> Dataset:
    """Parse a JSON Lines dataset file, keeping sample order.

    Raises:
        DataFormatError: On a malformed line (with its line number), an empty
            file or feature vectors of inconsistent length.
        VocabularyError: On a label outside ``vocab``.
    """
    samples: list[Sample] = []
    with open(path, encoding="utf8") as file:
        try:
            for lineno, line in enumerate(file, start=1):
                if not line.strip():
                    continue
                try:
                    record = _SampleRecord.model_validate_json(line)
                except ValidationError as err:
                    raise DataFormatError(str(err).replace("\n", " "), line=lineno) from err
                try:
                    labels = frozenset(vocab.resolve(label) for label in record.labels)
                except VocabularyError as err:
                    raise VocabularyError(f"line {lineno}: {err}") from err
                if not labels:
                    raise DataFormatError(f"sample {record.id} has no labels", line=lineno)
                width = len(record.features)
                if samples and width != samples[0].features.shape[0]:
                    raise DataFormatError(
                        f"expected {samples[0].features.shape[0]} features, got {width}",
                        line=lineno,
                    )
                features = np.asarray(record.features, dtype=np.float64)
                samples.append(Sample(record.id, features, labels))
        except UnicodeDecodeError as err:
            raise DataFormatError(f"{path} is not valid UTF-8: {err.reason}") from err
    if not samples:
        raise DataFormatError(f"{path} holds no samples")
    logging.info(f"Loaded {len(samples)} samples from {path}")
    return Dataset(vocab, tuple(samples), role)


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write ``dataset`` as JSON Lines; floats use their shortest exact decimal form."""
    lines = [
        _SampleRecord(
            id=sample.id,
            features=sample.features.tolist(),
            labels=dataset.label_names(sample),
        ).model_dump_json()
        for sample in dataset.samples
    ]
    atomic_write_text(path, "\n".join(lines) + "\n")


class SynthResult(NamedTuple):
    train: Dataset
    test: Dataset
    true_groups: ClusterSet
    complete_train_labels: list[frozenset[int]]
    prototypes: np.ndarray


def synthetic_vocabulary(size: int) -> LabelVocabulary:
    """First ``size`` shipped conditions, or generated names beyond 80."""
    shipped = default_vocabulary()
    if size <= len(shipped):
        return shipped.head(size)
    return LabelVocabulary(tuple(f"condition_{pos:03d}" for pos in range(size)))


def _draw_size(rng: np.random.Generator, distribution: Mapping[int, float]) -> int | None:
    """Draw a label-set size; ``None`` means the remainder mass (keep all)."""
    draw = rng.random()
    cumulative = 0.0
    for size, prob in distribution.items():
        cumulative += prob
        if draw < cumulative:
            return size
    return None


def _split(
    rng: np.random.Generator,
    cfg: SynthConfig,
    count: int,
    clusters: Sequence[np.ndarray],
    prototypes: np.ndarray,
    label_dirs: np.ndarray,
    mask: Mapping[int, float],
) -> tuple[np.ndarray, list[frozenset[int]], list[frozenset[int]]]:
    assignment = rng.integers(len(clusters), size=count)
    complete_sets: list[frozenset[int]] = []
    kept_sets: list[frozenset[int]] = []
    for cluster in assignment:
        members = clusters[cluster]
        size = min(_draw_size(rng, cfg.complete_sizes) or len(members), len(members))
        complete = np.sort(rng.choice(members, size=size, replace=False))
        keep = _draw_size(rng, mask)
        if keep is None or keep >= len(complete):
            kept = complete
        else:
            kept = rng.choice(complete, size=keep, replace=False)
        complete_sets.append(frozenset(int(label) for label in complete))
        kept_sets.append(frozenset(int(label) for label in kept))

    features = prototypes[assignment].copy()
    if cfg.label_signal > 0:
        for row, complete in enumerate(complete_sets):
            features[row] += cfg.label_signal * label_dirs[sorted(complete)].mean(axis=0)
    features += cfg.sigma * rng.normal(size=features.shape)
    return features, complete_sets, kept_sets


def _as_dataset(
    vocab: LabelVocabulary,
    role: DatasetRole,
    features: np.ndarray,
    label_sets: Iterable[frozenset[int]],
) -> Dataset:
    samples = tuple(
        Sample(f"{role.value}-{row:05d}", features[row], labels)
        for row, labels in enumerate(label_sets)
    )
    return Dataset(vocab, samples, role)


def generate_synthetic(cfg: SynthConfig, vocab: LabelVocabulary | None = None) -> SynthResult:
    """Planted-cluster train/test datasets with masked training labels.

    Labels are partitioned into ``n_clusters`` groups. Every sample picks a
    group, a complete label set inside it and a feature vector equal to the
    group prototype plus isotropic noise. Training label sets are truncated
    per ``cfg.train_mask``, test sets per ``cfg.test_mask``; survivors are a
    uniformly random subset and mass left over keeps the complete set.

    Raises:
        ShapeError: If ``vocab`` does not hold ``cfg.C`` labels.
    """
    vocab = vocab or synthetic_vocabulary(cfg.C)
    if len(vocab) != cfg.C:
        raise ShapeError(f"vocabulary has {len(vocab)} labels, config asks for {cfg.C}")

    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(cfg.C)
    clusters = [np.sort(part) for part in np.array_split(order, cfg.n_clusters)]
    prototypes = rng.normal(size=(cfg.n_clusters, cfg.d_feat))
    label_dirs = rng.normal(size=(cfg.C, cfg.d_feat))

    train_x, train_complete, train_kept = _split(
        rng, cfg, cfg.n_train, clusters, prototypes, label_dirs, cfg.train_mask
    )
    test_x, _, test_kept = _split(
        rng, cfg, cfg.n_test, clusters, prototypes, label_dirs, cfg.test_mask
    )

    singles = sum(len(labels) == 1 for labels in train_kept) / cfg.n_train
    logging.info(
        f"Synthesized {cfg.n_train} train / {cfg.n_test} test samples over {cfg.C} labels "
        f"in {cfg.n_clusters} clusters; {singles:.3f} of training samples single-labeled"
    )
    return SynthResult(
        train=_as_dataset(vocab, DatasetRole.TRAIN, train_x, train_kept),
        test=_as_dataset(vocab, DatasetRole.TEST, test_x, test_kept),
        true_groups=ClusterSet(canonical_clusters(clusters), threshold=None),
        complete_train_labels=train_complete,
        prototypes=prototypes,
    )
