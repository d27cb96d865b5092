"""Node-proximity analysis of label embeddings before and after the GCN.

Proximity between two node vectors is their centered cosine (Pearson
correlation). Clusters are the connected components of the graph that links
every pair with proximity at or above a threshold.
"""

import itertools
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ddgcn.errors import DataFormatError, ShapeError, ZeroCenteredNormError
from ddgcn.utils.io import atomic_write_text, read_text, write_matrix_tsv
from ddgcn.utils.text import join_labels, split_labels


def canonical_clusters(clusters: Iterable[Iterable[int]]) -> tuple[tuple[int, ...], ...]:
    """Sort members and order clusters by their smallest member."""
    normalized = [tuple(sorted(int(m) for m in cluster)) for cluster in clusters]
    return tuple(sorted((c for c in normalized if c), key=lambda cluster: cluster[0]))


@dataclass(frozen=True)
class ClusterSet:
    """Partition of label indices; ``threshold`` is None for planted groups."""

    clusters: tuple[tuple[int, ...], ...]
    threshold: float | None = None

    def __post_init__(self) -> None:
        members = [m for cluster in self.clusters for m in cluster]
        if len(members) != len(set(members)):
            raise ShapeError("clusters must be disjoint")
        if sorted(members) != list(range(len(members))):
            raise ShapeError("clusters must cover labels 0..C-1")

    @property
    def size(self) -> int:
        return sum(len(cluster) for cluster in self.clusters)

    def assignment(self) -> np.ndarray:
        """Cluster number of every label."""
        owner = np.empty(self.size, dtype=np.int64)
        for number, cluster in enumerate(self.clusters):
            owner[list(cluster)] = number
        return owner


def pairwise_proximity(u: np.ndarray, v: np.ndarray) -> float:
    """Centered cosine of two equal-length vectors.

    Raises:
        ShapeError: On length mismatch or fewer than 2 entries.
        ZeroCenteredNormError: If either vector is constant.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1 or u.shape[0] < 2:
        raise ShapeError(f"need two vectors of equal length >= 2, got {u.shape} and {v.shape}")
    du = u - u.mean()
    dv = v - v.mean()
    norm_u = np.linalg.norm(du)
    norm_v = np.linalg.norm(dv)
    if norm_u == 0 or norm_v == 0:
        raise ZeroCenteredNormError("zero centered norm")
    return float(np.clip(du @ dv / (norm_u * norm_v), -1.0, 1.0))


def proximity_matrix(nodes: np.ndarray, labels: Sequence[str] | None = None) -> np.ndarray:
    """C x C centered-cosine matrix between the rows of ``nodes``.

    Raises:
        ZeroCenteredNormError: Naming the first constant row.
    """
    nodes = np.asarray(nodes, dtype=np.float64)
    if nodes.ndim != 2 or nodes.shape[1] < 2:
        raise ShapeError(f"nodes must be C x d with d >= 2, got {nodes.shape}")
    centered = nodes - nodes.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1)
    for row in np.flatnonzero(norms == 0):
        name = labels[row] if labels is not None else f"row {row}"
        raise ZeroCenteredNormError(f"zero centered norm for label {name!r}")
    unit = centered / norms[:, None]
    matrix = np.clip(unit @ unit.T, -1.0, 1.0)
    matrix = (matrix + matrix.T) / 2.0
    np.fill_diagonal(matrix, 1.0)
    return matrix


def proximity_delta(p0: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Elementwise ``p2 - p0``: the label dependency learned by the GCN."""
    if p0.shape != p2.shape:
        raise ShapeError(f"proximity sizes differ: {p0.shape} vs {p2.shape}")
    delta = p2 - p0
    np.fill_diagonal(delta, 0.0)
    return delta


def extract_clusters(p: np.ndarray, threshold: float) -> ClusterSet:
    """Connected components of the graph with edges where ``p[i][j] >= threshold``."""
    linked = np.asarray(p) >= threshold
    np.fill_diagonal(linked, False)
    _, owner = connected_components(csr_matrix(linked), directed=False)
    groups: dict[int, list[int]] = {}
    for label, component in enumerate(owner):
        groups.setdefault(int(component), []).append(label)
    return ClusterSet(canonical_clusters(groups.values()), threshold=threshold)


def agreement_score(found: ClusterSet, planted: ClusterSet) -> float:
    """Fraction of intra-group pairs co-clustered minus fraction of inter-group pairs co-clustered."""
    if found.size != planted.size:
        raise ShapeError(f"cluster sets cover {found.size} and {planted.size} labels")
    found_owner = found.assignment()
    planted_owner = planted.assignment()
    intra = [0, 0]
    inter = [0, 0]
    for i, j in itertools.combinations(range(found.size), 2):
        bucket = intra if planted_owner[i] == planted_owner[j] else inter
        bucket[0] += int(found_owner[i] == found_owner[j])
        bucket[1] += 1
    intra_rate = intra[0] / intra[1] if intra[1] else 0.0
    inter_rate = inter[0] / inter[1] if inter[1] else 0.0
    return intra_rate - inter_rate


def save_proximity(matrix: np.ndarray, labels: Sequence[str], path: str | Path) -> None:
    write_matrix_tsv(path, matrix, header=labels)


def save_clusters(clusters: ClusterSet, labels: Sequence[str], path: str | Path) -> None:
    """One ``cluster_id<TAB>label1;label2;...`` line per cluster."""
    lines = [
        f"{number}\t{join_labels(labels[m] for m in cluster)}"
        for number, cluster in enumerate(clusters.clusters)
    ]
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_clusters(path: str | Path, labels: Sequence[str]) -> ClusterSet:
    index = {label: pos for pos, label in enumerate(labels)}
    clusters = []
    for lineno, line in enumerate(read_text(path).splitlines(), start=1):
        if not line.strip():
            continue
        _, sep, members = line.partition("\t")
        if not sep:
            raise DataFormatError("expected 'cluster_id<TAB>labels'", line=lineno)
        try:
            clusters.append([index[name] for name in split_labels(members)])
        except KeyError as err:
            raise DataFormatError(f"unknown label {err.args[0]!r}", line=lineno) from err
    return ClusterSet(canonical_clusters(clusters))
