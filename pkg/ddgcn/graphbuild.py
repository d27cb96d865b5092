"""Label vocabularies, label graphs and the propagation operators built from them.

Three graph sources are supported:

- ``cooccurrence``: an edge when two labels co-appear on enough samples,
  ``C(i, j) / (C(i) + C(j)) >= t`` (inclusive).
- ``knowledge``: an edge when both annotators put the two labels in at least
  one common differential group.
- ``random``: each pair independently with a fixed probability.

Graphs are normalized with the self-loop renormalization
``D^-1/2 (A + I) D^-1/2`` and exponentiated to reach k-hop neighbours.
"""

import hashlib
import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
import yaml
from pydantic import BaseModel, ValidationError  # pylint: disable=no-name-in-module

from ddgcn import const
from ddgcn.config import PropagationFilter
from ddgcn.errors import DataFormatError, GraphError, VocabularyError
from ddgcn.utils.io import atomic_write_text, format_real, read_text
from ddgcn.utils.text import format_header, parse_header

Label = str | int


@dataclass(frozen=True)
class LabelVocabulary:
    """Ordered, duplicate-free list of condition labels."""

    labels: tuple[str, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.labels) < 2:
            raise VocabularyError(f"a vocabulary needs at least 2 labels, got {len(self.labels)}")
        index: dict[str, int] = {}
        for pos, label in enumerate(self.labels):
            if not label or label != label.strip():
                raise VocabularyError(f"invalid label {label!r} at position {pos}")
            if label in index:
                raise VocabularyError(f"duplicate label {label!r}")
            index[label] = pos
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.labels)

    def resolve(self, label: Label) -> int:
        """Position of a label given by name or by index.

        Raises:
            VocabularyError: If the label is not part of the vocabulary.
        """
        if isinstance(label, (int, np.integer)) and not isinstance(label, bool):
            if 0 <= label < len(self.labels):
                return int(label)
            raise VocabularyError(f"label index {label} outside [0, {len(self.labels)})")
        try:
            return self.index[label]
        except KeyError:
            raise VocabularyError(f"unknown label {label!r}") from None

    def digest(self) -> str:
        """sha256 over the newline-joined labels, binds checkpoints to a vocabulary."""
        return hashlib.sha256("\n".join(self.labels).encode("utf8")).hexdigest()

    def head(self, size: int) -> "LabelVocabulary":
        return LabelVocabulary(self.labels[:size])


def load_vocabulary(path: str | Path) -> LabelVocabulary:
    """Read a UTF-8 vocabulary file, one label per line; blank lines are skipped.

    Raises:
        DataFormatError: If the file is not valid UTF-8.
    """
    labels = [line.strip() for line in read_text(path).splitlines() if line.strip()]
    return LabelVocabulary(tuple(labels))


def save_vocabulary(vocab: LabelVocabulary, path: str | Path) -> None:
    atomic_write_text(path, "".join(f"{label}\n" for label in vocab.labels))


def default_vocabulary() -> LabelVocabulary:
    """The shipped 80-condition vocabulary."""
    text = resources.files("ddgcn.resources").joinpath(const.VOCAB_RESOURCE).read_text("utf8")
    return LabelVocabulary(tuple(line.strip() for line in text.splitlines() if line.strip()))


def default_groups_path() -> Path:
    return Path(str(resources.files("ddgcn.resources").joinpath(const.GROUPS_RESOURCE)))


class _GroupRecord(BaseModel):
    group_id: int
    members: list[str]


@dataclass(frozen=True)
class DifferentialGroups:
    """Differential-diagnosis groups contributed by one annotator."""

    annotator_id: str
    groups: tuple[tuple[int, frozenset[str]], ...]


def parse_differential_groups(
    data: object, vocab: LabelVocabulary, annotator: str | None = None
) -> DifferentialGroups:
    """Validate a decoded ``annotator -> [{group_id, members}]`` mapping.

    Args:
        data: Mapping decoded from JSON or YAML.
        vocab: Vocabulary every member must belong to.
        annotator: Annotator to pick; may be omitted when only one is present.

    Raises:
        DataFormatError: On structural problems.
        VocabularyError: On members outside the vocabulary.
    """
    if not isinstance(data, dict) or not data:
        raise DataFormatError("groups file must map annotator ids to group lists")
    if annotator is None:
        if len(data) != 1:
            raise DataFormatError(
                f"groups file holds annotators {sorted(data)}; choose one explicitly"
            )
        annotator = next(iter(data))
    if annotator not in data:
        raise DataFormatError(f"annotator {annotator!r} not found in groups file")

    try:
        records = [_GroupRecord.model_validate(item) for item in data[annotator] or []]
    except ValidationError as err:
        raise DataFormatError(f"annotator {annotator!r}: {err}") from err

    groups = []
    for record in records:
        members = frozenset(record.members)
        for member in sorted(members):
            if member not in vocab.index:
                raise VocabularyError(
                    f"group {record.group_id} of annotator {annotator!r}: unknown label {member!r}"
                )
        if len(members) < 2:
            raise DataFormatError(
                f"group {record.group_id} of annotator {annotator!r} has fewer than 2 members"
            )
        groups.append((record.group_id, members))
    return DifferentialGroups(str(annotator), tuple(groups))


def load_differential_groups(
    path: str | Path, vocab: LabelVocabulary, annotator: str | None = None
) -> DifferentialGroups:
    """Load one annotator's groups from a JSON (or YAML) groups file."""
    return parse_differential_groups(_read_groups_document(path), vocab, annotator)


def _read_groups_document(path: str | Path) -> Any:
    text = read_text(path)
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise DataFormatError(f"{path}: {' '.join(str(err).split())}") from err


def list_annotators(path: str | Path) -> list[str]:
    data = _read_groups_document(path)
    return [str(key) for key in data] if isinstance(data, dict) else []


class GraphKind(str, Enum):
    COOCCURRENCE = "cooccurrence"
    KNOWLEDGE = "knowledge"
    RANDOM = "random"


@dataclass(frozen=True)
class GraphSource:
    """Provenance of a label graph."""

    kind: GraphKind
    t: float | None = None
    density: float | None = None
    seed: int | None = None


@dataclass(frozen=True, eq=False)
class LabelGraph:
    """Undirected, unweighted graph over C labels."""

    edges: np.ndarray
    source: GraphSource

    def __post_init__(self) -> None:
        edges = np.asarray(self.edges)
        if edges.ndim != 2 or edges.shape[0] != edges.shape[1] or edges.shape[0] < 2:
            raise GraphError(f"adjacency must be square with C >= 2, got shape {edges.shape}")
        if not np.isin(edges, (0, 1)).all():
            raise GraphError("adjacency entries must be 0 or 1")
        if not np.array_equal(edges, edges.T):
            raise GraphError("adjacency must be symmetric")
        if np.any(np.diag(edges)):
            raise GraphError("adjacency must have a zero diagonal")
        edges = edges.astype(np.int8)
        edges.flags.writeable = False
        object.__setattr__(self, "edges", edges)

    @property
    def size(self) -> int:
        return int(self.edges.shape[0])

    def edge_count(self) -> int:
        return int(np.triu(self.edges, k=1).sum())

    def edge_list(self) -> list[tuple[int, int]]:
        rows, cols = np.nonzero(np.triu(self.edges, k=1))
        return [(int(i), int(j)) for i, j in zip(rows, cols)]


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    matrix: np.ndarray

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])


@dataclass(frozen=True, eq=False)
class PropagationMatrix:
    order: int
    matrix: np.ndarray
    filter: PropagationFilter = PropagationFilter.POWER

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])


def label_indicator(samples: Sequence[Iterable[Label]], vocab: LabelVocabulary) -> np.ndarray:
    """n x C 0/1 matrix; repeated labels within a sample count once."""
    indicator = np.zeros((len(samples), len(vocab)), dtype=np.int64)
    for row, labels in enumerate(samples):
        for label in labels:
            indicator[row, vocab.resolve(label)] = 1
    return indicator


def build_cooccurrence_graph(
    samples: Sequence[Iterable[Label]], vocab: LabelVocabulary, t: float = const.DEFAULT_T
) -> LabelGraph:
    """Threshold the normalized co-occurrence counts of the given samples.

    Args:
        samples: One label set per sample, labels given by name or index.
        vocab: Label vocabulary.
        t: Inclusive threshold in [0, 1].

    Raises:
        GraphError: If ``t`` is out of range or there are no samples.
        VocabularyError: If a sample carries an unknown label.
    """
    if not 0.0 <= t <= 1.0:
        raise GraphError(f"threshold t must be within [0, 1], got {t}")
    if len(samples) == 0:
        raise GraphError("no samples to count co-occurrences from")

    indicator = label_indicator(samples, vocab)
    pair_counts = indicator.T @ indicator
    label_counts = np.diag(pair_counts)
    totals = label_counts[:, None] + label_counts[None, :]
    ratio = pair_counts / np.maximum(totals, 1)
    edges = (ratio >= t) & (totals > 0)
    np.fill_diagonal(edges, False)

    graph = LabelGraph(edges.astype(np.int8), GraphSource(GraphKind.COOCCURRENCE, t=t))
    logging.info(
        f"Co-occurrence graph from {len(samples)} samples at t={t}: {graph.edge_count()} edges"
    )
    return graph


def co_grouping_matrix(groups: DifferentialGroups, vocab: LabelVocabulary) -> np.ndarray:
    """C x C 0/1 matrix marking label pairs that share at least one group."""
    matrix = np.zeros((len(vocab), len(vocab)), dtype=bool)
    for _, members in groups.groups:
        positions = [vocab.resolve(member) for member in members]
        matrix[np.ix_(positions, positions)] = True
    np.fill_diagonal(matrix, False)
    return matrix


def build_knowledge_graph(
    a: DifferentialGroups, b: DifferentialGroups, vocab: LabelVocabulary
) -> LabelGraph:
    """Connect two labels when both annotators co-group them."""
    edges = co_grouping_matrix(a, vocab) & co_grouping_matrix(b, vocab)
    graph = LabelGraph(edges.astype(np.int8), GraphSource(GraphKind.KNOWLEDGE))
    logging.info(
        f"Knowledge graph from annotators {a.annotator_id!r} and {b.annotator_id!r}: "
        f"{graph.edge_count()} edges"
    )
    return graph


def random_graph(size: int, density: float, seed: int) -> LabelGraph:
    """Erdos-Renyi graph over ``size`` labels, reproducible from ``seed``."""
    if size < 2:
        raise GraphError(f"a graph needs at least 2 nodes, got {size}")
    if not 0.0 <= density <= 1.0:
        raise GraphError(f"density must be within [0, 1], got {density}")
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((size, size)) < density, k=1)
    edges = upper | upper.T
    return LabelGraph(
        edges.astype(np.int8), GraphSource(GraphKind.RANDOM, density=density, seed=seed)
    )


def normalize_adjacency(graph: LabelGraph) -> NormalizedAdjacency:
    """Renormalized operator D^-1/2 (A + I) D^-1/2 with D the degrees of A + I."""
    looped = graph.edges.astype(np.float64) + np.eye(graph.size)
    degrees = looped.sum(axis=1)
    # sqrt of the degree product keeps closed-form cases exact (e.g. 1/2, 1/C)
    matrix = looped / np.sqrt(np.outer(degrees, degrees))
    return NormalizedAdjacency(matrix)


def propagation_matrix(
    adj: NormalizedAdjacency,
    k: int,
    filter: PropagationFilter = PropagationFilter.POWER,  # pylint: disable=redefined-builtin
) -> PropagationMatrix:
    """Order-k propagation operator.

    ``power`` returns A^k by repeated multiplication. ``chebyshev`` returns
    T_k(A) with T_0 = I, T_1 = A and T_k = 2 A T_{k-1} - T_{k-2}.

    Raises:
        GraphError: If ``k < 1``.
    """
    if k < 1:
        raise GraphError(f"propagation order must be >= 1, got {k}")
    base = adj.matrix
    if filter is PropagationFilter.POWER:
        result = base.copy()
        for _ in range(k - 1):
            result = base @ result
    else:
        previous, result = np.eye(adj.size), base.copy()
        for _ in range(k - 1):
            previous, result = result, 2.0 * base @ result - previous
    return PropagationMatrix(order=k, matrix=result, filter=filter)


def propagation_pair(
    graph: LabelGraph,
    orders: tuple[int, int],
    filter: PropagationFilter = PropagationFilter.POWER,  # pylint: disable=redefined-builtin
) -> tuple[PropagationMatrix, PropagationMatrix]:
    """The two operators consumed by the GCN layers."""
    adj = normalize_adjacency(graph)
    return (
        propagation_matrix(adj, orders[0], filter),
        propagation_matrix(adj, orders[1], filter),
    )


def save_graph(graph: LabelGraph, path: str | Path) -> None:
    """Write ``C=<int> source=<kind> t=<real|n/a>`` then one ``i<TAB>j`` line per edge."""
    t = format_real(graph.source.t) if graph.source.t is not None else "n/a"
    lines = [format_header({"C": graph.size, "source": graph.source.kind.value, "t": t})]
    lines.extend(f"{i}\t{j}" for i, j in graph.edge_list())
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_graph(path: str | Path) -> LabelGraph:
    """Read a graph file written by ``save_graph``.

    Raises:
        DataFormatError: On a malformed header or edge line.
    """
    lines = read_text(path).splitlines()
    if not lines:
        raise DataFormatError(f"{path} is empty")
    header = parse_header(lines[0], required=("C", "source", "t"))
    try:
        size = int(header["C"])
        kind = GraphKind(header["source"])
        t = None if header["t"] == "n/a" else float(header["t"])
    except ValueError as err:
        raise DataFormatError(f"bad header: {err}", line=1) from err
    if size < 2:
        raise DataFormatError(f"header declares C={size}, a graph needs at least 2 labels", line=1)

    edges = np.zeros((size, size), dtype=np.int8)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            i, j = (int(token) for token in line.split("\t"))
        except ValueError as err:
            raise DataFormatError(f"expected 'i<TAB>j', got {line!r}", line=lineno) from err
        if not 0 <= i < j < size:
            raise DataFormatError(f"edge ({i}, {j}) must satisfy 0 <= i < j < {size}", line=lineno)
        edges[i, j] = edges[j, i] = 1
    return LabelGraph(edges, GraphSource(kind, t=t))
