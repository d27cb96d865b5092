"""Label graphs, normalization and propagation operators."""

import itertools

import numpy as np
import pytest

from ddgcn.config import PropagationFilter
from ddgcn.errors import DataFormatError, GraphError, VocabularyError
from ddgcn.graphbuild import (
    DifferentialGroups,
    GraphKind,
    GraphSource,
    LabelGraph,
    LabelVocabulary,
    build_cooccurrence_graph,
    build_knowledge_graph,
    co_grouping_matrix,
    default_groups_path,
    default_vocabulary,
    list_annotators,
    load_differential_groups,
    load_graph,
    load_vocabulary,
    normalize_adjacency,
    parse_differential_groups,
    propagation_matrix,
    random_graph,
    save_graph,
    save_vocabulary,
)


def _graph(edges) -> LabelGraph:
    return LabelGraph(np.asarray(edges), GraphSource(GraphKind.RANDOM))


def _complete(size: int) -> LabelGraph:
    return _graph(np.ones((size, size), dtype=int) - np.eye(size, dtype=int))


def _pair_oracle(samples, size, t):
    """Independent pair counter over explicit loops."""
    single = [0] * size
    pair = [[0] * size for _ in range(size)]
    for labels in samples:
        labels = set(labels)
        for i in labels:
            single[i] += 1
        for i, j in itertools.permutations(labels, 2):
            pair[i][j] += 1
    edges = np.zeros((size, size), dtype=int)
    for i, j in itertools.permutations(range(size), 2):
        total = single[i] + single[j]
        if total and pair[i][j] / total >= t:
            edges[i, j] = 1
    return edges


class TestVocabulary:
    def test_index_inverts_positions(self, vocab):
        for pos, label in enumerate(vocab.labels):
            assert vocab.index[label] == pos
            assert vocab.resolve(label) == pos
            assert vocab.resolve(pos) == pos

    def test_duplicates_rejected(self):
        with pytest.raises(VocabularyError, match="duplicate"):
            LabelVocabulary(("Acne", "Acne"))

    def test_needs_two_labels(self):
        with pytest.raises(VocabularyError):
            LabelVocabulary(("Acne",))

    def test_unknown_label_named(self, vocab):
        with pytest.raises(VocabularyError, match="NotACondition"):
            vocab.resolve("NotACondition")

    def test_shipped_vocabulary(self):
        shipped = default_vocabulary()
        assert len(shipped) == 80
        assert shipped.labels[:3] == ("Acne", "Pigmented Nevus", "Urticaria")
        # both capitalizations are distinct conditions in the shipped list
        assert "Infantile Eczema" in shipped.index
        assert "Infantile eczema" in shipped.index

    def test_file_round_trip(self, vocab, tmp_path):
        path = tmp_path / "vocab.txt"
        save_vocabulary(vocab, path)
        loaded = load_vocabulary(path)
        assert loaded == vocab
        assert loaded.digest() == vocab.digest()

    def test_digest_depends_on_order(self):
        assert LabelVocabulary(("a", "b")).digest() != LabelVocabulary(("b", "a")).digest()

    def test_invalid_utf8_file(self, tmp_path):
        path = tmp_path / "vocab.txt"
        path.write_bytes(b"Acne\nTinea\n\xff\xfe\n")
        with pytest.raises(DataFormatError, match="UTF-8"):
            load_vocabulary(path)


class TestCooccurrenceGraph:
    def test_inclusive_boundary(self):
        vocab = LabelVocabulary(("A", "B"))
        samples = [{"A", "B"}] * 5 + [{"A"}] * 35 + [{"B"}] * 55
        assert build_cooccurrence_graph(samples, vocab, t=0.05).edges[0, 1] == 1
        assert build_cooccurrence_graph(samples, vocab, t=0.051).edges[0, 1] == 0

    def test_small_example_matches_oracle(self):
        vocab = LabelVocabulary(("A", "B", "C"))
        samples = [{"A", "B"}, {"A", "B"}, {"A"}, {"B"}]
        graph = build_cooccurrence_graph(samples, vocab, t=0.3)
        assert graph.edges[0, 1] == 1
        indexed = [{vocab.resolve(label) for label in labels} for labels in samples]
        np.testing.assert_array_equal(graph.edges, _pair_oracle(indexed, 3, 0.3))

    def test_random_samples_match_oracle(self):
        rng = np.random.default_rng(11)
        vocab = LabelVocabulary(tuple(f"L{i}" for i in range(7)))
        for _ in range(50):
            samples = [
                set(rng.choice(7, size=rng.integers(1, 4), replace=False).tolist())
                for _ in range(rng.integers(1, 30))
            ]
            t = float(rng.choice([0.0, 0.05, 0.1, 0.2, 0.3, 0.5]))
            graph = build_cooccurrence_graph(samples, vocab, t)
            np.testing.assert_array_equal(graph.edges, _pair_oracle(samples, 7, t))

    def test_permutation_invariant(self):
        rng = np.random.default_rng(2)
        vocab = LabelVocabulary(tuple(f"L{i}" for i in range(6)))
        samples = [set(rng.choice(6, size=2, replace=False).tolist()) for _ in range(40)]
        shuffled = [samples[i] for i in rng.permutation(len(samples))]
        np.testing.assert_array_equal(
            build_cooccurrence_graph(samples, vocab, 0.1).edges,
            build_cooccurrence_graph(shuffled, vocab, 0.1).edges,
        )

    def test_monotone_in_t(self):
        rng = np.random.default_rng(4)
        vocab = LabelVocabulary(tuple(f"L{i}" for i in range(8)))
        samples = [set(rng.choice(8, size=3, replace=False).tolist()) for _ in range(60)]
        thresholds = np.linspace(0.0, 0.5, 11)
        for low, high in zip(thresholds, thresholds[1:]):
            loose = build_cooccurrence_graph(samples, vocab, float(low)).edges
            strict = build_cooccurrence_graph(samples, vocab, float(high)).edges
            assert np.all(strict <= loose)

    def test_unknown_label_rejected(self, vocab):
        with pytest.raises(VocabularyError, match="NotACondition"):
            build_cooccurrence_graph([{"Acne", "NotACondition"}], vocab)

    def test_empty_samples_rejected(self, vocab):
        with pytest.raises(GraphError):
            build_cooccurrence_graph([], vocab)

    @pytest.mark.parametrize("t", [-0.1, 1.5])
    def test_threshold_range(self, vocab, t):
        with pytest.raises(GraphError):
            build_cooccurrence_graph([{"Acne"}], vocab, t)


class TestKnowledgeGraph:
    vocab = LabelVocabulary(("X", "Y", "Z"))

    def _groups(self, annotator, *groups):
        return DifferentialGroups(
            annotator, tuple((pos, frozenset(members)) for pos, members in enumerate(groups))
        )

    def test_agreement_makes_edge(self):
        graph = build_knowledge_graph(
            self._groups("a", {"X", "Y"}), self._groups("b", {"X", "Y"}), self.vocab
        )
        assert graph.edges[0, 1] == 1
        assert graph.edge_count() == 1

    def test_single_annotator_is_not_enough(self):
        graph = build_knowledge_graph(
            self._groups("a", {"X", "Y"}), self._groups("b", {"X", "Z"}), self.vocab
        )
        assert graph.edges[0, 1] == 0
        assert graph.edge_count() == 0

    def test_shipped_groups_match_pairwise_oracle(self):
        vocab = default_vocabulary()
        path = default_groups_path()
        assert sorted(list_annotators(path)) == ["a", "b"]
        a = load_differential_groups(path, vocab, "a")
        b = load_differential_groups(path, vocab, "b")
        assert len(a.groups) == 32

        def pairs(groups):
            found = set()
            for _, members in groups.groups:
                for x, y in itertools.combinations(sorted(members), 2):
                    found.add(frozenset((vocab.index[x], vocab.index[y])))
            return found

        expected = pairs(a) & pairs(b)
        graph = build_knowledge_graph(a, b, vocab)
        assert {frozenset(edge) for edge in graph.edge_list()} == expected
        np.testing.assert_array_equal(
            graph.edges, (co_grouping_matrix(a, vocab) & co_grouping_matrix(b, vocab)).astype(int)
        )

    def test_member_outside_vocabulary(self):
        data = {"a": [{"group_id": 0, "members": ["X", "Nope"]}]}
        with pytest.raises(VocabularyError, match="Nope"):
            parse_differential_groups(data, self.vocab)

    def test_singleton_group_rejected(self):
        data = {"a": [{"group_id": 0, "members": ["X"]}]}
        with pytest.raises(DataFormatError):
            parse_differential_groups(data, self.vocab)

    def test_annotator_required_when_ambiguous(self):
        data = {
            "a": [{"group_id": 0, "members": ["X", "Y"]}],
            "b": [{"group_id": 0, "members": ["X", "Y"]}],
        }
        with pytest.raises(DataFormatError, match="choose one"):
            parse_differential_groups(data, self.vocab)
        assert parse_differential_groups(data, self.vocab, "b").annotator_id == "b"

    def test_yaml_groups_file(self, tmp_path):
        path = tmp_path / "groups.yaml"
        path.write_text("expert:\n  - group_id: 3\n    members: [X, Z]\n", encoding="utf8")
        groups = load_differential_groups(path, self.vocab)
        assert groups.annotator_id == "expert"
        assert groups.groups == ((3, frozenset({"X", "Z"})),)

    def test_truncated_groups_file(self, tmp_path):
        path = tmp_path / "groups.json"
        path.write_text('{"a": [{"group_id": 1, "members": ["X", ', encoding="utf8")
        with pytest.raises(DataFormatError, match="groups.json"):
            list_annotators(path)
        with pytest.raises(DataFormatError, match="groups.json"):
            load_differential_groups(path, self.vocab, "a")


class TestRandomGraph:
    def test_density_zero_is_edgeless(self):
        assert random_graph(10, 0.0, seed=1).edge_count() == 0

    def test_density_one_is_complete(self):
        assert random_graph(10, 1.0, seed=1).edge_count() == 45

    def test_edge_count_concentrates(self):
        count = random_graph(80, 0.1, seed=7).edge_count()
        sigma = np.sqrt(3160 * 0.1 * 0.9)
        assert abs(count - 316) <= 4 * sigma

    def test_seeded(self):
        np.testing.assert_array_equal(random_graph(30, 0.3, 9).edges, random_graph(30, 0.3, 9).edges)

    @pytest.mark.parametrize("density", [-0.01, 1.01])
    def test_density_range(self, density):
        with pytest.raises(GraphError):
            random_graph(5, density, seed=0)

    def test_graph_invariants(self):
        graph = random_graph(25, 0.4, seed=3)
        np.testing.assert_array_equal(graph.edges, graph.edges.T)
        assert not np.diag(graph.edges).any()
        assert graph.source.kind is GraphKind.RANDOM


class TestLabelGraph:
    def test_rejects_asymmetric(self):
        with pytest.raises(GraphError, match="symmetric"):
            _graph([[0, 1], [0, 0]])

    def test_rejects_self_loop(self):
        with pytest.raises(GraphError, match="diagonal"):
            _graph([[1, 0], [0, 0]])

    def test_rejects_weights(self):
        with pytest.raises(GraphError):
            _graph([[0, 2], [2, 0]])


class TestNormalization:
    def test_edgeless_is_identity(self):
        adj = normalize_adjacency(_graph(np.zeros((5, 5), dtype=int)))
        np.testing.assert_array_equal(adj.matrix, np.eye(5))

    def test_single_edge(self):
        adj = normalize_adjacency(_graph([[0, 1], [1, 0]]))
        np.testing.assert_array_equal(adj.matrix, np.full((2, 2), 0.5))

    @pytest.mark.parametrize("size", [2, 3, 7, 40])
    def test_complete_graph(self, size):
        adj = normalize_adjacency(_complete(size))
        np.testing.assert_allclose(adj.matrix, 1.0 / size, rtol=0, atol=1e-12)

    def test_properties_on_random_graphs(self):
        for seed in range(20):
            graph = random_graph(15, 0.3, seed)
            matrix = normalize_adjacency(graph).matrix
            np.testing.assert_allclose(matrix, matrix.T, rtol=0, atol=1e-12)
            assert (matrix >= 0).all()

            vec = np.ones(15)
            for _ in range(200):
                vec = matrix @ vec
                vec /= np.linalg.norm(vec)
            assert np.linalg.norm(matrix @ vec) <= 1 + 1e-9
            assert np.abs(np.linalg.eigvalsh(matrix)).max() <= 1 + 1e-9

    def test_regular_graph_rows_sum_to_one(self):
        size = 8
        ring = np.zeros((size, size), dtype=int)
        for i in range(size):
            ring[i, (i + 1) % size] = ring[(i + 1) % size, i] = 1
        matrix = normalize_adjacency(_graph(ring)).matrix
        np.testing.assert_allclose(matrix.sum(axis=1), 1.0, atol=1e-12)


class TestPropagation:
    def test_order_one_is_adjacency(self):
        adj = normalize_adjacency(random_graph(6, 0.5, 1))
        np.testing.assert_array_equal(propagation_matrix(adj, 1).matrix, adj.matrix)

    def test_idempotent_pair(self):
        adj = normalize_adjacency(_graph([[0, 1], [1, 0]]))
        np.testing.assert_array_equal(propagation_matrix(adj, 2).matrix, np.full((2, 2), 0.5))

    def test_identity_stays_identity(self):
        adj = normalize_adjacency(_graph(np.zeros((4, 4), dtype=int)))
        for k in (1, 2, 5):
            np.testing.assert_array_equal(propagation_matrix(adj, k).matrix, np.eye(4))

    def test_matches_repeated_multiplication(self):
        adj = normalize_adjacency(random_graph(12, 0.3, 5))
        expected = np.eye(12)
        for k in range(1, 6):
            expected = adj.matrix @ expected
            result = propagation_matrix(adj, k)
            assert result.order == k
            np.testing.assert_allclose(result.matrix, expected, rtol=0, atol=1e-12)

    def test_order_must_be_positive(self):
        adj = normalize_adjacency(_complete(3))
        with pytest.raises(GraphError):
            propagation_matrix(adj, 0)

    def test_chebyshev_basis(self):
        adj = normalize_adjacency(random_graph(9, 0.4, 2))
        A = adj.matrix
        cheb = PropagationFilter.CHEBYSHEV
        np.testing.assert_array_equal(propagation_matrix(adj, 1, cheb).matrix, A)
        np.testing.assert_allclose(
            propagation_matrix(adj, 2, cheb).matrix, 2 * A @ A - np.eye(9), atol=1e-12
        )
        np.testing.assert_allclose(
            propagation_matrix(adj, 3, cheb).matrix, 4 * A @ A @ A - 3 * A, atol=1e-12
        )


class TestGraphFile:
    def test_round_trip(self, tmp_path):
        graph = build_cooccurrence_graph(
            [{"A", "B"}, {"B", "C"}], LabelVocabulary(("A", "B", "C")), t=0.25
        )
        path = tmp_path / "graph.tsv"
        save_graph(graph, path)
        lines = path.read_text(encoding="utf8").splitlines()
        assert lines[0] == "C=3 source=cooccurrence t=0.25"
        assert lines[1:] == ["0\t1", "1\t2"]
        loaded = load_graph(path)
        np.testing.assert_array_equal(loaded.edges, graph.edges)
        assert loaded.source.t == 0.25

    def test_random_graph_header(self, tmp_path):
        path = tmp_path / "graph.tsv"
        save_graph(random_graph(4, 0.0, 1), path)
        assert path.read_text(encoding="utf8") == "C=4 source=random t=n/a\n"

    @pytest.mark.parametrize("size", ["-3", "0", "1"])
    def test_header_size_below_two(self, tmp_path, size):
        path = tmp_path / "graph.tsv"
        path.write_text(f"C={size} source=random t=n/a\n", encoding="utf8")
        with pytest.raises(DataFormatError, match=f"line 1: header declares C={size}"):
            load_graph(path)

    def test_bad_edge_line(self, tmp_path):
        path = tmp_path / "graph.tsv"
        path.write_text("C=3 source=random t=n/a\n2\t1\n", encoding="utf8")
        with pytest.raises(DataFormatError, match="line 2"):
            load_graph(path)
