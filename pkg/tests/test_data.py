"""Dataset files and the planted-cluster generator."""

import numpy as np
import pytest

from ddgcn.config import SynthConfig
from ddgcn.data import (
    Dataset,
    DatasetRole,
    Sample,
    generate_synthetic,
    label_matrix,
    load_dataset,
    save_dataset,
    synthetic_vocabulary,
)
from ddgcn.errors import DataFormatError, NonFiniteError, ShapeError, VocabularyError
from ddgcn.graphbuild import LabelVocabulary, build_cooccurrence_graph


class TestSample:
    def test_labels_required(self):
        with pytest.raises(DataFormatError):
            Sample("s0", np.zeros(3), frozenset())

    def test_features_must_be_finite(self):
        with pytest.raises(NonFiniteError):
            Sample("s0", np.array([1.0, np.nan]), frozenset({0}))

    def test_inconsistent_feature_length(self, vocab):
        with pytest.raises(ShapeError):
            Dataset(vocab, (Sample("a", np.zeros(3), {0}), Sample("b", np.zeros(4), {1})))

    def test_label_outside_vocabulary(self, vocab):
        with pytest.raises(VocabularyError):
            Dataset(vocab, (Sample("a", np.zeros(3), {6}),))


def test_label_matrix(small_dataset):
    matrix = label_matrix(small_dataset)
    assert matrix.shape == (8, 6)
    np.testing.assert_array_equal(matrix[0], [1, 1, 0, 0, 0, 0])
    np.testing.assert_array_equal(matrix.sum(axis=1), [2, 1, 2, 1, 1, 2, 1, 1])


class TestDatasetFile:
    def test_round_trip(self, small_dataset, tmp_path):
        path = tmp_path / "data.jsonl"
        save_dataset(small_dataset, path)
        loaded = load_dataset(path, small_dataset.vocab)
        assert [s.id for s in loaded.samples] == [s.id for s in small_dataset.samples]
        assert loaded.label_sets() == small_dataset.label_sets()
        np.testing.assert_array_equal(loaded.features(), small_dataset.features())

    def test_decimal_written_exactly(self, vocab, tmp_path):
        path = tmp_path / "data.jsonl"
        save_dataset(Dataset(vocab, (Sample("x", np.array([0.1, -2.5]), {0, 2}),)), path)
        text = path.read_text(encoding="utf8")
        assert "0.1" in text and '"Acne","Rosacea"' in text
        assert load_dataset(path, vocab).samples[0].features[0] == 0.1

    def test_role_kept(self, small_dataset, tmp_path):
        path = tmp_path / "test.jsonl"
        save_dataset(small_dataset, path)
        assert load_dataset(path, small_dataset.vocab, DatasetRole.TEST).role is DatasetRole.TEST

    def test_empty_file(self, vocab, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("\n", encoding="utf8")
        with pytest.raises(DataFormatError):
            load_dataset(path, vocab)

    def test_unknown_label_names_line(self, vocab, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text(
            '{"id": "a", "features": [1.0], "labels": ["Acne"]}\n'
            '{"id": "b", "features": [2.0], "labels": ["NotACondition"]}\n',
            encoding="utf8",
        )
        with pytest.raises(VocabularyError, match="line 2.*NotACondition"):
            load_dataset(path, vocab)

    def test_malformed_line_number(self, vocab, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text(
            '{"id": "a", "features": [1.0], "labels": ["Acne"]}\n\n{"id": "b", "features": \n',
            encoding="utf8",
        )
        with pytest.raises(DataFormatError) as info:
            load_dataset(path, vocab)
        assert info.value.line == 3

    def test_feature_length_mismatch(self, vocab, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text(
            '{"id": "a", "features": [1.0, 2.0], "labels": ["Acne"]}\n'
            '{"id": "b", "features": [2.0], "labels": ["Tinea"]}\n',
            encoding="utf8",
        )
        with pytest.raises(DataFormatError, match="line 2"):
            load_dataset(path, vocab)

    def test_invalid_utf8(self, vocab, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_bytes(b'{"id": "a", "features": [1.0], "labels": ["Acne"]}\n\xff\xfe\n')
        with pytest.raises(DataFormatError, match="not valid UTF-8"):
            load_dataset(path, vocab)

    def test_empty_label_list(self, vocab, tmp_path):
        path = tmp_path / "data.jsonl"
        path.write_text('{"id": "a", "features": [1.0], "labels": []}\n', encoding="utf8")
        with pytest.raises(DataFormatError, match="no labels"):
            load_dataset(path, vocab)


class TestSynthetic:
    def test_vocabulary(self):
        assert synthetic_vocabulary(40).labels[0] == "Acne"
        assert len(synthetic_vocabulary(40)) == 40
        assert synthetic_vocabulary(100).labels[99] == "condition_099"

    def test_vocabulary_size_checked(self, tiny_synth, vocab):
        with pytest.raises(ShapeError):
            generate_synthetic(tiny_synth, vocab)

    def test_shapes(self, tiny_synth):
        result = generate_synthetic(tiny_synth)
        assert len(result.train) == 200 and len(result.test) == 60
        assert result.train.d_feat == 8
        assert result.prototypes.shape == (3, 8)
        assert len(result.true_groups.clusters) == 3
        assert result.true_groups.size == 12
        assert result.test.role is DatasetRole.TEST

    def test_seed_determinism(self, tiny_synth):
        first, second = generate_synthetic(tiny_synth), generate_synthetic(tiny_synth)
        np.testing.assert_array_equal(first.train.features(), second.train.features())
        assert first.train.label_sets() == second.train.label_sets()
        assert first.test.label_sets() == second.test.label_sets()
        assert first.true_groups == second.true_groups
        other = generate_synthetic(tiny_synth.model_copy(update={"seed": 6}))
        assert not np.array_equal(first.train.features(), other.train.features())

    def test_kept_labels_are_subsets_of_one_group(self, tiny_synth):
        result = generate_synthetic(tiny_synth)
        owner = result.true_groups.assignment()
        for kept, complete in zip(result.train.label_sets(), result.complete_train_labels):
            assert kept <= complete
            assert len({owner[label] for label in complete}) == 1
        for labels in result.test.label_sets():
            assert len({owner[label] for label in labels}) == 1

    def test_noise_free_singletons(self):
        cfg = SynthConfig(C=6, n_clusters=6, d_feat=3, n_train=50, n_test=10, sigma=0.0, seed=1)
        result = generate_synthetic(cfg)
        by_label: dict[int, np.ndarray] = {}
        for sample in result.train.samples:
            assert len(sample.labels) == 1
            (label,) = sample.labels
            assert any(np.array_equal(sample.features, row) for row in result.prototypes)
            if label in by_label:
                np.testing.assert_array_equal(sample.features, by_label[label])
            by_label[label] = sample.features

    def test_single_label_mask(self, tiny_synth):
        cfg = tiny_synth.model_copy(update={"train_mask": {1: 1.0}})
        result = generate_synthetic(cfg)
        assert all(len(labels) == 1 for labels in result.train.label_sets())

    def test_single_label_fraction(self):
        cfg = SynthConfig(C=40, n_clusters=8, d_feat=2, n_train=20000, n_test=10, seed=0)
        result = generate_synthetic(cfg)
        singles = sum(len(labels) == 1 for labels in result.train.label_sets()) / cfg.n_train
        assert abs(singles - 0.817) <= 0.01

    def test_test_remainder_keeps_at_least_four(self):
        cfg = SynthConfig(C=40, n_clusters=8, d_feat=2, n_train=50, n_test=8000, seed=0)
        result = generate_synthetic(cfg)
        assert min(len(labels) for labels in result.complete_train_labels) >= 4
        sizes = [len(labels) for labels in result.test.label_sets()]
        # 1 - (0.460 + 0.381 + 0.127) of the test sets are left whole
        assert abs(sum(size >= 4 for size in sizes) / cfg.n_test - 0.032) <= 0.01

    def test_complete_labels_recover_planted_graph(self, tiny_synth):
        result = generate_synthetic(tiny_synth)
        graph = build_cooccurrence_graph(result.complete_train_labels, result.train.vocab, t=0.2)
        expected = np.zeros((12, 12), dtype=np.int8)
        for cluster in result.true_groups.clusters:
            expected[np.ix_(cluster, cluster)] = 1
        np.fill_diagonal(expected, 0)
        np.testing.assert_array_equal(graph.edges, expected)

    def test_masked_labels_keep_graph_inside_groups(self, tiny_synth):
        result = generate_synthetic(tiny_synth)
        owner = result.true_groups.assignment()
        graph = build_cooccurrence_graph(result.train.label_sets(), result.train.vocab, t=1e-9)
        for i, j in graph.edge_list():
            assert owner[i] == owner[j]

    def test_custom_vocabulary(self, tiny_synth):
        vocab = LabelVocabulary(tuple(f"L{pos}" for pos in range(12)))
        result = generate_synthetic(tiny_synth, vocab)
        assert result.train.vocab is vocab
