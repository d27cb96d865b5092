import numpy as np
import pytest

from ddgcn.config import GcnConfig, SynthConfig
from ddgcn.data import Dataset, Sample
from ddgcn.graphbuild import LabelVocabulary


@pytest.fixture
def vocab() -> LabelVocabulary:
    return LabelVocabulary(("Acne", "Comedo", "Rosacea", "Urticaria", "Psoriasis", "Tinea"))


@pytest.fixture
def toy_config() -> GcnConfig:
    return GcnConfig(d0=5, d1=7, d_feat=4, adapter=True)


@pytest.fixture
def small_dataset(vocab: LabelVocabulary) -> Dataset:
    rng = np.random.default_rng(3)
    label_sets = [{0, 1}, {1}, {2, 3}, {3}, {4}, {4, 5}, {0}, {5}]
    samples = tuple(
        Sample(f"s{row}", rng.normal(size=4), frozenset(labels))
        for row, labels in enumerate(label_sets)
    )
    return Dataset(vocab, samples)


@pytest.fixture
def tiny_synth() -> SynthConfig:
    return SynthConfig(C=12, n_clusters=3, d_feat=8, n_train=200, n_test=60, sigma=0.5, seed=5)
