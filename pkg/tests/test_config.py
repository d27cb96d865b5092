import json

import pytest

from ddgcn import const
from ddgcn.config import (
    Config,
    GcnConfig,
    GraphSettings,
    PropagationFilter,
    SynthConfig,
    TrainConfig,
    config_path_from_env,
    read_config,
    updated,
    write_config,
)
from ddgcn.errors import ConfigurationError


def test_defaults():
    config = Config()
    assert config.graph.t == const.DEFAULT_T
    assert config.graph.filter is PropagationFilter.POWER
    assert (config.gcn.d0, config.gcn.d1, config.gcn.d_feat) == (700, 1024, 2048)
    assert config.gcn.use_feature_adapter
    assert config.train.learning_rate == const.DEFAULT_LR
    assert config.synth.train_mask == const.TRAIN_MASK


def test_aliases_accepted():
    assert TrainConfig(lr=0.5).learning_rate == 0.5
    assert not GcnConfig(adapter=False).use_feature_adapter


@pytest.mark.parametrize(
    "build",
    [
        lambda: GraphSettings(t=1.5),
        lambda: GraphSettings(density=-0.1),
        lambda: GcnConfig(d0=0),
        lambda: GcnConfig(slope=1.0),
        lambda: TrainConfig(lr=-0.1),
        lambda: TrainConfig(epochs=0),
        lambda: SynthConfig(C=4, n_clusters=5),
        lambda: SynthConfig(complete_sizes={3: 0.5}),
        lambda: SynthConfig(train_mask={1: 0.9, 2: 0.2}),
        lambda: SynthConfig(sigma=-1.0),
    ],
)
def test_invalid_values_rejected(build):
    with pytest.raises(ValueError):
        build()


def test_zero_learning_rate_allowed():
    assert TrainConfig(lr=0.0).learning_rate == 0.0


def test_updated_ignores_none():
    train = updated(TrainConfig(), epochs=7, learning_rate=None)
    assert train.epochs == 7
    assert train.learning_rate == const.DEFAULT_LR


def test_updated_validates():
    with pytest.raises(ConfigurationError):
        updated(GraphSettings(), t=2.0)


def test_round_trip(tmp_path):
    path = tmp_path / "ddgcn.config.json"
    config = Config(
        train=TrainConfig(epochs=12),
        graph=GraphSettings(filter=PropagationFilter.CHEBYSHEV),
        gcn=GcnConfig(adapter=False),
    )
    write_config(config, path)
    data = json.loads(path.read_text(encoding="utf8"))
    assert data["train"]["lr"] == const.DEFAULT_LR
    assert data["gcn"]["adapter"] is False
    assert read_config(path) == config


def test_missing_file_gives_defaults(tmp_path):
    assert read_config(tmp_path / "absent.json") == Config()


def test_invalid_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"train": {"epochs": "many"}}', encoding="utf8")
    with pytest.raises(ConfigurationError):
        read_config(path)


def test_config_path_from_env(monkeypatch):
    monkeypatch.delenv(const.CONFIG_ENV_VAR_NAME, raising=False)
    assert config_path_from_env() == const.CONFIG_FILE_NAME
    monkeypatch.setenv(const.CONFIG_ENV_VAR_NAME, "elsewhere.json")
    assert config_path_from_env() == "elsewhere.json"
