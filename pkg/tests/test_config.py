import numpy as np
import pytest

from vsembed.config import (
    ModelConfig,
    TrainRunConfig,
    dump_config,
    load_config,
    paper_model_config,
    parse_config_text,
    with_overrides,
)
from vsembed.dataio import write_tensor
from vsembed.errors import ConfigError
from vsembed.model import init_model


class TestConfigFile:
    def test_parse_and_types(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# model\n"
            "d = 48\n"
            "heads = 6\n"
            "margin = 0.15\n"
            "bidirectional_text = true\n"
            "\n"
            "batch_size = 16   # run options\n"
            "stage_preset = paper\n")
        model_cfg, run_cfg = load_config(path)
        assert model_cfg.d == 48
        assert model_cfg.heads == 6
        assert model_cfg.margin == 0.15
        assert model_cfg.bidirectional_text is True
        assert run_cfg.batch_size == 16
        assert run_cfg.stage_preset == "paper"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("not_a_key = 3\n")
        with pytest.raises(ConfigError, match="not_a_key"):
            load_config(path)

    def test_bad_value_names_key(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("heads = many\n")
        with pytest.raises(ConfigError, match="heads"):
            load_config(path)

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("d = 3\nd = 4\n")

    def test_missing_equals_rejected(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config_text("just some words\n")

    def test_dump_round_trips(self, tmp_path):
        model_cfg = ModelConfig(d=40, heads=3, margin=0.3)
        run_cfg = TrainRunConfig(batch_size=4, seed=11, stage_preset="paper")
        path = tmp_path / "echo.cfg"
        path.write_text(dump_config(model_cfg, run_cfg))
        loaded_model, loaded_run = load_config(path)
        assert loaded_model == model_cfg
        assert loaded_run == run_cfg

    def test_with_overrides(self):
        model_cfg, run_cfg = with_overrides(
            ModelConfig(), TrainRunConfig(), heads=7, seed=3, stage_preset=None)
        assert model_cfg.heads == 7
        assert run_cfg.seed == 3
        assert run_cfg.stage_preset == "desk"  # None leaves the default alone
        with pytest.raises(ConfigError):
            with_overrides(ModelConfig(), TrainRunConfig(), bogus=1)

    def test_validation(self):
        with pytest.raises(ConfigError):
            ModelConfig(heads=0)
        with pytest.raises(ConfigError):
            TrainRunConfig(batch_size=1)


def test_paper_scale_hyperparameters():
    cfg = paper_model_config(vocab_size=1000)
    assert (cfg.d, cfg.d_attn, cfg.heads, cfg.d_joint) == (2400, 350, 10, 2400)
    assert cfg.word_dim == 620
    assert cfg.text_layers == 4
    assert (cfg.dropout_attention, cfg.dropout_projection, cfg.dropout_text) == (0.5, 0.5, 0.25)
    assert (cfg.margin, cfg.diversity_weight) == (0.2, 0.1)


class TestPretrainedEmbeddingTable:
    def test_loads_table_from_tensor_file(self, tmp_path):
        rng = np.random.default_rng(0)
        table = rng.normal(size=(32, 16)).astype(np.float32)
        path = tmp_path / "table.mht"
        write_tensor(path, table)
        cfg = ModelConfig(vocab_size=32, word_dim=16, embedding_table=str(path))
        model = init_model(cfg, seed=1)
        assert np.array_equal(model.word_embedding.data, table)
        assert model.word_embedding.requires_grad

    def test_shape_mismatch_rejected(self, tmp_path):
        rng = np.random.default_rng(0)
        path = tmp_path / "table.mht"
        write_tensor(path, rng.normal(size=(8, 16)).astype(np.float32))
        cfg = ModelConfig(vocab_size=32, word_dim=16, embedding_table=str(path))
        with pytest.raises(ConfigError, match="shape"):
            init_model(cfg, seed=1)
