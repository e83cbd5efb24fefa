import json

import numpy as np
import pytest
from pydantic import ValidationError

from pdeminer.errors import ConfigError
from pdeminer.utils.config import (
    DatasetSource, ExperimentConfig, NetworkConfig, RuntimeSettings, list_presets, load_config, load_preset,
    merge_overrides, parse_override,
)
from pdeminer.utils.logging_config import resolve_level
from pdeminer.utils.seeding import STREAM_NAMES, rng_stream


class TestPresets:
    def test_every_preset_loads(self):
        names = list_presets()
        assert {"heat_sine_desk", "burgers_gaussian_desk", "kdv_full"} <= set(names)
        for name in names:
            config = load_preset(name)
            assert config.output_dir == f"runs/{name}"
            assert config.dataset.equation in ("heat", "burgers", "kdv")

    def test_desk_presets_are_small(self):
        heat = load_preset("heat_sine_desk")
        assert heat.noise == 0.0 and heat.n_data == 5000
        assert heat.train.lbfgs_epochs == 0
        assert load_preset("burgers_gaussian_desk").noise == pytest.approx(0.1)

    def test_kdv_uses_third_order(self):
        config = load_preset("kdv_full")
        assert config.derivative_order == 3 and config.library_degree == 5

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            load_preset("wave_equation")


class TestLoading:
    def test_defaults(self):
        config = ExperimentConfig(dataset={"equation": "heat"})
        assert config.networks.u_widths == [2, 50, 50, 50, 50, 50, 1]
        assert config.networks.n_widths(2) == (3, 100, 100, 1)
        assert config.train.adam_lr == 1e-3 and config.train.lbfgs_history == 10
        assert config.library_degree == 2 and config.derivative_order == 2

    def test_seed_reaches_training(self):
        assert ExperimentConfig(dataset={"equation": "heat"}, seed=11).train.rng_seed == 11

    def test_load_from_file(self, tmp_path, tiny_config):
        path = tmp_path / "config.json"
        path.write_text(tiny_config.model_dump_json())
        assert load_config(path) == tiny_config

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_invalid_values(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"dataset": {"equation": "heat"}, "noise": -1.0}))
        with pytest.raises(ConfigError):
            load_config(path)


class TestValidation:
    @pytest.mark.parametrize("source", [{}, {"path": "a.pdrd", "equation": "heat"}])
    def test_exactly_one_dataset_source(self, source):
        with pytest.raises(ValidationError):
            DatasetSource(**source)

    def test_u_widths_shape(self):
        with pytest.raises(ValidationError):
            NetworkConfig(u_widths=[3, 10, 1])
        with pytest.raises(ValidationError):
            NetworkConfig(u_widths=[2, 10, 2])

    def test_derivative_order_range(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(dataset={"equation": "heat"}, train={"derivative_order": 5})


class TestOverrides:
    def test_parse(self):
        assert parse_override("train.adam_epochs=50") == ("train.adam_epochs", 50)
        assert parse_override("noise=0.25") == ("noise", 0.25)
        assert parse_override("name=heat run") == ("name", "heat run")
        assert parse_override("networks.n_hidden=[8, 8]") == ("networks.n_hidden", [8, 8])

    def test_parse_rejects_missing_equals(self):
        with pytest.raises(ConfigError):
            parse_override("train.adam_epochs")

    def test_merge(self, tiny_config):
        merged = merge_overrides(tiny_config, {"train.adam_epochs": 9, "seed": 3, "dataset.alpha": 0.1})
        assert merged.train.adam_epochs == 9 and merged.seed == 3 and merged.train.rng_seed == 3
        assert merged.dataset.alpha == 0.1
        assert tiny_config.train.adam_epochs == 3

    @pytest.mark.parametrize("key", ["train.epochs", "training.adam_epochs", "seed.value"])
    def test_unknown_keys(self, tiny_config, key):
        with pytest.raises(ConfigError):
            merge_overrides(tiny_config, {key: 1})

    def test_collocation_seed_is_not_an_override(self, tiny_config):
        with pytest.raises(ConfigError, match="train.rng_seed"):
            merge_overrides(tiny_config, {"train.rng_seed": 5})

    def test_conflicting_collocation_seed_in_file(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"dataset": {"equation": "heat"}, "seed": 2, "train": {"rng_seed": 5}}))
        with pytest.raises(ConfigError, match="disagrees"):
            load_config(path)

    def test_matching_collocation_seed_in_file(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"dataset": {"equation": "heat"}, "seed": 2, "train": {"rng_seed": 2}}))
        assert load_config(path).train.rng_seed == 2

    def test_invalid_value(self, tiny_config):
        with pytest.raises(ConfigError):
            merge_overrides(tiny_config, {"n_data": 0})


class TestEnvironment:
    def test_runtime_settings(self, monkeypatch):
        monkeypatch.setenv("PDEMINER_THREADS", "4")
        monkeypatch.setenv("PDEMINER_SHARD_SIZE", "128")
        assert RuntimeSettings.from_env() == RuntimeSettings(threads=4, shard_size=128)

    def test_runtime_defaults(self, monkeypatch):
        monkeypatch.delenv("PDEMINER_THREADS", raising=False)
        monkeypatch.delenv("PDEMINER_SHARD_SIZE", raising=False)
        assert RuntimeSettings.from_env() == RuntimeSettings()

    def test_bad_runtime_settings(self, monkeypatch):
        monkeypatch.setenv("PDEMINER_THREADS", "0")
        with pytest.raises(ConfigError):
            RuntimeSettings.from_env()

    def test_log_level(self, monkeypatch):
        monkeypatch.setenv("PDEMINER_LOG_LEVEL", "debug")
        assert resolve_level() == 10
        assert resolve_level("WARNING") == 30
        assert resolve_level("chatty") == 20


class TestStreams:
    def test_streams_are_reproducible_and_independent(self):
        draws = {name: rng_stream(5, name).random(4) for name in STREAM_NAMES}
        assert np.array_equal(draws["noise"], rng_stream(5, "noise").random(4))
        assert len({d.tobytes() for d in draws.values()}) == len(STREAM_NAMES)

    def test_seed_changes_every_stream(self):
        for name in STREAM_NAMES:
            assert not np.array_equal(rng_stream(0, name).random(3), rng_stream(1, name).random(3))
