import json
from pathlib import Path

import pytest

from bkfourier.config import CHECK_NAMES, MATRIX_CAP_ENV, CheckConfig
from bkfourier.errors import ConfigError
from bkfourier.utils import dedupe, parse_int_list, prime_power, slugify, split_names

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


class TestCheckConfig:
    def test_defaults_cover_the_grid(self):
        config = CheckConfig().validate()
        assert len(config.jobs()) == 14
        assert config.selected_checks == list(CHECK_NAMES)

    def test_save_and_load(self, tmp_path):
        config = CheckConfig(groups=["sl2", "torus"], q_list=[3], threads=2)
        path = tmp_path / "checks.json"
        config.save(path)
        assert CheckConfig.load(path) == config

    @pytest.mark.parametrize("name", ["checks.default.json", "checks.quick.json"])
    def test_shipped_configs(self, name):
        config = CheckConfig.load(CONFIGS / name).validate()
        assert config.jobs()

    def test_unreadable_files(self, tmp_path):
        broken = tmp_path / "broken.json"
        broken.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError):
            CheckConfig.load(broken)
        extra = tmp_path / "extra.json"
        extra.write_text(json.dumps({"colour": "blue"}), encoding="utf-8")
        with pytest.raises(ConfigError):
            CheckConfig.load(extra)
        with pytest.raises(ConfigError):
            CheckConfig.load(tmp_path / "missing.json")

    @pytest.mark.parametrize(
        "overrides",
        [
            {"groups": ["gl2-char2"], "q_list": [3]},
            {"groups": ["sl2"], "q_list": [4]},
            {"groups": ["sl2"], "q_list": [6]},
            {"groups": ["gl3"]},
            {"groups": []},
            {"checks": ["everything"]},
            {"format": "xml"},
            {"threads": 0},
            {"matrix_cap": 0},
            {"log_level": "LOUD"},
            {"groups": ["gl2"], "q_list": [7]},
            {"groups": ["pgl2"], "q_list": [9]},
        ],
    )
    def test_invalid(self, overrides):
        with pytest.raises(ConfigError):
            CheckConfig(**overrides).validate()

    def test_stacks_up_to_q7_by_default(self):
        config = CheckConfig(groups=["sl2", "pgl2"], q_list=[7], checks=["involutivity"]).validate()
        assert config.point_limit("sl2") == 7**5
        assert config.point_limit("pgl2") == 2 * 7**5
        assert config.point_limit("torus") is None

    def test_point_limit_follows_size_limits(self):
        config = CheckConfig(groups=["gl2"], q_list=[3])
        config.size_limits["gl2"] = 3
        assert config.point_limit("gl2") == 2 * 3**5
        with pytest.raises(ConfigError, match="3125 stack points"):
            CheckConfig(groups=["sl2"], q_list=[5], size_limits={"sl2": 3}).validate()

    def test_echo_leaves_out_execution_fields(self):
        echoed = CheckConfig(threads=4, out_path="r.json", log_level="DEBUG").echo()
        assert "threads" not in echoed
        assert "out_path" not in echoed
        assert "log_level" not in echoed
        assert echoed["q_list"] == []

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv(MATRIX_CAP_ENV, "50")
        assert CheckConfig().from_env().matrix_cap == 50
        monkeypatch.setenv(MATRIX_CAP_ENV, "many")
        with pytest.raises(ConfigError):
            CheckConfig().from_env()

    def test_selected_checks(self):
        config = CheckConfig(checks="gauss, kernels,gauss")
        assert config.selected_checks == ["gauss", "kernels"]
        assert config.wants("kernels")
        assert not config.wants("quadform")

    def test_jobs_follow_q_list(self):
        config = CheckConfig(groups=["sl2", "sl2", "pgl2"], q_list=[3])
        assert config.jobs() == [("sl2", 3), ("pgl2", 3)]


class TestUtils:
    def test_split_names(self):
        assert split_names(" SL2, pgl2  gl2 ") == ["sl2", "pgl2", "gl2"]
        assert split_names(None) == []

    def test_parse_int_list(self):
        assert parse_int_list("3, 5,7") == [3, 5, 7]
        assert parse_int_list(9) == [9]
        with pytest.raises(ValueError):
            parse_int_list("3,x")

    @pytest.mark.parametrize("q,expected", [(2, (2, 1)), (9, (3, 2)), (49, (7, 2)), (12, None), (1, None)])
    def test_prime_power(self, q, expected):
        assert prime_power(q) == expected

    def test_slugify(self):
        assert slugify("phi-G-sl2-F3") == "phi-g-sl2-f3"
        assert slugify("***") == "table"

    def test_dedupe(self):
        assert dedupe([3, 5, 3, 7, 5]) == [3, 5, 7]
