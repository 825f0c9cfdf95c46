import pytest

from intent_admit.config import ENV_VAR, Config, load_config, parse_value
from intent_admit.errors import ConfigurationError


def test_parse_scalars():
    assert parse_value("500") == 500
    assert parse_value("0.75") == 0.75
    assert parse_value("true") is True
    assert parse_value("False") is False
    assert parse_value("C1") == "C1"
    assert parse_value("1, 2, 3") == [1, 2, 3]
    assert parse_value("0.12, 0.16") == [0.12, 0.16]
    assert parse_value("C1, C2, C3") == ["C1", "C2", "C3"]


def test_defaults_present():
    cfg = load_config()
    assert cfg.get_float("sim.rate") == 500.0
    assert cfg.get_float("sim.mass") == 50.0
    assert cfg.get_float("schedule.b_low") == 100.0
    assert cfg.get_float("schedule.b_med") == 300.0
    assert cfg.get_float("schedule.b_high") == 500.0
    assert cfg.get_float("schedule.adaptation_threshold") == 0.75
    assert cfg.get_int("schedule.vote_capacity") == 100
    assert cfg.get_float("sim.spring_stiffness") == 8000.0
    assert cfg.get_floats("expA.l_p") == [0.12, 0.16, 0.20, 0.24]
    assert cfg.get_ints("expA.iod") == [3, 5]
    assert cfg.get_int("expA.repetitions") == 5
    assert cfg.get_int("expA.n_profiles") == 5
    assert cfg.get_floats("expB.l_p") == [0.18]
    assert cfg.get_ints("expB.iod") == [4]
    assert cfg.get_strs("expB.controllers") == ["C1", "C2", "C3"]
    assert cfg.get_str("train.target") == "lambda"


def test_default_grid_is_800_trials():
    cfg = load_config()
    n = (cfg.get_int("expA.n_profiles") * len(cfg.get_floats("expA.l_p"))
         * len(cfg.get_ints("expA.corners")) * len(cfg.get_ints("expA.iod"))
         * cfg.get_int("expA.repetitions"))
    assert n == 800


def test_layering_and_include(tmp_path):
    base = tmp_path / "base.cfg"
    base.write_text("sim.rate = 250\ncustom.x = 1\n")
    top = tmp_path / "top.cfg"
    top.write_text(f"include {base.name}\ncustom.x = 2\ncustom.y = hello\n")
    cfg = load_config(str(top))
    assert cfg.get_float("sim.rate") == 250.0   # include overrides default
    assert cfg["custom.x"] == 2                 # later key wins
    assert cfg["custom.y"] == "hello"


def test_env_var_layer(tmp_path, monkeypatch):
    f = tmp_path / "env.cfg"
    f.write_text("sim.mass = 99\n")
    monkeypatch.setenv(ENV_VAR, str(f))
    cfg = load_config()
    assert cfg.get_float("sim.mass") == 99.0


def test_overrides_win(tmp_path, monkeypatch):
    monkeypatch.delenv(ENV_VAR, raising=False)
    cfg = load_config(overrides={"sim.mass": 12.0})
    assert cfg.get_float("sim.mass") == 12.0


def test_missing_key_and_bad_types():
    cfg = Config()
    with pytest.raises(ConfigurationError):
        cfg.get_float("nope")
    cfg["x"] = 1.5
    with pytest.raises(ConfigurationError):
        cfg.get_int("x")


def test_missing_file():
    with pytest.raises(ConfigurationError, match="not found"):
        load_config("/nonexistent/path.cfg")


def test_comments_and_blank_lines(tmp_path):
    f = tmp_path / "c.cfg"
    f.write_text("# comment\n\nsim.rate = 100  # trailing comment\n")
    cfg = load_config(str(f))
    assert cfg.get_float("sim.rate") == 100.0
