import pytest

from wavebreak.config import ConfigError, apply_overrides, parse_config
from wavebreak.symbols import NonPerturbativeRegimeError


def test_defaults():
    cfg = parse_config("")
    assert cfg.k == 1
    assert cfg["equation.family"] == "burgers"
    assert cfg["grid.n"] == 4096
    assert cfg["data.tau0"] == 0.05
    assert cfg.symbol().family == "burgers"


def test_unknown_key_rejected_with_path():
    with pytest.raises(ConfigError, match="grid.np"):
        parse_config("grid:\n  np: 4\n")
    with pytest.raises(ConfigError, match="typo"):
        parse_config("typo: 1\n")


def test_type_checking():
    with pytest.raises(ConfigError, match="k"):
        parse_config("k: one\n")
    with pytest.raises(ConfigError, match="output.svg"):
        parse_config("output:\n  svg: 3\n")
    with pytest.raises(ConfigError):
        parse_config("schema_version: 99\n")
    with pytest.raises(ConfigError):
        parse_config("k: -1\n")
    with pytest.raises(ConfigError):
        parse_config("data:\n  tau0: -0.5\n")
    with pytest.raises(ConfigError):
        parse_config("[1, 2]\n")


def test_nonperturbative_combination_rejected():
    with pytest.raises(NonPerturbativeRegimeError):
        parse_config("equation:\n  family: fkdv\n  alpha: 0.7\n")


def test_overrides():
    text = "k: 1\ngrid:\n  n: 1024\n"
    merged = apply_overrides(text, ["grid.n=2048", "data.tau0=0.2"])
    cfg = parse_config(merged)
    assert cfg["grid.n"] == 2048
    assert cfg["data.tau0"] == 0.2
    with pytest.raises(ConfigError):
        apply_overrides(text, ["no_equals_sign"])


def test_hash_is_stable_and_sensitive():
    a = parse_config("grid:\n  n: 1024\n")
    b = parse_config("grid: {n: 1024}\n")
    c = parse_config("grid:\n  n: 2048\n")
    assert a.hash == b.hash
    assert a.hash != c.hash
    assert len(a.hash) == 64


def test_invalid_yaml():
    with pytest.raises(ConfigError):
        parse_config("grid: [unclosed\n")
