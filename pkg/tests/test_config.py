from pathlib import Path

import pytest
import yaml

from hyperfilter.config import Config, ConfigError, load_config, parse_config

ROOT = Path(__file__).resolve().parents[1]


@pytest.mark.parametrize("name", ["example.yaml", "solenoid.yaml", "acceptance.yaml"])
def test_shipped_configs_load(name):
    cfg = load_config(ROOT / "configs" / name)
    assert isinstance(cfg, Config)


@pytest.mark.parametrize("name", ["example.yaml", "solenoid.yaml", "acceptance.yaml"])
def test_round_trip(name):
    cfg = load_config(ROOT / "configs" / name)
    again = parse_config(cfg.to_yaml())
    assert again == cfg
    assert again.hash() == cfg.hash()


def test_minimal_config_gets_defaults():
    cfg = parse_config("map:\n  kind: cat\n")
    assert cfg.grid.shape == [128, 128]
    assert cfg.acceptance.cauchy_tol == 1e-6


@pytest.mark.parametrize("text, path", [
    ("grid:\n  shape: [8, 8]\n", "map"),
    ("map: {}\n", "map.kind"),
    ("map:\n  kind: cat\n  colour: red\n", "map.colour"),
    ("map:\n  kind: cat\ngrid:\n  shape: [8, x]\n", "grid.shape[1]"),
    ("map:\n  kind: cat\nexperiment:\n  horizon: 2.5\n", "experiment.horizon"),
    ("map:\n  kind: cat\ngrid:\n  shape: [8, 8, 8]\n", "grid.shape"),
    ("map:\n  kind: cat\ncone:\n  delta: 1.5\n", "cone.delta"),
    ("map:\n  kind: torus\n", "map.kind"),
    ("map:\n  kind: cat\npriors:\n  - terms: []\n", "priors[0].name"),
])
def test_field_level_errors(text, path):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.path == path


def test_invalid_yaml():
    with pytest.raises(ConfigError):
        parse_config("map: [unclosed\n")


def test_hash_changes_with_content():
    a = parse_config("map:\n  kind: cat\n")
    b = parse_config("map:\n  kind: cat\nexperiment:\n  horizon: 10\n")
    assert a.hash() != b.hash()


def test_all_thresholds_in_acceptance_config():
    data = yaml.safe_load((ROOT / "configs" / "acceptance.yaml").read_text())
    assert set(data["acceptance"]) == set(Config().acceptance.__dataclass_fields__)
