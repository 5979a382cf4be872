from pathlib import Path

import pytest

from twistorkit.config import (
    BASE_DIR,
    DEFAULT_TOLERANCES,
    RunConfig,
    build_run_config,
    load_run_config,
)
from twistorkit.errors import ConfigError

EXAMPLES = sorted((BASE_DIR / "configs" / "examples").glob("*.json"))


def test_default_config_loads():
    config = load_run_config(BASE_DIR / "configs" / "default.yaml")
    assert config == RunConfig()
    assert config.source.fixture == "sphere"
    assert config.approximate
    assert config.tolerances == DEFAULT_TOLERANCES


@pytest.mark.parametrize("path", EXAMPLES, ids=lambda p: p.stem)
def test_example_configs_are_valid(path):
    config = load_run_config(path)
    assert config.structure.dim in (4, 6)


def test_overrides_merge_into_sections():
    config = build_run_config(
        {"structure": {"dim": 6}, "sampling": {"seed": 3}},
        {"sampling": {"workers": 4}, "source": {"random_seed": 9}},
    )
    assert config.structure.dim == 6
    assert (config.sampling.seed, config.sampling.workers) == (3, 4)
    assert config.sampling.fiber_samples == 64
    assert not config.approximate
    assert config.structure.halves == (3, 0)


def test_signature_halves():
    config = build_run_config({"structure": {"dim": 6, "signature": [4, 2]}, "source": {"random_seed": 1}})
    assert config.structure.halves == (2, 1)
    assert config.structure.n == 3


@pytest.mark.parametrize(
    "raw",
    [
        {"structure": {"dim": 5}},
        {"structure": {"dim": 12}},
        {"structure": {"dim": 4, "signature": [3, 1]}},
        {"structure": {"kind": "symplectic", "dim": 4, "oriented": True}, "source": {"fixture": "symplectic_point"}},
        {"structure": {"kind": "symplectic", "dim": 4}, "source": {"fixture": "sphere"}},
        {"structure": {"dim": 4}, "source": {"fixture": "symplectic_point"}},
        {"structure": {"dim": 6}, "source": {"fixture": "product_spheres"}},
        {"structure": {"dim": 4}, "source": {"fixture": "pseudo_sphere_22"}},
        {"structure": {"dim": 4, "signature": [2, 2]}, "source": {"fixture": "sphere"}},
        {"source": {"fixture": "sphere", "point": [0.0, 0.0]}},
        {"source": {"fixture": None}},
        {"source": {"fd_step": 1.0}},
        {"sampling": {"workers": 0}},
        {"tolerances": {"rank": -1.0}},
        {"unknown": {}},
    ],
)
def test_invalid_configs_are_rejected(raw):
    with pytest.raises(ConfigError):
        build_run_config(raw)


def test_flip_orientation_implies_oriented():
    config = build_run_config({"structure": {"dim": 4, "flip_orientation": True}})
    assert config.structure.oriented is True
    assert config.structure.flip_orientation is True
    with pytest.raises(ConfigError):
        build_run_config(
            {"structure": {"kind": "symplectic", "dim": 4, "flip_orientation": True}},
            {"source": {"fixture": "symplectic_point"}},
        )


def test_pseudo_sphere_accepts_split_signature():
    config = build_run_config({"structure": {"dim": 4, "signature": [2, 2]}, "source": {"fixture": "pseudo_sphere_22"}})
    assert config.structure.halves == (1, 1)


def test_missing_and_malformed_files(tmp_path: Path):
    with pytest.raises(FileNotFoundError):
        load_run_config(tmp_path / "absent.yaml")
    bad = tmp_path / "list.yaml"
    bad.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_run_config(bad)


def test_json_documents_load_like_yaml(tmp_path: Path):
    path = tmp_path / "run.json"
    path.write_text('{"sampling": {"seed": 17}}', encoding="utf-8")
    assert load_run_config(path).sampling.seed == 17


def test_zero_threshold():
    assert DEFAULT_TOLERANCES.zero_threshold(False) == DEFAULT_TOLERANCES.vanishing
    assert DEFAULT_TOLERANCES.zero_threshold(True) == DEFAULT_TOLERANCES.fd_vanishing
