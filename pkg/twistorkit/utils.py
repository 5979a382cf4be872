from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict

import numpy as np

try:
    import psutil
except Exception:  # pragma: no cover
    psutil = None

import yaml

from .errors import ConfigError, DimensionError

SEED_MASK = (1 << 64) - 1



def load_yaml_document(path: str | Path, label: str = "Config") -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{label} not found: {path}")
    raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{label} must be a mapping at top level: {path}")
    return raw



def ensure_parent(path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)



def append_jsonl(path: str | Path, payload: Dict[str, Any]) -> None:
    ensure_parent(path)
    with Path(path).open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(payload, ensure_ascii=True, default=str) + "\n")



def now_utc_iso() -> str:
    return datetime.now(timezone.utc).isoformat()



def derive_seed(seed: int, index: int) -> int:
    """Per-index seed; results never depend on which worker evaluates an index."""
    return (int(seed) ^ int(index)) & SEED_MASK



def rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) & SEED_MASK)



def get_resource_usage() -> Dict[str, Any]:
    usage: Dict[str, Any] = {
        "cpu_percent": None,
        "memory_percent": None,
        "memory_used_mb": None,
        "rss_mb": None,
    }
    if psutil is not None:
        try:
            usage["cpu_percent"] = float(psutil.cpu_percent(interval=None))
            vm = psutil.virtual_memory()
            usage["memory_percent"] = float(vm.percent)
            usage["memory_used_mb"] = round(float(vm.used) / (1024**2), 2)
            usage["rss_mb"] = round(float(psutil.Process().memory_info().rss) / (1024**2), 2)
        except Exception:
            pass
    return usage



def frozen_array(value: Any, ndim: int | None = None) -> np.ndarray:
    arr = np.array(value, dtype=float, copy=True)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionError(f"Expected a {ndim}-dimensional array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr



def fro(value: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(value).ravel()))
