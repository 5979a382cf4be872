from __future__ import annotations

import math
import sys
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Tuple

import numpy as np

from .config import RunConfig
from .errors import InvariantViolation
from .utils import ensure_parent

SCHEMA_VERSION = 1



def matrix_payload(M: np.ndarray) -> Dict[str, Any]:
    """Row-major serialization with an explicit ``dim`` field."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return {"dim": [int(M.shape[0]), int(M.shape[1])], "data": [float(x) for x in M.ravel(order="C")]}



def to_jsonable(value: Any, path: str = "report") -> Any:
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            raise InvariantViolation(f"Non-finite value in report field {path}: {value}")
        return value
    if isinstance(value, np.ndarray):
        if value.ndim == 2:
            return to_jsonable(matrix_payload(value), path)
        return [to_jsonable(v, f"{path}.{k}") for k, v in enumerate(value.tolist())]
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict(), path)
    if isinstance(value, dict):
        return {str(k): to_jsonable(v, f"{path}.{k}") for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v, f"{path}.{k}") for k, v in enumerate(value)]
    raise TypeError(f"Cannot serialize {type(value).__name__} at {path}")



def _scalar(value: Any) -> str:
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".17g")
    return _quote(value)



def _quote(text: str) -> str:
    out = ['"']
    for ch in text:
        if ch in ('"', "\\"):
            out.append("\\" + ch)
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\t":
            out.append("\\t")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)



def _emit(value: Any, level: int) -> str:
    pad = "  " * (level + 1)
    close = "  " * level
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{_quote(k)}: {_emit(v, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in value):
            return "[" + ", ".join(_scalar(v) for v in value) + "]"
        items = [f"{pad}{_emit(v, level + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + close + "]"
    return _scalar(value)



def render_json(report: Dict[str, Any]) -> str:
    """Deterministic JSON text; floats carry 17 significant digits."""
    return _emit(to_jsonable(report), 0) + "\n"



def _flatten(value: Any, prefix: str) -> Iterator[Tuple[str, str]]:
    if isinstance(value, dict):
        for key, item in value.items():
            yield from _flatten(item, f"{prefix}.{key}" if prefix else str(key))
    elif isinstance(value, list) and any(isinstance(v, (dict, list)) for v in value):
        for k, item in enumerate(value):
            yield from _flatten(item, f"{prefix}.{k}")
    elif isinstance(value, list):
        yield prefix, "[" + ", ".join(_scalar(v) for v in value) + "]"
    else:
        yield prefix, _scalar(value)



def render_text(report: Dict[str, Any]) -> str:
    lines = [f"{key}: {text}" for key, text in _flatten(to_jsonable(report), "")]
    return "\n".join(lines) + "\n"



def render_report(report: Dict[str, Any], fmt: str = "json") -> str:
    if fmt == "json":
        return render_json(report)
    if fmt == "text":
        return render_text(report)
    raise ValueError(f"Unsupported report format: {fmt}")



def write_report(report: Dict[str, Any], fmt: str = "json", path: Optional[str | Path] = None) -> str:
    text = render_report(report, fmt)
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        ensure_parent(path)
        Path(path).write_text(text, encoding="utf-8")
    return text



def build_report(
    command: str,
    config: RunConfig,
    body: Dict[str, Any],
    timing: Optional[Dict[str, float]] = None,
) -> Dict[str, Any]:
    """Wrap a command's results with the schema version, the input echo and the seeds."""
    report: Dict[str, Any] = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "input": config.model_dump(mode="json", exclude={"output": True, "sampling": {"workers"}}),
        "seed": {"sampling": config.sampling.seed, "source": config.source.random_seed},
        "approximate": config.approximate,
    }
    report.update(body)
    if config.output.include_timing and timing is not None:
        report["timing"] = timing
    return report

