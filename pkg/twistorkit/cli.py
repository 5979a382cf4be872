from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple


from .charts import chart_from_config, curvature_at, random_symplectic_fixture, symplectic_fixture_curvature
from .config import CHART_FIXTURES, DEFAULT_CONFIG_PATH, RunConfig, build_run_config
from .curvature import (
    CurvatureTensor,
    decompose,
    is_ricci_type,
    pinching_report,
    random_curvature,
    ricci,
    scalar_curvature,
)
from .errors import EXIT_INVARIANT, EXIT_OK, ConfigError, exit_code_for, is_known_error
from .reports import SCHEMA_VERSION, build_report, render_json, write_report
from .selftest import render_table, run_selftest
from .spaces import PSEUDO, SYMPLECTIC, BilinearStructure, fibre_base_point, standard_structure, vertical_basis
from .twistor import (
    nijenhuis_ranks,
    omega1,
    spectrum_report,
    two_form_nondegenerate,
    two_form_positivity,
    type11_check,
)
from .utils import append_jsonl, get_resource_usage, load_yaml_document, now_utc_iso
from .verdicts import all_verdicts, map_fibre, sample_fibre, type11_verdict

logger = logging.getLogger("twistorctl")

RUN_LOG_ENV = "TWISTORCTL_RUN_LOG"
SIGNS = (("Jplus", "+"), ("Jminus", "-"))



def _csv_floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc



def _signature(text: str) -> Tuple[int, int]:
    parts = [part.strip() for part in text.split(",")]
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise argparse.ArgumentTypeError(f"expected POS,NEG, got {text!r}")
    return int(parts[0]), int(parts[1])



def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="YAML or JSON run config (default: $TWISTORCTL_CONFIG)")
    common.add_argument("--kind", choices=[PSEUDO, SYMPLECTIC], default=None)
    common.add_argument("--dim", type=int, default=None, help="Even dimension 4..10")
    common.add_argument("--signature", type=_signature, default=None, help="Counts POS,NEG, both even")
    common.add_argument("--oriented", action="store_true", default=None)
    common.add_argument("--flip-orientation", action="store_true", default=None)
    common.add_argument("--fixture", default=None, help="Chart fixture or symplectic_point")
    common.add_argument("--radius", type=float, default=None)
    common.add_argument("--point", type=_csv_floats, default=None, help="Chart point x1,...,xd")
    common.add_argument("--random-tensor", type=int, default=None, metavar="SEED", help="Use a random curvature tensor")
    common.add_argument("--weyl-seeds", type=int, default=None, help="Weyl terms of the symplectic point fixture")
    common.add_argument("--seed", type=int, default=None, help="Fibre sampling seed")
    common.add_argument("--fiber-samples", type=int, default=None)
    common.add_argument("--pair-samples", type=int, default=None)
    common.add_argument("--workers", type=int, default=None)
    common.add_argument("--format", choices=["json", "text"], default=None)
    common.add_argument("--out", default=None, help="Report path (default: stdout)")
    common.add_argument("--include-timing", action="store_true", default=None)
    common.add_argument("--log-level", default="WARNING")
    return common



def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="twistorctl", description="Twistor-space curvature reports")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("decompose", parents=[common], help="Curvature decomposition and Ricci data")
    sub.add_parser("verdict", parents=[common], help="Integrability and 2-form verdicts")
    sub.add_parser("nijenhuis", parents=[common], help="Nijenhuis ranks of J+ and J-")
    sub.add_parser("two-form", parents=[common], help="The closed 2-form at the fibre base point")
    sub.add_parser("spectrum", parents=[common], help="Eigenvalues of the j-action on curvature tensors")
    selftest = sub.add_parser("selftest", help="Reduced-count property suite")
    selftest.add_argument("--json", action="store_true", help="Machine-readable results")
    selftest.add_argument("--trials", type=int, default=6)
    selftest.add_argument("--seed", type=int, default=0)
    selftest.add_argument("--log-level", default="WARNING")
    return parser



def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    structure = {
        "kind": args.kind,
        "dim": args.dim,
        "signature": list(args.signature) if args.signature is not None else None,
        "oriented": args.oriented,
        "flip_orientation": args.flip_orientation,
    }
    source = {
        "fixture": args.fixture,
        "radius": args.radius,
        "point": args.point,
        "random_seed": args.random_tensor,
        "weyl_seeds": args.weyl_seeds,
    }
    if args.kind == SYMPLECTIC and args.fixture is None and args.random_tensor is None:
        source["fixture"] = "symplectic_point"
    sampling = {
        "seed": args.seed,
        "fiber_samples": args.fiber_samples,
        "pair_samples": args.pair_samples,
        "workers": args.workers,
    }
    output = {"format": args.format, "path": args.out, "include_timing": args.include_timing}
    sections = {"structure": structure, "source": source, "sampling": sampling, "output": output}
    overrides = {name: {k: v for k, v in values.items() if v is not None} for name, values in sections.items()}
    return {name: values for name, values in overrides.items() if values}



def resolve_config(args: argparse.Namespace) -> RunConfig:
    path = Path(args.config) if args.config else DEFAULT_CONFIG_PATH
    if args.config or path.exists():
        raw = load_yaml_document(path, label="Run config")
    else:
        raw = {}
    return build_run_config(raw, overrides_from_args(args))



def build_structure(config: RunConfig) -> BilinearStructure:
    structure = config.structure
    if structure.kind == SYMPLECTIC:
        return standard_structure(SYMPLECTIC, n=structure.n)
    p, q = structure.halves
    return standard_structure(
        PSEUDO, p, q, oriented=structure.oriented, flip_orientation=structure.flip_orientation
    )



def build_source(config: RunConfig, base: BilinearStructure) -> Tuple[CurvatureTensor, bool]:
    """The curvature tensor the command reports on, and whether it came from finite differences."""
    source = config.source
    tol = config.tolerances
    if source.random_seed is not None:
        return random_curvature(base, source.random_seed), False
    if source.fixture == "symplectic_point":
        fx = random_symplectic_fixture(base.n, config.sampling.seed, source.weyl_seeds, source.ricci_scale)
        return symplectic_fixture_curvature(fx, tol), False
    if source.fixture in CHART_FIXTURES:
        chart = chart_from_config(config.structure, source)
        point = source.point if source.point is not None else [0.0] * base.dim
        return curvature_at(chart, point, base, tol), True
    raise ConfigError(f"Unsupported source: {source.fixture}")



def cmd_decompose(config: RunConfig) -> Dict[str, Any]:
    base = build_structure(config)
    R, approximate = build_source(config, base)
    tol = config.tolerances
    parts = decompose(R, tol)
    body: Dict[str, Any] = {
        "structure": base.to_dict(),
        "tensor_norm": R.norm,
        "decomposition": {
            "norms": parts.norms(),
            "reconstruction_residual": (parts.reconstruct() - R).norm,
        },
        "ricci": ricci(R, tol),
    }
    if base.kind == PSEUDO:
        body["scal"] = scalar_curvature(R)
        if not (base.p and base.q):
            body["sectional"] = pinching_report(R, config.sampling.pair_samples, config.sampling.seed, tol)
    else:
        ok, residual = is_ricci_type(R, tol.zero_threshold(approximate))
        body["ricci_type"] = {"value": ok, "weyl_residual": residual}
    return body



def cmd_verdict(config: RunConfig) -> Dict[str, Any]:
    base = build_structure(config)
    R, approximate = build_source(config, base)
    verdicts = all_verdicts(R, config.sampling, config.tolerances, approximate)
    for verdict in verdicts.values():
        verdict.require_agreement()
    return {
        "structure": base.to_dict(),
        "tensor_norm": R.norm,
        "verdicts": {name: verdict.to_dict() for name, verdict in verdicts.items()},
    }



def cmd_nijenhuis(config: RunConfig) -> Dict[str, Any]:
    base = build_structure(config)
    R, approximate = build_source(config, base)
    tol = config.tolerances.for_ranks(approximate)
    j = fibre_base_point(base)
    tangent_dim = base.dim + len(vertical_basis(j, tol))
    count = max(config.sampling.pair_samples, tangent_dim)
    ranks: Dict[str, Any] = {}
    for label, sign in SIGNS:
        result = nijenhuis_ranks(R, j, sign, count, config.sampling.seed, tol)
        if sign == "-":
            result["horizontal_containment"] = result["horizontal_rank"] == base.dim
        ranks[label] = result
    return {"structure": base.to_dict(), "pair_samples": count, "nijenhuis": ranks}



def cmd_two_form(config: RunConfig) -> Dict[str, Any]:
    base = build_structure(config)
    R, approximate = build_source(config, base)
    tol = config.tolerances.for_ranks(approximate)
    j = fibre_base_point(base)
    nondegenerate, detroot = two_form_nondegenerate(R, j, tol)
    residual = type11_check(R, j)
    verdict = type11_verdict(R, config.sampling, config.tolerances, approximate).require_agreement()
    two_form: Dict[str, Any] = {
        "nondegenerate": nondegenerate,
        "detroot": detroot,
        "omega1": omega1(R, j),
        "type11_residual": residual,
        "type11": verdict.to_dict(),
    }
    if nondegenerate:
        two_form["positivity"] = {label: two_form_positivity(R, j, sign, tol) for label, sign in SIGNS}
    return {"structure": base.to_dict(), "two_form": two_form}



def cmd_spectrum(config: RunConfig) -> Dict[str, Any]:
    base = build_structure(config)
    tol = config.tolerances
    sampling = config.sampling
    points = sample_fibre(base, sampling.fiber_samples, sampling.seed, tol)
    deviations = map_fibre(lambda j: spectrum_report(j, tol)["max_deviation"], points, sampling.workers)
    worst = float(max(deviations))
    return {
        "structure": base.to_dict(),
        "spectrum": {
            "base_point": spectrum_report(fibre_base_point(base), tol),
            "sampled": {
                "count": len(points),
                "max_deviation": worst,
                "within_tolerance": bool(worst <= tol.vanishing),
            },
        },
    }


COMMANDS: Dict[str, Callable[[RunConfig], Dict[str, Any]]] = {
    "decompose": cmd_decompose,
    "verdict": cmd_verdict,
    "nijenhuis": cmd_nijenhuis,
    "two-form": cmd_two_form,
    "spectrum": cmd_spectrum,
}



def cmd_selftest(args: argparse.Namespace) -> int:
    results = run_selftest(trials=args.trials, seed=args.seed)
    passed = all(r.ok for r in results)
    if args.json:
        payload = {
            "schema_version": SCHEMA_VERSION,
            "command": "selftest",
            "passed": passed,
            "checks": [r.to_dict() for r in results],
        }
        sys.stdout.write(render_json(payload))
    else:
        sys.stdout.write(render_table(results))
    sys.stdout.flush()
    return EXIT_OK if passed else EXIT_INVARIANT



def _log_run(path: Optional[str], command: str, config: Optional[RunConfig], code: int, elapsed: float) -> None:
    if not path:
        return
    payload = {
        "timestamp": now_utc_iso(),
        "command": command,
        "independent_variables": config.model_dump(mode="json") if config is not None else None,
        "dependent_variables": {
            "exit_code": code,
            "elapsed_s": round(elapsed, 6),
            "resource_usage": get_resource_usage(),
        },
    }
    append_jsonl(path, payload)



def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command == "selftest":
        return cmd_selftest(args)

    started = time.perf_counter()
    config: Optional[RunConfig] = None
    try:
        config = resolve_config(args)
        body = COMMANDS[args.command](config)
        elapsed = time.perf_counter() - started
        report = build_report(args.command, config, body, timing={"elapsed_s": elapsed})
        write_report(report, config.output.format, config.output.path)
        code = EXIT_OK
    except Exception as exc:
        code = exit_code_for(exc)
        if is_known_error(exc):
            logger.debug("%s failed", args.command, exc_info=True)
        else:
            logger.exception("%s failed with an unexpected error", args.command)
        print(f"twistorctl {args.command}: {exc}", file=sys.stderr)
    run_log = os.getenv(RUN_LOG_ENV) or (config.output.run_log if config is not None else None)
    _log_run(run_log, args.command, config, code, time.perf_counter() - started)
    return code
