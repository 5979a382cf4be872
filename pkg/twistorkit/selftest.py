"""Reduced-count property suite behind ``twistorctl selftest``."""

from __future__ import annotations

import logging
import os
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from typing import Callable, Dict, Iterator, List, Tuple

import numpy as np

from . import twistor
from .charts import (
    ChartMetric,
    constant_curvature_oracle,
    curvature_at,
    random_symplectic_fixture,
    symplectic_fixture_curvature,
)
from .config import DEFAULT_TOLERANCES, SamplingConfig, ToleranceProfile
from .curvature import decompose_pseudo, random_curvature, ricci, ricci_endomorphism, scalar_curvature
from .spaces import PSEUDO, SYMPLECTIC, TwistorTangent, VerticalVector, random_anti_invariant_form, standard_structure
from .twistor import (
    R_of_S,
    four_i_component,
    four_i_component_complex,
    four_i_obstruction,
    nijenhuis,
    nijenhuis_ranks,
    omega2,
    projector_Pj,
    psi_j,
    ricci_type_vertical_image,
    spectrum_report,
)
from .utils import derive_seed, fro, rng_for
from .verdicts import integrability_verdict, sample_fibre

logger = logging.getLogger(__name__)

MUTATION_ENV = "TWISTORCTL_SELFTEST_MUTATION"
MUTATED_FOUR_I_NORMALIZER = 191.0

PASS = "PASS"
FAIL = "FAIL"

PSEUDO_SHAPES = ((2, 0), (1, 1), (3, 0), (2, 1))
SYMPLECTIC_HALVES = (2, 3)


@dataclass
class CheckResult:
    name: str
    ok: bool
    worst: float
    detail: str
    seconds: float

    def to_dict(self) -> Dict[str, object]:
        payload = asdict(self)
        payload["worst"] = self.worst if np.isfinite(self.worst) else None
        return payload


@contextmanager
def mutation_hook(name: str | None) -> Iterator[None]:
    """Temporarily perturb a library constant so the suite can prove it notices."""
    if not name:
        yield
        return
    if name != "four_i_normalizer":
        raise ValueError(f"Unknown self-test mutation: {name}")
    saved = twistor.FOUR_I_NORMALIZER
    twistor.FOUR_I_NORMALIZER = MUTATED_FOUR_I_NORMALIZER
    logger.warning("self-test mutation active: FOUR_I_NORMALIZER = %s", MUTATED_FOUR_I_NORMALIZER)
    try:
        yield
    finally:
        twistor.FOUR_I_NORMALIZER = saved



def _pseudo_bases():
    return [standard_structure(PSEUDO, p, q) for p, q in PSEUDO_SHAPES]



def _symplectic_bases():
    return [standard_structure(SYMPLECTIC, n=n) for n in SYMPLECTIC_HALVES]


def check_pseudo_lemma(trials: int, seed: int, tol: ToleranceProfile) -> Tuple[float, float]:
    worst = 0.0
    for b, base in enumerate(_pseudo_bases()):
        for k, j in enumerate(sample_fibre(base, trials, derive_seed(seed, b), tol)):
            S = random_anti_invariant_form(j, derive_seed(seed, 100 * b + k))
            target = -8.0 * (base.n + 1) * S @ j.J
            residual = omega2(psi_j(S, j, tol), j) - target
            worst = max(worst, fro(residual) / max(1.0, fro(target)))
    return worst, tol.identity



def check_symplectic_lemma(trials: int, seed: int, tol: ToleranceProfile) -> Tuple[float, float]:
    worst = 0.0
    for b, base in enumerate(_symplectic_bases()):
        for k, j in enumerate(sample_fibre(base, trials, derive_seed(seed, b), tol)):
            S = random_anti_invariant_form(j, derive_seed(seed, 100 * b + k))
            target = 8.0 * (base.n + 1) * S @ j.J
            residual = omega2(R_of_S(S, j, tol), j) - target
            worst = max(worst, fro(residual) / max(1.0, fro(target)))
    return worst, tol.identity



def check_projector(trials: int, seed: int, tol: ToleranceProfile) -> Tuple[float, float]:
    worst = 0.0
    for b, base in enumerate(_pseudo_bases()[:2] + _symplectic_bases()[:1]):
        R = random_curvature(base, derive_seed(seed, b))
        for j in sample_fibre(base, trials, derive_seed(seed, 10 + b), tol):
            P = projector_Pj(R, j, tol)
            PP = projector_Pj(P, j, tol)
            worst = max(worst, (PP - P).norm / max(1.0, P.norm))
            worst = max(worst, fro(ricci(P, tol)) / max(1.0, P.norm))
    return worst, tol.identity



def check_spectrum(trials: int, seed: int, tol: ToleranceProfile) -> Tuple[float, float]:
    worst = 0.0
    for b, base in enumerate(_pseudo_bases()[:2] + _symplectic_bases()[:1]):
        for j in sample_fibre(base, trials, derive_seed(seed, b), tol):
            worst = max(worst, spectrum_report(j, tol)["max_deviation"])
    return worst, tol.vanishing



def check_four_i_oracle(trials: int, seed: int, tol: ToleranceProfile) -> Tuple[float, float]:
    worst = 0.0
    for b, base in enumerate(_pseudo_bases()[:2] + _symplectic_bases()[:1]):
        R = random_curvature(base, derive_seed(seed, b))
        for j in sample_fibre(base, trials, derive_seed(seed, 20 + b), tol):
            poly, _ = four_i_component(R, j)
            cplx = four_i_component_complex(R, j)
            worst = max(worst, (poly - cplx).norm / max(1.0, R.norm))
    return worst, tol.identity



def check_four_i_idempotent(trials: int, seed: int, tol: ToleranceProfile) -> Tuple[float, float]:
    worst = 0.0
    for b, base in enumerate(_pseudo_bases()[:2]):
        R = random_curvature(base, derive_seed(seed, b))
        for j in sample_fibre(base, trials, derive_seed(seed, 30 + b), tol):
            first, _ = four_i_component(R, j)
            second, _ = four_i_component(first, j)
            worst = max(worst, (second - first).norm / max(1.0, first.norm))
    return worst, tol.identity



def check_obstruction_biconditional(trials: int, seed: int, tol: ToleranceProfile) -> Tuple[float, float]:
    """Random tensors carry Weyl curvature and an obstruction; constant curvature carries neither."""
    mismatches = 0
    for dim_half in (3, 4):
        base = standard_structure(PSEUDO, dim_half, 0)
        points = sample_fibre(base, max(2, trials // 2), derive_seed(seed, dim_half), tol)
        tensors = [random_curvature(base, derive_seed(seed, 40 + k)) for k in range(2)]
        tensors.append(constant_curvature_oracle(1.0, base))
        for R in tensors:
            weyl_zero = decompose_pseudo(R, tol).C_part.norm <= tol.vanishing * max(1.0, R.norm)
            obstruction_zero = max(four_i_obstruction(R, j) for j in points) <= tol.vanishing
            mismatches += int(weyl_zero != obstruction_zero)
    return float(mismatches), 0.0



def check_ricci_type_image(trials: int, seed: int, tol: ToleranceProfile) -> Tuple[float, float]:
    worst = 0.0
    fx = random_symplectic_fixture(2, seed, weyl_count=0)
    R = symplectic_fixture_curvature(fx, tol)
    rho = ricci_endomorphism(ricci(R, tol), R.base)
    rng = rng_for(seed)
    for j in sample_fibre(R.base, trials, derive_seed(seed, 50), tol):
        zero = VerticalVector(S=np.zeros((j.dim, j.dim)), at=j)
        X, Y = rng.uniform(-1.0, 1.0, j.dim), rng.uniform(-1.0, 1.0, j.dim)
        direct = nijenhuis(R, j, "-", TwistorTangent(X=X, S=zero), TwistorTangent(X=Y, S=zero)).vertical.S
        closed = ricci_type_vertical_image(rho, j, X, Y).S
        worst = max(worst, fro(direct - closed) / max(1.0, fro(direct)))
    return worst, tol.identity



def check_sphere_chart(trials: int, seed: int, tol: ToleranceProfile) -> Tuple[float, float]:
    chart = ChartMetric(fixture="sphere", dim=4, p=2, q=0)
    base = chart.standard_base(oriented=True)
    R = curvature_at(chart, [0.1, -0.2, 0.15, 0.05], base, tol)
    worst = abs(scalar_curvature(R) - 12.0)
    verdict = integrability_verdict(
        R, "+", SamplingConfig(fiber_samples=trials, seed=seed), tol, approximate=True
    ).require_agreement()
    if not verdict.answer:
        return float("inf"), tol.fd_vanishing
    return worst, tol.fd_vanishing



def check_jminus_containment(trials: int, seed: int, tol: ToleranceProfile) -> Tuple[float, float]:
    chart = ChartMetric(fixture="sphere", dim=4, p=2, q=0)
    R = curvature_at(chart, [0.0, 0.0, 0.0, 0.0], chart.standard_base(), tol)
    missing = 0
    for j in sample_fibre(R.base, max(1, trials // 4), seed, tol):
        ranks = nijenhuis_ranks(R, j, "-", 2 * (R.base.dim + 2), seed, tol)
        missing += R.base.dim - ranks["horizontal_rank"]
    return float(missing), 0.0


CHECKS: Dict[str, Callable[[int, int, ToleranceProfile], Tuple[float, float]]] = {
    "pseudo_lemma_omega2": check_pseudo_lemma,
    "symplectic_lemma_omega2": check_symplectic_lemma,
    "projector_idempotent_ricci_flat": check_projector,
    "j_action_spectrum": check_spectrum,
    "four_i_real_vs_complex": check_four_i_oracle,
    "four_i_idempotent": check_four_i_idempotent,
    "obstruction_biconditional": check_obstruction_biconditional,
    "ricci_type_vertical_image": check_ricci_type_image,
    "sphere_chart_scal_and_jplus": check_sphere_chart,
    "jminus_horizontal_containment": check_jminus_containment,
}



def run_selftest(
    trials: int = 6,
    seed: int = 0,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
    mutation: str | None = None,
) -> List[CheckResult]:
    mutation = mutation if mutation is not None else os.getenv(MUTATION_ENV)
    results = []
    with mutation_hook(mutation):
        for name, check in CHECKS.items():
            started = time.perf_counter()
            try:
                worst, bound = check(trials, seed, tol)
                ok = bool(np.isfinite(worst) and worst <= bound)
                detail = f"worst {worst:.3e} (bound {bound:.1e})"
            except Exception as exc:  # a raising check is a failing check
                worst, ok, detail = float("inf"), False, f"{type(exc).__name__}: {exc}"
            elapsed = time.perf_counter() - started
            logger.debug("selftest %s: ok=%s %s", name, ok, detail)
            results.append(CheckResult(name, ok, worst, detail, elapsed))
    return results



def gate_line(result: CheckResult) -> str:
    mark = PASS if result.ok else FAIL
    return f"  {mark}  {result.name:<36} {result.detail}"



def render_table(results: List[CheckResult]) -> str:
    lines = [gate_line(r) for r in results]
    passed = sum(r.ok for r in results)
    lines.append(f"{passed}/{len(results)} checks passed")
    return "\n".join(lines) + "\n"
