from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from .config import DEFAULT_TOLERANCES, SamplingConfig, ToleranceProfile
from .curvature import (
    CurvatureTensor,
    decompose_pseudo,
    is_ricci_type,
    ricci,
    ricci_endomorphism,
    sd_asd_split,
)
from .errors import VerdictDisagreement
from .spaces import (
    PSEUDO,
    BilinearStructure,
    ComplexStructure,
    conjugate_j,
    fibre_base_point,
    random_group_element,
    vertical_basis,
)
from .twistor import (
    four_i_obstruction,
    nijenhuis_span_dimension,
    parse_sign,
    ricci_type_kernel_operator,
    two_form_nondegenerate,
    type11_check,
)
from .utils import derive_seed

logger = logging.getLogger(__name__)

T = TypeVar("T")
P = TypeVar("P")

QUESTIONS = ("Jplus_integrable", "Jminus_integrable", "type11_compatible", "two_form_symplectic")


@dataclass
class Verdict:
    question: str
    closed_form_answer: Optional[bool]
    closed_form_reason: str
    sampled_answer: Optional[bool]
    worst_residual: float
    sample_count: int

    @property
    def agree(self) -> Optional[bool]:
        if self.closed_form_answer is None or self.sampled_answer is None:
            return None
        return self.closed_form_answer == self.sampled_answer

    @property
    def answer(self) -> Optional[bool]:
        return self.closed_form_answer if self.closed_form_answer is not None else self.sampled_answer

    def require_agreement(self) -> "Verdict":
        if self.agree is False:
            raise VerdictDisagreement(
                f"{self.question}: closed form says {self.closed_form_answer} ({self.closed_form_reason}), "
                f"sampling says {self.sampled_answer} (worst residual {self.worst_residual:.3e} "
                f"over {self.sample_count} fibre points)"
            )
        return self

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["agree"] = self.agree
        return payload



def sample_fibre(
    base: BilinearStructure,
    count: int,
    seed: int,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> List[ComplexStructure]:
    """Fibre points exp(xi_i) j exp(-xi_i) with per-index seeds seed ^ i.

    Oriented structures stay on the component of their orientation; non-oriented
    pseudo-Riemannian ones alternate between both components.
    """
    points = []
    for index in range(count):
        component = -1 if (base.is_pseudo and not base.oriented and index % 2) else 1
        start = fibre_base_point(base, component)
        A = random_group_element(base, derive_seed(seed, index), tol=tol)
        points.append(conjugate_j(A, start, tol))
    return points



def map_fibre(fn: Callable[[P], T], points: Sequence[P], workers: int = 1) -> List[T]:
    """Order-preserving map; the result never depends on ``workers``."""
    if workers <= 1 or len(points) <= 1:
        return [fn(j) for j in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, points))



def weyl_obstruction(
    R: CurvatureTensor,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
    approximate: bool = False,
) -> Tuple[float, str]:
    """Relative norm of the part of the Weyl tensor that obstructs J+ (pseudo-Riemannian)."""
    base = R.base
    parts = decompose_pseudo(R, tol)
    C = parts.C_part
    scale = R.norm if R.norm > 0.0 else 1.0
    if base.oriented and base.dim == 4:
        C_plus, C_minus = sd_asd_split(C, tol.zero_threshold(approximate))
        s = float(base.G[0, 0] * base.G[1, 1])
        if s > 0:
            return C_minus.norm / scale, "anti-self-dual Weyl part must vanish (self-duality)"
        return C_plus.norm / scale, "self-dual Weyl part must vanish (anti-self-duality)"
    return C.norm / scale, "Weyl part must vanish"


@dataclass
class _Sampling:
    count: int
    pairs: int
    seed: int
    workers: int

    @classmethod
    def from_config(cls, sampling: Optional[SamplingConfig]) -> "_Sampling":
        sampling = sampling or SamplingConfig()
        return cls(
            count=sampling.fiber_samples,
            pairs=sampling.pair_samples,
            seed=sampling.seed,
            workers=sampling.workers,
        )



def _closed_form_jplus(R: CurvatureTensor, tol: ToleranceProfile, approximate: bool) -> Tuple[bool, str]:
    threshold = tol.zero_threshold(approximate)
    if R.base.kind == PSEUDO:
        value, reason = weyl_obstruction(R, tol, approximate)
        return value <= threshold, f"{reason}: relative norm {value:.3e}"
    ok, residual = is_ricci_type(R, threshold)
    return ok, f"curvature must be of Ricci type: relative Weyl norm {residual:.3e}"



def integrability_verdict(
    R: CurvatureTensor,
    sign: Any,
    sampling: Optional[SamplingConfig] = None,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
    approximate: bool = False,
) -> Verdict:
    s = parse_sign(sign)
    plan = _Sampling.from_config(sampling)
    threshold = tol.zero_threshold(approximate)
    points = sample_fibre(R.base, plan.count, plan.seed, tol)
    if s > 0:
        closed, reason = _closed_form_jplus(R, tol, approximate)
        residuals = map_fibre(lambda j: four_i_obstruction(R, j), points, plan.workers)
        worst = float(max(residuals))
        sampled = worst <= threshold
        question = "Jplus_integrable"
    else:
        closed, reason = False, "Nijenhuis tensor of J- has horizontal part 2S(jY), which never vanishes"
        rank_tol = tol.for_ranks(approximate)
        pairs = max(plan.pairs, R.base.dim + len(vertical_basis(points[0], rank_tol)))

        def span(indexed: Tuple[int, ComplexStructure]) -> int:
            index, j = indexed
            return nijenhuis_span_dimension(R, j, "-", pairs, derive_seed(plan.seed, index), rank_tol)

        spans = map_fibre(span, list(enumerate(points)), plan.workers)
        # smallest span over the fibre; 2n or more at a point rules out integrability
        worst = float(min(spans))
        sampled = worst < R.base.dim
        question = "Jminus_integrable"
    verdict = Verdict(question, closed, reason, bool(sampled), worst, len(points))
    logger.info("%s: closed=%s sampled=%s worst=%.3e", question, closed, sampled, worst)
    return verdict



def type11_verdict(
    R: CurvatureTensor,
    sampling: Optional[SamplingConfig] = None,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
    approximate: bool = False,
) -> Verdict:
    plan = _Sampling.from_config(sampling)
    threshold = tol.zero_threshold(approximate)
    closed, reason = _closed_form_jplus(R, tol, approximate)
    points = sample_fibre(R.base, plan.count, plan.seed, tol)
    residuals = map_fibre(lambda j: type11_check(R, j), points, plan.workers)
    worst = float(max(residuals))
    verdict = Verdict("type11_compatible", closed, reason, worst <= threshold, worst, len(points))
    logger.info("type11_compatible: closed=%s sampled=%s worst=%.3e", closed, verdict.sampled_answer, worst)
    return verdict



def two_form_verdict(
    R: CurvatureTensor,
    sampling: Optional[SamplingConfig] = None,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
    approximate: bool = False,
) -> Verdict:
    plan = _Sampling.from_config(sampling)
    threshold = tol.zero_threshold(approximate)
    points = sample_fibre(R.base, plan.count, plan.seed, tol)
    results = map_fibre(lambda j: two_form_nondegenerate(R, j, tol), points, plan.workers)
    sampled = all(ok for ok, _ in results)
    worst = float(min(detroot for _, detroot in results))

    closed: Optional[bool] = None
    reason = "no closed-form criterion for this curvature"
    if R.norm == 0.0:
        closed, reason = False, "flat curvature gives a zero horizontal block"
    elif R.base.kind == PSEUDO:
        parts = decompose_pseudo(R, tol)
        if parts.C_part.norm <= threshold * R.norm and parts.E_part.norm <= threshold * R.norm:
            scal_rel = abs(parts.scal) / R.norm
            closed = scal_rel > threshold
            reason = f"constant curvature: nondegenerate iff scal != 0 (scal = {parts.scal:.6g})"
    else:
        ok, _ = is_ricci_type(R, threshold)
        if ok:
            rho = ricci_endomorphism(ricci(R), R.base)

            def kernel_free(j: ComplexStructure) -> bool:
                sigma = np.linalg.svd(ricci_type_kernel_operator(rho, j), compute_uv=False)
                return bool(sigma[0] > 0 and sigma[-1] >= tol.rank * sigma[0])

            closed = all(map_fibre(kernel_free, points, plan.workers))
            reason = "Ricci type: nondegenerate iff Tr(rho j) Id + rho j + j rho has vanishing kernel"
    verdict = Verdict("two_form_symplectic", closed, reason, sampled, worst, len(points))
    logger.info("two_form_symplectic: closed=%s sampled=%s", closed, sampled)
    return verdict



def all_verdicts(
    R: CurvatureTensor,
    sampling: Optional[SamplingConfig] = None,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
    approximate: bool = False,
) -> Dict[str, Verdict]:
    return {
        "Jplus_integrable": integrability_verdict(R, "+", sampling, tol, approximate),
        "Jminus_integrable": integrability_verdict(R, "-", sampling, tol, approximate),
        "type11_compatible": type11_verdict(R, sampling, tol, approximate),
        "two_form_symplectic": two_form_verdict(R, sampling, tol, approximate),
    }
