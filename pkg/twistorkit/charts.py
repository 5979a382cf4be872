from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .config import DEFAULT_TOLERANCES, SourceConfig, StructureConfig, ToleranceProfile
from .curvature import CurvatureTensor, build_E_of_r, curvature_space_projector, kulkarni_nomizu, pullback
from .errors import (
    ConstraintError,
    DimensionError,
    DomainError,
    FiniteDifferenceError,
    PreconditionError,
    UnsupportedOperation,
)
from .spaces import (
    PSEUDO,
    SYMPLECTIC,
    BilinearStructure,
    ComplexStructure,
    compatibility_check,
    conjugate_j,
    pseudo_orthonormal_frame,
    random_anti_invariant_form,
    random_group_element,
    standard_j0,
    standard_structure,
)
from .twistor import R_of_S
from .utils import derive_seed, fro, rng_for

logger = logging.getLogger(__name__)

MetricFn = Callable[[np.ndarray, "ChartMetric"], np.ndarray]
# Conformal factor 1 + K eta(x, x) must stay this far from zero.
CONFORMAL_MARGIN = 1e-2


@dataclass(frozen=True)
class ChartMetric:
    """A coordinate-chart metric from the fixture menu, evaluated by finite differences."""

    fixture: str
    dim: int = 4
    p: int = 2
    q: int = 0
    radius: float = 1.0
    radius2: Optional[float] = None
    scale: float = 1.0
    fd_step: float = 1e-3
    richardson: bool = True

    def __post_init__(self) -> None:
        if self.fixture not in FIXTURES:
            raise ValueError(f"Unsupported fixture: {self.fixture}")
        if self.dim % 2 or self.dim < 4 or self.p + self.q != self.dim // 2:
            raise DimensionError(f"Chart needs dim = 2(p+q) >= 4, got dim={self.dim}, p={self.p}, q={self.q}")
        if not 1e-6 <= self.fd_step <= 1e-1:
            raise PreconditionError(f"fd_step must lie in [1e-6, 1e-1], got {self.fd_step}")
        if self.fixture in ("product_spheres", "fubini_study_cp2", "pseudo_sphere_22") and self.dim != 4:
            raise DimensionError(f"Fixture {self.fixture} is four-dimensional")
        if self.fixture == "pseudo_sphere_22" and (self.p, self.q) != (1, 1):
            raise ConstraintError("pseudo_sphere_22 has signature (2, 2)")
        if self.fixture in ("sphere", "hyperbolic", "product_spheres", "fubini_study_cp2") and self.q != 0:
            raise ConstraintError(f"Fixture {self.fixture} is Riemannian")

    @property
    def signature(self) -> Tuple[int, int]:
        return 2 * self.p, 2 * self.q

    @property
    def sectional_constant(self) -> Optional[float]:
        """Constant sectional curvature of the space forms, None otherwise."""
        if self.fixture == "flat":
            return 0.0
        if self.fixture in ("sphere", "pseudo_sphere_22"):
            return 1.0 / self.radius**2
        if self.fixture == "hyperbolic":
            return -1.0 / self.radius**2
        return None

    def standard_base(self, oriented: bool = False, flip_orientation: bool = False) -> BilinearStructure:
        return standard_structure(PSEUDO, self.p, self.q, oriented=oriented, flip_orientation=flip_orientation)



def _eta(chart: ChartMetric) -> np.ndarray:
    return standard_structure(PSEUDO, chart.p, chart.q).G



def _conformal_space_form(x: np.ndarray, eta: np.ndarray, K: float) -> np.ndarray:
    factor = 1.0 + K * float(x @ eta @ x)
    if abs(factor) < CONFORMAL_MARGIN:
        raise DomainError(f"Point {x.tolist()} is outside the chart domain (conformal factor {factor:.3e})")
    return 4.0 * eta / factor**2



def _flat_metric(x: np.ndarray, chart: ChartMetric) -> np.ndarray:
    return _eta(chart)



def _sphere_metric(x: np.ndarray, chart: ChartMetric) -> np.ndarray:
    return _conformal_space_form(x, np.eye(chart.dim), 1.0 / chart.radius**2)



def _hyperbolic_metric(x: np.ndarray, chart: ChartMetric) -> np.ndarray:
    if float(x @ x) >= chart.radius**2 * (1.0 - CONFORMAL_MARGIN):
        raise DomainError(f"Point {x.tolist()} is outside the ball of radius {chart.radius}")
    return _conformal_space_form(x, np.eye(chart.dim), -1.0 / chart.radius**2)



def _pseudo_sphere_metric(x: np.ndarray, chart: ChartMetric) -> np.ndarray:
    return _conformal_space_form(x, np.diag([1.0, -1.0, 1.0, -1.0]), 1.0 / chart.radius**2)



def _product_spheres_metric(x: np.ndarray, chart: ChartMetric) -> np.ndarray:
    r1 = chart.radius
    r2 = chart.radius2 if chart.radius2 is not None else chart.radius
    first = _conformal_space_form(x[:2], np.eye(2), 1.0 / r1**2)
    second = _conformal_space_form(x[2:], np.eye(2), 1.0 / r2**2)
    return linalg.block_diag(first, second)



def _fubini_study_metric(x: np.ndarray, chart: ChartMetric) -> np.ndarray:
    """Fubini-Study metric on the affine chart of CP^2, coordinates (x1, y1, x2, y2)."""
    z = np.array([x[0] + 1j * x[1], x[2] + 1j * x[3]])
    rho = 1.0 + float(np.real(np.vdot(z, z)))
    H = (rho * np.eye(2) - np.outer(np.conj(z), z)) / rho**2
    A = np.array([[1.0, 1j, 0.0, 0.0], [0.0, 0.0, 1.0, 1j]])
    return chart.scale * np.real(A.T @ H @ np.conj(A))


FIXTURES: Dict[str, MetricFn] = {
    "flat": _flat_metric,
    "sphere": _sphere_metric,
    "hyperbolic": _hyperbolic_metric,
    "product_spheres": _product_spheres_metric,
    "fubini_study_cp2": _fubini_study_metric,
    "pseudo_sphere_22": _pseudo_sphere_metric,
}



def _point(chart: ChartMetric, x: Sequence[float]) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (chart.dim,):
        raise DimensionError(f"Chart point must have {chart.dim} coordinates, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError(f"Chart point must be finite, got {x.tolist()}")
    return x



def metric_at(chart: ChartMetric, x: Sequence[float]) -> np.ndarray:
    g = FIXTURES[chart.fixture](_point(chart, x), chart)
    return (g + g.T) / 2.0



def _central_difference(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, axis: int, h: float) -> np.ndarray:
    step = np.zeros_like(x)
    step[axis] = h
    return (-fn(x + 2 * step) + 8.0 * fn(x + step) - 8.0 * fn(x - step) + fn(x - 2 * step)) / (12.0 * h)



def _partial(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, axis: int, chart: ChartMetric) -> np.ndarray:
    h = chart.fd_step
    coarse = _central_difference(fn, x, axis, h)
    if not chart.richardson:
        return coarse
    fine = _central_difference(fn, x, axis, h / 2.0)
    return (16.0 * fine - coarse) / 15.0



def _gradient(fn: Callable[[np.ndarray], np.ndarray], x: np.ndarray, chart: ChartMetric) -> np.ndarray:
    """D[m, ...] = d fn / d x_m."""
    return np.stack([_partial(fn, x, m, chart) for m in range(chart.dim)])



def christoffel_at(chart: ChartMetric, x: Sequence[float]) -> np.ndarray:
    """Gamma[a, b, c] = Gamma^a_{bc} of the Levi-Civita connection."""
    x = _point(chart, x)
    g = metric_at(chart, x)
    g_inv = np.linalg.inv(g)
    dg = _gradient(lambda y: metric_at(chart, y), x, chart)
    lowered = dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg.transpose(0, 1, 2)
    # lowered[d, b, c] = d_b g_dc + d_c g_db - d_d g_bc
    gamma = 0.5 * np.einsum("ad,dbc->abc", g_inv, lowered)
    return (gamma + gamma.transpose(0, 2, 1)) / 2.0



def coordinate_riemann(chart: ChartMetric, x: Sequence[float]) -> np.ndarray:
    """Rup[r, s, m, n] = R^r_{smn}."""
    x = _point(chart, x)
    gamma = christoffel_at(chart, x)
    dgamma = _gradient(lambda y: christoffel_at(chart, y), x, chart)
    # dgamma[m, r, n, s] = d_m Gamma^r_{ns}
    return (
        np.einsum("mrns->rsmn", dgamma)
        - np.einsum("nrms->rsmn", dgamma)
        + np.einsum("rml,lns->rsmn", gamma, gamma)
        - np.einsum("rnl,lms->rsmn", gamma, gamma)
    )



def curvature_at(
    chart: ChartMetric,
    x: Sequence[float],
    base: Optional[BilinearStructure] = None,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> CurvatureTensor:
    """Curvature at x in a positively oriented pseudo-orthonormal frame, snapped to the curvature space."""
    x = _point(chart, x)
    base = base or chart.standard_base()
    if base.kind != PSEUDO or base.dim != chart.dim or (base.p, base.q) != (chart.p, chart.q):
        raise ConstraintError("Chart and target structure do not match")
    g = metric_at(chart, x)
    xi = pseudo_orthonormal_frame(g, PSEUDO, p=chart.p, q=chart.q, tol=tol)
    R4c = -np.einsum("tr,rsmn->mnst", g, coordinate_riemann(chart, x))
    R4f = pullback(R4c, xi)
    snapped = curvature_space_projector(base).apply(R4f)
    residual = fro(R4f - snapped) / max(1.0, fro(R4f))
    logger.debug("fd curvature for %s at %s: pre-snap residual %.3e", chart.fixture, x.tolist(), residual)
    if residual > tol.fd_gate:
        raise FiniteDifferenceError(
            f"Finite-difference curvature of {chart.fixture} at {x.tolist()} misses the curvature space: "
            f"residual {residual:.3e} (step {chart.fd_step})"
        )
    return CurvatureTensor(base=base, R4=snapped)



def constant_curvature_oracle(K: float, base: BilinearStructure) -> CurvatureTensor:
    """K (g(X,Z) g(Y,T) - g(X,T) g(Y,Z)); the unit sphere is K = 1."""
    if not base.is_pseudo:
        raise UnsupportedOperation("constant_curvature_oracle needs a pseudo_riemannian structure")
    return kulkarni_nomizu(base.G, base.G / 2.0, base) * K


@dataclass(frozen=True, eq=False)
class SymplecticPointFixture:
    n: int
    r: np.ndarray
    weyl_seeds: List[Tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise DimensionError(f"Half-dimension must be at least 2, got n={self.n}")
        r = np.asarray(self.r, dtype=float)
        if r.shape != (2 * self.n, 2 * self.n):
            raise DimensionError(f"r must be {2 * self.n}x{2 * self.n}, got {r.shape}")
        object.__setattr__(self, "r", r)
        seeds = [(np.asarray(S, dtype=float), np.asarray(J, dtype=float)) for S, J in self.weyl_seeds]
        object.__setattr__(self, "weyl_seeds", seeds)

    @property
    def base(self) -> BilinearStructure:
        return standard_structure(SYMPLECTIC, n=self.n)



def symplectic_fixture_curvature(
    fx: SymplecticPointFixture,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> CurvatureTensor:
    """E(r) plus one R(S, j) term per Weyl seed."""
    base = fx.base
    total = build_E_of_r(fx.r, base, tol)
    for index, (S, J) in enumerate(fx.weyl_seeds):
        report = compatibility_check(J, base, tol.model_copy(update={"exact": tol.identity}))
        if not report.ok:
            raise ConstraintError(f"Weyl seed {index} carries an incompatible complex structure")
        total = total + R_of_S(S, ComplexStructure(J=J, base=base), tol)
    return total



def random_symplectic_fixture(
    n: int,
    seed: int,
    weyl_count: int = 0,
    ricci_scale: float = 1.0,
) -> SymplecticPointFixture:
    base = standard_structure(SYMPLECTIC, n=n)
    rng = rng_for(seed)
    m = rng.uniform(-1.0, 1.0, size=(2 * n, 2 * n))
    r = ricci_scale * (m + m.T) / 2.0
    seeds = []
    for k in range(weyl_count):
        A = random_group_element(base, derive_seed(seed, 2 * k + 1))
        j = conjugate_j(A, standard_j0(base))
        S = random_anti_invariant_form(j, derive_seed(seed, 2 * k + 2))
        seeds.append((S, np.array(j.J)))
    return SymplecticPointFixture(n=n, r=r, weyl_seeds=seeds)



def chart_from_config(structure: StructureConfig, source: SourceConfig) -> ChartMetric:
    p, q = structure.halves
    return ChartMetric(
        fixture=source.fixture,
        dim=structure.dim,
        p=p,
        q=q,
        radius=source.radius,
        radius2=source.radius2,
        scale=source.scale,
        fd_step=source.fd_step,
        richardson=source.richardson,
    )
