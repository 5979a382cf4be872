from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import DEFAULT_TOLERANCES, ToleranceProfile
from .curvature import (
    CurvatureTensor,
    curvature_space_projector,
    decompose_pseudo,
    lower_from_endomorphisms,
    raise_to_endomorphisms,
)
from .errors import (
    ConstraintError,
    DimensionError,
    InvariantViolation,
    PreconditionError,
    UnsupportedOperation,
)
from .spaces import (
    PSEUDO,
    SYMPLECTIC,
    ComplexStructure,
    TwistorTangent,
    VerticalVector,
    form_membership_residual,
    vertical_basis,
)
from .utils import fro, rng_for

logger = logging.getLogger(__name__)

# A^2 (A^2 + 4) / FOUR_I_NORMALIZER is 1 on the +-4i eigenpair and 0 on 0, +-2i.
FOUR_I_NORMALIZER = 192.0
SPECTRUM_TARGETS = (-4.0, -2.0, 0.0, 2.0, 4.0)



def _check_pair(R: CurvatureTensor, j: ComplexStructure) -> None:
    if R.base.kind != j.base.kind or R.base.dim != j.base.dim:
        raise ConstraintError("Curvature tensor and complex structure live over different structures")



def parse_sign(sign: Any) -> int:
    if sign in ("+", 1, "plus", "J+"):
        return 1
    if sign in ("-", -1, "minus", "J-"):
        return -1
    raise ValueError(f"Unsupported sign: {sign!r}")



def omega1(R: CurvatureTensor, j: ComplexStructure) -> np.ndarray:
    """Omega1[a, b] = Tr(R(e_a, e_b) o j)."""
    _check_pair(R, j)
    return np.einsum("abdc,cd->ab", raise_to_endomorphisms(R), j.J)



def omega2(R: CurvatureTensor, j: ComplexStructure) -> np.ndarray:
    Om1 = omega1(R, j)
    return j.J.T @ Om1 @ j.J - Om1



def type11_check(R: CurvatureTensor, j: ComplexStructure) -> float:
    """||Omega2|| / (||R|| kappa(j)); zero when R vanishes."""
    if R.norm == 0.0:
        return 0.0
    return fro(omega2(R, j)) / (R.norm * j.conditioning)


@dataclass(frozen=True, eq=False)
class TwoFormAtJ:
    at: ComplexStructure
    R: CurvatureTensor
    gram: np.ndarray
    basis: Tuple[VerticalVector, ...]

    @property
    def horizontal_block(self) -> np.ndarray:
        d = self.at.dim
        return self.gram[:d, :d]

    @property
    def vertical_block(self) -> np.ndarray:
        d = self.at.dim
        return self.gram[d:, d:]



def build_two_form(
    R: CurvatureTensor,
    j: ComplexStructure,
    basis: Optional[Sequence[VerticalVector]] = None,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> TwoFormAtJ:
    _check_pair(R, j)
    basis = tuple(basis if basis is not None else vertical_basis(j, tol))
    d, m = j.dim, len(basis)
    J = j.J
    gram = np.zeros((d + m, d + m))
    gram[:d, :d] = -2.0 * omega1(R, j)
    for a in range(m):
        for b in range(a + 1, m):
            Sa, Sb = basis[a].S, basis[b].S
            value = -float(np.trace(J @ (Sa @ Sb - Sb @ Sa)))
            gram[d + a, d + b] = value
            gram[d + b, d + a] = -value
    return TwoFormAtJ(at=j, R=R, gram=gram, basis=basis)



def _nondegenerate(block: np.ndarray, tol: float) -> bool:
    sigma = np.linalg.svd(block, compute_uv=False)
    return bool(sigma.size and sigma[0] > 0.0 and sigma[-1] >= tol * sigma[0])



def two_form_nondegenerate(
    R: CurvatureTensor,
    j: ComplexStructure,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
    form: Optional[TwoFormAtJ] = None,
) -> Tuple[bool, float]:
    """(nondegenerate, |det gram|^(1/dim)); decided on the horizontal block."""
    form = form or build_two_form(R, j, tol=tol)
    if not _nondegenerate(form.vertical_block, tol.rank):
        raise InvariantViolation("Vertical block of the twistor 2-form is degenerate")
    ok = _nondegenerate(form.horizontal_block, tol.rank)
    sigma = np.linalg.svd(form.gram, compute_uv=False)
    detroot = float(np.exp(np.mean(np.log(sigma)))) if np.all(sigma > 0.0) else 0.0
    return ok, detroot



def two_form_positivity(
    R: CurvatureTensor,
    j: ComplexStructure,
    sign: Any,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> bool:
    """omega(Xi, J+- Xi) > 0 for every tangent vector Xi at j."""
    s = parse_sign(sign)
    form = build_two_form(R, j, tol=tol)
    nondegenerate, _ = two_form_nondegenerate(R, j, tol, form=form)
    if not nondegenerate:
        raise PreconditionError("two_form_positivity needs a nondegenerate 2-form")
    d, m = j.dim, len(form.basis)
    op = np.zeros((d + m, d + m))
    op[:d, :d] = s * j.J
    for k, Sk in enumerate(form.basis):
        jS = j.J @ Sk.S
        for l, Sl in enumerate(form.basis):
            op[d + l, d + k] = float(np.sum(Sl.S * jS))
    M = form.gram @ op
    eig = np.linalg.eigvalsh((M + M.T) / 2.0)
    return bool(eig[0] > tol.rank * float(np.max(np.abs(eig))))



def _j_action_batch(T: np.ndarray, J: np.ndarray) -> np.ndarray:
    """A . T for a batch T[..., a, b, c, d] of lowered tensors."""
    return -(
        np.einsum("ka,...kbcd->...abcd", J, T)
        + np.einsum("kb,...akcd->...abcd", J, T)
        + np.einsum("kc,...abkd->...abcd", J, T)
        + np.einsum("kd,...abck->...abcd", J, T)
    )



def j_action(R: CurvatureTensor, j: ComplexStructure) -> CurvatureTensor:
    """(j . R)(U, V) = j R(U, V) - R(jU, V) - R(U, jV) - R(U, V) j, in lowered form."""
    _check_pair(R, j)
    return CurvatureTensor(base=R.base, R4=_j_action_batch(R.R4, j.J))



def j_action_operator(j: ComplexStructure) -> np.ndarray:
    projector = curvature_space_projector(j.base)
    d = j.dim
    batch = projector.basis.T.reshape((-1,) + (d,) * 4)
    images = _j_action_batch(batch, j.J).reshape(batch.shape[0], -1)
    return projector.basis.T @ images.T



def spectrum_report(j: ComplexStructure, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> Dict[str, Any]:
    A = j_action_operator(j)
    eig = np.linalg.eigvals(A)
    targets = np.array([complex(0.0, t) for t in SPECTRUM_TARGETS])
    distance = np.abs(eig[:, None] - targets[None, :])
    nearest = np.argmin(distance, axis=1)
    deviations = distance[np.arange(eig.size), nearest]
    clusters = []
    for k, t in enumerate(SPECTRUM_TARGETS):
        hits = deviations[nearest == k]
        clusters.append(
            {
                "eigenvalue_imag": t,
                "multiplicity": int(hits.size),
                "max_deviation": float(hits.max()) if hits.size else 0.0,
            }
        )
    worst = float(deviations.max()) if deviations.size else 0.0
    return {
        "operator_dim": int(A.shape[0]),
        "clusters": clusters,
        "max_deviation": worst,
        "within_tolerance": bool(worst <= tol.vanishing),
    }



def four_i_component(R: CurvatureTensor, j: ComplexStructure) -> Tuple[CurvatureTensor, float]:
    _check_pair(R, j)
    J = j.J
    A2 = _j_action_batch(_j_action_batch(R.R4, J), J)
    A4 = _j_action_batch(_j_action_batch(A2, J), J)
    comp = CurvatureTensor(base=R.base, R4=(A4 + 4.0 * A2) / FOUR_I_NORMALIZER)
    return comp, comp.norm



def four_i_component_complex(R: CurvatureTensor, j: ComplexStructure) -> CurvatureTensor:
    """Complex-arithmetic evaluation of the 4i part: every slot projected by Id + ij."""
    _check_pair(R, j)
    d = j.dim
    P = np.eye(d) + 1j * j.J
    Pbar = np.eye(d) - 1j * j.J
    Rend = raise_to_endomorphisms(R).astype(complex)
    Mc = np.einsum("xa,yb,xydc->abdc", P, P, Rend)
    sandwiched = np.einsum("de,abef,fc->abdc", Pbar, Mc, P)
    return lower_from_endomorphisms(np.real(sandwiched) / 8.0, R.base)



def four_i_obstruction(R: CurvatureTensor, j: ComplexStructure) -> float:
    """||4i component|| / (||R|| kappa(j)^2); zero when R vanishes."""
    if R.norm == 0.0:
        return 0.0
    _, norm = four_i_component(R, j)
    return norm / (R.norm * j.conditioning**2)



def _bracket(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A



def _vertical_on_horizontals(Rend: np.ndarray, J: np.ndarray, s: int, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    def M(U: np.ndarray, V: np.ndarray) -> np.ndarray:
        return np.einsum("a,b,abdc->dc", U, V, Rend)

    jX, jY = J @ X, J @ Y
    return (
        -_bracket(M(jX, jY), J)
        + s * J @ _bracket(M(jX, Y), J)
        + s * J @ _bracket(M(X, jY), J)
        + _bracket(M(X, Y), J)
    )



def _raw_nijenhuis(
    Rend: np.ndarray,
    J: np.ndarray,
    s: int,
    first: TwistorTangent,
    second: TwistorTangent,
) -> Tuple[np.ndarray, np.ndarray]:
    X, S = np.asarray(first.X), first.S.S
    Y, T = np.asarray(second.X), second.S.S
    vertical = _vertical_on_horizontals(Rend, J, s, X, Y)
    horizontal = np.zeros_like(X)
    if s < 0:
        horizontal = 2.0 * (S @ J @ Y - T @ J @ X)
    return horizontal, vertical



def nijenhuis(
    R: CurvatureTensor,
    j: ComplexStructure,
    sign: Any,
    first: TwistorTangent,
    second: TwistorTangent,
) -> TwistorTangent:
    """Nijenhuis tensor of J+ or J- at j for a torsion-free connection with curvature R."""
    _check_pair(R, j)
    s = parse_sign(sign)
    for xi in (first, second):
        if xi.S.at.J is not j.J and fro(xi.S.at.J - j.J) > 0.0:
            raise ConstraintError("Tangent vectors must be based at the same complex structure")
    Rend = raise_to_endomorphisms(R)
    h1, v1 = _raw_nijenhuis(Rend, j.J, s, first, second)
    h2, v2 = _raw_nijenhuis(Rend, j.J, s, second, first)
    return TwistorTangent(X=(h1 - h2) / 2.0, S=VerticalVector(S=(v1 - v2) / 2.0, at=j))



def random_tangent(j: ComplexStructure, basis: Sequence[VerticalVector], rng: np.random.Generator) -> TwistorTangent:
    X = rng.uniform(-1.0, 1.0, j.dim)
    coeffs = rng.uniform(-1.0, 1.0, len(basis))
    S = sum((c * b.S for c, b in zip(coeffs, basis)), np.zeros((j.dim, j.dim)))
    return TwistorTangent(X=X, S=VerticalVector(S=S, at=j))



def _numerical_rank(M: np.ndarray, tol: float) -> int:
    if M.size == 0:
        return 0
    sigma = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(sigma >= tol * max(float(sigma[0]), 1.0)))



def nijenhuis_ranks(
    R: CurvatureTensor,
    j: ComplexStructure,
    sign: Any,
    sample_count: int,
    seed: int,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> Dict[str, int]:
    basis = vertical_basis(j, tol)
    total_dim = j.dim + len(basis)
    if sample_count < total_dim:
        raise PreconditionError(f"Need at least {total_dim} argument pairs, got {sample_count}")
    rng = rng_for(seed)
    columns = []
    for _ in range(sample_count):
        first = random_tangent(j, basis, rng)
        second = random_tangent(j, basis, rng)
        columns.append(nijenhuis(R, j, sign, first, second).coordinates(basis))
    values = np.column_stack(columns)
    return {
        "rank": _numerical_rank(values, tol.rank),
        "horizontal_rank": _numerical_rank(values[: j.dim], tol.rank),
        "tangent_dim": total_dim,
    }



def nijenhuis_span_dimension(
    R: CurvatureTensor,
    j: ComplexStructure,
    sign: Any,
    sample_count: int,
    seed: int,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> int:
    return nijenhuis_ranks(R, j, sign, sample_count, seed, tol)["rank"]



def _membership(S_form: np.ndarray, j: ComplexStructure, tol: float, label: str) -> np.ndarray:
    S = np.asarray(S_form, dtype=float)
    if S.shape != (j.dim, j.dim):
        raise DimensionError(f"{label} must be {j.dim}x{j.dim}, got {S.shape}")
    residual = form_membership_residual(S, j)
    if residual > tol * max(1.0, fro(S) * j.conditioning):
        raise ConstraintError(f"{label} is not an anti-invariant 2-form at j: residual {residual:.3e}")
    return S



def psi_j(S_form: np.ndarray, j: ComplexStructure, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> CurvatureTensor:
    base = j.base
    if base.kind != PSEUDO:
        raise UnsupportedOperation("psi_j needs a pseudo_riemannian structure")
    S = _membership(S_form, j, tol.vanishing, "S")
    gj = base.G @ j.J
    sj = S @ j.J
    R4 = (
        2.0 * np.einsum("xy,zw->xyzw", gj, sj)
        + 2.0 * np.einsum("zw,xy->xyzw", gj, sj)
        + np.einsum("xz,yw->xyzw", gj, sj)
        + np.einsum("yw,xz->xyzw", gj, sj)
        - np.einsum("xw,yz->xyzw", gj, sj)
        - np.einsum("yz,xw->xyzw", gj, sj)
    )
    return CurvatureTensor(base=base, R4=R4)



def R_of_S(S_form: np.ndarray, j: ComplexStructure, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> CurvatureTensor:
    base = j.base
    if base.kind != SYMPLECTIC:
        raise UnsupportedOperation("R_of_S needs a symplectic structure")
    S = _membership(S_form, j, tol.vanishing, "S")
    oj = base.G @ j.J
    sj = S @ j.J
    R4 = (
        -2.0 * np.einsum("zt,xy->xyzt", oj, sj)
        + np.einsum("xz,yt->xyzt", oj, sj)
        + np.einsum("xt,yz->xyzt", oj, sj)
        - np.einsum("yt,xz->xyzt", oj, sj)
        - np.einsum("yz,xt->xyzt", oj, sj)
    )
    return CurvatureTensor(base=base, R4=R4)



def S_from_R(R: CurvatureTensor, j: ComplexStructure, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> np.ndarray:
    # Omega2 = -8(n+1) S J on psi_j(S) and +8(n+1) S J on R(S, j).
    n = j.base.n
    sign = 1.0 if j.base.kind == PSEUDO else -1.0
    S = sign * omega2(R, j) @ j.J / (8.0 * (n + 1))
    residual = form_membership_residual(S, j)
    if residual > tol.identity * max(1.0, fro(S) * j.conditioning):
        raise InvariantViolation(f"S_from_R left the anti-invariant forms: residual {residual:.3e}")
    return S



def projector_Pj(R: CurvatureTensor, j: ComplexStructure, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> CurvatureTensor:
    S = S_from_R(R, j, tol)
    if j.base.kind == PSEUDO:
        return psi_j(S, j, tol)
    return R_of_S(S, j, tol)



def _flat_form(U: np.ndarray, Omega: np.ndarray) -> np.ndarray:
    """U underlined: the covector omega(U, .)."""
    return U @ Omega



def ricci_type_vertical_image(rho: np.ndarray, j: ComplexStructure, X: np.ndarray, Y: np.ndarray) -> VerticalVector:
    """Closed form of the vertical Nijenhuis value of J- on horizontals for Ricci-type curvature."""
    base = j.base
    if base.kind != SYMPLECTIC:
        raise UnsupportedOperation("ricci_type_vertical_image needs a symplectic structure")
    J, Omega = j.J, base.G
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    B = rho - J @ rho @ J
    BX, BY = B @ X, B @ Y
    T = (
        np.outer(BY, _flat_form(X, Omega))
        + np.outer(X, _flat_form(BY, Omega))
        - np.outer(BX, _flat_form(Y, Omega))
        - np.outer(Y, _flat_form(BX, Omega))
    )
    return VerticalVector(S=_bracket(J, T) / (base.n + 1), at=j)



def ricci_type_kernel_operator(rho: np.ndarray, j: ComplexStructure) -> np.ndarray:
    """Tr(rho j) Id + rho j + j rho."""
    J = j.J
    return float(np.trace(rho @ J)) * np.eye(j.dim) + rho @ J + J @ rho



def ricci_type_omega1(rho: np.ndarray, j: ComplexStructure) -> np.ndarray:
    base = j.base
    if base.kind != SYMPLECTIC:
        raise UnsupportedOperation("ricci_type_omega1 needs a symplectic structure")
    J, Omega = j.J, base.G
    K = rho @ J + J @ rho
    return -(float(np.trace(rho @ J)) * Omega + K.T @ Omega) / (base.n + 1)



def einstein_trace_closed_form(
    R: CurvatureTensor,
    j: ComplexStructure,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
    zero_threshold: Optional[float] = None,
) -> np.ndarray:
    """Tr(R(X, Y) o j) for a conformally flat pseudo-Riemannian R, from scal and the traceless Ricci."""
    _check_pair(R, j)
    base = j.base
    if base.kind != PSEUDO:
        raise UnsupportedOperation("einstein_trace_closed_form needs a pseudo_riemannian structure")
    parts = decompose_pseudo(R, tol)
    threshold = tol.vanishing if zero_threshold is None else zero_threshold
    if parts.C_part.norm > threshold * max(1.0, R.norm):
        raise PreconditionError(f"Weyl part does not vanish: |C| = {parts.C_part.norm:.3e}")
    n = base.n
    J = j.J
    hJ = parts.traceless_ricci @ J
    return parts.scal / (n * (2 * n - 1)) * base.G @ J + (hJ - hJ.T) / (n - 1)
