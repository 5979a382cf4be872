from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import linalg, sparse

from .config import DEFAULT_TOLERANCES, ToleranceProfile
from .errors import (
    ConstraintError,
    DegeneratePlaneError,
    DimensionError,
    InvariantViolation,
    PreconditionError,
    UnsupportedOperation,
)
from .spaces import PSEUDO, SYMPLECTIC, BilinearStructure
from .utils import fro, frozen_array, rng_for

logger = logging.getLogger(__name__)

MAX_TENSOR_DIM = 10
PAIR_INDEX = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


@dataclass(frozen=True, eq=False)
class CurvatureTensor:
    """R4[a, b, c, d] = G(R(e_a, e_b) e_c, e_d) in the reference basis of ``base``."""

    base: BilinearStructure
    R4: np.ndarray

    def __post_init__(self) -> None:
        d = self.base.dim
        R4 = frozen_array(self.R4, ndim=4)
        if R4.shape != (d, d, d, d):
            raise DimensionError(f"Curvature array must have shape {(d,) * 4}, got {R4.shape}")
        object.__setattr__(self, "R4", R4)

    @classmethod
    def zero(cls, base: BilinearStructure) -> "CurvatureTensor":
        return cls(base=base, R4=np.zeros((base.dim,) * 4))

    @property
    def kind(self) -> str:
        return self.base.kind

    @property
    def norm(self) -> float:
        return fro(self.R4)

    def _same_base(self, other: "CurvatureTensor") -> None:
        if other.base.kind != self.base.kind or other.base.dim != self.base.dim:
            raise ConstraintError("Curvature tensors live over different structures")

    def __add__(self, other: "CurvatureTensor") -> "CurvatureTensor":
        self._same_base(other)
        return CurvatureTensor(base=self.base, R4=self.R4 + other.R4)

    def __sub__(self, other: "CurvatureTensor") -> "CurvatureTensor":
        self._same_base(other)
        return CurvatureTensor(base=self.base, R4=self.R4 - other.R4)

    def __mul__(self, factor: float) -> "CurvatureTensor":
        return CurvatureTensor(base=self.base, R4=float(factor) * self.R4)

    __rmul__ = __mul__

    def invariant_residuals(self) -> Dict[str, float]:
        return symmetry_residuals(self.R4, self.kind)



def symmetry_residuals(R4: np.ndarray, kind: str) -> Dict[str, float]:
    cd_sign = 1.0 if kind == PSEUDO else -1.0
    return {
        "antisymmetry_ab": fro(R4 + R4.transpose(1, 0, 2, 3)),
        "symmetry_cd": fro(R4 + cd_sign * R4.transpose(0, 1, 3, 2)),
        "bianchi": fro(R4 + R4.transpose(1, 2, 0, 3) + R4.transpose(2, 0, 1, 3)),
    }



def _check_tensor_dim(d: int) -> None:
    if d % 2 or d < 4:
        raise DimensionError(f"Curvature spaces need an even dimension >= 4, got {d}")
    if d > MAX_TENSOR_DIM:
        raise DimensionError(f"Dimension {d} exceeds the tensor-space guard {MAX_TENSOR_DIM}")



def expected_curvature_dimension(kind: str, d: int) -> int:
    if kind == PSEUDO:
        return d * d * (d * d - 1) // 12
    return d * (d - 1) * (d + 1) * (d + 2) // 8


@dataclass(frozen=True, eq=False)
class CurvatureProjector:
    """Orthogonal projector onto the curvature space, stored as an orthonormal basis."""

    kind: str
    dim: int
    basis: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.basis.shape[1])

    def coordinates(self, R4: np.ndarray) -> np.ndarray:
        return self.basis.T @ np.asarray(R4, dtype=float).reshape(-1)

    def expand(self, coords: np.ndarray) -> np.ndarray:
        return (self.basis @ coords).reshape((self.dim,) * 4)

    def apply(self, R4: np.ndarray) -> np.ndarray:
        return self.expand(self.coordinates(R4))

    def matrix(self) -> np.ndarray:
        return self.basis @ self.basis.T


_PROJECTOR_LOCK = threading.Lock()



def _flat(d: int, a: int, b: int, c: int, e: int) -> int:
    return ((a * d + b) * d + c) * d + e



def _pair_symmetry_basis(kind: str, d: int) -> sparse.csc_matrix:
    """Orthonormal columns spanning antisym(ab) x (antisym or sym)(cd)."""
    s = 1.0 / np.sqrt(2.0)
    ab_terms = [[((a, b), s), ((b, a), -s)] for a, b in combinations(range(d), 2)]
    if kind == PSEUDO:
        cd_terms = [[((c, e), s), ((e, c), -s)] for c, e in combinations(range(d), 2)]
    else:
        cd_terms = [[((c, c), 1.0)] for c in range(d)]
        cd_terms += [[((c, e), s), ((e, c), s)] for c, e in combinations(range(d), 2)]
    rows, cols, vals = [], [], []
    col = 0
    for ab in ab_terms:
        for cd in cd_terms:
            for (a, b), wab in ab:
                for (c, e), wcd in cd:
                    rows.append(_flat(d, a, b, c, e))
                    cols.append(col)
                    vals.append(wab * wcd)
            col += 1
    return sparse.csc_matrix((vals, (rows, cols)), shape=(d**4, col))



def _bianchi_operator(d: int) -> sparse.csr_matrix:
    rows, cols, vals = [], [], []
    row = 0
    for a, b, c in combinations(range(d), 3):
        for e in range(d):
            for idx in ((a, b, c, e), (b, c, a, e), (c, a, b, e)):
                rows.append(row)
                cols.append(_flat(d, *idx))
                vals.append(1.0)
            row += 1
    return sparse.csr_matrix((vals, (rows, cols)), shape=(row, d**4))


@lru_cache(maxsize=None)
def _build_projector(kind: str, d: int) -> CurvatureProjector:
    Q = _pair_symmetry_basis(kind, d)
    B = _bianchi_operator(d)
    K = linalg.null_space((B @ Q).toarray())
    basis = np.asarray(Q @ K)
    expected = expected_curvature_dimension(kind, d)
    if basis.shape[1] != expected:
        raise InvariantViolation(f"{kind} curvature space in dim {d} has dimension {basis.shape[1]}, expected {expected}")
    basis.setflags(write=False)
    logger.debug("built %s curvature projector, dim=%d rank=%d", kind, d, expected)
    return CurvatureProjector(kind=kind, dim=d, basis=basis)



def curvature_space_projector(base: BilinearStructure) -> CurvatureProjector:
    """Depends only on (kind, dim); built once per process and shared read-only."""
    _check_tensor_dim(base.dim)
    with _PROJECTOR_LOCK:
        return _build_projector(base.kind, base.dim)



def project_curvature(R4: np.ndarray, base: BilinearStructure) -> CurvatureTensor:
    return CurvatureTensor(base=base, R4=curvature_space_projector(base).apply(R4))



def random_curvature(base: BilinearStructure, seed: int) -> CurvatureTensor:
    projector = curvature_space_projector(base)
    rng = rng_for(seed)
    d = base.dim
    while True:
        R4 = projector.apply(rng.uniform(-1.0, 1.0, size=(d, d, d, d)))
        norm = fro(R4)
        if norm >= 1e-3:
            return CurvatureTensor(base=base, R4=R4 / norm)



def raise_to_endomorphisms(R: CurvatureTensor) -> np.ndarray:
    """Rend[a, b] is the matrix of R(e_a, e_b)."""
    return np.einsum("abce,ed->abdc", R.R4, R.base.G_inv)



def lower_from_endomorphisms(Rend: np.ndarray, base: BilinearStructure) -> CurvatureTensor:
    return CurvatureTensor(base=base, R4=np.einsum("abdc,de->abce", Rend, base.G))



def endomorphism_of(R: CurvatureTensor, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.einsum("a,b,abdc->dc", np.asarray(X, dtype=float), np.asarray(Y, dtype=float), raise_to_endomorphisms(R))



def pullback(R4: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Components of R4 in the basis given by the columns of M."""
    return np.einsum("ia,jb,kc,ld,ijkl->abcd", M, M, M, M, R4)



def group_action(R: CurvatureTensor, h: np.ndarray, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> CurvatureTensor:
    """(h . R)(X, Y) Z = h R(h^-1 X, h^-1 Y) h^-1 Z."""
    G = R.base.G
    h = np.asarray(h, dtype=float)
    residual = fro(h.T @ G @ h - G) / max(1.0, fro(G))
    if residual > tol.identity:
        raise ConstraintError(f"h does not preserve the base form: residual {residual:.3e}")
    return CurvatureTensor(base=R.base, R4=pullback(R.R4, np.linalg.inv(h)))



def kulkarni_nomizu(
    h: np.ndarray,
    k: np.ndarray,
    base: BilinearStructure,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> CurvatureTensor:
    if not base.is_pseudo:
        raise UnsupportedOperation("kulkarni_nomizu is defined for pseudo_riemannian structures")
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    for name, m in (("h", h), ("k", k)):
        if m.shape != (base.dim, base.dim):
            raise DimensionError(f"{name} must be {base.dim}x{base.dim}, got {m.shape}")
        if fro(m - m.T) > tol.exact * max(1.0, fro(m)):
            raise ConstraintError(f"{name} must be symmetric")
    R4 = (
        np.einsum("ac,bd->abcd", h, k)
        + np.einsum("bd,ac->abcd", h, k)
        - np.einsum("ad,bc->abcd", h, k)
        - np.einsum("bc,ad->abcd", h, k)
    )
    return CurvatureTensor(base=base, R4=R4)



def ricci(R: CurvatureTensor, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> np.ndarray:
    """Ric(X, Z) = Tr(Y -> R(X, Y) Z); the symplectic trace order lands on the same contraction."""
    Ric = np.einsum("abce,eb->ac", R.R4, R.base.G_inv)
    asym = fro(Ric - Ric.T)
    if asym > tol.identity * max(1.0, R.norm * fro(R.base.G_inv)):
        raise InvariantViolation(f"Ricci tensor is not symmetric: residual {asym:.3e}")
    return (Ric + Ric.T) / 2.0



def scalar_curvature(R: CurvatureTensor) -> float:
    if not R.base.is_pseudo:
        raise UnsupportedOperation("scalar_curvature is defined for pseudo_riemannian structures")
    return float(np.trace(R.base.G_inv @ ricci(R)))



def ricci_endomorphism(r: np.ndarray, base: BilinearStructure) -> np.ndarray:
    """rho with G(rho X, Y) = r(X, Y)."""
    return np.linalg.solve(base.G.T, np.asarray(r, dtype=float))


@dataclass(frozen=True, eq=False)
class CurvatureDecomposition:
    kind: str
    ricci: np.ndarray
    E_part: CurvatureTensor
    S_part: Optional[CurvatureTensor] = None
    C_part: Optional[CurvatureTensor] = None
    W_part: Optional[CurvatureTensor] = None
    scal: Optional[float] = None
    traceless_ricci: Optional[np.ndarray] = None

    @property
    def weyl(self) -> CurvatureTensor:
        return self.C_part if self.kind == PSEUDO else self.W_part

    def parts(self) -> Dict[str, CurvatureTensor]:
        if self.kind == PSEUDO:
            return {"S": self.S_part, "E": self.E_part, "C": self.C_part}
        return {"E": self.E_part, "W": self.W_part}

    def norms(self) -> Dict[str, float]:
        return {name: part.norm for name, part in self.parts().items()}

    def reconstruct(self) -> CurvatureTensor:
        total = None
        for part in self.parts().values():
            total = part if total is None else total + part
        return total



def decompose_pseudo(R: CurvatureTensor, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> CurvatureDecomposition:
    base = R.base
    if not base.is_pseudo:
        raise UnsupportedOperation("decompose_pseudo needs a pseudo_riemannian tensor")
    d = base.dim
    if d < 4:
        raise DimensionError(f"decompose_pseudo needs dim >= 4, got {d}")
    G = base.G
    Ric = ricci(R, tol)
    scal = float(np.trace(base.G_inv @ Ric))
    h = Ric - scal / d * G
    S_part = kulkarni_nomizu(G, G, base) * (scal / (2.0 * d * (d - 1)))
    E_part = kulkarni_nomizu(G, h, base) * (1.0 / (d - 2))
    C_part = R - S_part - E_part

    limit = tol.identity * max(1.0, R.norm)
    checks = {
        "ricci(C)": fro(ricci(C_part, tol)),
        "ricci(E) - Ric_hat": fro(ricci(E_part, tol) - h),
        "scal(E)": abs(scalar_curvature(E_part)),
    }
    for label, value in checks.items():
        if value > limit:
            raise InvariantViolation(f"Decomposition check {label} failed: {value:.3e}")
    return CurvatureDecomposition(
        kind=PSEUDO,
        ricci=Ric,
        S_part=S_part,
        E_part=E_part,
        C_part=C_part,
        scal=scal,
        traceless_ricci=h,
    )



def build_E_of_r(r: np.ndarray, base: BilinearStructure, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> CurvatureTensor:
    """Ricci-type symplectic curvature with Ricci tensor r."""
    if base.kind != SYMPLECTIC:
        raise UnsupportedOperation("build_E_of_r needs a symplectic structure")
    r = np.asarray(r, dtype=float)
    if r.shape != (base.dim, base.dim):
        raise DimensionError(f"r must be {base.dim}x{base.dim}, got {r.shape}")
    if fro(r - r.T) > tol.exact * max(1.0, fro(r)):
        raise ConstraintError("r must be symmetric")
    W = base.G
    R4 = (
        2.0 * np.einsum("ab,cd->abcd", W, r)
        + np.einsum("ac,bd->abcd", W, r)
        - np.einsum("bc,ad->abcd", W, r)
        + np.einsum("bc,ad->abcd", r, W)
        - np.einsum("ac,bd->abcd", r, W)
    )
    E = CurvatureTensor(base=base, R4=R4 * (-1.0 / (2.0 * (base.n + 1))))
    residual = fro(ricci(E, tol) - r)
    if residual > tol.identity * max(1.0, fro(r)):
        raise InvariantViolation(f"ricci(E(r)) differs from r: {residual:.3e}")
    return E



def decompose_symplectic(R: CurvatureTensor, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> CurvatureDecomposition:
    if R.kind != SYMPLECTIC:
        raise UnsupportedOperation("decompose_symplectic needs a symplectic tensor")
    Ric = ricci(R, tol)
    E_part = build_E_of_r(Ric, R.base, tol)
    W_part = R - E_part
    residual = fro(ricci(W_part, tol))
    if residual > tol.identity * max(1.0, R.norm):
        raise InvariantViolation(f"Weyl component is not Ricci-flat: {residual:.3e}")
    return CurvatureDecomposition(kind=SYMPLECTIC, ricci=Ric, E_part=E_part, W_part=W_part)



def decompose(R: CurvatureTensor, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> CurvatureDecomposition:
    if R.kind == PSEUDO:
        return decompose_pseudo(R, tol)
    return decompose_symplectic(R, tol)



def is_ricci_type(R: CurvatureTensor, tol: float = DEFAULT_TOLERANCES.vanishing) -> Tuple[bool, float]:
    if R.kind != SYMPLECTIC:
        raise UnsupportedOperation("is_ricci_type needs a symplectic tensor")
    if R.norm == 0.0:
        return True, 0.0
    residual = decompose_symplectic(R).W_part.norm / R.norm
    return residual <= tol, residual



def _check_dim4_oriented(base: BilinearStructure) -> None:
    if not base.is_pseudo or base.dim != 4:
        raise UnsupportedOperation("The Hodge splitting is defined for four-dimensional pseudo_riemannian structures")
    if not base.oriented:
        raise PreconditionError("The Hodge splitting needs an oriented structure")



def hodge_star(base: BilinearStructure) -> np.ndarray:
    """Hodge star on 2-forms in the basis e01, e02, e03, e12, e13, e23, volume e0123."""
    _check_dim4_oriented(base)
    s = float(base.G[0, 0] * base.G[1, 1])
    H = np.zeros((6, 6))
    H[5, 0] = H[0, 5] = s
    H[4, 1] = H[1, 4] = -1.0
    H[3, 2] = H[2, 3] = s
    return base.orientation * H



def _pair_matrix(R4: np.ndarray) -> np.ndarray:
    return np.array([[R4[a, b, c, e] for c, e in PAIR_INDEX] for a, b in PAIR_INDEX])



def _expand_pair_matrix(M: np.ndarray) -> np.ndarray:
    R4 = np.zeros((4, 4, 4, 4))
    for I, (a, b) in enumerate(PAIR_INDEX):
        for K, (c, e) in enumerate(PAIR_INDEX):
            R4[a, b, c, e] = M[I, K]
            R4[b, a, c, e] = -M[I, K]
            R4[a, b, e, c] = -M[I, K]
            R4[b, a, e, c] = M[I, K]
    return R4



def sd_asd_split(
    C: CurvatureTensor,
    tol: float = DEFAULT_TOLERANCES.vanishing,
) -> Tuple[CurvatureTensor, CurvatureTensor]:
    """Self-dual and anti-self-dual parts of a Ricci-flat four-dimensional tensor."""
    base = C.base
    _check_dim4_oriented(base)
    ric = fro(ricci(C))
    if ric > tol * max(1.0, C.norm):
        raise PreconditionError(f"sd_asd_split needs a Ricci-flat tensor: |ricci| = {ric:.3e}")
    H = hodge_star(base)
    eye = np.eye(6)
    plus = (eye + H) / 2.0
    minus = (eye - H) / 2.0
    Rmat = _pair_matrix(C.R4)
    C_plus = CurvatureTensor(base=base, R4=_expand_pair_matrix(plus @ Rmat @ plus))
    C_minus = CurvatureTensor(base=base, R4=_expand_pair_matrix(minus @ Rmat @ minus))
    residual = fro(C_plus.R4 + C_minus.R4 - C.R4)
    if residual > tol * max(1.0, C.norm):
        raise InvariantViolation(f"Weyl tensor does not commute with the Hodge star: residual {residual:.3e}")
    return C_plus, C_minus



def sectional_curvature(
    R: CurvatureTensor,
    X: np.ndarray,
    Y: np.ndarray,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> float:
    if not R.base.is_pseudo:
        raise UnsupportedOperation("sectional_curvature is defined for pseudo_riemannian structures")
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    G = R.base.G
    gxx, gyy, gxy = float(X @ G @ X), float(Y @ G @ Y), float(X @ G @ Y)
    den = gxx * gyy - gxy * gxy
    if abs(den) < tol.plane * max(1.0, float(X @ X) * float(Y @ Y)):
        raise DegeneratePlaneError(f"Degenerate plane: g(X,X)g(Y,Y) - g(X,Y)^2 = {den:.3e}")
    return float(np.einsum("abcd,a,b,c,d->", R.R4, X, Y, X, Y)) / den



def pinching_report(
    R: CurvatureTensor,
    samples: int,
    seed: int,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> Dict[str, Any]:
    """Sectional curvature range over the coordinate planes plus ``samples`` random planes."""
    base = R.base
    if not base.is_pseudo:
        raise UnsupportedOperation("pinching_report is defined for pseudo_riemannian structures")
    if base.p and base.q:
        raise UnsupportedOperation("Sectional curvature is unbounded on indefinite signatures")
    d = base.dim
    eye = np.eye(d)
    planes = [(eye[a], eye[b]) for a, b in combinations(range(d), 2)]
    rng = rng_for(seed)
    planes += [(rng.uniform(-1.0, 1.0, d), rng.uniform(-1.0, 1.0, d)) for _ in range(samples)]
    values = []
    for X, Y in planes:
        try:
            values.append(sectional_curvature(R, X, Y, tol))
        except DegeneratePlaneError:
            continue
    if not values:
        raise DegeneratePlaneError(f"No nondegenerate plane among {len(planes)} sampled planes")
    k_min, k_max = float(min(values)), float(max(values))
    ratio = k_min / k_max if k_max > 0 else None
    return {"min": k_min, "max": k_max, "ratio": ratio, "planes": len(values)}

