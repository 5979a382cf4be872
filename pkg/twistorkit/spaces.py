from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .config import DEFAULT_TOLERANCES, ToleranceProfile
from .errors import (
    ConstraintError,
    DimensionError,
    InvariantViolation,
    PreconditionError,
    UnsupportedOperation,
)
from .utils import fro, frozen_array, rng_for

logger = logging.getLogger(__name__)

PSEUDO = "pseudo_riemannian"
SYMPLECTIC = "symplectic"
KINDS = (PSEUDO, SYMPLECTIC)


@dataclass(frozen=True, eq=False)
class BilinearStructure:
    """A model space (V, g) or (V, omega) with its Gram matrix in the reference basis.

    ``orientation`` is +1 for the reference orientation e_1 ^ ... ^ e_2n and -1
    when the oriented structure carries the opposite one.
    """

    kind: str
    n: int
    G: np.ndarray
    p: int = 0
    q: int = 0
    oriented: bool = False
    orientation: int = 1

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"Unsupported structure kind: {self.kind}")
        G = frozen_array(self.G, ndim=2)
        if G.shape != (2 * self.n, 2 * self.n):
            raise DimensionError(f"Gram matrix must be {2 * self.n}x{2 * self.n}, got {G.shape}")
        object.__setattr__(self, "G", G)
        if self.orientation not in (1, -1):
            raise ValueError(f"orientation must be +1 or -1, got {self.orientation}")

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def is_pseudo(self) -> bool:
        return self.kind == PSEUDO

    @property
    def signature(self) -> Tuple[int, int]:
        return 2 * self.p, 2 * self.q

    @cached_property
    def G_inv(self) -> np.ndarray:
        return frozen_array(np.linalg.inv(self.G))

    def to_dict(self) -> Dict[str, Any]:
        payload = {
            "kind": self.kind,
            "dim": self.dim,
            "oriented": self.oriented,
            "orientation": self.orientation,
        }
        if self.is_pseudo:
            payload["signature"] = list(self.signature)
        return payload


@dataclass(frozen=True, eq=False)
class ComplexStructure:
    J: np.ndarray
    base: BilinearStructure

    def __post_init__(self) -> None:
        J = frozen_array(self.J, ndim=2)
        if J.shape != (self.base.dim, self.base.dim):
            raise DimensionError(f"J must be {self.base.dim}x{self.base.dim}, got {J.shape}")
        object.__setattr__(self, "J", J)

    @property
    def dim(self) -> int:
        return self.base.dim

    @cached_property
    def conditioning(self) -> float:
        """||J||_F^2 / 2n; equals 1 exactly when J is orthogonal."""
        return fro(self.J) ** 2 / self.dim


@dataclass(frozen=True, eq=False)
class VerticalVector:
    S: np.ndarray
    at: ComplexStructure

    def __post_init__(self) -> None:
        S = frozen_array(self.S, ndim=2)
        if S.shape != (self.at.dim, self.at.dim):
            raise DimensionError(f"S must be {self.at.dim}x{self.at.dim}, got {S.shape}")
        object.__setattr__(self, "S", S)

    def residuals(self) -> Dict[str, float]:
        J, G, S = self.at.J, self.at.base.G, self.S
        return {
            "anticommutation": fro(S @ J + J @ S),
            "isometry": fro(S.T @ G + G @ S),
        }


@dataclass(frozen=True, eq=False)
class TwistorTangent:
    """Tangent vector at j: horizontal part in V, vertical part in the fibre."""

    X: np.ndarray
    S: VerticalVector

    def __post_init__(self) -> None:
        X = frozen_array(self.X, ndim=1)
        if X.shape != (self.S.at.dim,):
            raise DimensionError(f"X must have {self.S.at.dim} entries, got {X.shape}")
        object.__setattr__(self, "X", X)

    @property
    def horizontal(self) -> np.ndarray:
        return self.X

    @property
    def vertical(self) -> VerticalVector:
        return self.S

    def coordinates(self, basis: Sequence[VerticalVector]) -> np.ndarray:
        coeffs = [float(np.sum(self.S.S * b.S)) for b in basis]
        return np.concatenate([self.X, np.asarray(coeffs, dtype=float)])


@dataclass
class CompatibilityReport:
    kind: str
    is_complex: bool
    is_compatible: bool
    is_positive: Optional[bool]
    orientation: Optional[int]
    residuals: Dict[str, float] = field(default_factory=dict)
    oriented: bool = False

    @property
    def ok(self) -> bool:
        flags = [self.is_complex, self.is_compatible]
        if self.kind == SYMPLECTIC:
            flags.append(bool(self.is_positive))
        elif self.oriented:
            flags.append(self.orientation == 1)
        return all(flags)

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["ok"] = self.ok
        return payload



def _ipq(p: int, q: int) -> np.ndarray:
    return np.diag([1.0] * p + [-1.0] * q)



def standard_structure(
    kind: str,
    p: Optional[int] = None,
    q: int = 0,
    *,
    n: Optional[int] = None,
    oriented: bool = False,
    flip_orientation: bool = False,
) -> BilinearStructure:
    if kind == PSEUDO:
        if p is None:
            if n is None:
                raise DimensionError("pseudo structures need p (and q) or n")
            p, q = n, 0
        if p < 0 or q < 0:
            raise DimensionError(f"Signature halves must be non-negative, got p={p}, q={q}")
        n = p + q
        if n < 2:
            raise DimensionError(f"Half-dimension must be at least 2, got n={n}")
        block = _ipq(p, q)
        G = linalg.block_diag(block, block)
        return BilinearStructure(
            kind=PSEUDO,
            n=n,
            G=G,
            p=p,
            q=q,
            oriented=oriented or flip_orientation,
            orientation=-1 if flip_orientation else 1,
        )
    if kind == SYMPLECTIC:
        n = n if n is not None else p
        if n is None or n < 2:
            raise DimensionError(f"Half-dimension must be at least 2, got n={n}")
        if oriented or flip_orientation:
            raise UnsupportedOperation("Symplectic structures carry their orientation through positivity")
        eye = np.eye(n)
        zero = np.zeros((n, n))
        G = np.block([[zero, eye], [-eye, zero]])
        return BilinearStructure(kind=SYMPLECTIC, n=n, G=G)
    raise ValueError(f"Unsupported structure kind: {kind}")



def check_structure(base: BilinearStructure, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> None:
    G = base.G
    sym = G - G.T if base.is_pseudo else G + G.T
    if fro(sym) > tol.exact * max(1.0, fro(G)):
        raise ConstraintError(f"Gram matrix has the wrong symmetry for {base.kind}: residual {fro(sym):.3e}")
    det = abs(float(np.linalg.det(G)))
    if det <= tol.determinant:
        raise ConstraintError(f"Gram matrix is degenerate: |det G| = {det:.3e}")
    if base.is_pseudo:
        eig = np.linalg.eigvalsh((G + G.T) / 2.0)
        pos, neg = int(np.sum(eig > 0)), int(np.sum(eig < 0))
        if (pos, neg) != base.signature:
            raise ConstraintError(f"Gram matrix has signature {(pos, neg)}, expected {base.signature}")



def standard_j0(base: BilinearStructure) -> ComplexStructure:
    n = base.n
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return ComplexStructure(J=np.block([[zero, -eye], [eye, zero]]), base=base)



def compatibility_check(
    J: np.ndarray | ComplexStructure,
    base: BilinearStructure,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> CompatibilityReport:
    J = np.asarray(J.J if isinstance(J, ComplexStructure) else J, dtype=float)
    d = base.dim
    if J.shape != (d, d):
        raise DimensionError(f"J must be {d}x{d}, got {J.shape}")
    G = base.G
    scale = max(1.0, fro(J) ** 2)
    complex_res = fro(J @ J + np.eye(d)) / scale
    compat_res = fro(J.T @ G @ J - G) / scale
    is_complex = complex_res <= tol.exact
    is_compatible = compat_res <= tol.exact
    residuals = {"complex": complex_res, "compatible": compat_res}

    is_positive: Optional[bool] = None
    orientation: Optional[int] = None
    if base.kind == SYMPLECTIC:
        GJ = G @ J
        sym = (GJ + GJ.T) / 2.0
        eig = np.linalg.eigvalsh(sym)
        residuals["positivity_min_eig"] = float(eig[0])
        is_positive = bool(eig[0] > tol.exact * max(1.0, float(np.max(np.abs(eig)))))
    elif base.oriented and is_complex and is_compatible:
        orientation = orientation_class(ComplexStructure(J=J, base=base), base, tol=tol)

    return CompatibilityReport(
        kind=base.kind,
        is_complex=bool(is_complex),
        is_compatible=bool(is_compatible),
        is_positive=is_positive,
        orientation=orientation,
        residuals=residuals,
        oriented=base.oriented,
    )



def make_complex_structure(
    J: np.ndarray,
    base: BilinearStructure,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> ComplexStructure:
    report = compatibility_check(J, base, tol=tol)
    if not report.ok:
        raise ConstraintError(f"Not a compatible complex structure: {report.to_dict()}")
    return ComplexStructure(J=J, base=base)



def lie_algebra_element(base: BilinearStructure, seed: int, *, max_norm: float = 1.0) -> np.ndarray:
    """Random xi with xi^T G + G xi = 0, spectral norm at most ``max_norm``."""
    d = base.dim
    rng = rng_for(seed)
    upper = np.triu(rng.uniform(-1.0, 1.0, size=(d, d)), k=0 if base.kind == SYMPLECTIC else 1)
    if base.is_pseudo:
        M = upper - upper.T
    else:
        M = upper + np.triu(upper, k=1).T
    xi = np.linalg.solve(base.G, M)
    norm = float(np.linalg.norm(xi, ord=2))
    if norm > max_norm:
        xi *= max_norm / norm
    return xi



def random_group_element(
    base: BilinearStructure,
    seed: int,
    *,
    max_norm: float = 1.0,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> np.ndarray:
    A = linalg.expm(lie_algebra_element(base, seed, max_norm=max_norm))
    G = base.G
    residual = fro(A.T @ G @ A - G) / max(1.0, fro(G))
    if residual > tol.identity:
        raise InvariantViolation(f"exp(xi) does not preserve the form: residual {residual:.3e}")
    return A



def conjugate_j(
    A: np.ndarray,
    j: ComplexStructure,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> ComplexStructure:
    base = j.base
    A = np.asarray(A, dtype=float)
    if A.shape != (base.dim, base.dim):
        raise DimensionError(f"A must be {base.dim}x{base.dim}, got {A.shape}")
    det = abs(float(np.linalg.det(A)))
    if det <= tol.determinant or np.linalg.cond(A) > 1.0 / np.finfo(float).eps:
        raise PreconditionError(f"A is not invertible: |det A| = {det:.3e}")
    G = base.G
    form_res = fro(A.T @ G @ A - G) / max(1.0, fro(G))
    if form_res > tol.identity:
        raise ConstraintError(f"A does not preserve the base form: residual {form_res:.3e}")
    J_new = np.linalg.solve(A.T, (A @ j.J).T).T
    report = compatibility_check(J_new, base, tol=tol.model_copy(update={"exact": tol.identity}))
    if not report.ok:
        raise InvariantViolation(f"Conjugated structure fails compatibility: {report.to_dict()}")
    return ComplexStructure(J=J_new, base=base)



def _commutation_matrix(d: int) -> np.ndarray:
    T = np.zeros((d * d, d * d))
    for i in range(d):
        for k in range(d):
            T[i * d + k, k * d + i] = 1.0
    return T



def vertical_basis(j: ComplexStructure, tol: ToleranceProfile = DEFAULT_TOLERANCES) -> List[VerticalVector]:
    """Frobenius-orthonormal basis of {S : SJ + JS = 0, S^T G + G S = 0}."""
    base = j.base
    d, n = base.dim, base.n
    J, G = j.J, base.G
    eye = np.eye(d)
    # row-major vec: vec(A X B) = kron(A, B^T) vec(X)
    anti = np.kron(eye, J.T) + np.kron(J, eye)
    iso = np.kron(eye, G.T) @ _commutation_matrix(d) + np.kron(G, eye)
    kernel = linalg.null_space(np.vstack([anti, iso]))
    expected = n * (n - 1) if base.is_pseudo else n * (n + 1)
    if kernel.shape[1] != expected:
        raise InvariantViolation(f"Vertical space has dimension {kernel.shape[1]}, expected {expected}")
    basis = [VerticalVector(S=kernel[:, k].reshape(d, d), at=j) for k in range(expected)]
    scale = max(1.0, fro(J))
    for S in basis:
        worst = max(S.residuals().values())
        if worst > tol.exact * scale:
            raise InvariantViolation(f"Vertical basis element violates its constraints: {worst:.3e}")
    return basis



def _g_orthogonal_part(w: np.ndarray, frame: List[Tuple[np.ndarray, float]], G: np.ndarray) -> np.ndarray:
    for _ in range(2):
        for v, eps in frame:
            w = w - eps * float(v @ G @ w) * v
    return w



def _pick_pivot(candidates: List[np.ndarray], G: np.ndarray, threshold: float) -> Optional[np.ndarray]:
    norms = [float(w @ G @ w) for w in candidates]
    scale = max((abs(x) for x in norms), default=0.0)
    if scale > threshold:
        for w, nw in zip(candidates, norms):
            if abs(nw) >= 0.5 * scale:
                return w
    sums = [candidates[a] + candidates[b] for a in range(len(candidates)) for b in range(a + 1, len(candidates))]
    sum_norms = [float(w @ G @ w) for w in sums]
    scale = max((abs(x) for x in sum_norms), default=0.0)
    if scale > threshold:
        for w, nw in zip(sums, sum_norms):
            if abs(nw) >= 0.5 * scale:
                return w
    return None



def orientation_class(
    j: ComplexStructure,
    base: Optional[BilinearStructure] = None,
    *,
    pivot_order: Optional[Sequence[int]] = None,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> int:
    """Sign of det(v_1, ..., v_n, jv_1, ..., jv_n) for a G-orthonormal adapted basis."""
    base = base or j.base
    if base.kind == SYMPLECTIC:
        raise UnsupportedOperation("orientation_class is defined for pseudo_riemannian structures only")
    if not base.oriented:
        raise PreconditionError("orientation_class needs an oriented structure")
    d, n = base.dim, base.n
    G, J = base.G, j.J
    order = list(pivot_order) if pivot_order is not None else list(range(d))
    if sorted(order) != list(range(d)):
        raise ValueError(f"pivot_order must be a permutation of range({d})")
    eye = np.eye(d)
    frame: List[Tuple[np.ndarray, float]] = []
    vs: List[np.ndarray] = []
    threshold = tol.pivot * max(1.0, fro(G))
    for _ in range(n):
        candidates = [_g_orthogonal_part(eye[:, k], frame, G) for k in order]
        w = _pick_pivot(candidates, G, threshold)
        if w is None:
            raise InvariantViolation("No non-null vector left while building an adapted basis")
        w = _g_orthogonal_part(w, frame, G)
        norm = float(w @ G @ w)
        v = w / np.sqrt(abs(norm))
        eps = float(np.sign(norm))
        frame.append((v, eps))
        frame.append((J @ v, eps))
        vs.append(v)
    basis = np.column_stack(vs + [J @ v for v in vs])
    det = float(np.linalg.det(basis))
    if abs(det) <= tol.determinant:
        raise InvariantViolation(f"Adapted basis is degenerate: det = {det:.3e}")
    return int(np.sign(det)) * base.orientation



def orientation_reversing_isometry(base: BilinearStructure) -> np.ndarray:
    if not base.is_pseudo:
        raise UnsupportedOperation("Symplectic structures have no orientation-reversing isometries")
    R = np.eye(base.dim)
    R[-1, -1] = -1.0
    return R



def fibre_base_point(base: BilinearStructure, component: int = 1) -> ComplexStructure:
    """j0 on the reference component, its reflection on the other one."""
    j0 = standard_j0(base)
    if base.is_pseudo and base.orientation * component < 0:
        R = orientation_reversing_isometry(base)
        return ComplexStructure(J=R @ j0.J @ R, base=base)
    return j0



def _best_pair(candidates: List[np.ndarray], G: np.ndarray, threshold: float) -> Optional[Tuple[int, int]]:
    best: Optional[Tuple[int, int]] = None
    best_norm = threshold
    for a in range(len(candidates)):
        for b in range(a + 1, len(candidates)):
            w = candidates[a] + candidates[b]
            norm = abs(float(w @ G @ w))
            if norm > best_norm:
                best, best_norm = (a, b), norm
    return best



def _pseudo_frame(Gx: np.ndarray, p: Optional[int], q: Optional[int], tol: ToleranceProfile) -> np.ndarray:
    d = Gx.shape[0]
    threshold = tol.pivot * max(1.0, fro(Gx))
    remaining = [np.eye(d)[:, k] for k in range(d)]
    frame: List[Tuple[np.ndarray, float]] = []
    while remaining:
        remaining = [_g_orthogonal_part(w, frame, Gx) for w in remaining]
        norms = [float(w @ Gx @ w) for w in remaining]
        best = int(np.argmax(np.abs(norms)))
        if abs(norms[best]) > threshold:
            w = remaining.pop(best)
        else:
            pair = _best_pair(remaining, Gx, threshold)
            if pair is None:
                raise PreconditionError("Near-degenerate metric: pivot below tolerance")
            a, b = pair
            w = remaining[a] + remaining[b]
            remaining.pop(a)
        w = _g_orthogonal_part(w, frame, Gx)
        norm = float(w @ Gx @ w)
        if abs(norm) <= threshold:
            raise PreconditionError("Near-degenerate metric: pivot below tolerance")
        frame.append((w / np.sqrt(abs(norm)), float(np.sign(norm))))

    positives = [v for v, eps in frame if eps > 0]
    negatives = [v for v, eps in frame if eps < 0]
    if p is None or q is None:
        if len(positives) % 2 or len(negatives) % 2:
            raise PreconditionError(f"Signature {(len(positives), len(negatives))} is not of the form (2p, 2q)")
        p, q = len(positives) // 2, len(negatives) // 2
    if (len(positives), len(negatives)) != (2 * p, 2 * q):
        raise PreconditionError(
            f"Signature mismatch: metric has {(len(positives), len(negatives))}, expected {(2 * p, 2 * q)}"
        )
    columns = positives[:p] + negatives[:q] + positives[p:] + negatives[q:]
    xi = np.column_stack(columns)
    if np.linalg.det(xi) < 0:
        xi[:, -1] *= -1.0
    return xi



def _darboux_frame(Gx: np.ndarray, tol: ToleranceProfile) -> np.ndarray:
    d = Gx.shape[0]
    n = d // 2
    threshold = tol.pivot * max(1.0, fro(Gx))
    remaining = [np.eye(d)[:, k] for k in range(d)]
    es: List[np.ndarray] = []
    fs: List[np.ndarray] = []
    for _ in range(n):
        W = np.column_stack(remaining)
        pairing = W.T @ Gx @ W
        a, b = np.unravel_index(int(np.argmax(np.abs(pairing))), pairing.shape)
        value = float(pairing[a, b])
        if abs(value) <= threshold:
            raise PreconditionError("Near-degenerate symplectic form: pivot below tolerance")
        e, f = remaining[a], remaining[b] / value
        remaining = [w for k, w in enumerate(remaining) if k not in (a, b)]
        for _ in range(2):
            remaining = [w - float(w @ Gx @ f) * e + float(w @ Gx @ e) * f for w in remaining]
        es.append(e)
        fs.append(f)
    return np.column_stack(es + fs)



def pseudo_orthonormal_frame(
    Gx: np.ndarray,
    kind: str = PSEUDO,
    *,
    p: Optional[int] = None,
    q: Optional[int] = None,
    tol: ToleranceProfile = DEFAULT_TOLERANCES,
) -> np.ndarray:
    """Frame xi with xi^T Gx xi equal to the standard form of the same kind."""
    Gx = np.asarray(Gx, dtype=float)
    d = Gx.shape[0]
    if Gx.shape != (d, d) or d % 2 or d < 4:
        raise DimensionError(f"Expected an even square matrix of size >= 4, got {Gx.shape}")
    if kind == PSEUDO:
        if fro(Gx - Gx.T) > tol.exact * max(1.0, fro(Gx)):
            raise ConstraintError("Pseudo-Riemannian metric must be symmetric")
        xi = _pseudo_frame(Gx, p, q, tol)
        pos = int(sum(1 for k in range(d) if float(xi[:, k] @ Gx @ xi[:, k]) > 0))
        target = standard_structure(PSEUDO, pos // 2, (d - pos) // 2).G
    elif kind == SYMPLECTIC:
        if fro(Gx + Gx.T) > tol.exact * max(1.0, fro(Gx)):
            raise ConstraintError("Symplectic form must be antisymmetric")
        xi = _darboux_frame(Gx, tol)
        target = standard_structure(SYMPLECTIC, n=d // 2).G
    else:
        raise ValueError(f"Unsupported structure kind: {kind}")
    residual = fro(xi.T @ Gx @ xi - target)
    if residual > tol.identity * max(1.0, fro(Gx)):
        raise InvariantViolation(f"Frame residual too large: {residual:.3e}")
    logger.debug("frame built for %s metric, residual %.3e", kind, residual)
    return xi



def form_membership_residual(S_form: np.ndarray, j: ComplexStructure) -> float:
    """Distance of a 2-form from {S antisymmetric, S(jX, jY) = -S(X, Y)}."""
    S = np.asarray(S_form, dtype=float)
    J = j.J
    return max(fro(S + S.T), fro(J.T @ S @ J + S))



def anti_invariant_projection(S_form: np.ndarray, j: ComplexStructure) -> np.ndarray:
    S = np.asarray(S_form, dtype=float)
    A = (S - S.T) / 2.0
    return (A - j.J.T @ A @ j.J) / 2.0



def random_anti_invariant_form(j: ComplexStructure, seed: int) -> np.ndarray:
    d = j.dim
    rng = rng_for(seed)
    S = anti_invariant_projection(rng.uniform(-1.0, 1.0, size=(d, d)), j)
    norm = fro(S)
    if norm == 0.0:
        raise InvariantViolation("Random anti-invariant form vanished")
    return S / norm
