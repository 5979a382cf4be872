import numpy as np
import pytest

from conftest import PSEUDO_HALVES, all_bases, base_id, fibre_points, pseudo_base, rel, symplectic_base
from twistorkit.errors import ConstraintError, DimensionError, PreconditionError, UnsupportedOperation
from twistorkit.spaces import (
    PSEUDO,
    SYMPLECTIC,
    ComplexStructure,
    compatibility_check,
    conjugate_j,
    fibre_base_point,
    form_membership_residual,
    lie_algebra_element,
    make_complex_structure,
    orientation_class,
    pseudo_orthonormal_frame,
    random_anti_invariant_form,
    random_group_element,
    standard_j0,
    standard_structure,
    vertical_basis,
)


def test_standard_structures():
    riem = standard_structure(PSEUDO, 2, 0)
    assert np.array_equal(riem.G, np.eye(4))
    assert riem.signature == (4, 0)

    split = standard_structure(PSEUDO, 1, 1)
    assert np.array_equal(split.G, np.diag([1.0, -1.0, 1.0, -1.0]))
    assert split.signature == (2, 2)

    sympl = standard_structure(SYMPLECTIC, n=2)
    assert np.array_equal(sympl.G, -sympl.G.T)
    assert sympl.G[0, 2] == 1.0 and sympl.G[2, 0] == -1.0

    with pytest.raises(DimensionError):
        standard_structure(PSEUDO, 1, 0)
    with pytest.raises(DimensionError):
        standard_structure(SYMPLECTIC, n=1)
    with pytest.raises(UnsupportedOperation):
        standard_structure(SYMPLECTIC, n=2, oriented=True)


def test_gram_matrix_is_read_only(riemannian4):
    with pytest.raises(ValueError):
        riemannian4.G[0, 0] = 5.0


@pytest.mark.parametrize("base", all_bases(), ids=base_id)
def test_standard_j0_is_compatible(base):
    report = compatibility_check(standard_j0(base), base)
    assert report.ok
    assert report.residuals["complex"] == 0.0
    if base.kind == SYMPLECTIC:
        assert report.is_positive


def test_compatibility_rejects_bad_j(riemannian4):
    J = np.diag([1.0, 1.0, 1.0, 1.0])
    report = compatibility_check(J, riemannian4)
    assert not report.is_complex
    with pytest.raises(ConstraintError):
        make_complex_structure(J, riemannian4)
    with pytest.raises(DimensionError):
        compatibility_check(np.eye(3), riemannian4)


def test_symplectic_positivity_detected(symplectic4):
    J = -standard_j0(symplectic4).J
    report = compatibility_check(J, symplectic4)
    assert report.is_complex and report.is_compatible
    assert report.is_positive is False
    assert not report.ok


@pytest.mark.parametrize("base", all_bases(), ids=base_id)
def test_group_elements_preserve_the_form(base):
    for seed in range(5):
        xi = lie_algebra_element(base, seed)
        assert np.linalg.norm(xi.T @ base.G + base.G @ xi) < 1e-12
        assert np.linalg.norm(xi, 2) <= 1.0 + 1e-12
        A = random_group_element(base, seed)
        assert rel(A.T @ base.G @ A, base.G) < 1e-10


@pytest.mark.parametrize("base", all_bases(), ids=base_id)
def test_conjugated_structures_stay_compatible(base):
    for j in fibre_points(base, count=6, seed=3):
        assert rel(j.J @ j.J, -np.eye(base.dim)) < 1e-9
        assert rel(j.J.T @ base.G @ j.J, base.G) < 1e-9
        if base.kind == SYMPLECTIC:
            GJ = base.G @ j.J
            assert np.linalg.eigvalsh((GJ + GJ.T) / 2.0)[0] > 0.0


def test_conjugate_rejects_non_isometry(riemannian4):
    with pytest.raises(ConstraintError):
        conjugate_j(2.0 * np.eye(4), standard_j0(riemannian4))
    with pytest.raises(PreconditionError):
        conjugate_j(np.zeros((4, 4)), standard_j0(riemannian4))


@pytest.mark.parametrize("base", all_bases(), ids=base_id)
def test_vertical_basis(base):
    j = fibre_points(base, count=1, seed=11)[0]
    basis = vertical_basis(j)
    n = base.n
    assert len(basis) == (n * (n - 1) if base.is_pseudo else n * (n + 1))
    for S in basis:
        assert max(S.residuals().values()) < 1e-9
    M = np.array([S.S.ravel() for S in basis])
    assert np.allclose(M @ M.T, np.eye(len(basis)), atol=1e-10)


@pytest.mark.parametrize("p,q", PSEUDO_HALVES)
def test_pseudo_orthonormal_frame(p, q):
    base = pseudo_base(p, q)
    rng = np.random.default_rng(5)
    M = np.eye(base.dim) + 0.3 * rng.uniform(-1.0, 1.0, (base.dim, base.dim))
    Gx = M.T @ base.G @ M
    xi = pseudo_orthonormal_frame(Gx, PSEUDO, p=p, q=q)
    assert rel(xi.T @ Gx @ xi, base.G) < 1e-9
    assert np.linalg.det(xi) > 0.0


def test_darboux_frame():
    base = symplectic_base(3)
    rng = np.random.default_rng(2)
    M = np.eye(6) + 0.3 * rng.uniform(-1.0, 1.0, (6, 6))
    Gx = M.T @ base.G @ M
    xi = pseudo_orthonormal_frame(Gx, SYMPLECTIC)
    assert rel(xi.T @ Gx @ xi, base.G) < 1e-9


def test_frame_rejects_wrong_signature():
    with pytest.raises(PreconditionError):
        pseudo_orthonormal_frame(np.diag([1.0, -1.0, 1.0, 1.0]))
    with pytest.raises(PreconditionError):
        pseudo_orthonormal_frame(np.eye(4), p=1, q=1)
    with pytest.raises(ConstraintError):
        pseudo_orthonormal_frame(np.array([[1.0, 1.0, 0, 0], [0, 1.0, 0, 0], [0, 0, 1.0, 0], [0, 0, 0, 1.0]]))


def test_frame_handles_null_pivots():
    # neutral metric with zero diagonal forces the pair pivot
    Gx = np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 0.0],
        ]
    )
    xi = pseudo_orthonormal_frame(Gx, PSEUDO, p=1, q=1)
    assert rel(xi.T @ Gx @ xi, np.diag([1.0, -1.0, 1.0, -1.0])) < 1e-9


def test_orientation_classes():
    base = pseudo_base(2, 0, oriented=True)
    assert orientation_class(standard_j0(base)) == 1
    other = fibre_base_point(base, component=-1)
    assert orientation_class(other) == -1

    flipped = pseudo_base(2, 0, oriented=True, flip_orientation=True)
    assert flipped.orientation == -1
    assert standard_structure(PSEUDO, 2, 0, flip_orientation=True).oriented
    assert orientation_class(fibre_base_point(flipped)) == 1

    for j in fibre_points(base, count=4, seed=1):
        assert orientation_class(j) == 1
        assert orientation_class(j, pivot_order=[3, 2, 1, 0]) == 1

    with pytest.raises(PreconditionError):
        orientation_class(standard_j0(pseudo_base(2, 0)))


def test_non_oriented_sampling_covers_both_components():
    base = pseudo_base(2, 0)
    oriented = pseudo_base(2, 0, oriented=True)
    classes = {orientation_class(ComplexStructure(J=j.J, base=oriented)) for j in fibre_points(base, count=4)}
    assert classes == {1, -1}


@pytest.mark.parametrize("base", all_bases(), ids=base_id)
def test_random_anti_invariant_form(base):
    for j in fibre_points(base, count=3, seed=7):
        S = random_anti_invariant_form(j, 4)
        assert form_membership_residual(S, j) < 1e-12
        assert np.linalg.norm(S) == pytest.approx(1.0)
