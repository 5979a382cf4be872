import numpy as np
import pytest

from conftest import pseudo_base, rel, symplectic_base
from twistorkit.charts import (
    ChartMetric,
    SymplecticPointFixture,
    chart_from_config,
    christoffel_at,
    constant_curvature_oracle,
    curvature_at,
    metric_at,
    random_symplectic_fixture,
    symplectic_fixture_curvature,
)
from twistorkit.config import DEFAULT_TOLERANCES, SamplingConfig, SourceConfig, StructureConfig
from twistorkit.curvature import (
    build_E_of_r,
    decompose_pseudo,
    decompose_symplectic,
    is_ricci_type,
    pinching_report,
    ricci,
    scalar_curvature,
    sd_asd_split,
)
from twistorkit.errors import (
    ConstraintError,
    DimensionError,
    DomainError,
    FiniteDifferenceError,
    PreconditionError,
    UnsupportedOperation,
)
from twistorkit.verdicts import integrability_verdict

SAMPLING = SamplingConfig(fiber_samples=6, seed=4)


def chart_points(dim, count, radius, seed):
    return np.random.default_rng(seed).uniform(-radius, radius, (count, dim))


def test_flat_chart_has_no_connection():
    chart = ChartMetric("flat")
    x = [0.3, -0.2, 0.1, 0.4]
    assert np.array_equal(metric_at(chart, x), np.eye(4))
    assert np.linalg.norm(christoffel_at(chart, x)) < 1e-12
    assert curvature_at(chart, x).norm < 1e-9


def test_stereographic_christoffels():
    chart = ChartMetric("sphere")
    assert np.linalg.norm(christoffel_at(chart, np.zeros(4))) < 1e-12

    x = np.array([0.2, -0.1, 0.3, 0.05])
    gamma = christoffel_at(chart, x)
    assert np.array_equal(gamma, gamma.transpose(0, 2, 1))
    # conformal factor 2 / (1 + |x|^2): Gamma^a_bc = d_ab f_c + d_ac f_b - d_bc f_a
    f = -2.0 * x / (1.0 + x @ x)
    eye = np.eye(4)
    expected = np.einsum("ab,c->abc", eye, f) + np.einsum("ac,b->abc", eye, f) - np.einsum("bc,a->abc", eye, f)
    assert rel(gamma, expected) < 1e-8


@pytest.mark.parametrize(
    "fixture,p,q,radius",
    [("sphere", 2, 0, 1.0), ("sphere", 3, 0, 2.0), ("hyperbolic", 2, 0, 1.0), ("pseudo_sphere_22", 1, 1, 1.0)],
)
def test_space_forms_match_the_oracle(fixture, p, q, radius):
    chart = ChartMetric(fixture, dim=2 * (p + q), p=p, q=q, radius=radius)
    oracle = constant_curvature_oracle(chart.sectional_constant, chart.standard_base())
    for x in chart_points(chart.dim, 3, 0.3 * radius, seed=p + q):
        R = curvature_at(chart, x)
        assert rel(R.R4, oracle.R4) < 1e-6


def test_sphere_scalar_curvature_is_chart_independent():
    chart = ChartMetric("sphere")
    values = [scalar_curvature(curvature_at(chart, x)) for x in ([0.0] * 4, [0.5, -0.4, 0.2, 0.1])]
    assert values[0] == pytest.approx(12.0, abs=1e-6)
    assert values[1] == pytest.approx(values[0], abs=1e-6)


def test_product_of_spheres():
    chart = ChartMetric("product_spheres")
    R = curvature_at(chart, [0.1, -0.3, 0.2, 0.25])
    assert rel(ricci(R), R.base.G) < 1e-6
    assert scalar_curvature(R) == pytest.approx(4.0, abs=1e-6)
    parts = decompose_pseudo(R)
    assert parts.E_part.norm < 1e-6
    assert parts.C_part.norm > 0.1 * R.norm
    report = pinching_report(R, samples=12, seed=0)
    assert report["min"] == pytest.approx(0.0, abs=1e-6)
    assert report["max"] == pytest.approx(1.0, abs=1e-6)


def test_fubini_study_is_self_dual():
    chart = ChartMetric("fubini_study_cp2")
    x = [0.1, -0.2, 0.15, 0.05]
    R = curvature_at(chart, x, base=chart.standard_base(oriented=True))
    parts = decompose_pseudo(R)
    assert parts.E_part.norm <= 1e-5 * R.norm
    plus, minus = sd_asd_split(parts.C_part)
    assert minus.norm <= 1e-5 * parts.C_part.norm
    assert plus.norm > 0.1 * parts.C_part.norm

    assert integrability_verdict(R, "+", SAMPLING, approximate=True).require_agreement().answer is True
    flipped = curvature_at(chart, x, base=chart.standard_base(oriented=True, flip_orientation=True))
    assert integrability_verdict(flipped, "+", SAMPLING, approximate=True).require_agreement().answer is False


def test_chart_validation():
    with pytest.raises(ValueError):
        ChartMetric("torus")
    with pytest.raises(DimensionError):
        ChartMetric("sphere", dim=5)
    with pytest.raises(DimensionError):
        ChartMetric("product_spheres", dim=6, p=3)
    with pytest.raises(PreconditionError):
        ChartMetric("sphere", fd_step=0.5)
    with pytest.raises(ConstraintError):
        ChartMetric("pseudo_sphere_22")
    with pytest.raises(ConstraintError):
        ChartMetric("hyperbolic", p=1, q=1)
    with pytest.raises(DimensionError):
        metric_at(ChartMetric("sphere"), [0.0, 0.0, 0.0])


def test_domain_errors():
    with pytest.raises(DomainError):
        metric_at(ChartMetric("hyperbolic"), [0.6, 0.6, 0.6, 0.0])
    with pytest.raises(DomainError):
        metric_at(ChartMetric("pseudo_sphere_22", p=1, q=1), [0.0, 1.0, 0.0, 0.0])
    with pytest.raises(DomainError):
        metric_at(ChartMetric("sphere"), [0.0, float("nan"), 0.0, 0.0])


def test_finite_difference_gate():
    chart = ChartMetric("sphere", fd_step=0.1, richardson=False)
    strict = DEFAULT_TOLERANCES.model_copy(update={"fd_gate": 1e-12})
    with pytest.raises(FiniteDifferenceError):
        curvature_at(chart, [0.4, 0.3, -0.2, 0.1], tol=strict)


def test_chart_and_base_must_match():
    with pytest.raises(ConstraintError):
        curvature_at(ChartMetric("sphere"), np.zeros(4), base=pseudo_base(1, 1))


def test_constant_curvature_oracle():
    assert scalar_curvature(constant_curvature_oracle(1.0, pseudo_base(3, 0))) == pytest.approx(30.0)
    assert constant_curvature_oracle(0.0, pseudo_base(2, 0)).norm == 0.0
    with pytest.raises(UnsupportedOperation):
        constant_curvature_oracle(1.0, symplectic_base(2))


def test_symplectic_fixtures():
    plain = random_symplectic_fixture(3, 7)
    R = symplectic_fixture_curvature(plain)
    assert is_ricci_type(R)[0]
    assert rel(ricci(R), plain.r) < 1e-12

    mixed = random_symplectic_fixture(2, 7, weyl_count=2)
    R = symplectic_fixture_curvature(mixed)
    parts = decompose_symplectic(R)
    assert rel(parts.E_part.R4, build_E_of_r(mixed.r, mixed.base).R4) < 1e-10
    assert parts.W_part.norm > 1e-3
    assert not is_ricci_type(R)[0]


def test_symplectic_fixture_validation():
    with pytest.raises(DimensionError):
        SymplecticPointFixture(n=1, r=np.zeros((2, 2)))
    with pytest.raises(DimensionError):
        SymplecticPointFixture(n=2, r=np.zeros((3, 3)))
    bad = SymplecticPointFixture(n=2, r=np.zeros((4, 4)), weyl_seeds=[(np.zeros((4, 4)), np.eye(4))])
    with pytest.raises(ConstraintError):
        symplectic_fixture_curvature(bad)


def test_chart_from_config():
    chart = chart_from_config(
        StructureConfig(dim=6, signature=(6, 0)),
        SourceConfig(fixture="sphere", radius=2.0, fd_step=1e-3),
    )
    assert (chart.dim, chart.p, chart.q, chart.radius) == (6, 3, 0, 2.0)
    assert chart.sectional_constant == pytest.approx(0.25)
