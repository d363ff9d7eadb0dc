import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dispersion_lab.errors import DomainError, ShapeError, ValidationError
from dispersion_lab.fields import FieldGrid
from dispersion_lab.kdv_limit import (
    PhiTable,
    classify_kdv_sign,
    dphi_deta,
    emit_table1,
    nu_turb_field,
    phi_kdv,
    phi_kdv_quad,
    table_matrix,
    ubar_asymptotic,
)
from dispersion_lab.profiles import KdvBetaWell, NonSmoothProfileWarning, SampledWell

from reference_values import KDV_ETAS, KDV_PHI


def well(beta, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NonSmoothProfileWarning)
        return KdvBetaWell(beta, **kw)


@pytest.mark.parametrize("beta,col", [(1.0, 0), (2.0, 2), (4.0, 3)])
def test_phi_matches_reference_columns(beta, col):
    vals = [phi_kdv(well(beta), e) for e in KDV_ETAS]
    np.testing.assert_allclose(vals, KDV_PHI[:, col], rtol=1e-4)


def test_phi_corner_cells():
    assert phi_kdv(well(1.0), 0.1) == pytest.approx(5.88251, abs=2e-5)
    assert phi_kdv(well(4.0), 0.9) == pytest.approx(3.73515, abs=5e-5)


def test_phi_harmonic_limit():
    assert phi_kdv(well(2.0), 0.999) == pytest.approx(math.pi, abs=2e-2)


def test_beta_one_closed_form():
    # u0 = -exp(-|x|) gives phi(eta) = 4 arccos(eta)
    e = 0.3
    assert phi_kdv(well(1.0), e, tol=1e-12) == pytest.approx(4 * math.acos(e), rel=1e-10)


@pytest.mark.parametrize("eta", [0.0, 1.0, 1.2])
def test_phi_domain(eta):
    with pytest.raises(DomainError):
        phi_kdv(well(2.0), eta)


@pytest.mark.parametrize("beta", [1.5, 2.0, 4.0])
def test_schemes_agree(beta):
    for e in (0.1, 0.5, 0.9):
        a = phi_kdv_quad(well(beta), e, 1e-12, "de").value
        b = phi_kdv_quad(well(beta), e, 1e-12, "subst").value
        assert a == pytest.approx(b, rel=1e-9)


@settings(max_examples=20, deadline=None)
@given(shift=st.floats(-5, 5), eta=st.floats(0.05, 0.95))
def test_translation_invariance(shift, eta):
    assert phi_kdv(well(2.0, shift=shift), eta) == pytest.approx(phi_kdv(well(2.0), eta), rel=1e-9)


def test_derivative_translation_invariance():
    a = dphi_deta(well(2.0), 0.5).value
    b = dphi_deta(well(2.0, shift=3.7), 0.5).value
    assert a == pytest.approx(b, abs=1e-8)


@settings(max_examples=15, deadline=None)
@given(eta=st.floats(0.05, 0.95), w=st.floats(1.0, 3.0))
def test_wider_well_does_not_decrease_phi(eta, w):
    assert phi_kdv(well(2.0, width=w), eta) >= phi_kdv(well(2.0), eta) * (1 - 1e-12)


@pytest.mark.parametrize("beta", [1.5, 2.0, 4.0])
def test_phi_positive(beta):
    for e in np.linspace(0.02, 0.98, 9):
        assert phi_kdv(well(beta), e) > 0


def test_sampled_well_matches_analytic():
    x = np.linspace(-8, 8, 4001)
    sampled = SampledWell(x, -np.exp(-x**2))
    assert phi_kdv(sampled, 0.5, tol=1e-8) == pytest.approx(phi_kdv(well(2.0), 0.5), rel=1e-4)


def test_ubar_examples():
    v = ubar_asymptotic(well(1.0), 0.04, 1.0)
    assert v.value == pytest.approx(-0.46811, abs=1e-5)
    assert v.regime == "whitham"
    out = ubar_asymptotic(well(1.0), -1.0, 1.0)
    assert out.value == 0.0 and out.order == "O(t^-2)"
    v = ubar_asymptotic(well(2.0), 32.4, 10.0)
    assert v.value == pytest.approx(-0.0243448, rel=1e-4)


def test_ubar_transition_and_domain():
    assert ubar_asymptotic(well(2.0), 3.9995, 1.0).regime == "transition"
    assert ubar_asymptotic(well(2.0), 5.0, 1.0).value == 0.0
    with pytest.raises(DomainError):
        ubar_asymptotic(well(2.0), 1.0, 0.0)
    with pytest.raises(DomainError):
        ubar_asymptotic(well(2.0), 1.0, 1.0, delta=0)


def test_dphi_signs_and_consistency():
    d1 = dphi_deta(well(1.0), 0.5)
    d4 = dphi_deta(well(4.0), 0.5)
    assert d1.value < 0 < d4.value
    assert d1.consistent and d4.consistent
    with pytest.raises(DomainError):
        dphi_deta(well(2.0), 0.99995, h=1e-4)


def test_dphi_beta_one_closed_form():
    # d/deta 4 arccos(eta)
    e = 0.4
    assert dphi_deta(well(1.0), e).value == pytest.approx(-4 / math.sqrt(1 - e * e), rel=1e-7)


@pytest.mark.parametrize("beta,expected", [(1.0, "diffusive"), (1.5, "mixed"),
                                           (2.0, "antidiffusive"), (4.0, "antidiffusive")])
def test_sign_classification(beta, expected):
    report = classify_kdv_sign(well(beta), KDV_ETAS)
    assert report.classification == expected
    assert len(report.witness_points) == 9


def test_sign_grid_domain():
    with pytest.raises(DomainError):
        classify_kdv_sign(well(2.0), [0.5, 1.0])


def test_emit_table1_shapes():
    assert emit_table1([], KDV_ETAS) == []
    assert table_matrix([]).shape == (0, 0)
    (t,) = emit_table1([2.0], [0.9])
    assert t.values[0] == pytest.approx(3.05934, abs=1e-4)
    assert t.kind == "kdv_eta" and t.beta == 2.0
    assert table_matrix(emit_table1([2.0, 4.0], [0.1, 0.2])).shape == (2, 2)


def test_phi_table_invariants():
    with pytest.raises(ValueError):
        PhiTable("kdv_eta", [0.2, 0.1], [1, 1], [0, 0])
    with pytest.raises(ValueError):
        PhiTable("kdv_eta", [0.1, 0.2], [1, -1], [0, 0])
    with pytest.raises(ValueError):
        PhiTable("other", [0.1], [1], [0])
    PhiTable("nls_lambda", [0.5, 0.6], [0.0, 1.0], [0, 0], lower_edge=0.5)


def _grid_field(values, dx=0.01):
    return FieldGrid(np.asarray(values), (dx,), (0.0,))


def test_nu_turb_zero_defect():
    x = np.arange(200) * 0.01
    ubar = _grid_field(np.sin(x))
    nu = nu_turb_field(ubar, _grid_field(np.sin(x) ** 2))
    assert np.all(nu.masked(0.0) == 0.0)


def test_nu_turb_constant():
    x = np.arange(200) * 0.01
    nu = nu_turb_field(_grid_field(x), _grid_field(x**2 + 0.3))
    np.testing.assert_allclose(nu.values[~nu.mask], 0.3, rtol=1e-10)


def test_nu_turb_flat_mean_fully_masked():
    nu = nu_turb_field(_grid_field(np.ones(50)), _grid_field(np.full(50, 2.0)))
    assert nu.mask.all()


def test_nu_turb_rejections():
    with pytest.raises(ValidationError):
        nu_turb_field(_grid_field(np.ones(50)), _grid_field(np.zeros(50)))
    with pytest.raises(ShapeError):
        nu_turb_field(_grid_field(np.ones(50)), _grid_field(np.ones(40)))
