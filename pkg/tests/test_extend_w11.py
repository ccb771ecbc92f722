"""Sobolev-case extension: averaged reflection, correctors and their identities."""

import numpy as np
import pytest

from divext.domain import Rectangle
from divext.extend_l1 import ExtendConfig, prepare
from divext.extend_w11 import (
    CalibrationError,
    CorrectorStack,
    band_points,
    calibrate,
    fd_divergence,
    identity_suite,
    printed_coefficients,
    telescoping_coefficients,
)
from divext.fields import catalog

SQUARE = Rectangle([0, 0], [1, 1])


def stack_for(name, n=2, coefficients="telescoping", **params):
    dom = Rectangle([0] * n, [1] * n)
    h = prepare(dom, catalog(name, n, seed=0, **params), ExtendConfig(max_level=9 if n == 2 else 7))
    return CorrectorStack(h, coefficients)


@pytest.fixture(scope="module")
def poly_stack():
    return stack_for("stream_poly", degree=3)


def test_coefficient_sets():
    assert telescoping_coefficients(2) == {1: -1.0}
    assert telescoping_coefficients(3) == {1: -0.5, 2: -1.0}
    assert printed_coefficients(2) == {1: -1.0}
    assert printed_coefficients(3) == {1: -0.5, 2: 0.5}


def test_constant_field_has_no_correction():
    st = stack_for("constant")
    for y in band_points(st.h, 5, 0):
        np.testing.assert_allclose(st.R(1, y), 0, atol=1e-12)
        np.testing.assert_allclose(st.S(1, y), 0, atol=1e-12)
        np.testing.assert_allclose(st.S(2, y), 0, atol=1e-12)


def test_solenoidal_linear_field_has_zero_top_term():
    st = stack_for("linear")
    for y in band_points(st.h, 5, 1):
        assert abs(float(st.S(2, y)[0])) <= 1e-10


def test_restriction_and_support(poly_stack):
    y = np.array([0.3, 0.6])
    np.testing.assert_array_equal(poly_stack.E0(y), poly_stack.h.field(y))
    np.testing.assert_array_equal(poly_stack.assemble(y), poly_stack.h.field(y))
    np.testing.assert_array_equal(poly_stack.R(1, y), 0)
    far = np.array([0.5, 1.0 + 2.01 * poly_stack.h.theta])
    np.testing.assert_array_equal(poly_stack.assemble(far), 0)


def test_index_ranges(poly_stack):
    with pytest.raises(ValueError):
        poly_stack.S(3, [1.1, 0.5])
    with pytest.raises(ValueError):
        poly_stack.R(2, [1.1, 0.5])


def test_fd_divergence_of_linear_field():
    A = np.array([[1.0, 2.0], [-3.0, 0.5]])
    assert fd_divergence(lambda z: A @ z, np.array([0.3, -0.2]), 1e-2) == pytest.approx(1.5, abs=1e-9)


def test_identities_hold_at_band_points(poly_stack):
    res = identity_suite(poly_stack, band_points(poly_stack.h, 6, 2))
    assert np.max(np.abs(res["dE0"])) <= 1e-4
    assert np.max(np.abs(res["dR1"])) <= 1e-4
    assert np.max(np.abs(res["S_n"])) <= 1e-6
    assert np.max(np.abs(res["assemble"])) <= 1e-5


def test_calibration_reports_both_sets(poly_stack):
    report = calibrate(poly_stack, band_points(poly_stack.h, 3, 3))
    assert report["telescoping"]["coefficients"] == {1: -1.0}
    assert report["telescoping"]["max_residual"] <= 1e-5
    assert set(report["identities"]) == {"dE0", "dR1", "S_n", "assemble"}


def test_calibration_error_names_failing_identity():
    st = stack_for("wave")
    with pytest.raises(CalibrationError, match="S_1|R_1"):
        calibrate(st, band_points(st.h, 4, 4), tol=1e-12)


@pytest.mark.slow
def test_three_dimensional_telescoping_identities():
    st = stack_for("stream_poly", n=3, degree=2)
    res = identity_suite(st, band_points(st.h, 2, 5))
    for key in ("dE0", "dR1", "dR2"):
        assert np.max(np.abs(res[key])) <= 1e-4
    assert np.max(np.abs(res["S_n"])) <= 1e-6
    assert np.max(np.abs(res["assemble"])) <= 1e-5
