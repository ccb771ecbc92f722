"""Verification harness: cusp obstructions, Stokes, test functions, FD and norms."""

from math import pi, sqrt

import numpy as np
import pytest

from divext.domain import Ball, Rectangle
from divext.extend_l1 import ExtendConfig, prepare
from divext.fields import catalog
from divext.verify import (
    CuspScenario,
    TestFunction,
    cusp_flux,
    cusp_lowerbound,
    domain_integral,
    exponent_window,
    fd_orders,
    norm_ratio,
    pointwise_div_fd,
    random_tests,
    richardson,
    stokes_check,
    strip_ratios,
    weak_div_residual,
)

SQUARE = Rectangle([0, 0], [1, 1])
PLUS = CuspScenario(0.5, 2.5, 1.0)


def test_flux_closed_form_value():
    out = cusp_flux(PLUS, 0.01)
    expect = (0.01 ** (0.5 * -1.5) - 0.01 ** -1.5) / 1.5
    assert out["closed_form"] == pytest.approx(expect, rel=1e-14)
    assert out["closed_form"] == pytest.approx(-645.6, abs=0.05)
    assert out["quadrature"] == pytest.approx(out["closed_form"], abs=1e-8 * abs(expect))


@pytest.mark.parametrize("s", [1e-4, 1e-3, 0.05])
def test_flux_quadrature_matches_closed_form(s):
    out = cusp_flux(PLUS, s)
    assert abs(out["quadrature"] - out["closed_form"]) <= 1e-8 * max(1.0, abs(out["closed_form"]))


def test_window_plus():
    w = exponent_window(0.5)
    assert w["alpha_interval"] == [2.0, 3.0]
    w = exponent_window(0.5, alpha=2.5)
    np.testing.assert_allclose(w["p_interval"], [0.75, 1.2])
    assert not w["empty"]
    assert PLUS.exponent == pytest.approx(-1.5)


def test_window_shrinks_as_gamma_grows():
    widths = [exponent_window(g)["alpha_interval"][1] - 2 for g in (0.3, 0.5, 0.7, 0.9, 0.99)]
    assert all(a > b for a, b in zip(widths, widths[1:]))
    assert widths[-1] < 0.02


def test_window_errors():
    with pytest.raises(ValueError):
        exponent_window(1.0)
    with pytest.raises(ValueError):
        exponent_window(0.5, n=3, side="plus")
    with pytest.raises(ValueError):
        CuspScenario(0.5, 2.5, 2.0)
    assert exponent_window(0.5, alpha=3.5)["empty"]


def test_minus_window_three_dimensions():
    w = exponent_window(0.5, n=3, side="minus", alpha=0.5)
    lo, hi = w["p_interval"]
    assert lo == pytest.approx(1 / 0.7, rel=1e-12) and hi == pytest.approx(2.0)
    sc = CuspScenario(0.5, 0.5, (lo + hi) / 2, side="minus", n=3)
    assert sc.c_n == pytest.approx(2 * pi / 0.5)
    out = cusp_flux(sc, 0.01)
    assert out["quadrature"] == pytest.approx(out["closed_form"], rel=1e-10)


def test_lower_bound_growth():
    lb = cusp_lowerbound(PLUS)
    assert lb["fitted_growth"] == pytest.approx(0.5, abs=0.01)
    assert lb["doubling_ratio"] == pytest.approx(sqrt(2), rel=1e-3)
    assert lb["monotone"] and not lb["converges"]


def test_control_case_converges():
    lo, _ = exponent_window(0.5, alpha=2.5)["p_interval"]
    sc = CuspScenario(0.5, 2.5, 0.8 * lo, check_window=False)
    lb = cusp_lowerbound(sc)
    assert lb["converges"]
    limit = sc.eta ** (sc.exponent + 1) / (sc.exponent + 1)
    assert lb["partial"][-1] == pytest.approx(limit, rel=1e-3)


def test_stokes_examples():
    tri = [[0, 0], [1, 0], [0, 1]]
    assert stokes_check(catalog("constant", 2), tri)["residual"] <= 1e-15
    out = stokes_check(catalog("source", 2), tri)
    assert out["face_flux"] == pytest.approx(2 * 0.5, abs=1e-14)
    tet = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]
    assert stokes_check(catalog("source", 3), tet)["face_flux"] == pytest.approx(3 / 6, abs=1e-14)


def test_stokes_random_polynomial_simplices():
    u = catalog("stream_poly", 2, seed=4, degree=5) + catalog("source", 2)
    rng = np.random.default_rng(0)
    for _ in range(50):
        assert stokes_check(u, rng.uniform(-1, 1, size=(3, 2)))["residual"] <= 1e-10


def test_test_function_gradient_and_support():
    tf = TestFunction((0.2, -0.1), 0.3)
    c = np.array(tf.center)
    assert tf(c[None])[0] == pytest.approx(1.0)
    assert tf((c + tf.half_width * 1.01)[None])[0] == 0.0
    rng = np.random.default_rng(1)
    Y = c + rng.uniform(-0.9, 0.9, size=(20, 2)) * tf.half_width
    h = 1e-6
    fd = np.stack([(tf(Y + h * e) - tf(Y - h * e)) / (2 * h) for e in np.eye(2)], -1)
    np.testing.assert_allclose(tf.gradient(Y), fd, atol=1e-6 * tf.grad_sup())
    assert tf.grad_sup() >= np.max(np.linalg.norm(tf.gradient(Y), axis=1))


def test_random_tests_straddle_boundary():
    for tf in random_tests(SQUARE, 10, 3, theta=0.5):
        lo, hi = tf.box
        assert np.any(lo < 0) or np.any(hi > 1)
        corners = np.array([[lo[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]], [hi[0], lo[1]]])
        assert np.all(-SQUARE.signed_distance(corners) < 0.5)


def test_fd_of_linear_field_is_exact():
    A = np.array([[0.5, 1.0], [2.0, -0.25]])
    assert pointwise_div_fd(lambda y: A @ y, [2.0, 0.3], 1e-3) == pytest.approx(0.25, abs=1e-9)
    vals, _ = fd_orders(lambda y: A @ y, [2.0, 0.3], [1e-2, 5e-3])
    assert vals[0] == pytest.approx(0.25, abs=1e-9)


def test_fd_stencil_crossing_raises():
    with pytest.raises(ValueError, match="crosses"):
        pointwise_div_fd(lambda y: y, [1.001, 0.5], 1e-2, SQUARE)


def test_richardson_removes_geometric_tail():
    layers = {k: 2.0 ** -k + 4.0 ** -k for k in range(8)}
    total = sum(2.0 ** -k + 4.0 ** -k for k in range(200))
    value, _ = richardson(layers, terms=2)
    assert value == pytest.approx(total, rel=1e-12)


def test_domain_integral_shapes():
    assert domain_integral(SQUARE, lambda Y: Y[:, 0] ** 2) == pytest.approx(1 / 3, abs=1e-14)
    assert domain_integral(Ball([0, 0], 1), lambda Y: np.ones(len(Y))) == pytest.approx(pi, rel=1e-12)
    assert domain_integral(Ball([0, 0, 0], 1), lambda Y: np.ones(len(Y))) == pytest.approx(4 * pi / 3, rel=1e-12)


@pytest.fixture(scope="module")
def small_handle():
    return prepare(SQUARE, catalog("stream_poly", 2, seed=0, degree=3), ExtendConfig(max_level=8))


def test_interior_test_function_has_no_residual(small_handle):
    res = weak_div_residual(small_handle, [TestFunction((0.5, 0.5), 0.3)], depth=5)
    assert res[0]["residual"] <= 1e-10
    assert res[0]["exterior"] == 0.0


def test_weak_residual_is_linear():
    tests = random_tests(SQUARE, 2, 0, theta=0.5, radius=(0.25, 0.4))
    u = catalog("stream_poly", 2, seed=0, degree=3)
    cfg = ExtendConfig(max_level=8)
    one = weak_div_residual(prepare(SQUARE, u, cfg), tests, depth=5)
    two = weak_div_residual(prepare(SQUARE, 2.0 * u, cfg), tests, depth=5)
    for a, b in zip(one, two):
        assert b["exterior"] == pytest.approx(2 * a["exterior"], rel=1e-12)
        assert b["interior"] == pytest.approx(2 * a["interior"], rel=1e-12)


def test_norm_ratio_is_scale_invariant():
    u = catalog("stream_poly", 2, seed=0, degree=3)
    cfg = ExtendConfig(max_level=8)
    a = norm_ratio(prepare(SQUARE, u, cfg), 1, depth=5, order=3)
    b = norm_ratio(prepare(SQUARE, 3.0 * u, cfg), 1, depth=5, order=3)
    assert a["ratio"] >= 1.0
    assert b["ratio"] == pytest.approx(a["ratio"], rel=1e-12)


def test_strip_ratios_single_sweep_is_consistent(small_handle):
    many = strip_ratios(small_handle, [0.25, 0.125, 0.0625], depth=5, order=3)
    one = strip_ratios(small_handle, [0.125], depth=5, order=3)
    assert many[1]["exterior"] == pytest.approx(one[0]["exterior"], rel=1e-12)
    ext = [s["exterior"] for s in many]
    assert ext[0] >= ext[1] >= ext[2] >= 0
    assert all(np.isfinite(s["ratio"]) for s in many)
