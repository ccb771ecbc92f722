"""Acceptance criteria, one test and one printed PASS/FAIL line each.

Run with `pytest -v -s tests/test_acceptance.py` to see the lines.
"""

import time
from itertools import product
from math import factorial, sqrt

import numpy as np
import pytest
from scipy.spatial import ConvexHull, Delaunay

from divext.cli import main
from divext.domain import Ball, Rectangle
from divext.exterior import norm, simplex_normal
from divext.extend_l1 import ExtendConfig, ExtensionHandle, multi_indices
from divext.extend_w11 import CorrectorStack, band_points, identity_suite
from divext.fields import catalog
from divext.quadrature import simplex_rule
from divext.verify import (
    CuspScenario,
    cusp_flux,
    cusp_lowerbound,
    exponent_window,
    norm_ratio,
    pointwise_div_fd,
    random_tests,
    stokes_check,
    strip_ratios,
    weak_div_residual,
)
from divext.whitney import cube_center, cube_side

SQUARE = Rectangle([0, 0], [1, 1])
DISK = Ball([0, 0], 1)
DOMAINS = {"square": SQUARE, "disk": DISK}

pytestmark = pytest.mark.acceptance


def verdict(number: int, title: str, ok: bool, detail: str) -> bool:
    print(f"\n[{'PASS' if ok else 'FAIL'}] {number} {title}: {detail}")
    return ok


# 1 -------------------------------------------------------------------------------


def test_1_restriction_and_support():
    start = time.perf_counter()
    parts, ok = [], True
    for name, dom in DOMAINS.items():
        u = catalog("stream_poly", 2, seed=0, degree=3)
        h = ExtensionHandle(dom, u, ExtendConfig())
        rng = np.random.default_rng(0)
        lo, hi = dom.bbox
        X = rng.uniform(lo, hi, size=(4000, 2))
        X = X[dom.contains(X)][:1000]
        exact = sum(np.array_equal(h.evaluate(x), u(x)) for x in X)
        Y = rng.uniform(lo - 3 * h.theta, hi + 3 * h.theta, size=(4000, 2))
        Y = Y[-dom.signed_distance(Y) > h.theta][:1000]
        zero = sum(np.all(h.evaluate(y) == 0) for y in Y)
        ok &= len(X) == 1000 and exact == 1000 and len(Y) == 1000 and zero == 1000
        parts.append(f"{name} interior {exact}/{len(X)} exact, beyond theta={h.theta:.4f} {zero}/{len(Y)} zero")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 60
    assert verdict(1, "restriction & support", ok, "; ".join(parts) + f"; {elapsed:.1f}s (< 60s)")


# 2 -------------------------------------------------------------------------------

SOLENOIDAL = [("constant", {}), ("rotation", {}), ("linear", {}), ("stream_poly", {"degree": 3}),
              ("stream_poly", {"degree": 5})]
STEPS = np.array([1e-2, 5e-3, 2.5e-3])


def _fd_orders(h, dom, points, steps):
    """RMS over points with a resolvable divergence, and the observed orders between steps."""
    V = np.array([[abs(pointwise_div_fd(h.evaluate, y, s * -float(dom.signed_distance(y)), dom)) for s in steps]
                  for y in points])
    mag = np.array([np.max(np.abs(h.evaluate(y))) for y in points])
    live = np.max(V, axis=1) > 1e-9 * np.maximum(mag, 1)
    rms = np.sqrt(np.mean(V[live] ** 2, axis=0))
    return np.log2(rms[:-1] / rms[1:]), int(live.sum())


def test_2_pointwise_solenoidality():
    ok, worst, diag_worst, lines = True, np.inf, np.inf, []
    for (dname, dom), (fname, params) in product(DOMAINS.items(), SOLENOIDAL):
        h = ExtensionHandle(dom, catalog(fname, 2, seed=0, **params), ExtendConfig(max_level=12))
        pts = band_points(h, 200, 1)
        orders, live = _fd_orders(h, dom, pts, STEPS)
        diag, _ = _fd_orders(h, dom, pts, 0.1 * STEPS)
        worst, diag_worst = min(worst, orders.min()), min(diag_worst, diag.min())
        ok &= bool(np.all(orders >= 1.9))
        lines.append(f"{dname}/{fname}{params.get('degree', '')}: {orders[0]:.2f},{orders[1]:.2f} ({live} live)")
    print("\n  " + "\n  ".join(lines))
    print(f"  diagnostic: same points with steps 0.1x -> worst observed order {diag_worst:.2f}")
    assert verdict(2, "exterior pointwise solenoidality", ok,
                   f"worst observed FD order {worst:.2f} over h in {{1e-2, 5e-3, 2.5e-3}}*dist (need >= 1.9)")


# 3 -------------------------------------------------------------------------------


def test_3_weak_solenoidality():
    u = catalog("wave", 2)
    depth = 9
    default = ExtendConfig(max_level=depth + 3)
    doubled = ExtendConfig(max_level=depth + 3, simplex_degree=8, quad_order=4)
    tests = random_tests(SQUARE, 20, 7, ExtensionHandle(SQUARE, u, default).theta, radius=(0.25, 0.4))
    base = weak_div_residual(ExtensionHandle(SQUARE, u, default), tests, depth=depth)
    fine = weak_div_residual(ExtensionHandle(SQUARE, u, doubled), tests, depth=depth)
    rel = max(r["relative"] for r in base)
    drop = max(r["residual"] for r in base) / max(r["residual"] for r in fine)
    ok = rel <= 1e-4 and drop >= 10
    assert verdict(3, "weak solenoidality", ok,
                   f"max |int E.grad psi|/(|grad psi|_inf |u|_1) = {rel:.2e} (<= 1e-4); "
                   f"max residual drops {drop:.1f}x with simplex degree 4->8 and outer order 2->4 (>= 10x)")


# 4 -------------------------------------------------------------------------------


def test_4_uniform_l1_and_strips():
    u = catalog("stream_poly", 2, seed=0, degree=3)
    ratios = {ml: norm_ratio(ExtensionHandle(SQUARE, u, ExtendConfig(max_level=ml)), 1, depth=ml)["ratio"]
              for ml in (8, 9, 10)}
    spread = (max(ratios.values()) - min(ratios.values())) / min(ratios.values())
    h = ExtensionHandle(SQUARE, u, ExtendConfig(max_level=10))
    strips = strip_ratios(h, [2.0**-k for k in range(3, 9)], depth=10)
    sr = np.array([s["ratio"] for s in strips])
    bound = float(sr[:3].max())
    ok = spread < 0.2 and bool(np.all(np.isfinite(sr))) and float(sr[3:].max()) <= bound
    assert verdict(4, "uniform L1 bound & strips", ok,
                   "norm_ratio(p=1) at max_level 8/9/10 = "
                   + "/".join(f"{v:.4f}" for v in ratios.values())
                   + f", spread {100 * spread:.2f}% (< 20%); strip ratios delta=2^-3..2^-8 = "
                   + ", ".join(f"{v:.3f}" for v in sr)
                   + f"; finest three <= coarsest-three max {bound:.3f}")


# 5 -------------------------------------------------------------------------------


def _hull_l1(u, targets, rule):
    corners = np.array([cube_center(t) + 0.25 * cube_side(t) * np.array(c)
                        for t in targets for c in product((-1, 1), repeat=2)])
    pts = corners[ConvexHull(corners).vertices]
    total = 0.0
    for s in Delaunay(pts).simplices:
        V = pts[s]
        T = (V[1:] - V[0]).T
        X = V[0] + rule.nodes @ T.T
        total += abs(np.linalg.det(T)) * float(rule.weights @ np.linalg.norm(u(X), axis=1))
    return total


def _term_ratios(dom, u, count, seed):
    h = ExtensionHandle(dom, u, ExtendConfig(max_level=12))
    rule = simplex_rule(2, 6)
    rng = np.random.default_rng(seed)
    lo, hi = dom.bbox
    seen = {}
    while len(seen) < count:
        z = rng.uniform(lo - 0.2, hi + 0.2)
        if abs(float(dom.signed_distance(z))) >= dom.collar:
            continue
        xb = dom.boundary_projection(z)
        v = (z - xb) * (1 if dom.signed_distance(z) < 0 else -1)
        if np.linalg.norm(v) < 1e-12:
            continue
        d = np.exp(rng.uniform(np.log(2.0**-11), np.log(4 * h.cover.eta)))
        y = xb + d * v / np.linalg.norm(v)
        if dom.signed_distance(y) >= 0:
            continue
        cubes, status = h.cover.locate(y)
        if status != "ok" or len(cubes) < 2:
            continue
        rows = multi_indices(cubes, 2)
        I = tuple(cubes[j] for j in rows[rng.integers(len(rows))])
        if I in seen:
            continue
        targets = [h.cover.psi(q) for q in I]
        delta = min(cube_side(t) for t in targets)
        seen[I] = (I[0][0], abs(h.simplex_functional(I)) * delta / _hull_l1(u, targets, rule))
    return list(seen.values())


def test_5_simplex_term_bound():
    u = catalog("stream_poly", 2, seed=0, degree=3)
    data = _term_ratios(SQUARE, u, 500, 0) + _term_ratios(DISK, u, 500, 1)
    levels = np.array([d[0] for d in data])
    ratios = np.array([d[1] for d in data])
    coarse = levels <= 8
    C = 1.1 * float(ratios[coarse].max())
    violations = int(np.sum(ratios[~coarse] > C))
    ok = len(data) == 1000 and bool(np.all(np.isfinite(ratios))) and violations == 0
    assert verdict(5, "simplex-term bound", ok,
                   f"{len(data)} multi-indices, levels {levels.min()}..{levels.max()}; C fitted on levels <= 8 "
                   f"= {C:.3f}; max ratio on levels > 8 = {ratios[~coarse].max():.3f}; {violations} violations")


# 6 -------------------------------------------------------------------------------


def test_6_w11_identities():
    h2 = ExtensionHandle(SQUARE, catalog("stream_poly", 2, seed=0, degree=3), ExtendConfig(max_level=12))
    res = identity_suite(CorrectorStack(h2, "telescoping"), band_points(h2, 200, 0))
    m2 = {k: float(np.max(np.abs(v))) for k, v in res.items()}
    ok2 = m2["dE0"] <= 1e-4 and m2["dR1"] <= 1e-4 and m2["S_n"] <= 1e-6 and m2["assemble"] <= 1e-5
    cube = Rectangle([0, 0, 0], [1, 1, 1])
    h3 = ExtensionHandle(cube, catalog("stream_poly", 3, seed=0, degree=3), ExtendConfig(max_level=8))
    pts3 = band_points(h3, 20, 0)
    tele = CorrectorStack(h3, "telescoping")
    res3 = identity_suite(tele, pts3)
    m3 = {k: float(np.max(np.abs(v))) for k, v in res3.items()}
    ok3 = (m3["dE0"] <= 1e-4 and m3["dR1"] <= 1e-4 and m3["dR2"] <= 1e-4 and m3["S_n"] <= 1e-6
           and m3["assemble"] <= 1e-5)
    printed = CorrectorStack(h3, "printed")
    printed._avg, printed._coef = tele._avg, tele._coef
    res_p = identity_suite(printed, pts3)
    fmt = lambda m: ", ".join(f"{k} {v:.1e}" for k, v in sorted(m.items()))
    assert verdict(6, "W11 identity suite", ok2 and ok3,
                   f"n=2 (200 pts): {fmt(m2)}; n=3 telescoping (20 pts): {fmt(m3)}; "
                   f"n=3 printed prefactor assembly residual {np.max(np.abs(res_p['assemble'])):.2e} (reported)")


# 7 -------------------------------------------------------------------------------


def test_7_cusp_counterexample():
    start = time.perf_counter()
    sc = CuspScenario(0.5, 2.5, 1.0)
    table = [cusp_flux(sc, float(s)) for s in np.geomspace(1e-4, sc.eta, 12)]
    err = max(abs(r["quadrature"] - r["closed_form"]) for r in table)
    s01 = cusp_flux(sc, 0.01)
    lb = cusp_lowerbound(sc)
    lo = exponent_window(0.5, alpha=2.5)["p_interval"][0]
    ctrl = cusp_lowerbound(CuspScenario(0.5, 2.5, 0.8 * lo, check_window=False))
    elapsed = time.perf_counter() - start
    ok = (err <= 1e-8 and abs(s01["closed_form"] + 645.6) < 0.05 and abs(lb["fitted_growth"] - 0.5) <= 0.01
          and ctrl["converges"] and abs(ctrl["partial"][-1] - ctrl["partial"][-2]) < 1e-3 and elapsed < 30)
    assert verdict(7, "cusp counterexample", ok,
                   f"max flux error {err:.1e} over s in [1e-4, {sc.eta:.3g}] (<= 1e-8); s=0.01 flux "
                   f"{s01['quadrature']:.4f}; growth {lb['fitted_growth']:.4f} (0.5 +- 0.01); control p={0.8 * lo:.3f} "
                   f"converges to {ctrl['partial'][-1]:.4f}; {elapsed:.1f}s")


# 8 -------------------------------------------------------------------------------


def _gram(points):
    E = points[1:] - points[0]
    return sqrt(max(np.linalg.det(E @ E.T), 0.0)) / factorial(len(E))


def test_8_quadrature_oracles():
    rng = np.random.default_rng(8)
    fields = {2: catalog("stream_poly", 2, seed=2, degree=4) + catalog("source", 2),
              3: catalog("stream_poly", 3, seed=3, degree=3) + catalog("source", 3)}
    stokes, normal = 0.0, 0.0
    for i in range(1000):
        n = 2 if i < 500 else 3
        V = rng.uniform(-1, 1, size=(n + 1, n))
        stokes = max(stokes, stokes_check(fields[n], V)["residual"])
        for face in range(n + 1):
            F = np.delete(V, face, axis=0)
            normal = max(normal, abs(float(norm(simplex_normal(F))) - _gram(F)))
        normal = max(normal, abs(float(norm(simplex_normal(V))) - _gram(V)))
    ok = stokes <= 1e-8 and normal <= 1e-12
    assert verdict(8, "quadrature oracles", ok,
                   f"max Stokes residual {stokes:.1e} on 1000 simplices (<= 1e-8); "
                   f"max ||nu| - Gram area| {normal:.1e} (<= 1e-12)")


# 9 -------------------------------------------------------------------------------


def test_9_determinism(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text('{"field": {"name": "stream_poly", "params": {"degree": 4}}, "grid": {"points": 17}, '
                   '"norm_depth": 4, "seed": 11}')
    codes = [main(["extend", "--config", str(cfg), "--out", str(tmp_path / run)]) for run in ("a", "b")]
    a = (tmp_path / "a" / "extension.csv").read_bytes()
    b = (tmp_path / "b" / "extension.csv").read_bytes()
    ok = codes == [0, 0] and a == b
    assert verdict(9, "determinism", ok, f"two extend runs, exit codes {codes}, CSV {len(a)} bytes, identical={a == b}")
