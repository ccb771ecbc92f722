"""Whitney covers, point location and the matching map."""

from math import sqrt

import numpy as np
import pytest

from divext.domain import Ball, Rectangle
from divext.whitney import (
    BLOWUP,
    WhitneyCover,
    WhitneyDoubleCover,
    blowup_bounds,
    cube_bounds,
    cube_center,
    cube_side,
)

SQUARE = Rectangle([0, 0], [1, 1])


@pytest.fixture(scope="module")
def square_cover():
    return WhitneyDoubleCover(SQUARE, 0, 9)


def test_blowup_arithmetic():
    lo, hi = blowup_bounds((2, 1, 1))
    np.testing.assert_allclose(lo, 0.25 + 0.125 - BLOWUP * 0.125)
    np.testing.assert_allclose(hi - lo, BLOWUP * 0.25)
    assert cube_side((3, 0, 0)) == 0.125


def test_selection_example():
    # the box [3/8, 5/8]^2 meets the rule: diam sqrt(2)/4 <= dist 0.375 <= 4 diam
    where, d = SQUARE.cube_distance(np.array([0.375, 0.375]), np.array([0.625, 0.625]))
    diam = sqrt(2) / 4
    assert where == "interior" and d == pytest.approx(0.375)
    assert diam <= d <= 4 * diam
    # it is not on the dyadic grid; the level-2 grid cube [1/4, 1/2]^2 sits too close to the edge
    cover = WhitneyCover(SQUARE, "interior", 0, 8)
    assert not cover.rule((2, 1, 1))
    assert cover.is_member((3, 2, 2))


def test_members_satisfy_rule_and_blowup_inside(square_cover):
    interior, _ = square_cover.interior.build(depth=6)
    assert interior
    for q in interior:
        where, d = square_cover.interior.distance(q)
        diam = sqrt(2) * cube_side(q)
        assert where == "interior" and diam <= d <= 4 * diam
        assert SQUARE.cube_distance(*blowup_bounds(q))[0] == "interior"


def test_members_are_disjoint(square_cover):
    interior, _ = square_cover.interior.build(depth=6)
    area = sum(cube_side(q) ** 2 for q in interior)
    assert area <= 1.0
    seen = set()
    for q in interior:
        a = q
        while a[0] > 0:
            a = (a[0] - 1,) + tuple(i // 2 for i in a[1:])
            assert a not in seen
        seen.add(q)


def test_overlap_count_bounded(square_cover):
    rng = np.random.default_rng(0)
    worst = 0
    Y = rng.uniform(-0.6, 1.6, size=(10_000, 2))
    for y in Y[:5000]:
        cubes, status = square_cover.exterior.locate(y)
        if status == "ok":
            worst = max(worst, len(cubes))
    for y in Y[5000:]:
        cubes, status = square_cover.interior.locate(y)
        if status == "ok":
            worst = max(worst, len(cubes))
    assert 1 <= worst <= 12


def test_locate_matches_brute_force(square_cover):
    ext = square_cover.exterior
    members, _ = ext.build([-0.3, -0.3], [1.3, 1.3], depth=7)
    rng = np.random.default_rng(1)
    points = [np.array([1.0 + 0.125, 0.5]), np.array([-0.25, -0.25])] + list(rng.uniform(-0.3, 1.3, size=(40, 2)))
    for y in points:
        if SQUARE.contains(y):
            assert ext.locate(y) == ([], "wrong_side")
            continue
        cubes, status = ext.locate(y)
        if status != "ok" or max(c[0] for c in cubes) > 7:
            continue
        brute = sorted(q for q in members if np.all(blowup_bounds(q)[0] <= y) and np.all(y <= blowup_bounds(q)[1]))
        assert cubes == brute


def test_core_point_is_singleton(square_cover):
    q = square_cover.exterior.cube_at([1.3, 0.5])
    cubes, status = square_cover.exterior.locate(cube_center(q))
    assert status == "ok" and cubes == [q]


def test_match_map_properties(square_cover):
    ext, _ = square_cover.exterior.build([-0.2, -0.2], [1.2, 1.2], depth=8)
    for q in ext:
        t = square_cover.psi(q)
        assert square_cover.interior.is_member(t)
        if cube_side(q) > square_cover.eta:
            assert t == square_cover.q0
        else:
            assert cube_side(q) / 4 <= cube_side(t) <= 4 * cube_side(q)
    props = square_cover.properties(ext)
    assert props["J2_max_size_ratio"] <= 4
    assert all(np.isfinite(props[k]) for k in ("J3_C", "J4_C", "J5_C"))
    assert props["retargeted"] == 0


def test_match_mirrors_across_edge(square_cover):
    q = square_cover.exterior.cube_at([1.02, 0.5])
    t = square_cover.psi(q)
    c, ct = cube_center(q), cube_center(t)
    assert ct[0] < 1 < c[0]
    assert abs((1 - ct[0]) - (c[0] - 1)) <= 2 * cube_side(q) + cube_side(t)


def test_theta_formula():
    cover = WhitneyDoubleCover(Ball([0, 0], 1), 0, 8)
    n = 2
    assert cover.theta == pytest.approx(2 * cover.eta * (13 * sqrt(n) / 12 + 4 * sqrt(n) + 1))


def test_build_reports_deficit():
    cover = WhitneyCover(SQUARE, "interior", 0, 4)
    members, deficit = cover.build()
    covered = sum(cube_side(q) ** 2 for q in members)
    assert deficit > 0
    assert covered + deficit == pytest.approx(1.0)
