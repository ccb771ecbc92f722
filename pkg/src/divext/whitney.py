"""Whitney covers of a domain and of its exterior, plus the matching map Psi.

Cubes are dyadic: a cube id is the tuple (level, i_1, ..., i_n) for the
closed cube prod [i_d, i_d + 1] * 2^-level.  A cube belongs to a cover when
it is maximal among dyadic cubes obeying

    diam(Q) <= dist(Q, boundary) <= 4 diam(Q)

on the requested side.  Membership is decided lazily and cached, so the
cover has effectively unbounded depth; `build_cover` enumerates it eagerly
for reports.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from itertools import product
from math import ceil, floor, log2, sqrt

import numpy as np

from .domain import EXTERIOR, INTERIOR, CollarError, Domain

__all__ = [
    "CubeId",
    "cube_side",
    "cube_center",
    "cube_bounds",
    "blowup_bounds",
    "WhitneyCover",
    "WhitneyDoubleCover",
    "build_cover",
    "match_map",
    "locate",
    "neighbors",
    "ResolutionError",
    "MatchError",
]

CubeId = tuple
BLOWUP = 7.0 / 6.0


class ResolutionError(RuntimeError):
    pass


class MatchError(RuntimeError):
    pass


def cube_side(q: CubeId) -> float:
    return 2.0 ** -q[0]


def cube_bounds(q: CubeId) -> tuple[np.ndarray, np.ndarray]:
    s = cube_side(q)
    lo = np.array(q[1:], dtype=float) * s
    return lo, lo + s


def cube_center(q: CubeId) -> np.ndarray:
    return (np.array(q[1:], dtype=float) + 0.5) * cube_side(q)


def blowup_bounds(q: CubeId, factor: float = BLOWUP) -> tuple[np.ndarray, np.ndarray]:
    c, h = cube_center(q), 0.5 * factor * cube_side(q)
    return c - h, c + h


def box_distance(a: CubeId, b: CubeId) -> float:
    (alo, ahi), (blo, bhi) = cube_bounds(a), cube_bounds(b)
    gap = np.maximum(np.maximum(alo - bhi, blo - ahi), 0.0)
    return float(np.linalg.norm(gap))


def _parent(q: CubeId) -> CubeId:
    return (q[0] - 1,) + tuple(i // 2 for i in q[1:])


class WhitneyCover:
    """One-sided Whitney cover, evaluated lazily."""

    def __init__(self, domain: Domain, side: str, min_level: int = 0, max_level: int = 12):
        if side not in (INTERIOR, EXTERIOR):
            raise ValueError("side must be 'interior' or 'exterior'")
        if max_level < min_level:
            raise ValueError("max_level must be >= min_level")
        self.domain = domain
        self.side = side
        self.n = domain.n
        self.min_level = min_level
        self.max_level = max_level
        self._dist: dict = {}
        self._member: dict = {}
        self._lock = threading.Lock()

    def distance(self, q: CubeId) -> tuple[str, float]:
        hit = self._dist.get(q)
        if hit is None:
            hit = self.domain.cube_distance(*cube_bounds(q))
            with self._lock:
                self._dist[q] = hit
        return hit

    def rule(self, q: CubeId) -> bool:
        where, d = self.distance(q)
        diam = sqrt(self.n) * cube_side(q)
        return where == self.side and diam <= d <= 4 * diam

    def is_member(self, q: CubeId) -> bool:
        hit = self._member.get(q)
        if hit is not None:
            return hit
        ok = self.min_level <= q[0] <= self.max_level and self.rule(q)
        a = q
        while ok and a[0] > self.min_level:
            a = _parent(a)
            if self.rule(a):
                ok = False
        with self._lock:
            self._member[q] = ok
        return ok

    def cube_at(self, y) -> CubeId | None:
        """Member cube containing y (floor convention on shared faces)."""
        y = np.asarray(y, dtype=float)
        for level in range(self.min_level, self.max_level + 1):
            q = (level,) + tuple(int(v) for v in np.floor(y * 2.0**level))
            if self.rule(q):
                return q
        return None

    def _level_window(self, d: float) -> range:
        # y in (7/6)Q forces 11/12 diam <= dist(y) <= 61/12 diam
        if d <= 0:
            return range(0)
        lo_side = d * 12 / 61 / sqrt(self.n)
        hi_side = d * 12 / 11 / sqrt(self.n)
        k_lo = max(self.min_level, floor(-log2(hi_side)) - 1)
        k_hi = min(self.max_level, ceil(-log2(lo_side)) + 1)
        return range(k_lo, k_hi + 1)

    def cubes_near(self, lo, hi, levels) -> list[CubeId]:
        """Members at the given levels whose blow-up meets the box [lo, hi]."""
        out = []
        for level in levels:
            s = 2.0**-level
            a = np.floor((np.asarray(lo) - BLOWUP * s / 2) / s + 0.5).astype(int)
            b = np.floor((np.asarray(hi) + BLOWUP * s / 2) / s - 0.5).astype(int)
            for idx in product(*(range(i, j + 1) for i, j in zip(a, b))):
                q = (level,) + tuple(int(i) for i in idx)
                blo, bhi = blowup_bounds(q)
                if np.all(blo <= hi) and np.all(lo <= bhi) and self.is_member(q):
                    out.append(q)
        return out

    def locate(self, y) -> tuple[list[CubeId], str]:
        """Members whose 7/6 blow-up contains y, with a status flag."""
        y = np.asarray(y, dtype=float)
        sd = float(self.domain.signed_distance(y))
        d = sd if self.side == INTERIOR else -sd
        if d <= 0:
            return [], "wrong_side"
        found = self.cubes_near(y, y, self._level_window(d))
        if not found:
            return [], "uncovered"
        return sorted(found), "ok"

    def neighbors(self, q: CubeId) -> list[CubeId]:
        """Members whose blow-up meets the blow-up of q (q included)."""
        lo, hi = blowup_bounds(q)
        levels = range(max(self.min_level, q[0] - 3), min(self.max_level, q[0] + 3) + 1)
        return sorted(self.cubes_near(lo, hi, levels))

    def build(self, lo=None, hi=None, depth: int | None = None) -> tuple[list[CubeId], float]:
        """Enumerate members meeting the box [lo, hi] and the uncovered measure.

        With `depth` the search stops at that level and the deficit counts the
        unresolved region below it.
        """
        depth = self.max_level if depth is None else min(depth, self.max_level)
        dlo, dhi = self.domain.bbox
        if self.side == EXTERIOR:
            pad = 5 * sqrt(self.n) * 2.0**-self.min_level
            dlo, dhi = dlo - pad, dhi + pad
        lo = dlo if lo is None else np.asarray(lo, dtype=float)
        hi = dhi if hi is None else np.asarray(hi, dtype=float)
        s = 2.0**-self.min_level
        a = np.floor(lo / s).astype(int)
        b = np.ceil(hi / s).astype(int) - 1
        stack = [(self.min_level,) + tuple(int(i) for i in idx)
                 for idx in product(*(range(i, j + 1) for i, j in zip(a, b)))]
        members, deficit = [], 0.0
        while stack:
            q = stack.pop()
            qlo, qhi = cube_bounds(q)
            if np.any(qhi < lo) or np.any(hi < qlo):
                continue
            where, d = self.distance(q)
            diam = sqrt(self.n) * cube_side(q)
            if where == self.side and diam <= d <= 4 * diam:
                members.append(q)
                continue
            if where == self.side and d > 4 * diam:
                continue
            if where not in (self.side, "straddle"):
                continue
            if q[0] >= depth:
                deficit += cube_side(q) ** self.n
                continue
            base = tuple(2 * i for i in q[1:])
            for off in product((0, 1), repeat=self.n):
                stack.append((q[0] + 1,) + tuple(i + o for i, o in zip(base, off)))
        return sorted(members), deficit


@dataclass
class MatchReport:
    eta: float
    q0: CubeId
    c_whitney: float
    retargeted: int = 0
    size_filter_searches: int = 0
    constants: dict = field(default_factory=dict)


class WhitneyDoubleCover:
    """Interior and exterior Whitney covers linked by the matching map Psi."""

    def __init__(self, domain: Domain, min_level: int = 0, max_level: int = 12,
                 eta: float | None = None, depth_limit: float | None = None):
        self.domain = domain
        self.n = domain.n
        self.interior = WhitneyCover(domain, INTERIOR, min_level, max_level)
        self.exterior = WhitneyCover(domain, EXTERIOR, min_level, max_level)
        self.c = 4 * sqrt(self.n) + 1
        self.q0 = self._anchor()
        self.eta = eta if eta is not None else self._threshold(depth_limit)
        self.retargeted = 0
        self._psi: dict = {}
        self._lock = threading.Lock()

    def _anchor(self) -> CubeId:
        lo, hi = self.domain.bbox
        for level in range(self.interior.min_level, self.interior.max_level + 1):
            s = 2.0**-level
            a, b = np.floor(lo / s).astype(int), np.ceil(hi / s).astype(int)
            for idx in product(*(range(i, j) for i, j in zip(a, b))):
                q = (level,) + tuple(int(i) for i in idx)
                if self.interior.is_member(q):
                    return q
        raise ResolutionError("no interior cube found above the resolution floor")

    def _threshold(self, depth_limit: float | None) -> float:
        # reflected centers sit at depth <= (4 + 1/2) sqrt(n) l; keep them well inside
        limit = self.domain.inradius / 2
        if depth_limit is not None:
            limit = min(limit, depth_limit)
        k = ceil(-log2(limit / (4.5 * sqrt(self.n))))
        return 2.0 ** -max(k, self.exterior.min_level)

    @property
    def theta(self) -> float:
        """Radius beyond which the extension vanishes: 2 eta (13 sqrt(n)/12 + c)."""
        return 2 * self.eta * (13 * sqrt(self.n) / 12 + self.c)

    def psi(self, q: CubeId) -> CubeId:
        hit = self._psi.get(q)
        if hit is None:
            hit = self._match(q)
            with self._lock:
                self._psi[q] = hit
        return hit

    def _match(self, q: CubeId) -> CubeId:
        l = cube_side(q)
        if l > self.eta:
            return self.q0
        p = cube_center(q)
        try:
            xb = self.domain.boundary_projection(p)
        except CollarError as exc:
            raise MatchError(f"cube {q}: {exc}") from None
        r = 2 * xb - p
        cand = self.interior.cube_at(r)
        ok = lambda c: c is not None and l / 4 <= cube_side(c) <= 4 * l
        if not ok(cand):
            k = q[0]
            lo = hi = r
            near = self.interior.cubes_near(lo - 2 * l, hi + 2 * l, range(max(k - 2, self.interior.min_level),
                                                                       min(k + 2, self.interior.max_level) + 1))
            near = [c for c in near if ok(c)]
            if not near:
                raise MatchError(f"cube {q}: no interior cube passes the size filter (J2)")
            cand = min(near, key=lambda c: (float(np.linalg.norm(cube_center(c) - r)), c))
        if box_distance(q, cand) < l / self.c:
            # (J5) lower bound; cannot trigger for exterior cubes, kept as a guard
            self.retargeted += 1
            deeper = self.interior.cube_at(r + (r - xb))
            if deeper is not None:
                cand = deeper
        return cand

    def locate(self, y):
        return self.exterior.locate(y)

    def neighbors(self, q: CubeId):
        return self.exterior.neighbors(q)

    def properties(self, exterior_cubes) -> dict:
        """Observed constants for (J2)-(J5) over the given exterior cubes."""
        j2 = j3 = j4_hi = j5_hi = 0.0
        j4_lo = j5_lo = np.inf
        for q in exterior_cubes:
            l = cube_side(q)
            t = self.psi(q)
            d = box_distance(q, t) / l
            dt = self.interior.distance(t)[1] / l
            j3 = max(j3, d)
            j4_hi, j4_lo = max(j4_hi, dt), min(j4_lo, dt)
            if l <= self.eta:
                ratio = cube_side(t) / l
                j2 = max(j2, ratio, 1 / ratio)
                j5_hi, j5_lo = max(j5_hi, d), min(j5_lo, d)
        return {
            "J2_max_size_ratio": j2,
            "J3_C": j3,
            "J4_C": max(j4_hi, 1 / j4_lo if j4_lo > 0 else np.inf),
            "J5_C": max(j5_hi, 1 / j5_lo if j5_lo > 0 else np.inf),
            "retargeted": self.retargeted,
        }


def build_cover(domain: Domain, side: str, min_level: int = 0, max_level: int = 12):
    cover = WhitneyCover(domain, side, min_level, max_level)
    return cover.build()


def match_map(cover: WhitneyDoubleCover):
    return cover.psi, cover.eta, cover.q0


def locate(cover: WhitneyDoubleCover, y):
    return cover.locate(y)


def neighbors(cover: WhitneyDoubleCover, q: CubeId):
    return cover.neighbors(q)
