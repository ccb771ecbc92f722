"""Verification suite: divergence residuals, norm ratios, Stokes and cusp checks.

Exterior integrals are computed cube by cube over the exterior Whitney cover.
Each cube is split into cells along the blow-up faces of the cubes whose bumps
reach into it (and along the faces of the test-function box), so that the set
of active bumps is constant on every cell and the integrand is smooth there.
Cells touched by a single bump carry no extension (phi = 1, dphi = 0) and are
skipped.  Layers beyond a chosen level are summed by Richardson extrapolation
in the dyadic level.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from itertools import product
from math import gamma as gamma_fn
from math import log, pi, sqrt

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .domain import Ball, Domain, Rectangle
from .exterior import form_to_vec_arrays
from .extend_l1 import ExtensionHandle
from .partition import bump
from .quadrature import simplex_rule
from .whitney import blowup_bounds, cube_bounds

__all__ = [
    "Report",
    "TestFunction",
    "random_tests",
    "domain_integral",
    "exterior_layers",
    "richardson",
    "weak_div_residual",
    "pointwise_div_fd",
    "fd_orders",
    "norm_ratio",
    "strip_ratios",
    "exponent_window",
    "CuspScenario",
    "cusp_flux",
    "cusp_lowerbound",
    "stokes_check",
]

_B0 = float(np.exp(-1.0))


@dataclass
class Report:
    check: str
    params: dict
    residuals: list
    fitted_order: float | None
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"check": self.check, "params": self.params, "residuals": self.residuals,
               "fitted_order": self.fitted_order, "pass": bool(self.passed)}
        out.update(self.extra)
        return json.loads(json.dumps(out, default=_jsonable))


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    return str(x)


# test functions --------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """Tensor exp-bump with peak 1, supported in the box of half-width radius/sqrt(n).

    The box lies inside the ball of the given radius.  A box-shaped support
    lets exterior cells be aligned with the support faces, where the profile
    is flat to all orders.
    """

    center: tuple
    radius: float

    __test__ = False

    @property
    def n(self) -> int:
        return len(self.center)

    @property
    def half_width(self) -> float:
        return self.radius / sqrt(self.n)

    @property
    def box(self) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=float)
        return c - self.half_width, c + self.half_width

    def _parts(self, Y):
        t = (np.atleast_2d(Y) - np.asarray(self.center)) / self.half_width
        b, db = bump(t)
        return b / _B0, db / _B0

    def __call__(self, Y) -> np.ndarray:
        b, _ = self._parts(Y)
        return np.prod(b, axis=-1)

    def gradient(self, Y) -> np.ndarray:
        b, db = self._parts(Y)
        out = np.empty(b.shape)
        for d in range(b.shape[-1]):
            out[..., d] = db[..., d] * np.prod(np.delete(b, d, axis=-1), axis=-1)
        return out / self.half_width

    def grad_sup(self) -> float:
        """sup |grad psi| from a dense product grid refined by a local search."""
        t = np.linspace(-1, 1, 401)[1:-1]
        b, db = bump(t)
        b, db = b / _B0, db / _B0
        if self.n == 2:
            g2 = (db[:, None] * b[None]) ** 2 + (b[:, None] * db[None]) ** 2
        else:
            g2 = ((db[:, None, None] * b[None, :, None] * b[None, None]) ** 2
                  + (b[:, None, None] * db[None, :, None] * b[None, None]) ** 2
                  + (b[:, None, None] * b[None, :, None] * db[None, None]) ** 2)
        idx = np.unravel_index(np.argmax(g2), g2.shape)
        from scipy.optimize import minimize

        def neg(x):
            y = np.asarray(self.center) + self.half_width * np.clip(x, -0.999999, 0.999999)
            return -float(np.sum(self.gradient(y[None]) ** 2))

        res = minimize(neg, t[list(idx)], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14})
        return sqrt(max(-res.fun, float(g2.max()) / self.half_width**2))


def random_tests(domain: Domain, count: int, seed: int, theta: float,
                 radius: tuple[float, float] = (0.12, 0.3), clearance: float = 0.05) -> list[TestFunction]:
    """Bumps whose support box straddles the boundary and stays within theta of the domain.

    Box faces keep `clearance` from the faces of the domain's bounding box, so
    that no thin sliver between a box face and a boundary line needs very fine
    cubes before the layer sums settle.
    """
    rng = np.random.default_rng(seed)
    lo, hi = domain.bbox
    out = []
    while len(out) < count:
        r = float(rng.uniform(*radius))
        y = rng.uniform(lo - 0.2, hi + 0.2)
        xs = domain.boundary_projection(y)
        nrm = np.linalg.norm(y - xs)
        if nrm < 1e-9:
            continue
        c = xs + (y - xs) / nrm * rng.uniform(-0.3, 0.3) * r / sqrt(domain.n)
        tf = TestFunction(tuple(float(v) for v in c), r)
        blo, bhi = tf.box
        corners = np.array(list(product(*zip(blo, bhi))))
        sd = domain.signed_distance(corners)
        gaps = np.abs(np.concatenate([blo, bhi])[:, None] - np.concatenate([lo, hi])[None])
        axis = np.arange(2 * domain.n) % domain.n
        clear = np.all(gaps[axis[:, None] == axis[None]] >= clearance)
        if clear and np.all(-sd < 0.95 * theta) and np.any(sd > 0) and np.any(sd < 0):
            out.append(tf)
    return out


# quadrature on boxes -----------------------------------------------------------


@lru_cache(maxsize=None)
def _gauss(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1) / 2, w / 2


def _cell_nodes(lo, hi, order: int):
    x, w = _gauss(order)
    axes = [a + (b - a) * x for a, b in zip(lo, hi)]
    wts = [(b - a) * w for a, b in zip(lo, hi)]
    Y = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lo))
    W = np.prod(np.stack(np.meshgrid(*wts, indexing="ij"), axis=-1), axis=-1).ravel()
    return Y, W


def _box_integral(f, breaks: list, order: int) -> float:
    total = 0.0
    for cell in product(*(zip(b[:-1], b[1:]) for b in breaks)):
        lo, hi = zip(*cell)
        Y, W = _cell_nodes(lo, hi, order)
        total += float(W @ f(Y))
    return total


def domain_integral(domain: Domain, f, order: int = 16, box=None, pieces: int = 4) -> float:
    """Integral of f over the domain (intersected with an optional box).

    Rectangles use aligned tensor Gauss cells.  Balls without a box use polar
    or spherical Gauss rules.  Other cases fall back to composite Gauss cells
    with the domain indicator, accurate to first order in the cell size.
    """
    n = domain.n
    if isinstance(domain, Rectangle):
        lo, hi = domain.lo, domain.hi
        if box is not None:
            lo, hi = np.maximum(lo, box[0]), np.minimum(hi, box[1])
            if np.any(hi <= lo):
                return 0.0
        breaks = [np.linspace(a, b, pieces + 1) for a, b in zip(lo, hi)]
        return _box_integral(f, breaks, order)
    if isinstance(domain, Ball) and box is None:
        r, wr = _gauss(order)
        r, wr = r * domain.radius, wr * domain.radius
        if n == 2:
            t = 2 * pi * (np.arange(4 * order) + 0.5) / (4 * order)
            R, T = np.meshgrid(r, t, indexing="ij")
            Y = domain.center + np.stack([R * np.cos(T), R * np.sin(T)], -1).reshape(-1, 2)
            W = (wr[:, None] * R * (2 * pi / len(t))).ravel()
            return float(W @ f(Y))
        z, wz = np.polynomial.legendre.leggauss(order)
        t = 2 * pi * (np.arange(2 * order) + 0.5) / (2 * order)
        R, Z, T = np.meshgrid(r, z, t, indexing="ij")
        s = np.sqrt(1 - Z**2)
        Y = domain.center + np.stack([R * s * np.cos(T), R * s * np.sin(T), R * Z], -1).reshape(-1, 3)
        W = (wr[:, None, None] * R**2 * wz[None, :, None] * (2 * pi / len(t))).ravel()
        return float(W @ f(Y))
    lo, hi = domain.bbox if box is None else box
    breaks = [np.linspace(a, b, 8 * pieces + 1) for a, b in zip(lo, hi)]
    return _box_integral(lambda Y: np.where(domain.contains(Y), f(Y), 0.0), breaks, order)


# exterior layers -----------------------------------------------------------------


def exterior_layers(handle: ExtensionHandle, integrand, depth: int, order: int = 10,
                    boxes=None, reduce: str = "sum") -> dict:
    """Per-level integrals of integrand(Y, E(Y)) over the exterior cubes up to `depth`.

    `integrand` must vanish where E vanishes and outside the union of `boxes`;
    it may return one value per node or a row of values per node.  Box faces
    become cell faces.  With reduce="max" the per-level maxima over the nodes
    are returned instead of integrals.
    """
    cover = handle.cover.exterior
    n = handle.n
    if boxes is None:
        lo, hi = handle.domain.bbox
        boxes = [(lo - handle.theta, hi + handle.theta)]
    boxes = [(np.asarray(a, dtype=float), np.asarray(b, dtype=float)) for a, b in boxes]
    ulo = np.min([a for a, _ in boxes], axis=0)
    uhi = np.max([b for _, b in boxes], axis=0)
    cubes, _ = cover.build(ulo, uhi, depth)
    layers: dict = {}
    for q in cubes:
        if q[0] > depth:
            continue
        qlo, qhi = cube_bounds(q)
        mine = [(a, b) for a, b in boxes if np.all(a < qhi) and np.all(qlo < b)]
        if not mine:
            continue
        levels = range(max(cover.min_level, q[0] - 2), min(cover.max_level, q[0] + 2) + 1)
        near = cover.cubes_near(qlo, qhi, levels)
        bounds = {r: blowup_bounds(r) for r in near}
        breaks = []
        for d in range(n):
            pts = {qlo[d], qhi[d]}
            for a, b in list(bounds.values()) + mine:
                pts.update(v for v in (a[d], b[d]) if qlo[d] < v < qhi[d])
            breaks.append(np.array(sorted(pts)))
        nodes, weights, used = [], [], set()
        for cell in product(*(zip(b[:-1], b[1:]) for b in breaks)):
            lo_c, hi_c = np.array([c[0] for c in cell]), np.array([c[1] for c in cell])
            mid = (lo_c + hi_c) / 2
            if not any(np.all(a < mid) and np.all(mid < b) for a, b in mine):
                continue
            active = [r for r, (a, b) in bounds.items() if np.all(a < mid) and np.all(mid < b)]
            if len(active) <= 1:
                continue
            Y, W = _cell_nodes(lo_c, hi_c, order)
            nodes.append(Y)
            weights.append(W)
            used.update(active)
        if not nodes:
            continue
        # bumps vanish identically off their blow-ups, so one evaluation
        # over the union of active cubes serves every cell of this cube
        Y, W = np.concatenate(nodes), np.concatenate(weights)
        E = form_to_vec_arrays(handle.exterior_forms(Y, sorted(used)))
        vals = integrand(Y, E)
        if reduce == "max":
            value = np.max(vals, axis=0)
            layers[q[0]] = np.maximum(layers[q[0]], value) if q[0] in layers else value
        else:
            layers[q[0]] = layers.get(q[0], 0.0) + W @ vals
    return dict(sorted(layers.items()))


def richardson(layers: dict, terms: int = 2) -> tuple[float, float]:
    """Limit of the partial sums T_K assuming T_K = T + sum_j A_j 2^(-jK).

    Returns the extrapolated sum and the size of the last correction.  Fewer
    layers than terms + 1 lower the number of terms.
    """
    levels = sorted(layers)
    if not levels:
        return 0.0, 0.0
    terms = min(terms, len(levels) - 1)
    partial = np.cumsum([np.asarray(layers[k], dtype=float) for k in levels], axis=0)
    col = list(partial[-(terms + 1):])
    for j in range(1, terms + 1):
        f = 2.0**j
        col = [(f * col[i + 1] - col[i]) / (f - 1) for i in range(len(col) - 1)]
    value = col[0]
    return value, np.abs(value - partial[-1])


# divergence checks ---------------------------------------------------------------


def weak_div_residual(handle: ExtensionHandle, tests: list[TestFunction], depth: int = 9,
                      order: int = 10, terms: int = 3) -> list[dict]:
    """|int E u . grad psi| for each test function, with its scale ||grad psi||_inf ||u||_1.

    All test functions share one sweep over the exterior cubes.
    """
    u = handle.field
    l1 = domain_integral(handle.domain, lambda Y: np.linalg.norm(u(Y), axis=-1), order=16)

    def integrand(Y, E):
        return np.stack([np.einsum("pi,pi->p", E, tf.gradient(Y)) for tf in tests], axis=-1)

    layers = exterior_layers(handle, integrand, depth, order, boxes=[tf.box for tf in tests])
    outer, tail = richardson(layers, terms) if layers else (np.zeros(len(tests)), np.zeros(len(tests)))
    out = []
    for j, tf in enumerate(tests):
        inner = domain_integral(handle.domain, lambda Y: np.einsum("pi,pi->p", u(Y), tf.gradient(Y)),
                                order=24, box=tf.box, pieces=4)
        scale = tf.grad_sup() * l1
        res = abs(inner + float(outer[j]))
        out.append({"center": list(tf.center), "radius": tf.radius, "interior": inner,
                    "exterior": float(outer[j]), "extrapolation": float(tail[j]), "residual": res,
                    "scale": scale, "relative": res / scale,
                    "layers": {int(k): float(v[j]) for k, v in layers.items()}})
    return out


def pointwise_div_fd(F, y, h: float, domain: Domain | None = None) -> float:
    """Central-difference divergence of F at y; the stencil must stay exterior."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    stencil = np.concatenate([y + h * np.eye(n), y - h * np.eye(n)])
    if domain is not None and np.any(domain.signed_distance(stencil) >= 0):
        raise ValueError("finite-difference stencil crosses the boundary")
    vals = [np.asarray(F(p), dtype=float) for p in stencil]
    return float(sum((vals[j][j] - vals[n + j][j]) / (2 * h) for j in range(n)))


def fd_orders(F, y, hs, domain: Domain | None = None) -> tuple[list[float], list[float]]:
    """FD divergences at the step sizes hs and the observed orders log2 of successive ratios."""
    vals = [abs(pointwise_div_fd(F, y, h, domain)) for h in hs]
    orders = [log(a / b) / log(h0 / h1) if a > 0 and b > 0 else np.inf
              for a, b, h0, h1 in zip(vals[:-1], vals[1:], hs[:-1], hs[1:])]
    return vals, orders


# norms -----------------------------------------------------------------------------


def norm_ratio(handle: ExtensionHandle, p: float, depth: int = 8, order: int = 6) -> dict:
    """||E u||_{L^p(B_theta(domain))} / ||u||_{L^p(domain)} with reported resolution."""
    u = handle.field
    if p == np.inf:
        lo, hi = handle.domain.bbox
        g = np.stack(np.meshgrid(*[np.linspace(a, b, 129) for a, b in zip(lo, hi)], indexing="ij"), -1)
        g = g.reshape(-1, handle.n)
        g = g[handle.domain.contains(g)]
        inner = float(np.max(np.linalg.norm(u(g), axis=-1)))
        layers = exterior_layers(handle, lambda Y, E: np.linalg.norm(E, axis=-1), depth, order, reduce="max")
        outer = float(max(layers.values()))
        return {"p": "inf", "ratio": max(inner, outer) / inner, "interior": inner, "exterior": outer,
                "depth": depth, "order": order}
    inner = domain_integral(handle.domain, lambda Y: np.linalg.norm(u(Y), axis=-1) ** p, order=16)
    layers = exterior_layers(handle, lambda Y, E: np.linalg.norm(E, axis=-1) ** p, depth, order)
    outer, tail = richardson(layers, terms=1)
    outer, tail = float(outer), float(tail)
    return {"p": p, "ratio": ((inner + outer) / inner) ** (1 / p), "interior": inner ** (1 / p),
            "exterior": outer ** (1 / p), "tail": tail, "depth": depth, "order": order,
            "layers": {int(k): float(v) for k, v in layers.items()}}


def strip_ratios(handle: ExtensionHandle, deltas, c: float = 4.0, depth: int = 10, order: int = 6) -> list[dict]:
    """int_{exterior, dist < delta} |E u| over int_{interior, dist < c delta} |u| for each delta.

    Cubes below `depth` are added as a geometric tail equal to the last layer,
    which lies entirely inside the smallest strip when 2^-depth is small.
    """
    u, dom = handle.field, handle.domain
    deltas = [float(d) for d in deltas]
    D = np.array(deltas)
    # one sweep serves every strip: the integrand carries a column per delta
    def integrand(Y, E):
        near = -dom.signed_distance(Y)[:, None] < D[None]
        return np.where(near, np.linalg.norm(E, axis=-1)[:, None], 0.0)

    layers = exterior_layers(handle, integrand, depth, order)
    outer = sum(layers.values()) + layers[max(layers)]
    out = []
    for j, delta in enumerate(deltas):
        inner = domain_integral(
            dom, lambda Y, d=delta: np.where(dom.signed_distance(Y) < c * d, np.linalg.norm(u(Y), axis=-1), 0.0),
            order=12, pieces=32)
        out.append({"delta": delta, "exterior": float(outer[j]), "interior": inner, "ratio": float(outer[j]) / inner})
    return out


# cusp counterexamples ----------------------------------------------------------------


def _sphere_measure(m: int) -> float:
    """H^m measure of the unit sphere in R^(m+1)."""
    return 2 * pi ** ((m + 1) / 2) / gamma_fn((m + 1) / 2)


def exponent_window(gamma: float, n: int = 2, side: str = "plus", alpha: float | None = None) -> dict:
    """Admissible (alpha, p) for the cusp obstruction.

    side "plus" (n = 2): 2 < alpha < (gamma+1)/gamma and
    (gamma+1)/(gamma-1+alpha) < p < (gamma+1)/(alpha gamma).
    side "minus": 0 < alpha < 1, p < 1/alpha and
    (n-1)(1-p)/gamma + (1-alpha)p < -1, i.e. p > ((n-1)/gamma + 1)/((n-1)/gamma - 1 + alpha).
    The p-interval is reported at the given alpha.  Without one, side plus uses
    the midpoint of the alpha-interval and side minus the alpha with the widest
    p-interval.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if side == "plus":
        if n != 2:
            raise ValueError("the outward cusp obstruction is planar")
        a_lo, a_hi = 2.0, (gamma + 1) / gamma
        a = (a_lo + a_hi) / 2 if alpha is None else alpha
        p_lo, p_hi = (gamma + 1) / (gamma - 1 + a), (gamma + 1) / (a * gamma)
    elif side == "minus":
        a_lo, a_hi = 0.0, 1.0
        m = (n - 1) / gamma

        def bounds(a):
            lo = max((m + 1) / (m - 1 + a) if m - 1 + a > 0 else np.inf, 1.0)
            hi = 1 / a if a > 0 else np.inf
            return lo, (min(hi, (n - 1) / (n - 2)) if n >= 3 else hi)

        if alpha is None:
            # the alpha with the widest p-interval
            grid = np.linspace(0.01, 0.99, 99)
            a = float(grid[np.argmax([np.subtract(*bounds(v)[::-1]) for v in grid])])
        else:
            a = alpha
        p_lo, p_hi = bounds(a)
    else:
        raise ValueError("side must be 'plus' or 'minus'")
    alpha_ok = a_lo < a < a_hi
    empty = not (alpha_ok and p_lo < p_hi)
    return {"gamma": gamma, "n": n, "side": side, "alpha_interval": [a_lo, a_hi], "alpha": a,
            "p_interval": [p_lo, p_hi], "empty": empty,
            "reason": "" if not empty else ("alpha outside its interval" if not alpha_ok else "p-interval is empty")}


def _exponent(sc: "CuspScenario") -> float:
    if sc.side == "plus":
        return (1 - sc.p) * sc.gamma + sc.p * (1 - sc.alpha)
    return (sc.n - 1) * (1 - sc.p) / sc.gamma + (1 - sc.alpha) * sc.p


@dataclass(frozen=True)
class CuspScenario:
    gamma: float
    alpha: float
    p: float
    side: str = "plus"
    n: int = 2
    check_window: bool = True

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.check_window and not self.in_window:
            raise ValueError(f"(alpha, p) = ({self.alpha}, {self.p}) lies outside the exponent window")

    @property
    def in_window(self) -> bool:
        w = exponent_window(self.gamma, self.n, self.side, self.alpha)
        lo, hi = w["p_interval"]
        return not w["empty"] and lo < self.p < hi if self.p != 1 else (not w["empty"] and lo < 1 <= hi)

    @property
    def eta(self) -> float:
        """Largest scale on which the flux sign bound holds (side plus); 1/2 otherwise."""
        if self.side == "plus":
            return 2.0 ** (-1.0 / ((1 - self.alpha) * (self.gamma - 1)))
        return 0.5

    @property
    def exponent(self) -> float:
        return _exponent(self)

    @property
    def c_n(self) -> float:
        """Flux constant: (n-2)-sphere measure over (1 - alpha)."""
        return _sphere_measure(self.n - 2) / (1 - self.alpha)


def _log_quad(f, a: float, b: float, nodes: int = 80) -> float:
    """int_a^b f(y) dy by Gauss-Legendre in log y (for power-like integrands)."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    la, lb = log(a), log(b)
    t = (la + lb) / 2 + (lb - la) / 2 * x
    y = np.exp(t)
    return float((lb - la) / 2 * np.sum(w * f(y) * y))


def cusp_flux(sc: CuspScenario, s: float) -> dict:
    """Flux of the cusp field through the part of the test box boundary inside the domain.

    Side plus: box A_s = (s^(1/gamma), s) x (s, s^gamma), field (y^-alpha, 0).
    Side minus: cylinder Z_r of radius r^(1/gamma) and height (-r, r),
    field x'/|x'|^(n-1) y^-alpha on y > 0.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    g, a = sc.gamma, sc.alpha
    if sc.side == "plus":
        closed = (s ** (g * (1 - a)) - s ** (1 - a)) / (a - 1)
        field = lambda x, y: np.stack([y**-a, 0 * y], -1)
        x0, x1, y0, y1 = s ** (1 / g), s, s, s**g
        inside = lambda x, y: y > np.abs(x) ** g
        # the four sides with outward normals; the membership cut is found per side
        sides = [((x0, y0), (x0, y1), (-1.0, 0.0)), ((x1, y0), (x1, y1), (1.0, 0.0)),
                 ((x0, y0), (x1, y0), (0.0, -1.0)), ((x0, y1), (x1, y1), (0.0, 1.0))]
        total = 0.0
        for (xa, ya), (xb, yb), nv in sides:
            length = np.hypot(xb - xa, yb - ya)
            level = lambda t, xa=xa, ya=ya, xb=xb, yb=yb: (ya + t * (yb - ya)) - abs(xa + t * (xb - xa)) ** g
            ts = np.linspace(0, 1, 257)
            lv = np.array([level(t) for t in ts])
            cuts = [0.0] + [brentq(level, ts[i], ts[i + 1], xtol=1e-15, rtol=1e-15)
                            for i in range(len(ts) - 1) if lv[i] * lv[i + 1] < 0] + [1.0]
            for lo_t, hi_t in zip(cuts[:-1], cuts[1:]):
                if level((lo_t + hi_t) / 2) <= 0:
                    continue
                if xa == xb:
                    # vertical side: Gauss in log y between the cut points
                    ylo, yhi = ya + lo_t * (yb - ya), ya + hi_t * (yb - ya)
                    f = lambda y, xa=xa, nv=nv: field(np.full_like(y, xa), y) @ np.array(nv)
                    total += _log_quad(f, ylo, yhi)
                else:
                    f = lambda t, xa=xa, xb=xb, ya=ya, nv=nv: float(
                        field(np.array(xa + t * (xb - xa)), np.array(ya)) @ np.array(nv))
                    total += quad(f, lo_t, hi_t, epsabs=0, epsrel=1e-13)[0] * length
        return {"s": s, "closed_form": closed, "quadrature": total}
    m = sc.n - 2
    closed = sc.c_n * s ** (1 - a)
    # lateral side of the cylinder: |x'| = rho constant, so the normal flux density is rho^(2-n) y^-alpha
    rho = s ** (1 / g)
    lateral = _sphere_measure(m) * rho**m * rho ** (2 - sc.n)
    total = lateral * quad(lambda y: y**-a, 0, s, epsabs=0, epsrel=1e-13)[0]
    return {"s": s, "closed_form": closed, "quadrature": total}


def cusp_lowerbound(sc: CuspScenario, eps_floor: float = 1e-12, count: int = 30) -> dict:
    """Partial integrals int_eps^eta s^e ds for decreasing eps, with a log-log growth fit.

    Inside the window e < -1 and the partial integrals grow like eps^(e+1).
    Outside it (control) they converge.
    """
    e = sc.exponent
    eta = sc.eta
    eps = eta * np.logspace(-1, log(eps_floor / eta, 10), count)
    vals = np.array([_log_quad(lambda s: s**e, ep, eta, nodes=120) for ep in eps])
    closed = np.array([(eta ** (e + 1) - ep ** (e + 1)) / (e + 1) if e != -1 else log(eta / ep) for ep in eps])
    tail = slice(count // 2, None)
    slope = float(np.polyfit(np.log(eps[tail]), np.log(vals[tail]), 1)[0])
    doubling = float(_log_quad(lambda s: s**e, eps[-1] / 2, eta, 120) / vals[-1])
    increments = np.diff(vals)
    return {"exponent": e, "predicted_growth": abs(e + 1) if e < -1 else 0.0, "fitted_growth": -slope,
            "eps": eps.tolist(), "partial": vals.tolist(), "closed_form": closed.tolist(),
            "doubling_ratio": doubling, "monotone": bool(np.all(increments > 0)),
            "converges": bool(e > -1)}


# Stokes -------------------------------------------------------------------------------


def stokes_check(u, vertices, degree: int = 6) -> dict:
    """|sum of outward face fluxes - int div u| over a full-dimensional flat simplex."""
    V = np.asarray(vertices, dtype=float)
    n = V.shape[1]
    if V.shape[0] != n + 1:
        raise ValueError("need n+1 vertices")
    vol_rule = simplex_rule(n, degree)
    face_rule = simplex_rule(n - 1, degree)
    T = (V[1:] - V[0]).T
    vol = abs(np.linalg.det(T))
    X = V[0] + vol_rule.nodes @ T.T
    div = float(vol * vol_rule.weights @ u.divergence(X))
    centroid = V.mean(axis=0)
    flux = 0.0
    for j in range(n + 1):
        F = np.delete(V, j, axis=0)
        E = (F[1:] - F[0]).T
        Y = F[0] + face_rule.nodes @ E.T
        if n == 2:
            t = E[:, 0]
            normal = np.array([t[1], -t[0]])
        else:
            normal = np.cross(E[:, 0], E[:, 1])
        if normal @ (F[0] - centroid) < 0:
            normal = -normal
        # |normal| is (n-1)! times the face measure, matching the unit-simplex weights
        flux += float(face_rule.weights @ (u(Y) @ normal))
    return {"face_flux": flux, "divergence_integral": div, "residual": abs(flux - div)}
