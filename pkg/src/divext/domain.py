"""Domain descriptors, signed distance, boundary projection and simplex maps.

Signed distance is positive inside.  Every descriptor also answers exact
box queries (`cube_distance`) used by the Whitney construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from math import factorial

import numpy as np
from scipy.optimize import linprog, minimize, minimize_scalar

from .exterior import basis, wedge_arrays

__all__ = [
    "CollarError",
    "Domain",
    "Ball",
    "Rectangle",
    "ConvexPolytope",
    "SmoothStar",
    "CuspPlus",
    "CuspMinus",
    "SimplexMap",
    "flat_simplex",
    "curvilinear_simplex",
    "domain_from_json",
    "contains",
    "signed_distance",
    "boundary_projection",
]

INTERIOR, EXTERIOR, STRADDLE = "interior", "exterior", "straddle"


class CollarError(ValueError):
    """A point or simplex lies outside the region where the boundary chart is valid."""


def _box_point_dist(lo, hi, pts) -> np.ndarray:
    gap = np.maximum(np.maximum(lo - pts, pts - hi), 0.0)
    return np.linalg.norm(gap, axis=-1)


class Domain:
    """Base descriptor.  Subclasses implement the analytic queries."""

    n: int
    convex: bool = False
    smooth: bool = False

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def contains(self, x) -> np.ndarray:
        return self.signed_distance(x) > 0

    def signed_distance(self, x) -> np.ndarray:
        raise NotImplementedError

    def boundary_projection(self, x) -> np.ndarray:
        raise NotImplementedError

    def cube_distance(self, lo, hi) -> tuple[str, float]:
        """Classify a closed box and return its distance to the boundary."""
        raise NotImplementedError

    @property
    def inradius(self) -> float:
        raise NotImplementedError

    @property
    def collar(self) -> float:
        """Half-width of the one-sided tube in which projection is valid."""
        return np.inf

    def shrink(self, eps: float) -> "Domain":
        raise NotImplementedError(f"{type(self).__name__} has no exact inner parallel set")

    def to_json(self) -> dict:
        raise NotImplementedError

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.to_json() == other.to_json()

    def __hash__(self) -> int:
        return hash(json.dumps(self.to_json(), sort_keys=True))


class Ball(Domain):
    convex = True
    smooth = True

    def __init__(self, center, radius: float):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.n = len(self.center)
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")
        if self.n not in (2, 3):
            raise ValueError("only n = 2, 3 are supported")

    @property
    def bbox(self):
        return self.center - self.radius, self.center + self.radius

    def signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        return self.radius - np.linalg.norm(x - self.center, axis=-1)

    def boundary_projection(self, x):
        x = np.asarray(x, dtype=float)
        d = x - self.center
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        if np.any(r < 1e-14 * self.radius):
            raise CollarError("projection undefined at the ball center")
        return self.center + self.radius * d / r

    def inner_normal(self, xb):
        d = np.asarray(xb, dtype=float) - self.center
        return -d / np.linalg.norm(d, axis=-1, keepdims=True)

    def cube_distance(self, lo, hi):
        near = np.linalg.norm(np.maximum(np.maximum(lo - self.center, self.center - hi), 0.0))
        far = np.linalg.norm(np.maximum(np.abs(lo - self.center), np.abs(hi - self.center)))
        if far < self.radius:
            return INTERIOR, self.radius - far
        if near > self.radius:
            return EXTERIOR, near - self.radius
        return STRADDLE, 0.0

    @property
    def inradius(self):
        return self.radius

    @property
    def collar(self):
        return self.radius / 2

    def shrink(self, eps):
        if eps >= self.radius:
            raise ValueError("shrink width exceeds the radius")
        return Ball(self.center, self.radius - eps)

    def chart(self, p, s, dp, ds):
        """Point and tangent frame of x(t) + s(t) * inner normal, with derivatives dp, ds."""
        d = p - self.center
        rho = np.linalg.norm(d, axis=-1, keepdims=True)
        u = d / rho
        pts = self.center + (self.radius - s[..., None]) * u
        # d/dt of u is (I - u u^T) dp / rho
        du = (dp - np.einsum("...kn,...n->...k", dp, u)[..., None] * u[..., None, :]) / rho[..., None]
        frame = (self.radius - s)[..., None, None] * du - ds[..., None] * u[..., None, :]
        return pts, frame

    def to_json(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


class Rectangle(Domain):
    convex = True

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.n = len(self.lo)
        if np.any(self.hi <= self.lo):
            raise ValueError("rectangle corners must satisfy min < max")
        if self.n not in (2, 3):
            raise ValueError("only n = 2, 3 are supported")

    @property
    def bbox(self):
        return self.lo.copy(), self.hi.copy()

    def signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.min(np.minimum(x - self.lo, self.hi - x), axis=-1)
        outside = _box_point_dist(self.lo, self.hi, x)
        return np.where(outside > 0, -outside, inside)

    def boundary_projection(self, x):
        x = np.asarray(x, dtype=float)
        clamped = np.clip(x, self.lo, self.hi)
        out = clamped.copy()
        flat = out.reshape(-1, self.n)
        for row, p in zip(flat, x.reshape(-1, self.n)):
            if np.all((p > self.lo) & (p < self.hi)):
                gaps = np.concatenate([p - self.lo, self.hi - p])
                j = int(np.argmin(gaps))
                row[j % self.n] = self.lo[j] if j < self.n else self.hi[j - self.n]
        return flat.reshape(x.shape)

    def cube_distance(self, lo, hi):
        if np.all(lo > self.lo) and np.all(hi < self.hi):
            return INTERIOR, float(np.min(np.minimum(lo - self.lo, self.hi - hi)))
        gap = np.maximum(np.maximum(lo - self.hi, self.lo - hi), 0.0)
        d = float(np.linalg.norm(gap))
        return (EXTERIOR, d) if d > 0 else (STRADDLE, 0.0)

    @property
    def inradius(self):
        return float(np.min(self.hi - self.lo) / 2)

    def shrink(self, eps):
        return Rectangle(self.lo + eps, self.hi - eps)

    def to_json(self):
        return {"type": "rectangle", "min": self.lo.tolist(), "max": self.hi.tolist()}


class ConvexPolytope(Domain):
    """Intersection of half-spaces a_i . x <= b_i."""

    convex = True

    def __init__(self, A, b):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.asarray(b, dtype=float)
        self.n = self.A.shape[1]
        self._norms = np.linalg.norm(self.A, axis=1)
        if self.n not in (2, 3):
            raise ValueError("only n = 2, 3 are supported")
        lo, hi = [], []
        for j in range(self.n):
            e = np.eye(self.n)[j]
            r1 = linprog(e, A_ub=self.A, b_ub=self.b, bounds=[(None, None)] * self.n)
            r2 = linprog(-e, A_ub=self.A, b_ub=self.b, bounds=[(None, None)] * self.n)
            if r1.status != 0 or r2.status != 0:
                raise ValueError("half-spaces must define a bounded nonempty set")
            lo.append(r1.fun)
            hi.append(-r2.fun)
        self._bbox = np.array(lo), np.array(hi)
        if self.inradius <= 0:
            raise ValueError("polytope has empty interior")

    @property
    def bbox(self):
        return self._bbox[0].copy(), self._bbox[1].copy()

    def _project_outside(self, p):
        res = minimize(
            lambda z: np.sum((z - p) ** 2),
            np.clip(p, *self._bbox),
            jac=lambda z: 2 * (z - p),
            constraints=[{"type": "ineq", "fun": lambda z: self.b - self.A @ z, "jac": lambda z: -self.A}],
            method="SLSQP",
            options={"ftol": 1e-15, "maxiter": 200},
        )
        return res.x

    def _slack(self, x):
        return (self.b - x @ self.A.T) / self._norms

    def signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        slack = self._slack(x)
        inside = np.min(slack, axis=-1)
        out = inside.copy().reshape(-1)
        for i, p in enumerate(x.reshape(-1, self.n)):
            if out[i] < 0:
                out[i] = -np.linalg.norm(self._project_outside(p) - p)
        return out.reshape(inside.shape)

    def boundary_projection(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x).reshape(-1, self.n)
        for i, p in enumerate(x.reshape(-1, self.n)):
            s = self._slack(p)
            if np.min(s) > 0:
                j = int(np.argmin(s))
                out[i] = p + s[j] * self.A[j] / self._norms[j]
            else:
                out[i] = self._project_outside(p)
        return out.reshape(x.shape)

    def _corners(self, lo, hi):
        return np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(self.n, -1).T

    def cube_distance(self, lo, hi):
        slack = self._slack(self._corners(lo, hi))
        if np.min(slack) > 0:
            return INTERIOR, float(np.min(slack))
        # distance between box and polytope as a small QP
        res = minimize(
            lambda z: np.sum((z[: self.n] - z[self.n :]) ** 2),
            np.concatenate([(lo + hi) / 2, np.clip((lo + hi) / 2, *self._bbox)]),
            constraints=[{"type": "ineq", "fun": lambda z: self.b - self.A @ z[self.n :]}],
            bounds=[(l, h) for l, h in zip(lo, hi)] + [(None, None)] * self.n,
            method="SLSQP",
            options={"ftol": 1e-15, "maxiter": 200},
        )
        d = float(np.sqrt(max(res.fun, 0.0)))
        return (EXTERIOR, d) if d > 1e-12 else (STRADDLE, 0.0)

    @cached_property
    def inradius(self):
        # Chebyshev center: maximize r s.t. a.x + r|a| <= b
        c = np.zeros(self.n + 1)
        c[-1] = -1
        res = linprog(c, A_ub=np.hstack([self.A, self._norms[:, None]]), b_ub=self.b,
                      bounds=[(None, None)] * self.n + [(0, None)])
        return float(res.x[-1])

    def shrink(self, eps):
        return ConvexPolytope(self.A, self.b - eps * self._norms)

    def to_json(self):
        return {"type": "polytope", "A": self.A.tolist(), "b": self.b.tolist()}


class SmoothStar(Domain):
    """2D star domain {r < rho(theta)} about the origin.

    rho is either an ellipse (semi-axes a, b) or a Fourier series
    a0 + sum_k (a_k cos k theta + b_k sin k theta).
    """

    smooth = True
    n = 2
    _SAMPLES = 4096

    def __init__(self, ellipse=None, fourier=None):
        if (ellipse is None) == (fourier is None):
            raise ValueError("give exactly one of ellipse or fourier")
        self.ellipse = None if ellipse is None else tuple(float(v) for v in ellipse)
        self.fourier = None if fourier is None else np.asarray(fourier, dtype=float)
        th = np.linspace(0, 2 * np.pi, self._SAMPLES, endpoint=False)
        if np.min(self.rho(th)[0]) <= 0:
            raise ValueError("radial function must be positive")
        self._theta = th
        self._pts = self.curve(th)[0]
        d1, d2 = self.curve(th)[1:]
        kappa = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / np.linalg.norm(d1, axis=1) ** 3
        self.convex = bool(np.min(kappa) >= 0)
        self.kappa_max = float(np.max(np.abs(kappa)))

    def rho(self, th):
        th = np.asarray(th, dtype=float)
        if self.ellipse is not None:
            a, b = self.ellipse
            g = (b * np.cos(th)) ** 2 + (a * np.sin(th)) ** 2
            dg = (a * a - b * b) * np.sin(2 * th)
            d2g = 2 * (a * a - b * b) * np.cos(2 * th)
            r = a * b * g**-0.5
            dr = -0.5 * a * b * g**-1.5 * dg
            d2r = a * b * (0.75 * g**-2.5 * dg**2 - 0.5 * g**-1.5 * d2g)
            return r, dr, d2r
        c = self.fourier
        r, dr, d2r = np.full_like(th, c[0]), np.zeros_like(th), np.zeros_like(th)
        for k in range(1, (len(c) - 1) // 2 + 1):
            ak, bk = c[2 * k - 1], c[2 * k]
            cs, sn = np.cos(k * th), np.sin(k * th)
            r = r + ak * cs + bk * sn
            dr = dr + k * (-ak * sn + bk * cs)
            d2r = d2r - k * k * (ak * cs + bk * sn)
        return r, dr, d2r

    def curve(self, th):
        r, dr, d2r = self.rho(th)
        c, s = np.cos(th), np.sin(th)
        b = np.stack([r * c, r * s], -1)
        b1 = np.stack([dr * c - r * s, dr * s + r * c], -1)
        b2 = np.stack([d2r * c - 2 * dr * s - r * c, d2r * s + 2 * dr * c - r * s], -1)
        return b, b1, b2

    @property
    def bbox(self):
        return self._pts.min(axis=0), self._pts.max(axis=0)

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        th = np.arctan2(x[..., 1], x[..., 0])
        return np.linalg.norm(x, axis=-1) < self.rho(th)[0]

    def _closest_param(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        # nearest sample as the Newton start, in chunks to bound memory
        idx = np.concatenate([np.argmin(np.sum((c[:, None, :] - self._pts[None]) ** 2, axis=-1), axis=1)
                              for c in np.array_split(x, max(1, len(x) // 2048))]) if len(x) else np.zeros(0, int)
        th = self._theta[idx]
        for _ in range(30):
            b, b1, b2 = self.curve(th)
            f = np.sum((b - x) * b1, -1)
            fp = np.sum(b1 * b1, -1) + np.sum((b - x) * b2, -1)
            step = f / fp
            th = th - step
            if np.max(np.abs(step)) < 1e-15:
                break
        return th

    def signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        th = self._closest_param(x.reshape(-1, 2))
        d = np.linalg.norm(self.curve(th)[0] - x.reshape(-1, 2), axis=-1)
        sign = np.where(self.contains(x.reshape(-1, 2)), 1.0, -1.0)
        return (sign * d).reshape(x.shape[:-1])

    def boundary_projection(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(np.abs(self.signed_distance(x)) >= self.collar):
            raise CollarError("outside collar")
        th = self._closest_param(x.reshape(-1, 2))
        return self.curve(th)[0].reshape(x.shape)

    def inner_normal_param(self, th):
        _, b1, b2 = self.curve(th)
        L = np.linalg.norm(b1, axis=-1, keepdims=True)
        nrm = np.stack([-b1[..., 1], b1[..., 0]], -1) / L
        db = b2 / L - b1 * np.sum(b1 * b2, -1, keepdims=True) / L**3
        dn = np.stack([-db[..., 1], db[..., 0]], -1)
        return nrm, dn

    def chart(self, p, s, dp, ds):
        shape = p.shape[:-1]
        p2 = p.reshape(-1, 2)
        if np.any(np.abs(self.signed_distance(p2)) >= self.collar):
            raise CollarError("simplex out of collar")
        th = self._closest_param(p2)
        b, b1, b2 = self.curve(th)
        nrm, dn = self.inner_normal_param(th)
        denom = np.sum(b1 * b1, -1) + np.sum((b - p2) * b2, -1)
        s2 = s.reshape(-1)
        pts = b + s2[:, None] * nrm
        dpk = dp.reshape(-1, dp.shape[-2], 2)
        dth = np.einsum("mkn,mn->mk", dpk, b1) / denom[:, None]
        frame = dth[..., None] * (b1 + s2[:, None] * dn)[:, None, :] + ds.reshape(-1, dp.shape[-2])[..., None] * nrm[:, None, :]
        return pts.reshape(shape + (2,)), frame.reshape(shape + (dp.shape[-2], 2))

    def cube_distance(self, lo, hi):
        d = _box_point_dist(lo, hi, self._pts)
        i = int(np.argmin(d))
        h = 2 * np.pi / self._SAMPLES
        res = minimize_scalar(
            lambda t: _box_point_dist(lo, hi, self.curve(np.array([t]))[0])[0],
            bounds=(self._theta[i] - h, self._theta[i] + h),
            method="bounded",
            options={"xatol": 1e-13},
        )
        dist = min(float(res.fun), float(d[i]))
        if dist <= 0:
            return STRADDLE, 0.0
        side = INTERIOR if self.contains((lo + hi) / 2) else EXTERIOR
        return side, dist

    @cached_property
    def inradius(self):
        g = np.linspace(*self.bbox, 64)
        pts = np.stack(np.meshgrid(g[:, 0], g[:, 1]), -1).reshape(-1, 2)
        return float(np.max(self.signed_distance(pts)))

    @property
    def collar(self):
        return min(1.0 / (2 * self.kappa_max), self.inradius / 2)

    def to_json(self):
        if self.ellipse is not None:
            return {"type": "smooth_star", "ellipse": list(self.ellipse)}
        return {"type": "smooth_star", "fourier": self.fourier.tolist()}


class _Cusp(Domain):
    """Cusp domains in (-1,1)^n cut by the graph y = |x'|^gamma."""

    _SAMPLES = 20001

    def __init__(self, gamma: float, n: int = 2):
        if not 0 < gamma < 1:
            raise ValueError("cusp exponent must lie in (0, 1)")
        if n not in (2, 3):
            raise ValueError("only n = 2, 3 are supported")
        self.gamma = float(gamma)
        self.n = n

    @property
    def bbox(self):
        return -np.ones(self.n), np.ones(self.n)

    def _above(self, r, y):
        raise NotImplementedError

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        in_box = np.all(np.abs(x) < 1, axis=-1)
        r = np.linalg.norm(x[..., :-1], axis=-1)
        return in_box & self._side(r, x[..., -1])

    @cached_property
    def _boundary_rz(self):
        # boundary of the profile set in the half plane (r >= 0, y), sampled densely
        g = np.linspace(0, 1, self._SAMPLES) ** 3
        graph = np.stack([g, g**self.gamma], -1)
        t = np.linspace(-1, 1, self._SAMPLES)
        faces = [np.stack([np.ones_like(t), t], -1), np.stack([np.abs(t), np.ones_like(t)], -1),
                 np.stack([np.abs(t), -np.ones_like(t)], -1)]
        keep = [graph]
        for f in faces:
            on = self._side(f[:, 0], f[:, 1]) | np.isclose(f[:, 1], f[:, 0] ** self.gamma)
            keep.append(f[on])
        return np.concatenate(keep)

    def signed_distance(self, x):
        x = np.asarray(x, dtype=float)
        rz = np.stack([np.linalg.norm(x[..., :-1], axis=-1), x[..., -1]], -1).reshape(-1, 2)
        bd = self._boundary_rz
        d = np.array([np.min(np.linalg.norm(bd - p, axis=1)) for p in rz]).reshape(x.shape[:-1])
        return np.where(self.contains(x), d, -d)

    def boundary_projection(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x).reshape(-1, self.n)
        bd = self._boundary_rz
        for i, p in enumerate(x.reshape(-1, self.n)):
            r = np.linalg.norm(p[:-1])
            rz = bd[np.argmin(np.linalg.norm(bd - [r, p[-1]], axis=1))]
            direction = p[:-1] / r if r > 0 else np.eye(self.n - 1)[0]
            out[i] = np.concatenate([rz[0] * direction, [rz[1]]])
        return out.reshape(x.shape)

    def to_json(self):
        return {"type": self._kind, "gamma": self.gamma, "n": self.n}


class CuspPlus(_Cusp):
    """Outward cusp: y > |x'|^gamma inside (-1,1)^n."""

    _kind = "cusp_plus"

    def _side(self, r, y):
        return y > np.power(r, self.gamma)


class CuspMinus(_Cusp):
    """Inward cusp: y < |x'|^gamma inside (-1,1)^n."""

    _kind = "cusp_minus"

    def _side(self, r, y):
        return y < np.power(r, self.gamma)


def domain_from_json(obj) -> Domain:
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValueError("domain descriptor needs a 'type' field")
    kind = obj["type"]
    try:
        if kind == "ball":
            return Ball(obj["center"], obj["radius"])
        if kind == "rectangle":
            return Rectangle(obj["min"], obj["max"])
        if kind == "polytope":
            return ConvexPolytope(obj["A"], obj["b"])
        if kind == "smooth_star":
            return SmoothStar(ellipse=obj.get("ellipse"), fourier=obj.get("fourier"))
        if kind == "cusp_plus":
            return CuspPlus(obj["gamma"], obj.get("n", 2))
        if kind == "cusp_minus":
            return CuspMinus(obj["gamma"], obj.get("n", 2))
    except KeyError as exc:
        raise ValueError(f"domain descriptor missing field {exc}") from None
    raise ValueError(f"unknown domain type {kind!r}")


def contains(d: Domain, x):
    return d.contains(x)


def signed_distance(d: Domain, x):
    return d.signed_distance(x)


def boundary_projection(d: Domain, x):
    return d.boundary_projection(x)


@dataclass(frozen=True)
class SimplexMap:
    """Map from the unit simplex D^k onto a flat or curvilinear simplex.

    t has shape (..., k); vertex x_0 corresponds to t = 0 and x_j to e_j.
    """

    domain: Domain
    vertices: np.ndarray
    curvilinear: bool = False

    @property
    def k(self) -> int:
        return len(self.vertices) - 1

    def _affine(self, t):
        t = np.asarray(t, dtype=float)
        x0 = self.vertices[0]
        edges = self.vertices[1:] - x0
        return x0 + t @ edges, np.broadcast_to(edges, t.shape[:-1] + edges.shape)

    @cached_property
    def _depths(self):
        return self.domain.signed_distance(self.vertices)

    def eval(self, t) -> np.ndarray:
        return self._eval_frame(t)[0]

    def tangent_frame(self, t) -> np.ndarray:
        """Partial derivatives dS/dt_j, shape (..., k, n)."""
        return self._eval_frame(t)[1]

    def _eval_frame(self, t):
        p, dp = self._affine(t)
        if not self.curvilinear:
            return p, dp
        s0 = self._depths[0]
        ds_vec = self._depths[1:] - s0
        t = np.asarray(t, dtype=float)
        s = s0 + t @ ds_vec
        ds = np.broadcast_to(ds_vec, t.shape)
        return self.domain.chart(p, s, dp, ds)

    def surface_normal_element(self, t) -> np.ndarray:
        """dS/dt_k ^ ... ^ dS/dt_1 (components of a grade-k vector)."""
        frame = self.tangent_frame(t)
        n = self.vertices.shape[1]
        out = np.ones(frame.shape[:-2] + (1,))
        for j in range(self.k - 1, -1, -1):
            out = wedge_arrays(out, frame[..., j, :], n, self.k - 1 - j, 1)
        return out

    def degenerate(self, tol: float = 1e-12) -> bool:
        if self.k == 0:
            return False
        edges = self.vertices[1:] - self.vertices[0]
        gram = edges @ edges.T
        vol = np.sqrt(max(np.linalg.det(gram), 0.0)) / factorial(self.k)
        diffs = self.vertices[:, None] - self.vertices[None]
        scale = np.max(np.linalg.norm(diffs, axis=-1))
        return bool(vol < tol * scale**self.k) if scale > 0 else True


def flat_simplex(domain: Domain, vertices) -> SimplexMap:
    v = np.atleast_2d(np.asarray(vertices, dtype=float))
    if not domain.convex:
        raise ValueError("flat simplices need a convex domain")
    if not np.all(domain.signed_distance(v) >= 0):
        raise ValueError("simplex vertex outside the domain")
    return SimplexMap(domain, v, False)


def curvilinear_simplex(domain: Domain, vertices, c1: float = 4.0) -> SimplexMap:
    """Curvilinear simplex through boundary projection.

    The vertices must sit inside the collar with mutual distances and depths
    comparable to the smallest depth: max |x_i - x_j| <= c1 * min s_i and
    max s_i <= c1 * min s_i.  The observed ratio is kept as `observed_c1`.
    """
    v = np.atleast_2d(np.asarray(vertices, dtype=float))
    if not hasattr(domain, "chart"):
        raise ValueError(f"{type(domain).__name__} has no boundary chart")
    s = domain.signed_distance(v)
    if np.any(s <= 0) or np.any(s >= domain.collar):
        raise CollarError("simplex out of collar")
    spread = np.max(np.linalg.norm(v[:, None] - v[None], axis=-1))
    observed = float(max(spread, np.max(s)) / np.min(s))
    if observed > c1:
        raise CollarError(f"simplex out of collar: comparability ratio {observed:.3g} exceeds c1 = {c1}")
    smap = SimplexMap(domain, v, True)
    object.__setattr__(smap, "observed_c1", observed)
    return smap
