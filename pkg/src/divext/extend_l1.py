"""Divergence-free L^1 extension across the boundary.

Outside the domain the extension is the (n-1)-form

    E(y) = (-1)^(n-1) sum_I a_I phi_{i_n}(y) dphi_{i_(n-1)} ^ ... ^ dphi_{i_1}(y),

summed over multi-indices of exterior Whitney cubes active at y.  The
coefficient a_I is the flux of u through the simplex spanned by points drawn
from the half-size matched interior cubes, averaged over those points.  Flat
simplices serve convex domains, curvilinear ones smooth 2D domains.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import asdict, dataclass
from math import factorial, sqrt

import numpy as np

from .domain import CollarError, Domain
from .exterior import form_to_vec_arrays, vec_to_form_arrays, wedge_arrays
from .fields import Field, MollifiedField
from .partition import BumpFamily
from .quadrature import cube_rule, product_nodes, simplex_rule
from .whitney import CubeId, WhitneyDoubleCover, blowup_bounds, cube_center, cube_side

__all__ = [
    "ExtendConfig",
    "ExtensionHandle",
    "prepare",
    "simplex_functional",
    "evaluate",
    "mollified_inner",
    "support_radius",
    "multi_indices",
    "phi_forms",
]

DEGENERATE = 1e-12


@dataclass(frozen=True)
class ExtendConfig:
    min_level: int = 0
    max_level: int = 12
    quad_order: int = 2
    simplex_degree: int = 4
    simplex: str = "flat"
    mollify_eps: float | None = None
    mc_samples: int | None = None
    seed: int = 0
    budget: int = 1 << 16
    eta: float | None = None

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]


def multi_indices(cubes: list[CubeId], length: int) -> np.ndarray:
    """Index tuples into `cubes` whose blow-ups share a point, first length-1 entries distinct."""
    m = len(cubes)
    boxes = [blowup_bounds(q) for q in cubes]
    meet = np.array([[bool(np.all(a[0] <= b[1]) and np.all(b[0] <= a[1])) for b in boxes] for a in boxes])
    out: list[tuple[int, ...]] = []

    def grow(prefix: tuple[int, ...]) -> None:
        if len(prefix) == length:
            out.append(prefix)
            return
        last = len(prefix) == length - 1
        for j in range(m):
            if not last and j in prefix:
                continue
            if all(meet[i, j] for i in prefix):
                grow(prefix + (j,))

    grow(())
    return np.array(out, dtype=int).reshape(-1, length)


def phi_forms(phi: np.ndarray, dphi: np.ndarray, I: np.ndarray, n: int) -> np.ndarray:
    """phi_{i_r} dphi_{i_(r-1)} ^ ... ^ dphi_{i_1} for each row of I: shape (P, L, C(n, r-1))."""
    r = I.shape[1]
    out = phi[:, I[:, -1]][..., None]
    for grade, j in enumerate(range(r - 2, -1, -1)):
        out = wedge_arrays(out, dphi[:, I[:, j]], n, grade, 1)
    return out


class ExtensionHandle:
    """A prepared extension operator: covers, bumps, rules and a lazy coefficient cache."""

    def __init__(self, domain: Domain, field: Field, config: ExtendConfig = ExtendConfig()):
        self.notices: list[str] = []
        self.config = config
        if field.rough:
            if config.mollify_eps is None:
                raise ValueError("rough fields need mollify_eps")
            field = MollifiedField(field, config.mollify_eps, domain)
            domain = domain.shrink(config.mollify_eps)
            self.notices.append(f"rough input mollified at eps={config.mollify_eps}; extending from the inner parallel set")
        if field.n != domain.n:
            raise ValueError("field and domain dimensions differ")
        self.domain, self.field, self.n = domain, field, domain.n
        variant = config.simplex
        if variant not in ("flat", "curvilinear"):
            raise ValueError("simplex variant must be 'flat' or 'curvilinear'")
        if variant == "curvilinear" and domain.convex:
            variant = "flat"
            self.notices.append("convex domain: curvilinear simplices replaced by flat ones")
        if variant == "flat" and not domain.convex:
            raise ValueError("flat simplices need a convex domain; use the curvilinear variant")
        if variant == "curvilinear" and not hasattr(domain, "chart"):
            raise ValueError(f"{type(domain).__name__} does not support curvilinear simplices")
        self.curvilinear = variant == "curvilinear"
        self.cover = WhitneyDoubleCover(domain, config.min_level, config.max_level, config.eta,
                                        depth_limit=domain.collar / 2 if self.curvilinear else None)
        self.bumps = BumpFamily(self.cover)
        self.cube_rule = cube_rule(self.n, config.quad_order)
        self.theta = self.cover.theta
        # curvilinear simplices exist only while every active cube is below eta
        self.reach = 11 * sqrt(self.n) * self.cover.eta / 12 if self.curvilinear else np.inf
        self._cache: dict = {}
        self._lock = threading.Lock()

    # simplex integrals -------------------------------------------------

    def simplices(self, targets: tuple[CubeId, ...]):
        """Quadrature of the product measure over simplices with vertices in the half cubes.

        Returns points Z (M, Q, n), weights (M, Q) and the tangent k-vectors
        dS/dt_k ^ ... ^ dS/dt_1 at each node (M, Q, C(n, k)), with k = len(targets) - 1.
        Degenerate simplices carry zero weight.
        """
        k = len(targets) - 1
        cfg = self.config
        X, W = product_nodes(self.cube_rule, [(cube_center(t), cube_side(t)) for t in targets], 0.5,
                             budget=cfg.budget, mc_samples=cfg.mc_samples, seed=cfg.seed)
        rule = simplex_rule(k, cfg.simplex_degree)
        T = rule.nodes
        E = X[:, 1:] - X[:, :1]                                   # (M, k, n)
        p = X[:, None, 0, :] + np.einsum("qk,mkn->mqn", T, E)      # (M, Q, n)
        flat_j = np.ones((len(X), 1))
        for g, j in enumerate(range(k - 1, -1, -1)):
            flat_j = wedge_arrays(flat_j, E[:, j], self.n, g, 1)
        diffs = X[:, :, None] - X[:, None]
        scale = np.max(np.linalg.norm(diffs, axis=-1), axis=(1, 2))
        vol = np.linalg.norm(flat_j, axis=-1) / factorial(k)
        keep = vol >= DEGENERATE * scale**k if k else np.ones(len(X), bool)
        weights = (W * keep)[:, None] * rule.weights[None]
        if not self.curvilinear:
            return p, weights, np.broadcast_to(flat_j[:, None], p.shape[:2] + flat_j.shape[-1:])
        depth = self.domain.signed_distance(X)                     # (M, k+1)
        if np.any(depth <= 0) or np.any(depth >= self.domain.collar):
            raise CollarError("simplex out of collar")
        s = depth[:, 0][:, None] + np.einsum("qk,mk->mq", T, depth[:, 1:] - depth[:, :1])
        dp = np.broadcast_to(E[:, None], p.shape[:2] + E.shape[1:])
        ds = np.broadcast_to((depth[:, 1:] - depth[:, :1])[:, None], p.shape[:2] + (k,))
        Z, frame = self.domain.chart(p, s, dp, ds)
        J = np.ones(p.shape[:2] + (1,))
        for g, j in enumerate(range(k - 1, -1, -1)):
            J = wedge_arrays(J, frame[..., j, :], self.n, g, 1)
        return Z, weights, J

    def functional(self, targets: tuple[CubeId, ...]) -> float:
        hit = self._cache.get(targets)
        if hit is None:
            Z, w, J = self.simplices(targets)
            flux = np.sum(vec_to_form_arrays(self.field(Z)) * J, axis=-1)
            hit = float(np.sum(w * flux))
            with self._lock:
                self._cache.setdefault(targets, hit)
        return hit

    def simplex_functional(self, I: tuple[CubeId, ...]) -> float:
        """a_I for an ordered tuple of exterior cubes."""
        if len(I) != self.n:
            raise ValueError(f"multi-index must have {self.n} entries")
        return self.functional(tuple(self.cover.psi(q) for q in I))

    # evaluation ----------------------------------------------------------

    def exterior_forms(self, Y, cubes: list[CubeId]) -> np.ndarray:
        """The (n-1)-form E at exterior points Y, given every cube active there."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        phi, dphi = self.bumps.normalized(cubes, Y)
        I = multi_indices(cubes, self.n)
        a = np.array([self.functional(tuple(self.cover.psi(cubes[j]) for j in row)) for row in I])
        forms = phi_forms(phi, dphi, I, self.n)
        return (-1) ** (self.n - 1) * np.einsum("l,plc->pc", a, forms)

    def evaluate(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        sd = float(self.domain.signed_distance(y))
        if sd >= 0:
            return self.field(y)
        if -sd > self.theta:
            return np.zeros(self.n)
        if -sd >= self.reach:
            raise CollarError(f"point {y.tolist()} lies beyond the curvilinear neighbourhood")
        cubes = self.bumps._active(y)
        return form_to_vec_arrays(self.exterior_forms(y[None], cubes))[0]

    def evaluate_many(self, Y) -> np.ndarray:
        return np.array([self.evaluate(y) for y in np.asarray(Y, dtype=float)])

    def region(self, y) -> str:
        sd = float(self.domain.signed_distance(y))
        if sd >= 0:
            return "interior"
        return "zero" if -sd > self.theta else "exterior"


def prepare(domain: Domain, field: Field, config: ExtendConfig = ExtendConfig()) -> ExtensionHandle:
    return ExtensionHandle(domain, field, config)


def simplex_functional(handle: ExtensionHandle, I) -> float:
    return handle.simplex_functional(tuple(I))


def evaluate(handle: ExtensionHandle, y) -> np.ndarray:
    return handle.evaluate(y)


def mollified_inner(u: Field, eps: float, domain: Domain) -> MollifiedField:
    return MollifiedField(u, eps, domain)


def support_radius(handle: ExtensionHandle) -> float:
    return handle.theta
