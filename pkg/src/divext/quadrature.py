"""Tensor Gauss rules on cubes, collapsed Gauss rules on simplices, and a seeded
Monte Carlo fallback for large product measures."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from math import factorial
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

__all__ = [
    "CubeRule",
    "SimplexRule",
    "cube_rule",
    "simplex_rule",
    "integrate_cube",
    "integrate_product",
    "integrate_simplex",
    "product_nodes",
    "monomial_integral",
    "BudgetExceeded",
]


class BudgetExceeded(RuntimeError):
    pass


@lru_cache(maxsize=None)
def _gauss01(q: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def _jacobi01(m: int, a: int) -> tuple[np.ndarray, np.ndarray]:
    # nodes/weights for int_0^1 (1-u)^a g(u) du
    x, w = roots_jacobi(m, a, 0)
    return 0.5 * (x + 1.0), w / 2.0 ** (a + 1)


@dataclass(frozen=True)
class CubeRule:
    """Gauss-Legendre tensor rule of order q per axis, as a probability measure.

    Nodes are stored on the reference cube [-1/2, 1/2]^n.
    """

    n: int
    q: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def map(self, center, side: float, shrink: float = 0.5) -> np.ndarray:
        """Nodes of the rule on the cube of given center and side scaled by shrink."""
        return np.asarray(center, dtype=float) + (shrink * side) * self.nodes


@lru_cache(maxsize=None)
def cube_rule(n: int, q: int) -> CubeRule:
    if q < 1:
        raise ValueError("cube rule order must be >= 1")
    x, w = _gauss01(q)
    nodes = np.array(list(product(x - 0.5, repeat=n)))
    weights = np.prod(np.array(list(product(w, repeat=n))), axis=1)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return CubeRule(n, q, nodes, weights)


def monomial_integral(alpha) -> float:
    """Closed form of int over the unit k-simplex of prod t_i^alpha_i."""
    alpha = tuple(int(a) for a in alpha)
    num = 1.0
    for a in alpha:
        num *= factorial(a)
    return num / factorial(sum(alpha) + len(alpha))


@dataclass(frozen=True)
class SimplexRule:
    """Rule on the unit simplex D^k = {t >= 0, sum t <= 1}; weights sum to 1/k!."""

    k: int
    degree: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)


def _collapsed(k: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    # Duffy/Stroud conical product: t1 = u1, t2 = (1-u1) u2, t3 = (1-u1)(1-u2) u3
    axes = [_jacobi01(m, k - 1 - j) for j in range(k)]
    nodes, weights = [], []
    for combo in product(range(m), repeat=k):
        u = [axes[j][0][combo[j]] for j in range(k)]
        w = np.prod([axes[j][1][combo[j]] for j in range(k)])
        t, rest = [], 1.0
        for uj in u:
            t.append(rest * uj)
            rest *= 1.0 - uj
        nodes.append(t)
        weights.append(w)
    return np.array(nodes), np.array(weights)


@lru_cache(maxsize=None)
def simplex_rule(k: int, degree: int) -> SimplexRule:
    """Rule on D^k exact for polynomials of total degree <= degree.

    Exactness is checked against closed-form monomial integrals at build time.
    """
    if k == 0:
        nodes, weights = np.zeros((1, 0)), np.ones(1)
    else:
        m = max(1, (degree + 2) // 2)
        nodes, weights = _collapsed(k, m)
    for alpha in product(range(degree + 1), repeat=k):
        if sum(alpha) > degree:
            continue
        approx = weights @ np.prod(nodes ** np.array(alpha), axis=1) if k else weights.sum()
        if abs(approx - monomial_integral(alpha)) > 1e-13:
            raise AssertionError(f"simplex rule fails exactness for monomial {alpha}")
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return SimplexRule(k, degree, nodes, weights)


def integrate_cube(rule: CubeRule, f: Callable, center, side: float, shrink: float = 0.5):
    """Average of f over the cube shrunk by `shrink` (the normalized Lebesgue measure)."""
    vals = np.asarray(f(rule.map(center, side, shrink)))
    return np.tensordot(rule.weights, vals, axes=(0, 0))


def product_nodes(
    rule: CubeRule,
    cubes,
    shrink: float = 0.5,
    budget: int = 1 << 20,
    mc_samples: int | None = None,
    seed: int | None = None,
):
    """Nodes (M, r, n) and weights (M,) of the product measure over r cubes.

    cubes is a sequence of (center, side).  When the tensor size exceeds the
    budget, a seeded Monte Carlo sample of the product is used instead.
    """
    r = len(cubes)
    m = len(rule.weights)
    if m**r <= budget:
        pts = [rule.map(c, s, shrink) for c, s in cubes]
        idx = np.indices((m,) * r).reshape(r, -1)
        nodes = np.stack([pts[j][idx[j]] for j in range(r)], axis=1)
        weights = np.prod(np.stack([rule.weights[idx[j]] for j in range(r)]), axis=0)
        return nodes, weights
    if mc_samples is None or seed is None:
        raise BudgetExceeded(f"tensor product of {m}^{r} nodes exceeds budget {budget}")
    rng = np.random.default_rng(seed)
    n = rule.n
    nodes = np.stack(
        [np.asarray(c) + shrink * s * (rng.random((mc_samples, n)) - 0.5) for c, s in cubes], axis=1
    )
    return nodes, np.full(mc_samples, 1.0 / mc_samples)


def integrate_product(rule: CubeRule, F: Callable, cubes, shrink: float = 0.5, **kw):
    """Integral of F(x_1, ..., x_r) over the product of normalized cube measures.

    F receives an array of shape (M, r, n).
    """
    nodes, weights = product_nodes(rule, cubes, shrink, **kw)
    return np.tensordot(weights, np.asarray(F(nodes)), axes=(0, 0))


def integrate_simplex(rule: SimplexRule, f: Callable, smap) -> tuple[float, bool]:
    """Integral of f over the image of a simplex map with its k-dimensional area element.

    Returns (value, degenerate).  Degenerate simplices integrate to 0.
    """
    if smap.degenerate():
        return 0.0, True
    t = rule.nodes
    pts = smap.eval(t)
    frame = smap.tangent_frame(t)
    gram = np.einsum("mik,mjk->mij", frame, frame)
    area = np.sqrt(np.maximum(np.linalg.det(gram), 0.0)) if rule.k else np.ones(len(t))
    vals = np.asarray(f(pts))
    return np.tensordot(rule.weights * area, vals, axes=(0, 0)), False
