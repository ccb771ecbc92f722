"""Vector-field catalog with analytic Jacobians, plus the mollified-field wrapper."""

from __future__ import annotations

from functools import cached_property

import numpy as np
import sympy as sp

from .domain import Domain

__all__ = ["Field", "ExprField", "SampledField", "MollifiedField", "catalog", "CATALOG"]

_SYMS = sp.symbols("x y z")


class Field:
    """A vector field u: R^n -> R^n evaluated on arrays of shape (..., n)."""

    n: int
    solenoidal: bool = False
    rough: bool = False

    def __call__(self, X) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, X) -> np.ndarray:
        """J[..., i, j] = d u_i / d x_j."""
        raise NotImplementedError

    def divergence(self, X) -> np.ndarray:
        return np.trace(self.jacobian(X), axis1=-2, axis2=-1)


class ExprField(Field):
    """Field from sympy-parsable component expressions in x, y[, z]."""

    def __init__(self, exprs, name: str = "expr"):
        self.n = len(exprs)
        self.name = name
        syms = _SYMS[: self.n]
        self.exprs = [sp.sympify(e, locals=dict(zip(map(str, syms), syms))) for e in exprs]
        jac = [[sp.diff(e, s) for s in syms] for e in self.exprs]
        self.solenoidal = sp.simplify(sum(jac[i][i] for i in range(self.n))) == 0
        self._f = [sp.lambdify(syms, e, "numpy") for e in self.exprs]
        self._j = [[sp.lambdify(syms, d, "numpy") for d in row] for row in jac]

    def _args(self, X):
        X = np.asarray(X, dtype=float)
        return X, [X[..., d] for d in range(self.n)]

    def __call__(self, X):
        X, args = self._args(X)
        return np.stack([np.broadcast_to(f(*args), X.shape[:-1]) for f in self._f], -1)

    def jacobian(self, X):
        X, args = self._args(X)
        rows = [np.stack([np.broadcast_to(f(*args), X.shape[:-1]) for f in row], -1) for row in self._j]
        return np.stack(rows, -2)

    def __add__(self, other: "ExprField") -> "ExprField":
        return ExprField([a + b for a, b in zip(self.exprs, other.exprs)], f"{self.name}+{other.name}")

    def __rmul__(self, s: float) -> "ExprField":
        return ExprField([s * a for a in self.exprs], f"{s}*{self.name}")


class SampledField(Field):
    """Piecewise-constant field from samples on a regular grid (a merely L^1 input)."""

    rough = True

    def __init__(self, lo, hi, values):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.n = self.values.shape[-1]
        self.shape = np.array(self.values.shape[:-1])

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        idx = np.floor((X - self.lo) / (self.hi - self.lo) * self.shape).astype(int)
        idx = np.clip(idx, 0, self.shape - 1)
        return self.values[tuple(idx[..., d] for d in range(self.n))]


def _ball_rule(n: int, radial: int, angular: int):
    """Nodes z in the unit ball with weights for the mollifier rho(z) dz."""
    r, wr = np.polynomial.legendre.leggauss(radial)
    r, wr = 0.5 * (r + 1), 0.5 * wr
    if n == 2:
        th = 2 * np.pi * np.arange(angular) / angular
        dirs = np.stack([np.cos(th), np.sin(th)], -1)
        wd = np.full(angular, 2 * np.pi / angular)
    else:
        c, wc = np.polynomial.legendre.leggauss(angular)
        ph = 2 * np.pi * np.arange(2 * angular) / (2 * angular)
        s = np.sqrt(1 - c**2)
        dirs = np.stack([np.outer(s, np.cos(ph)), np.outer(s, np.sin(ph)), np.outer(c, np.ones_like(ph))], -1)
        dirs = dirs.reshape(-1, 3)
        wd = np.outer(wc, np.full(2 * angular, np.pi / angular)).reshape(-1)
    z = (r[:, None, None] * dirs[None]).reshape(-1, n)
    w = (wr[:, None] * r[:, None] ** (n - 1) * wd[None]).reshape(-1)
    return z, w


def _kernel(z):
    s = 1 - np.sum(z * z, -1)
    inside = s > 0
    safe = np.where(inside, s, 1.0)
    k = np.where(inside, np.exp(-1 / safe), 0.0)
    grad = np.where(inside[..., None], k[..., None] * (-2 * z) / safe[..., None] ** 2, 0.0)
    return k, grad


class MollifiedField(Field):
    """u_eps = rho_eps * (zero extension of u), with the analytic kernel derivative."""

    def __init__(self, u: Field, eps: float, domain: Domain, radial: int = 24, angular: int = 48):
        if eps <= 0:
            raise ValueError("mollification width must be positive")
        if eps >= domain.inradius:
            raise ValueError("mollification width exceeds the domain inradius")
        self.u, self.eps, self.domain, self.n = u, float(eps), domain, u.n
        self.solenoidal = u.solenoidal
        z, w = _ball_rule(self.n, radial, angular)
        k, g = _kernel(z)
        norm = np.sum(w * k)
        self._z, self._wk, self._wg = z, w * k / norm, w[:, None] * g / norm

    def _samples(self, X):
        X = np.asarray(X, dtype=float)
        W = X[..., None, :] - self.eps * self._z
        vals = self.u(W)
        return X, np.where(self.domain.contains(W)[..., None], vals, 0.0)

    def __call__(self, X):
        _, v = self._samples(X)
        return np.einsum("q,...qi->...i", self._wk, v)

    def jacobian(self, X):
        _, v = self._samples(X)
        return np.einsum("qj,...qi->...ij", self._wg, v) / self.eps


def _stream2d(psi: str, name: str) -> ExprField:
    x, y = _SYMS[:2]
    f = sp.sympify(psi)
    return ExprField([-sp.diff(f, y), sp.diff(f, x)], name)


def _curl3d(pot, name: str) -> ExprField:
    x, y, z = _SYMS
    a = [sp.sympify(p) for p in pot]
    return ExprField([sp.diff(a[2], y) - sp.diff(a[1], z), sp.diff(a[0], z) - sp.diff(a[2], x),
                      sp.diff(a[1], x) - sp.diff(a[0], y)], name)


def _random_poly(rng, syms, degree: int) -> sp.Expr:
    terms = 0
    for total in range(1, degree + 1):
        for powers in _compositions(total, len(syms)):
            c = sp.Rational(int(round(rng.normal() * 1000)), 1000)
            terms += c * sp.Mul(*[s**p for s, p in zip(syms, powers)])
    return terms


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def catalog(name: str, n: int = 2, seed: int = 0, **params) -> Field:
    """Named analytic fields.  Randomized entries are reproducible from the seed."""
    rng = np.random.default_rng(seed)
    syms = _SYMS[:n]
    if name == "constant":
        c = params.get("value", [1.0, 0.5, -0.25][:n])
        return ExprField([sp.Float(v) for v in c], name)
    if name == "rotation":
        return ExprField(["-y", "x"] if n == 2 else ["-y", "x", "0"], name)
    if name == "linear":
        A = sp.Matrix(n, n, [sp.Rational(int(v), 1000) for v in np.round(rng.normal(size=n * n) * 1000)])
        A[n - 1, n - 1] = -sum(A[i, i] for i in range(n - 1))
        return ExprField([sum(A[i, j] * syms[j] for j in range(n)) for i in range(n)], name)
    if name == "source":
        return ExprField(list(syms), name)
    if name == "stream_poly":
        degree = params.get("degree", 4)
        if n == 2:
            return _stream2d(_random_poly(rng, syms, degree), name)
        return _curl3d([_random_poly(rng, syms, degree) for _ in range(3)], name)
    if name == "stream_bumps":
        k = params.get("count", 3)
        terms = []
        for _ in range(k):
            c = rng.uniform(-0.5, 1.5, n)
            s = rng.uniform(0.3, 0.6)
            a = rng.normal()
            terms.append((a, c, s))
        gauss = lambda a, c, s: float(a) * sp.exp(-sum((v - float(cc)) ** 2 for v, cc in zip(syms, c)) / (2 * s * s))
        if n == 2:
            return _stream2d(sum(gauss(*t) for t in terms), name)
        pots = [sum(gauss(float(rng.normal()), c, s) for _, c, s in terms) for _ in range(3)]
        return _curl3d(pots, name)
    if name == "wave":
        k = params.get("frequency", 3.0)
        if n == 2:
            return _stream2d(f"sin({k}*x + 0.3)*cos({k}*y - 0.2)/{k}", name)
        return _curl3d([f"sin({k}*y)*cos({k}*z)/{k}", f"sin({k}*z)*cos({k}*x)/{k}", f"sin({k}*x)*cos({k}*y)/{k}"], name)
    if name == "cusp_plus":
        alpha = params.get("alpha", 2.5)
        return ExprField([f"y**(-{alpha})", "0"], name)
    if name == "cusp_minus":
        alpha = params.get("alpha", 0.5)
        if n == 2:
            return ExprField([f"sign(x)*y**(-{alpha})", "0"], name)
        return ExprField([f"x/(x**2+y**2)*z**(-{alpha})", f"y/(x**2+y**2)*z**(-{alpha})", "0"], name)
    raise ValueError(f"unknown field {name!r}")


CATALOG = ("constant", "rotation", "linear", "source", "stream_poly", "stream_bumps", "wave", "cusp_plus", "cusp_minus")
