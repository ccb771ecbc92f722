"""Sobolev-case extension: averaged reflection plus simplex correctors.

Notation for a multi-index I = (i_1, ..., i_(k+1)) of exterior cubes:

    Phi_I = phi_{i_(k+1)} dphi_{i_k} ^ ... ^ dphi_{i_1}          (a k-form)
    A_I   = average over the product measure of int_M Du . nu    (an (n-k)-form)
    B_I   = same average of int_M (Du . nu) | z                  (an (n-k-1)-form)

where Du . nu contracts the derivative slot of Du into the k-vector nu and
the result into the (n-1)-form slot.  Raw sums are

    S_k(y) = sum_I Phi_I ^ A_I,     R_k(y) = sum_I Phi_I ^ (A_I | y - B_I).

Applying d to these sums and simplex Stokes gives
d(avg reflection) = -S_1 and dR_k = (-1)^k (n-k) S_k - g_k S_(k+1), where g_k
is a pure algebra factor (`stokes_factor`).  The published operators are
these sums with per-k scalings chosen so that dE_0 = S_1 and
dR_k = (n-k)(S_k - S_(k+1)); `normalization` derives them.
"""

from __future__ import annotations

import threading
from functools import lru_cache
from math import comb, factorial

import numpy as np
from scipy.differentiate import derivative

from .exterior import (
    contract_arrays,
    form_to_vec_arrays,
    interior_arrays,
    vec_to_form_arrays,
    wedge_arrays,
)
from .extend_l1 import ExtensionHandle, multi_indices, phi_forms
from .partition import CoverageHole
from .whitney import cube_center, cube_side

__all__ = [
    "CorrectorStack",
    "du_dot",
    "stokes_factor",
    "normalization",
    "telescoping_coefficients",
    "printed_coefficients",
    "jones_E0",
    "corrector_R",
    "corrector_S",
    "assemble",
    "CalibrationError",
    "band_points",
    "fd_divergence",
    "identity_suite",
    "calibrate",
]


def du_dot(du_forms: np.ndarray, v: np.ndarray, n: int, k: int) -> np.ndarray:
    """Du . v for du_forms[..., a, :] = d_a u as an (n-1)-form and v a k-vector."""
    out = 0.0
    eye = np.eye(n)
    for a in range(n):
        inner = interior_arrays(eye[a], v, n, k)
        out = out + contract_arrays(du_forms[..., a, :], inner, n, n - 1, k - 1)
    return out


@lru_cache(maxsize=None)
def stokes_factor(n: int, k: int) -> float:
    """g with d_z[(Du . V) | (y - z)] = g (Du . V') for constant Du.

    Evaluated on random data from the contraction rules; the ratio is exact.
    """
    rng = np.random.default_rng(12345)
    du = rng.normal(size=(n, comb(n, n - 1)))
    vs = rng.normal(size=(k + 1, n))
    lhs = 0.0
    for j in range(k + 1):
        rest = [vs[i] for i in range(k + 1) if i != j]
        vk = np.ones(1)
        for g, w in enumerate(rest):
            vk = wedge_arrays(vk, w, n, g, 1)
        # derivative of (Du . V) | (y - z) along v_j is -(Du . V) | v_j
        lhs = lhs - (-1) ** j * contract_arrays(du_dot(du, vk, n, k), vs[j], n, n - k, 1)
    big = np.ones(1)
    for g, w in enumerate(vs):
        big = wedge_arrays(big, w, n, g, 1)
    rhs = du_dot(du, big, n, k + 1)
    ratio = float(np.dot(lhs, rhs) / np.dot(rhs, rhs))
    if not np.allclose(lhs, ratio * rhs, atol=1e-12):
        raise AssertionError("Stokes factor is not a scalar multiple")
    return round(ratio, 12)


@lru_cache(maxsize=None)
def normalization(n: int) -> tuple[dict, dict]:
    """Scalings s_k (for S_k) and t_k (for R_k) making the identities exact."""
    s, t = {1: -1.0}, {}
    for k in range(1, n):
        t[k] = (-1) ** k * s[k]
        s[k + 1] = t[k] * stokes_factor(n, k) / (n - k)
    return s, t


def telescoping_coefficients(n: int) -> dict:
    return {k: -1.0 / (n - k) for k in range(1, n)}


def printed_coefficients(n: int) -> dict:
    return {k: (-1) ** k * factorial(n - k - 1) / factorial(n - 1) for k in range(1, n)}


def _smoothstep(s):
    # 1 for s <= 0, 0 for s >= 1, C-infinity in between
    f = lambda t: np.where(t > 0, np.exp(-1 / np.where(t > 0, t, 1.0)), 0.0)
    a, b = f(1 - s), f(s)
    return a / (a + b)


class CorrectorStack:
    """Jones operator and correctors sharing the covers of an extension handle."""

    def __init__(self, handle: ExtensionHandle, coefficients: str | dict = "telescoping"):
        self.h = handle
        self.n = handle.n
        if coefficients == "telescoping":
            self.c = telescoping_coefficients(self.n)
        elif coefficients == "printed":
            self.c = printed_coefficients(self.n)
        else:
            self.c = dict(coefficients)
        self.s_norm, self.t_norm = normalization(self.n)
        self._avg: dict = {}
        self._coef: dict = {}
        self._lock = threading.Lock()

    # cached integrals ----------------------------------------------------

    def average(self, target) -> np.ndarray:
        hit = self._avg.get(target)
        if hit is None:
            rule = self.h.cube_rule
            pts = rule.map(cube_center(target), cube_side(target), 0.5)
            hit = rule.weights @ self.h.field(pts)
            with self._lock:
                self._avg[target] = hit
        return hit

    def coefficients(self, targets) -> tuple[np.ndarray, np.ndarray]:
        hit = self._coef.get(targets)
        if hit is None:
            n, k = self.n, len(targets) - 1
            Z, w, J = self.h.simplices(targets)
            jac = self.h.field.jacobian(Z)
            du = vec_to_form_arrays(np.swapaxes(jac, -1, -2))
            duv = du_dot(du, J, n, k)
            A = np.einsum("mq,mqc->c", w, duv)
            B = np.einsum("mq,mqc->c", w, contract_arrays(duv, Z, n, n - k, 1)) if k < n else np.zeros(0)
            hit = (A, B)
            with self._lock:
                self._coef[targets] = hit
        return hit

    # pointwise sums --------------------------------------------------------

    def _local(self, Y, cubes):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        phi, dphi = self.h.bumps.normalized(cubes, Y)
        return Y, phi, dphi

    def _sums(self, Y, cubes, k: int, want_r: bool):
        Y, phi, dphi = self._local(Y, cubes)
        n = self.n
        I = multi_indices(cubes, k + 1)
        forms = phi_forms(phi, dphi, I, n)                              # (P, L, C(n,k))
        coef = [self.coefficients(tuple(self.h.cover.psi(cubes[j]) for j in row)) for row in I]
        A = np.array([c[0] for c in coef]).reshape(len(I), comb(n, n - k))
        S = wedge_arrays(forms, A[None], n, k, n - k).sum(axis=1)
        if not want_r:
            return S
        B = np.array([c[1] for c in coef]).reshape(len(I), comb(n, n - k - 1))
        inner = contract_arrays(A[None], Y[:, None, :], n, n - k, 1) - B[None]
        return wedge_arrays(forms, inner, n, k, n - k - 1).sum(axis=1)

    def _region(self, y):
        sd = float(self.h.domain.signed_distance(y))
        return sd, -sd > self.h.theta

    def S(self, k: int, y) -> np.ndarray:
        if not 1 <= k <= self.n:
            raise ValueError(f"S_k needs 1 <= k <= {self.n}")
        sd, far = self._region(y)
        if sd >= 0 or far:
            return np.zeros(1)
        cubes = self.h.bumps._active(y)
        return self.s_norm[k] * self._sums(y, cubes, k, False)[0]

    def R(self, k: int, y) -> np.ndarray:
        if not 1 <= k <= self.n - 1:
            raise ValueError(f"R_k needs 1 <= k <= {self.n - 1}")
        sd, far = self._region(y)
        if sd >= 0 or far:
            return np.zeros(comb(self.n, self.n - 1))
        cubes = self.h.bumps._active(y)
        return self.t_norm[k] * self._sums(y, cubes, k, True)[0]

    def E0(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        sd = float(self.h.domain.signed_distance(y))
        if sd >= 0:
            return self.h.field(y)
        theta = self.h.theta
        rho = float(_smoothstep((-sd - theta) / theta))
        if rho == 0.0:
            return np.zeros(self.n)
        if -sd > theta:
            return rho * self.average(self.h.cover.q0)
        cubes = self.h.bumps._active(y)
        phi, _ = self.h.bumps.normalized(cubes, y[None])
        avgs = np.array([self.average(self.h.cover.psi(q)) for q in cubes])
        return rho * (phi[0] @ avgs)

    def assemble(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        out = self.E0(y)
        if float(self.h.domain.signed_distance(y)) >= 0:
            return out
        for k, ck in self.c.items():
            out = out + ck * form_to_vec_arrays(self.R(k, y))
        return out


def jones_E0(stack: CorrectorStack, y) -> np.ndarray:
    return stack.E0(y)


def corrector_R(stack: CorrectorStack, k: int, y) -> np.ndarray:
    return stack.R(k, y)


def corrector_S(stack: CorrectorStack, k: int, y) -> np.ndarray:
    return stack.S(k, y)


def assemble(stack: CorrectorStack, y) -> np.ndarray:
    return stack.assemble(y)


class CalibrationError(RuntimeError):
    pass


def fd_divergence(F, y, h: float) -> float:
    """Divergence by adaptive high-order differences, starting from step h.

    Each partial derivative halves the step until the built-in error
    estimate stops improving, which tames the steep edges of the bumps.
    """
    y = np.asarray(y, dtype=float)
    total = 0.0
    for d in range(len(y)):
        def g(t, d=d):
            t = np.asarray(t, dtype=float)
            out = np.empty(t.shape)
            for idx in np.ndindex(t.shape):
                z = y.copy()
                z[d] += t[idx]
                out[idx] = np.asarray(F(z))[d]
            return out

        res = derivative(g, 0.0, initial_step=h, step_factor=2.0, order=6, maxiter=8,
                         tolerances=dict(atol=1e-9, rtol=1e-12))
        total += float(res.df)
    return total


def band_points(handle: ExtensionHandle, count: int, seed: int, reach: float = 0.8) -> np.ndarray:
    """Random exterior points inside overlap bands (at least two bumps active).

    Distances stay above the cover resolution and below reach * theta.
    """
    rng = np.random.default_rng(seed)
    dom = handle.domain
    lo, hi = dom.bbox
    floor = 8 * np.sqrt(handle.n) * 2.0 ** -handle.cover.exterior.max_level
    out = []
    while len(out) < count:
        z = rng.uniform(lo - handle.theta, hi + handle.theta)
        xb = dom.boundary_projection(z)
        v = (z - xb) * (1 if dom.signed_distance(z) < 0 else -1)
        if np.linalg.norm(v) < 1e-12:
            continue
        d = np.exp(rng.uniform(np.log(floor), np.log(reach * handle.theta)))
        y = xb + d * v / np.linalg.norm(v)
        if not floor < -float(dom.signed_distance(y)) < reach * handle.theta:
            continue
        cubes, status = handle.cover.locate(y)
        if status == "ok" and len(cubes) >= 2:
            out.append(y)
    return np.array(out)


def identity_suite(stack: CorrectorStack, points, rel_step: float = 1e-3) -> dict:
    """FD checks of the divergence identities at exterior points.

    Returns per-point residuals of dE0 - S_1, dR_k - (n-k)(S_k - S_(k+1)),
    S_n itself and d(assemble) - S_n.  Initial steps are rel_step * dist(y, boundary).
    """
    n = stack.n
    out = {"dE0": [], "S_n": [], "assemble": []}
    out.update({f"dR{k}": [] for k in range(1, n)})
    for y in np.asarray(points, dtype=float):
        h = rel_step * -float(stack.h.domain.signed_distance(y))
        S = [float(stack.S(k, y)[0]) for k in range(1, n + 1)]
        out["dE0"].append(fd_divergence(stack.E0, y, h) - S[0])
        for k in range(1, n):
            dr = fd_divergence(lambda z, k=k: form_to_vec_arrays(stack.R(k, z)), y, h)
            out[f"dR{k}"].append(dr - (n - k) * (S[k - 1] - S[k]))
        out["S_n"].append(S[-1])
        out["assemble"].append(fd_divergence(stack.assemble, y, h) - S[-1])
    return {k: np.array(v) for k, v in out.items()}


def calibrate(stack: CorrectorStack, points, tol: float = 1e-4) -> dict:
    """Check the identities at the given points and report both coefficient sets.

    Raises CalibrationError naming the first identity (k) that fails.
    """
    res = identity_suite(stack, points)
    if np.max(np.abs(res["dE0"])) > tol:
        raise CalibrationError(f"identity dE0 = S_1 fails (max residual {np.max(np.abs(res['dE0'])):.3e})")
    for k in range(1, stack.n):
        worst = float(np.max(np.abs(res[f"dR{k}"])))
        if worst > tol:
            raise CalibrationError(f"identity for R_{k} fails at k={k} (max residual {worst:.3e})")
    report = {"identities": {k: float(np.max(np.abs(v))) for k, v in res.items()}}
    for name in ("telescoping", "printed"):
        alt = CorrectorStack(stack.h, name)
        alt._avg, alt._coef = stack._avg, stack._coef
        r = [abs(fd_divergence(alt.assemble, y, 1e-3 * -float(stack.h.domain.signed_distance(y)))
                 - float(stack.S(stack.n, y)[0])) for y in np.asarray(points, dtype=float)]
        report[name] = {"coefficients": {int(k): v for k, v in alt.c.items()}, "max_residual": float(max(r))}
    return report
