"""Smooth partition of unity subordinate to the blown-up exterior cubes."""

from __future__ import annotations

import numpy as np

from .whitney import CubeId, WhitneyDoubleCover, cube_center, cube_side

__all__ = ["CoverageHole", "bump", "BumpFamily"]

HALF_WIDTH = 7.0 / 12.0


class CoverageHole(RuntimeError):
    pass


def bump(t):
    """b(t) = exp(-1/(1-t^2)) on |t| < 1, else 0, with its derivative."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1
    s = np.where(inside, 1 - t * t, 1.0)
    b = np.where(inside, np.exp(-1.0 / s), 0.0)
    db = np.where(inside, b * (-2 * t / s**2), 0.0)
    return b, db


class BumpFamily:
    """Tensor exp-bumps psi_i normalized over the cubes present at each point."""

    def __init__(self, cover: WhitneyDoubleCover):
        self.cover = cover
        self.n = cover.n

    def raw(self, cubes: list[CubeId], Y) -> tuple[np.ndarray, np.ndarray]:
        """psi (P, m) and grad psi (P, m, n) for points Y (P, n)."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        centers = np.array([cube_center(q) for q in cubes]).reshape(len(cubes), self.n)
        scale = HALF_WIDTH * np.array([cube_side(q) for q in cubes])
        t = (Y[:, None, :] - centers[None]) / scale[None, :, None]
        b, db = bump(t)
        psi = np.prod(b, axis=-1)
        grad = np.empty(t.shape)
        for d in range(self.n):
            others = np.prod(np.delete(b, d, axis=-1), axis=-1)
            grad[..., d] = db[..., d] * others / scale[None, :]
        return psi, grad

    def normalized(self, cubes: list[CubeId], Y) -> tuple[np.ndarray, np.ndarray]:
        """phi (P, m) and grad phi (P, m, n), assuming `cubes` contains every cube active at Y."""
        psi, grad = self.raw(cubes, Y)
        total = psi.sum(axis=1)
        if np.any(total <= 0):
            bad = np.atleast_2d(Y)[np.argmax(total <= 0)]
            raise CoverageHole(f"no bump covers the point {bad.tolist()}")
        gtot = grad.sum(axis=1)
        phi = psi / total[:, None]
        dphi = (grad - phi[..., None] * gtot[:, None, :]) / total[:, None, None]
        return phi, dphi

    def _active(self, y) -> list[CubeId]:
        cubes, status = self.cover.locate(y)
        if not cubes:
            raise CoverageHole(f"point {np.asarray(y).tolist()} is not covered ({status})")
        return cubes

    def eval_raw(self, i: CubeId, y) -> float:
        return float(self.raw([i], y)[0][0, 0])

    def eval(self, i: CubeId, y) -> float:
        cubes = self._active(y)
        if i not in cubes:
            return 0.0
        phi, _ = self.normalized(cubes, y)
        return float(phi[0, cubes.index(i)])

    def grad(self, i: CubeId, y) -> np.ndarray:
        cubes = self._active(y)
        if i not in cubes:
            return np.zeros(self.n)
        _, dphi = self.normalized(cubes, y)
        return dphi[0, cubes.index(i)]
