"""Dense exterior algebra over R^n for n in {2, 3}.

Grade-k vectors and forms store one component per sorted k-multi-index,
in lexicographic order.  Components live in the last axis of a numpy
array, so every operation also works on batches.  Sign tables are built
once from permutation parity and cached.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb, factorial

import numpy as np

__all__ = [
    "KVector",
    "KForm",
    "basis",
    "wedge",
    "wedge_arrays",
    "contract_arrays",
    "interior_arrays",
    "simplex_normal",
    "simplex_normal_arrays",
    "vec_to_form",
    "form_to_vec",
    "vec_to_form_arrays",
    "form_to_vec_arrays",
    "pair",
    "norm",
]


@lru_cache(maxsize=None)
def basis(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    """Sorted k-multi-indices over {0..n-1} in lexicographic order."""
    if not 0 <= k <= n:
        raise ValueError(f"grade {k} out of range for dimension {n}")
    return tuple(combinations(range(n), k))


def _parity(seq: tuple[int, ...]) -> int:
    inversions = sum(1 for i in range(len(seq)) for j in range(i + 1, len(seq)) if seq[i] > seq[j])
    return -1 if inversions % 2 else 1


@lru_cache(maxsize=None)
def wedge_table(n: int, k: int, l: int) -> np.ndarray:
    """T[a, b, c] = sign with e_A ^ e_B = T[a, b, c] e_C (0 if A, B overlap)."""
    if k + l > n:
        raise ValueError(f"grade {k}+{l} exceeds dimension {n}")
    bk, bl, bkl = basis(n, k), basis(n, l), basis(n, k + l)
    pos = {c: i for i, c in enumerate(bkl)}
    table = np.zeros((len(bk), len(bl), len(bkl)))
    for a, A in enumerate(bk):
        for b, B in enumerate(bl):
            if set(A) & set(B):
                continue
            merged = A + B
            table[a, b, pos[tuple(sorted(merged))]] = _parity(merged)
    table.setflags(write=False)
    return table


def _bilinear(x: np.ndarray, y: np.ndarray, table: np.ndarray) -> np.ndarray:
    # out[..., c] = sum_ab x[..., a] y[..., b] table[a, b, c], as one matmul
    x, y = np.broadcast_arrays(x[..., :, None], y[..., None, :])
    A, B, C = table.shape
    return (x * y).reshape(x.shape[:-2] + (A * B,)) @ table.reshape(A * B, C)


@lru_cache(maxsize=None)
def _permuted(n: int, k: int, l: int, axes: tuple) -> np.ndarray:
    return np.ascontiguousarray(np.transpose(wedge_table(n, k, l), axes))


def wedge_arrays(a: np.ndarray, b: np.ndarray, n: int, k: int, l: int) -> np.ndarray:
    """Wedge of component arrays of grades k and l (batched over leading axes)."""
    return _bilinear(a, b, wedge_table(n, k, l))


def contract_arrays(alpha: np.ndarray, v: np.ndarray, n: int, p: int, q: int) -> np.ndarray:
    """Contraction of a p-form with a q-vector: (alpha | V)(W) = alpha(V ^ W)."""
    if q > p:
        raise ValueError("cannot contract a form with a higher-grade vector")
    return _bilinear(alpha, v, _permuted(n, q, p - q, (2, 0, 1)))


def interior_arrays(theta: np.ndarray, v: np.ndarray, n: int, k: int) -> np.ndarray:
    """Interior product of a 1-form into a k-vector, giving a (k-1)-vector."""
    if k < 1:
        raise ValueError("interior product needs grade >= 1")
    return _bilinear(theta, v, _permuted(n, 1, k - 1, (0, 2, 1)))


@lru_cache(maxsize=None)
def _hodge_slots(n: int) -> tuple[np.ndarray, np.ndarray]:
    # e_j <-> (-1)^j dx_{[n] minus j} (0-based j)
    pos = {c: i for i, c in enumerate(basis(n, n - 1))}
    slot = np.array([pos[tuple(i for i in range(n) if i != j)] for j in range(n)])
    sign = np.array([(-1.0) ** j for j in range(n)])
    return slot, sign


def vec_to_form_arrays(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = v.shape[-1]
    slot, sign = _hodge_slots(n)
    out = np.zeros_like(v)
    out[..., slot] = v * sign
    return out


def form_to_vec_arrays(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    n = w.shape[-1]
    slot, sign = _hodge_slots(n)
    return w[..., slot] * sign


def simplex_normal_arrays(points: np.ndarray) -> np.ndarray:
    """nu = (x_r - x_{r-1}) ^ ... ^ (x_2 - x_1) / (r-1)! for points of shape (..., r, n)."""
    points = np.asarray(points, dtype=float)
    r, n = points.shape[-2], points.shape[-1]
    if r < 1 or r > n + 1:
        raise ValueError(f"need 1 <= r <= {n + 1} points, got {r}")
    out = np.ones(points.shape[:-2] + (1,))
    grade = 0
    for j in range(r - 1, 0, -1):
        edge = points[..., j, :] - points[..., j - 1, :]
        out = wedge_arrays(out, edge, n, grade, 1)
        grade += 1
    return out / factorial(r - 1)


@dataclass(frozen=True)
class _Graded:
    n: int
    k: int
    c: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.c, dtype=float)
        if self.n not in (2, 3):
            raise ValueError("dimension must be 2 or 3")
        if c.shape[-1:] != (comb(self.n, self.k),):
            raise ValueError(f"grade {self.k} in R^{self.n} needs {comb(self.n, self.k)} components")
        object.__setattr__(self, "c", c)

    def _check(self, other: "_Graded") -> None:
        if type(self) is not type(other) or self.n != other.n or self.k != other.k:
            raise ValueError("operands must share type, dimension and grade")

    def __add__(self, other):
        self._check(other)
        return type(self)(self.n, self.k, self.c + other.c)

    def __sub__(self, other):
        self._check(other)
        return type(self)(self.n, self.k, self.c - other.c)

    def __mul__(self, s: float):
        return type(self)(self.n, self.k, self.c * s)

    __rmul__ = __mul__

    def __neg__(self):
        return type(self)(self.n, self.k, -self.c)

    @classmethod
    def basis_element(cls, n: int, idx: tuple[int, ...]):
        """Basis element for a sorted 0-based multi-index."""
        k = len(idx)
        c = np.zeros(comb(n, k))
        c[basis(n, k).index(tuple(idx))] = 1.0
        return cls(n, k, c)


class KVector(_Graded):
    """Grade-k element of the exterior algebra of R^n."""


class KForm(_Graded):
    """Grade-k covector, stored in the dual basis dx_I."""


def wedge(a: _Graded, b: _Graded):
    if type(a) is not type(b) or a.n != b.n:
        raise ValueError("wedge needs operands of the same kind and dimension")
    return type(a)(a.n, a.k + b.k, wedge_arrays(a.c, b.c, a.n, a.k, b.k))


def simplex_normal(points) -> KVector:
    pts = np.asarray(points, dtype=float)
    return KVector(pts.shape[-1], pts.shape[-2] - 1, simplex_normal_arrays(pts))


def vec_to_form(v) -> KForm:
    v = np.asarray(v, dtype=float)
    return KForm(v.shape[-1], v.shape[-1] - 1, vec_to_form_arrays(v))


def form_to_vec(w: KForm) -> np.ndarray:
    if w.k != w.n - 1:
        raise ValueError("only (n-1)-forms correspond to vectors")
    return form_to_vec_arrays(w.c)


def pair(w: KForm, m: KVector):
    if not isinstance(w, KForm) or not isinstance(m, KVector):
        raise TypeError("pair takes a KForm and a KVector")
    if w.n != m.n or w.k != m.k:
        raise ValueError("pair needs equal grade and dimension")
    return np.sum(w.c * m.c, axis=-1)


def norm(m: _Graded):
    return np.sqrt(np.sum(m.c**2, axis=-1))
