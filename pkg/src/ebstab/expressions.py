"""Convex-by-construction expression trees with exact first-order oracles.

Every node represents a finite-valued convex function on R^m and knows how
to produce, by structural recursion:

- its exact value,
- its exact directional derivative f'(x, h) (one-sided, positively
  homogeneous in h),
- its exact subdifferential as a ``SubdiffSet`` (polytope hull plus ball).

The grammar is deliberately small: affine pieces, coordinate absolute
values, the Euclidean norm, a single exponential atom, a squared positive
part, pointwise maxima, nonnegative sums, and pre-composition with an
affine map.  These atoms are enough to build every worked example the
stability analysis needs while keeping all three oracles exact.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConvexityViolation, DimensionMismatch
from .geometry import (
    SubdiffSet,
    add_sets,
    adjoint_image_set,
    merge_active_subdiffs,
    scale_set,
)

_ACTIVE_TOL = 1e-10


def as_point(x, dim: int) -> np.ndarray:
    """Validate and coerce a point of the expected dimension."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise DimensionMismatch(dim, arr.shape[0] if arr.ndim == 1 else -1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("point must have finite entries")
    return arr


def _basis(i: int, m: int) -> np.ndarray:
    e = np.zeros(m)
    e[i] = 1.0
    return e


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float).copy()
    a.setflags(write=False)
    return a


class ConvexExpr:
    """Base class; subclasses are immutable and safe to share."""

    dim: int
    kind: str

    def _value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def _dd(self, x: np.ndarray, h: np.ndarray) -> float:
        raise NotImplementedError

    def _dd_batch(self, x: np.ndarray, hs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _subdiff(self, x: np.ndarray) -> SubdiffSet:
        raise NotImplementedError

    def __eq__(self, other):
        return isinstance(other, ConvexExpr) and _expr_fields(self) == _expr_fields(other)

    def __hash__(self):
        return hash(repr(_expr_fields(self)))

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


def _expr_fields(e: "ConvexExpr"):
    if isinstance(e, Const):
        return ("const", e.dim, e.value)
    if isinstance(e, Affine):
        return ("affine", e.dim, tuple(e.a.tolist()), e.b)
    if isinstance(e, EuclidNorm):
        return ("norm", e.dim)
    if isinstance(e, AbsCoord):
        return ("abs", e.dim, e.index)
    if isinstance(e, Exp1D):
        return ("exp1d", e.dim, e.index, e.shift)
    if isinstance(e, PosPartSquare):
        return ("pospart2", e.dim, e.index)
    if isinstance(e, Max):
        return ("max", e.dim, tuple(_expr_fields(c) for c in e.children))
    if isinstance(e, Sum):
        return ("sum", e.dim, tuple((w, _expr_fields(c)) for w, c in e.terms))
    if isinstance(e, ComposeAffine):
        return ("compose", e.dim, tuple(map(tuple, e.matrix.tolist())),
                tuple(e.offset.tolist()), _expr_fields(e.inner))
    raise TypeError(f"unknown node {type(e)!r}")


class Const(ConvexExpr):
    """Constant function c on R^m."""

    kind = "const"

    def __init__(self, value: float, dim: int):
        self.value = float(value)
        self.dim = int(dim)

    def _value(self, x):
        return self.value

    def _dd(self, x, h):
        return 0.0

    def _dd_batch(self, x, hs):
        return np.zeros(hs.shape[0])

    def _subdiff(self, x):
        return SubdiffSet(np.zeros((1, self.dim)), 0.0)


class Affine(ConvexExpr):
    """<a, x> + b."""

    kind = "affine"

    def __init__(self, a, b: float):
        self.a = _readonly(np.atleast_1d(a))
        self.b = float(b)
        self.dim = self.a.shape[0]

    def _value(self, x):
        return float(self.a @ x + self.b)

    def _dd(self, x, h):
        return float(self.a @ h)

    def _dd_batch(self, x, hs):
        return hs @ self.a

    def _subdiff(self, x):
        return SubdiffSet(self.a[None, :], 0.0)


class EuclidNorm(ConvexExpr):
    """||x||, kinked at the origin where the subdifferential is the unit ball."""

    kind = "norm"

    def __init__(self, dim: int):
        self.dim = int(dim)

    def _value(self, x):
        return float(np.linalg.norm(x))

    def _dd(self, x, h):
        nx = np.linalg.norm(x)
        if nx == 0.0:
            return float(np.linalg.norm(h))
        return float((x @ h) / nx)

    def _dd_batch(self, x, hs):
        nx = np.linalg.norm(x)
        if nx == 0.0:
            return np.linalg.norm(hs, axis=1)
        return hs @ (x / nx)

    def _subdiff(self, x):
        nx = np.linalg.norm(x)
        if nx == 0.0:
            return SubdiffSet(np.zeros((1, self.dim)), 1.0)
        return SubdiffSet((x / nx)[None, :], 0.0)


class AbsCoord(ConvexExpr):
    """|x_i|."""

    kind = "abs"

    def __init__(self, index: int, dim: int):
        if not 0 <= index < dim:
            raise ValueError(f"coordinate {index} out of range for dim {dim}")
        self.index = int(index)
        self.dim = int(dim)

    def _value(self, x):
        return float(abs(x[self.index]))

    def _dd(self, x, h):
        xi = x[self.index]
        if xi > 0.0:
            return float(h[self.index])
        if xi < 0.0:
            return float(-h[self.index])
        return float(abs(h[self.index]))

    def _dd_batch(self, x, hs):
        xi = x[self.index]
        col = hs[:, self.index]
        if xi > 0.0:
            return col.copy()
        if xi < 0.0:
            return -col
        return np.abs(col)

    def _subdiff(self, x):
        e = _basis(self.index, self.dim)
        xi = x[self.index]
        if xi > 0.0:
            return SubdiffSet(e[None, :], 0.0)
        if xi < 0.0:
            return SubdiffSet(-e[None, :], 0.0)
        return SubdiffSet(np.vstack([-e, e]), 0.0)


class Exp1D(ConvexExpr):
    """exp(x_i) + shift; the only transcendental atom."""

    kind = "exp1d"

    def __init__(self, index: int, shift: float, dim: int = 1):
        if not 0 <= index < dim:
            raise ValueError(f"coordinate {index} out of range for dim {dim}")
        self.index = int(index)
        self.shift = float(shift)
        self.dim = int(dim)

    def _value(self, x):
        return math.exp(x[self.index]) + self.shift

    def _dd(self, x, h):
        return math.exp(x[self.index]) * float(h[self.index])

    def _dd_batch(self, x, hs):
        return math.exp(x[self.index]) * hs[:, self.index]

    def _subdiff(self, x):
        g = math.exp(x[self.index]) * _basis(self.index, self.dim)
        return SubdiffSet(g[None, :], 0.0)


class PosPartSquare(ConvexExpr):
    """(max(x_i, 0))^2: smooth, with vanishing gradient on the kink set."""

    kind = "pospart2"

    def __init__(self, index: int, dim: int = 1):
        if not 0 <= index < dim:
            raise ValueError(f"coordinate {index} out of range for dim {dim}")
        self.index = int(index)
        self.dim = int(dim)

    def _value(self, x):
        return float(max(x[self.index], 0.0) ** 2)

    def _dd(self, x, h):
        return 2.0 * max(float(x[self.index]), 0.0) * float(h[self.index])

    def _dd_batch(self, x, hs):
        return 2.0 * max(float(x[self.index]), 0.0) * hs[:, self.index]

    def _subdiff(self, x):
        g = 2.0 * max(float(x[self.index]), 0.0) * _basis(self.index, self.dim)
        return SubdiffSet(g[None, :], 0.0)


class Max(ConvexExpr):
    """Pointwise maximum of convex children.

    The directional derivative and subdifferential are driven by the active
    set at the evaluation point, with tolerance eps = 1e-10 * (1 + |f(x)|)
    so that exact ties are not float-fragile.
    """

    kind = "max"

    def __init__(self, children):
        children = tuple(children)
        if not children:
            raise ValueError("max node needs at least one child")
        dims = {c.dim for c in children}
        if len(dims) != 1:
            raise DimensionMismatch(children[0].dim, children[-1].dim, "max child")
        self.children = children
        self.dim = children[0].dim

    def _active(self, x):
        vals = [c._value(x) for c in self.children]
        top = max(vals)
        eps = _ACTIVE_TOL * (1.0 + abs(top))
        return [c for c, v in zip(self.children, vals) if v >= top - eps], top

    def _value(self, x):
        return max(c._value(x) for c in self.children)

    def _dd(self, x, h):
        active, _ = self._active(x)
        return max(c._dd(x, h) for c in active)

    def _dd_batch(self, x, hs):
        active, _ = self._active(x)
        return np.max(np.stack([c._dd_batch(x, hs) for c in active]), axis=0)

    def _subdiff(self, x):
        active, _ = self._active(x)
        return merge_active_subdiffs([c._subdiff(x) for c in active])


class Sum(ConvexExpr):
    """Nonnegative combination sum_j w_j * f_j (weights >= 0 keep convexity)."""

    kind = "sum"

    def __init__(self, terms):
        terms = tuple((float(w), e) for w, e in terms)
        for w, _ in terms:
            if w < 0.0:
                raise ConvexityViolation(f"sum weight {w} is negative")
        dims = {e.dim for _, e in terms}
        if len(dims) > 1:
            raise DimensionMismatch(terms[0][1].dim, terms[-1][1].dim, "sum term")
        if not terms:
            raise ValueError("sum node needs at least one term")
        self.terms = terms
        self.dim = terms[0][1].dim

    def _value(self, x):
        return float(sum(w * e._value(x) for w, e in self.terms))

    def _dd(self, x, h):
        return float(sum(w * e._dd(x, h) for w, e in self.terms))

    def _dd_batch(self, x, hs):
        out = np.zeros(hs.shape[0])
        for w, e in self.terms:
            out += w * e._dd_batch(x, hs)
        return out

    def _subdiff(self, x):
        acc = SubdiffSet(np.zeros((1, self.dim)), 0.0)
        for w, e in self.terms:
            acc = add_sets(acc, scale_set(e._subdiff(x), w))
        return acc


class ComposeAffine(ConvexExpr):
    """inner(A x + c) for inner convex on R^p, A of shape (p, m)."""

    kind = "compose"

    def __init__(self, inner: ConvexExpr, matrix, offset):
        self.matrix = _readonly(np.atleast_2d(matrix))
        self.offset = _readonly(np.atleast_1d(offset))
        p, m = self.matrix.shape
        if inner.dim != p:
            raise DimensionMismatch(p, inner.dim, "compose inner")
        if self.offset.shape[0] != p:
            raise DimensionMismatch(p, self.offset.shape[0], "compose offset")
        self.inner = inner
        self.dim = m

    def _push(self, x):
        return self.matrix @ x + self.offset

    def _value(self, x):
        return self.inner._value(self._push(x))

    def _dd(self, x, h):
        return self.inner._dd(self._push(x), self.matrix @ h)

    def _dd_batch(self, x, hs):
        return self.inner._dd_batch(self._push(x), hs @ self.matrix.T)

    def _subdiff(self, x):
        return adjoint_image_set(self.inner._subdiff(self._push(x)), self.matrix)


# ---------------------------------------------------------------------------
# Public operations.

def evaluate(f: ConvexExpr, x) -> float:
    """Exact function value."""
    return float(f._value(as_point(x, f.dim)))


def directional_derivative(f: ConvexExpr, x, h) -> float:
    """Exact one-sided directional derivative f'(x, h).

    h need not be a unit vector; the result is positively homogeneous in h.
    """
    x = as_point(x, f.dim)
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.shape[0] != f.dim:
        raise DimensionMismatch(f.dim, h.shape[0], "direction")
    return float(f._dd(x, h))


def directional_derivatives(f: ConvexExpr, x, hs) -> np.ndarray:
    """directional_derivative for every row of hs, vectorized."""
    x = as_point(x, f.dim)
    hs = np.atleast_2d(np.asarray(hs, dtype=float))
    if hs.shape[1] != f.dim:
        raise DimensionMismatch(f.dim, hs.shape[1], "direction")
    return f._dd_batch(x, hs)


def dd_quotient_scan(f: ConvexExpr, x, h, t_grid) -> list[float]:
    """Difference quotients (f(x + t h) - f(x)) / t along a decreasing grid.

    The quotients are nonincreasing in t and bounded below by f'(x, h);
    this is the numerical cross-check for the exact oracle.
    """
    x = as_point(x, f.dim)
    h = np.atleast_1d(np.asarray(h, dtype=float))
    ts = [float(t) for t in t_grid]
    if any(t <= 0 for t in ts):
        raise ValueError("t_grid must be positive")
    if any(t2 >= t1 for t1, t2 in zip(ts, ts[1:])):
        raise ValueError("t_grid must be strictly decreasing")
    f0 = f._value(x)
    return [(f._value(x + t * h) - f0) / t for t in ts]


def subdifferential(f: ConvexExpr, x) -> SubdiffSet:
    """Exact subdifferential at x as a polytope-plus-ball set."""
    return f._subdiff(as_point(x, f.dim))
