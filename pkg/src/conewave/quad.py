"""Composite quadrature and the Volterra-type integrals with polynomial kernels.

Two independent routes evaluate ``V(t_i) = int_0^{t_i} (t_i - s)^k w(s) ds``
on a uniform grid:

* :func:`volterra_moment` expands the kernel binomially into cumulative
  moments ``int_0^{t_i} s^m w(s) ds`` computed once with a 6-point local
  Lagrange rule (exact for quintics on every interval);
* :func:`volterra_moment_direct` integrates the kernel-weighted samples
  separately for each node with an end-corrected (Gregory) trapezoid rule.

The second costs O(n^2) and is kept as the oracle for the first.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np
from scipy import special


class QuadratureError(ArithmeticError):
    pass


@dataclass(frozen=True)
class QuadRule:
    kind: str = "gauss-legendre"
    order: int = 8
    panels: int = 64

    def __post_init__(self):
        if self.kind not in ("gauss-legendre", "simpson"):
            raise ValueError(f"unknown quadrature kind {self.kind!r}")
        if self.order < 2 or self.panels < 1:
            raise ValueError("quadrature needs order >= 2 and panels >= 1")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "order": self.order, "panels": self.panels}


DEFAULT_RULE = QuadRule()


@lru_cache(maxsize=None)
def _gauss_ref(order: int):
    x, w = special.roots_legendre(order)
    return x, w


def nodes_weights(a: float, b: float, rule: QuadRule = DEFAULT_RULE):
    """Composite nodes and weights on ``[a, b]`` (ascending)."""
    if rule.kind == "simpson":
        n = rule.panels + (rule.panels % 2)
        x = np.linspace(a, b, n + 1)
        w = np.ones(n + 1)
        w[1:-1:2] = 4
        w[2:-1:2] = 2
        return x, w * (b - a) / (3 * n)
    xr, wr = _gauss_ref(rule.order)
    edges = np.linspace(a, b, rule.panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * xr[None, :]).ravel()
    w = (half[:, None] * wr[None, :]).ravel()
    return x, w


def integrate_1d(f, a: float, b: float, rule: QuadRule = DEFAULT_RULE) -> float:
    """Composite rule for a vectorised callable ``f`` on ``[a, b]``."""
    if b < a:
        raise ValueError("integrate_1d requires a <= b")
    if a == b:
        return 0.0
    x, w = nodes_weights(a, b, rule)
    y = np.asarray(f(x), dtype=float)
    y = np.broadcast_to(y, x.shape)
    if not np.all(np.isfinite(y)):
        raise QuadratureError("integrand produced a non-finite sample")
    return float(np.dot(w, y))


def integrate_2d(f, t_range, x_range, rule: QuadRule = DEFAULT_RULE, x_rule: QuadRule | None = None) -> float:
    """Tensor-product rule for ``f(t, x)`` over a rectangle."""
    (ta, tb), (xa, xb) = t_range, x_range
    if tb <= ta or xb <= xa:
        return 0.0
    tn, tw = nodes_weights(ta, tb, rule)
    xn, xw = nodes_weights(xa, xb, x_rule or rule)
    y = np.broadcast_to(np.asarray(f(tn[:, None], xn[None, :]), dtype=float), (tn.size, xn.size))
    if not np.all(np.isfinite(y)):
        raise QuadratureError("integrand produced a non-finite sample")
    return float(tw @ y @ xw)


def cumulative_at(f, points, order: int = 8, a: float = 0.0) -> np.ndarray:
    """``int_a^{p} f`` for every p in ``points`` (sorted ascending, >= a).

    Each gap between consecutive points gets its own Gauss rule, so the
    result is accurate wherever ``f`` is smooth between the points.
    """
    p = np.asarray(points, dtype=float)
    if p.size == 0:
        return p.copy()
    if np.any(np.diff(p) < 0) or p[0] < a:
        raise ValueError("points must be sorted and not below the lower limit")
    xr, wr = _gauss_ref(order)
    left = np.concatenate(([a], p[:-1]))
    half = 0.5 * (p - left)
    mid = 0.5 * (p + left)
    nodes = mid[:, None] + half[:, None] * xr[None, :]
    y = np.broadcast_to(np.asarray(f(nodes), dtype=float), nodes.shape)
    if not np.all(np.isfinite(y)):
        raise QuadratureError("integrand produced a non-finite sample")
    pieces = (y * wr[None, :]).sum(axis=1) * half
    return np.cumsum(pieces)


# --- cumulative integration of sampled data --------------------------------

_STENCIL = 6


@lru_cache(maxsize=None)
def _interval_weights(p: int, offset: int) -> np.ndarray:
    """Weights over nodes 0..p-1 for ``int_offset^{offset+1}`` of the interpolant."""
    nodes = np.arange(p, dtype=float)
    vander = np.vander(nodes, p, increasing=True).T
    deg = np.arange(p)
    moments = ((offset + 1.0) ** (deg + 1) - float(offset) ** (deg + 1)) / (deg + 1)
    return np.linalg.solve(vander, moments)


@lru_cache(maxsize=None)
def _cumulative_matrix(n: int) -> np.ndarray:
    """C with ``(C @ y)[i] = int_0^{i} y`` for unit spacing."""
    p = min(_STENCIL, n)
    intervals = np.zeros((n - 1, n))
    for i in range(n - 1):
        start = min(max(i - (p // 2 - 1), 0), n - p)
        intervals[i, start:start + p] = _interval_weights(p, i - start)
    c = np.zeros((n, n))
    c[1:] = np.cumsum(intervals, axis=0)
    c.setflags(write=False)
    return c


def cumulative_integral(values, h: float) -> np.ndarray:
    """Running integral along axis 0 of samples at spacing ``h``; starts at 0."""
    y = np.asarray(values, dtype=float)
    n = y.shape[0]
    if n < 2:
        return np.zeros_like(y)
    c = _cumulative_matrix(n)
    return h * np.tensordot(c, y, axes=(1, 0))


def volterra_moment(w, k: int, h: float) -> np.ndarray:
    """``int_0^{t_i} (t_i - s)^k w(s) ds`` at every node, via cumulative moments.

    ``w`` is sampled at ``t_i = i*h`` along axis 0; extra axes are carried.
    """
    if k not in (0, 1, 2):
        raise ValueError(f"unsupported kernel power k={k}")
    w = np.asarray(w, dtype=float)
    t = np.arange(w.shape[0]) * h
    t = t.reshape((-1,) + (1,) * (w.ndim - 1))
    out = np.zeros_like(w)
    for m in range(k + 1):
        moment = cumulative_integral(w * t**m, h)
        out = out + comb(k, m) * (-1) ** m * t ** (k - m) * moment
    return out


# --- brute-force oracle ----------------------------------------------------

_GREGORY_END = 5


@lru_cache(maxsize=None)
def _direct_weights(upper: int, npts: int) -> np.ndarray:
    """Unit-spacing weights over nodes 0..npts-1 for ``int_0^{upper}``."""
    if upper == 0:
        return np.zeros(npts)
    nodes = np.arange(npts, dtype=float)
    r = _GREGORY_END
    if upper + 1 < 2 * r:
        # short range: integrate the interpolant through the first nodes,
        # reaching past ``upper`` when the grid allows
        p = min(2 * r, npts)
        deg = np.arange(p)
        vander = np.vander(nodes[:p], p, increasing=True).T
        w = np.zeros(npts)
        w[:p] = np.linalg.solve(vander, float(upper) ** (deg + 1) / (deg + 1))
        return w
    # interior weights 1; r free weights at each end fitted for exactness
    # up to degree 2r-1 (Gregory-type end corrections)
    length = float(upper)
    w = np.zeros(npts)
    w[: upper + 1] = 1.0
    deg = np.arange(2 * r)
    interior = nodes[r:upper + 1 - r]
    target = length ** (deg + 1) / (deg + 1) - np.array([np.sum(interior**d) for d in deg])
    ends = np.concatenate((nodes[:r], nodes[upper + 1 - r:upper + 1]))
    scale = length ** deg[:, None]
    a = np.linalg.solve(ends[None, :] ** deg[:, None] / scale, target / scale[:, 0])
    w[:r] = a[:r]
    w[upper + 1 - r:upper + 1] = a[r:]
    return w


@lru_cache(maxsize=None)
def _direct_matrix(n: int, k: int) -> np.ndarray:
    """K[i, j] = weight_ij * (i - j)^k for unit spacing."""
    mat = np.zeros((n, n))
    j = np.arange(n)
    for i in range(1, n):
        mat[i] = _direct_weights(i, n) * (i - j) ** k
    mat.setflags(write=False)
    return mat


def volterra_moment_direct(w, k: int, h: float) -> np.ndarray:
    """Node-by-node evaluation of the same integral as :func:`volterra_moment`."""
    if k not in (0, 1, 2):
        raise ValueError(f"unsupported kernel power k={k}")
    w = np.asarray(w, dtype=float)
    mat = _direct_matrix(w.shape[0], k)
    return h ** (k + 1) * np.tensordot(mat, w, axes=(1, 0))


def integrate_x_kernel(w, x: float, h: float) -> float:
    """``int_0^x (x - y)^2 w(y) dy`` for samples ``w`` at ``y_j = j*h``.

    Whole intervals use the cumulative moments; the partial interval next to
    ``x`` integrates the local interpolant exactly against the kernel.
    """
    w = np.asarray(w, dtype=float)
    n = w.size
    length = (n - 1) * h
    if x < 0 or x > length * (1 + 1e-12):
        raise ValueError(f"x={x} outside [0, {length}]")
    if not np.all(np.isfinite(w)):
        raise QuadratureError("non-finite sample")
    x = min(x, length)
    j = min(int(x / h), n - 1)
    y = np.arange(n) * h
    total = 0.0
    if j > 0:
        for m in range(3):
            moment = cumulative_integral(w[: j + 1] * y[: j + 1] ** m, h)[-1]
            total += comb(2, m) * (-1) ** m * x ** (2 - m) * moment
    frac = x - j * h
    if frac > 0:
        p = min(_STENCIL, n)
        start = min(max(j - (p // 2 - 1), 0), n - p)
        coeffs = np.polynomial.polynomial.polyfit(y[start:start + p] - j * h, w[start:start + p], p - 1)
        xr, wr = _gauss_ref(8)
        s = 0.5 * frac * (xr + 1)
        vals = np.polynomial.polynomial.polyval(s, coeffs) * (frac - s) ** 2
        total += 0.5 * frac * float(np.dot(wr, vals))
    return float(total)
