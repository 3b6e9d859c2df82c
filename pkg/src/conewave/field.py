"""Uniform space-time grids, sampled fields and the C^2 sup-norm."""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .expr import EvaluationError, Expr, check_vars, evaluate, parse


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class RectGrid:
    """Nodes ``t_i = i*dt`` on ``[0, t_max]`` and ``x_j = j*dx`` on ``[0, L]``."""

    t_max: float
    nt: int
    L: float
    nx: int

    def __post_init__(self):
        if not (self.t_max > 0 and self.L > 0):
            raise GridError(f"grid extents must be positive (t_max={self.t_max}, L={self.L})")
        if self.nt < 3 or self.nx < 3:
            raise GridError(f"grid needs at least 3 nodes per axis (nt={self.nt}, nx={self.nx})")

    @property
    def dt(self) -> float:
        return self.t_max / (self.nt - 1)

    @property
    def dx(self) -> float:
        return self.L / (self.nx - 1)

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.nt) * self.dt

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.dx

    def mesh(self):
        return np.meshgrid(self.t, self.x, indexing="ij")

    def to_dict(self) -> dict:
        return {"t_max": self.t_max, "nt": self.nt, "L": self.L, "nx": self.nx}


@dataclass(frozen=True, eq=False)
class Field:
    grid: RectGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.nt, self.grid.nx):
            raise GridError(f"values shape {values.shape} does not match grid {(self.grid.nt, self.grid.nx)}")
        if not np.all(np.isfinite(values)):
            raise GridError("field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, alpha: float) -> "Field":
        return Field(self.grid, alpha * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def argmax_abs(self) -> tuple[float, float]:
        i, j = np.unravel_index(np.argmax(np.abs(self.values)), self.values.shape)
        return float(self.grid.t[i]), float(self.grid.x[j])

    def to_csv(self, path=None) -> str:
        """Rows ``t,x,value`` ordered by t then x, 17 significant digits."""
        buf = io.StringIO()
        buf.write("t,x,value\n")
        tt, xx = self.grid.mesh()
        for tv, xv, v in zip(tt.ravel(), xx.ravel(), self.values.ravel()):
            buf.write(f"{tv:.17g},{xv:.17g},{v:.17g}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
        return text


def _same_grid(a: Field, b: Field):
    if a.grid != b.grid:
        raise GridError("fields live on different grids")


def zeros(grid: RectGrid) -> Field:
    return Field(grid, np.zeros((grid.nt, grid.nx)))


def sample(e, grid: RectGrid) -> Field:
    """Evaluate a ``{t, x}`` expression at every grid node."""
    if isinstance(e, str):
        e = parse(e)
    if not check_vars(e, {"t", "x"}):
        raise GridError("only t and x may appear in a sampled expression")
    tt, xx = grid.mesh()
    try:
        values = evaluate(e, t=tt, x=xx)
    except EvaluationError as exc:
        raise EvaluationError(f"{exc} ({_locate_failure(e, grid)})") from exc
    return Field(grid, values)


def _locate_failure(e: Expr, grid: RectGrid) -> str:
    for tv in grid.t:
        for xv in grid.x:
            try:
                evaluate(e, t=float(tv), x=float(xv))
            except EvaluationError:
                return f"first failure at t={tv:.17g}, x={xv:.17g}"
    return "location unknown"


# --- finite differences ----------------------------------------------------


def _d1(a: np.ndarray, h: float, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = (a[2:] - a[:-2]) / (2 * h)
    out[0] = (-3 * a[0] + 4 * a[1] - a[2]) / (2 * h)
    out[-1] = (3 * a[-1] - 4 * a[-2] + a[-3]) / (2 * h)
    return np.moveaxis(out, 0, axis)


def _d2(a: np.ndarray, h: float, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = (a[2:] - 2 * a[1:-1] + a[:-2]) / h**2
    if a.shape[0] >= 4:
        out[0] = (2 * a[0] - 5 * a[1] + 4 * a[2] - a[3]) / h**2
        out[-1] = (2 * a[-1] - 5 * a[-2] + 4 * a[-3] - a[-4]) / h**2
    else:
        out[0] = out[1]
        out[-1] = out[1]
    return np.moveaxis(out, 0, axis)


def partial(f: Field, which: str) -> Field:
    """Finite-difference partial derivative: ``which`` in {t, x, tt, xx}."""
    g = f.grid
    if which == "t":
        return Field(g, _d1(f.values, g.dt, 0))
    if which == "x":
        return Field(g, _d1(f.values, g.dx, 1))
    if which == "tt":
        return Field(g, _d2(f.values, g.dt, 0))
    if which == "xx":
        return Field(g, _d2(f.values, g.dx, 1))
    raise ValueError(f"unknown derivative {which!r}")


@dataclass(frozen=True)
class EnormBreakdown:
    sup_u: float
    sup_ut: float
    sup_utt: float
    sup_ux: float
    sup_uxx: float

    @property
    def total(self) -> float:
        return self.sup_u + self.sup_ut + self.sup_utt + self.sup_ux + self.sup_uxx

    def to_dict(self) -> dict:
        return {
            "sup_u": self.sup_u,
            "sup_ut": self.sup_ut,
            "sup_utt": self.sup_utt,
            "sup_ux": self.sup_ux,
            "sup_uxx": self.sup_uxx,
            "total": self.total,
        }


def e_norm(f: Field) -> EnormBreakdown:
    """Sup of u and its four partials over the grid.

    This under-approximates the norm over ``[0, inf) x [0, L]``: only the
    horizon ``[0, t_max]`` and the grid nodes are seen.
    """
    return EnormBreakdown(
        sup_u=f.sup(),
        sup_ut=partial(f, "t").sup(),
        sup_utt=partial(f, "tt").sup(),
        sup_ux=partial(f, "x").sup(),
        sup_uxx=partial(f, "xx").sup(),
    )


def interp(f: Field, t: float, x: float) -> float:
    """Bilinear interpolation, exact at nodes."""
    g = f.grid
    eps = 1e-12
    if not (-eps * g.t_max <= t <= g.t_max * (1 + eps) and -eps * g.L <= x <= g.L * (1 + eps)):
        raise GridError(f"point ({t}, {x}) lies outside the grid")
    st = min(max(t / g.dt, 0.0), g.nt - 1)
    sx = min(max(x / g.dx, 0.0), g.nx - 1)
    i = min(int(st), g.nt - 2)
    j = min(int(sx), g.nx - 2)
    a = st - i
    b = sx - j
    v = f.values
    return float(
        (1 - a) * (1 - b) * v[i, j] + a * (1 - b) * v[i + 1, j] + (1 - a) * b * v[i, j + 1] + a * b * v[i + 1, j + 1]
    )
