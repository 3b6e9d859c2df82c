"""The integral operators G, F1, F2, F3, F and the maps T, S on a grid.

All operators share one building block, the separable kernel integral

    K[w](t, x) = int_0^t int_0^x (t - t1)^2 (x - x1)^2 w(t1, x1) dx1 dt1,

so that ``Gu = -K[g * V1u] / 4`` and ``Fu = K[g * F3u] / 4`` with
``V1u(t, x) = int_0^t (t - s) u(s, x) ds``.  ``method="moments"`` uses the
cumulative-moment route, ``method="direct"`` the node-by-node oracle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quad
from .expr import evaluate
from .field import Field, GridError, RectGrid, e_norm, sample
from .hypotheses import ProblemSpec, growth_sum


@dataclass(frozen=True, eq=False)
class OperatorContext:
    problem: ProblemSpec
    grid: RectGrid
    g_field: Field
    c_fields: tuple
    u0_vec: np.ndarray
    u1_vec: np.ndarray
    method: str = "moments"

    @classmethod
    def build(cls, problem: ProblemSpec, grid: RectGrid | None = None, method: str = "moments") -> "OperatorContext":
        grid = grid or problem.grid()
        if abs(grid.L - problem.L) > 1e-14 * problem.L:
            raise GridError("grid length does not match the problem's L")
        g_field = sample(problem.g, grid)
        if np.min(g_field.values) < 0:
            raise ValueError("g must be non-negative on the grid")
        c_fields = tuple(sample(term.c, grid) for term in problem.growth)
        for c in c_fields:
            if np.min(c.values) < 0:
                raise ValueError("growth coefficients c_j must be non-negative on the grid")
        u0 = np.broadcast_to(evaluate(problem.u0, x=grid.x), grid.x.shape).copy()
        u1 = np.broadcast_to(evaluate(problem.u1, x=grid.x), grid.x.shape).copy()
        return cls(problem, grid, g_field, c_fields, u0, u1, method)

    def with_method(self, method: str) -> "OperatorContext":
        return OperatorContext(self.problem, self.grid, self.g_field, self.c_fields, self.u0_vec, self.u1_vec, method)


# --- primitives on arrays (axis 0 = t, axis 1 = x) -------------------------


def _moment(w, k, h, method):
    if method == "moments":
        return quad.volterra_moment(w, k, h)
    if method == "direct":
        return quad.volterra_moment_direct(w, k, h)
    raise ValueError(f"unknown method {method!r}")


def _t_volterra(w, k, ctx):
    return _moment(w, k, ctx.grid.dt, ctx.method)


def _x_volterra(w, k, ctx):
    return _moment(w.T, k, ctx.grid.dx, ctx.method).T


def kernel_2d(w: np.ndarray, ctx: OperatorContext) -> np.ndarray:
    return _t_volterra(_x_volterra(w, 2, ctx), 2, ctx)


def _check(u: Field, ctx: OperatorContext):
    if u.grid != ctx.grid:
        raise GridError("field and operator context use different grids")


def _f_values(u: Field, ctx: OperatorContext) -> np.ndarray:
    tt, xx = ctx.grid.mesh()
    return evaluate(ctx.problem.f, t=tt, x=xx, u=u.values)


def v1(u: Field, ctx: OperatorContext) -> np.ndarray:
    """``int_0^t (t - s) u(s, x) ds`` on the grid."""
    return _t_volterra(u.values, 1, ctx)


def _bracket(u: Field, ctx: OperatorContext) -> np.ndarray:
    """``-u + u0 + t u1 + int_0^t (t - s) f(s, x, u) ds``."""
    t = ctx.grid.t[:, None]
    return -u.values + ctx.u0_vec[None, :] + t * ctx.u1_vec[None, :] + _t_volterra(_f_values(u, ctx), 1, ctx)


# --- operators -------------------------------------------------------------


def apply_G(u: Field, ctx: OperatorContext) -> Field:
    _check(u, ctx)
    return Field(ctx.grid, -0.25 * kernel_2d(ctx.g_field.values * v1(u, ctx), ctx))


def _f1_f2(u: Field, ctx: OperatorContext):
    w = _bracket(u, ctx)
    x = ctx.grid.x[None, :]
    f1 = _x_volterra(x * w, 0, ctx)
    cum = _x_volterra(w, 0, ctx)
    f2 = cum[:, -1:] - cum
    return f1, f2


def apply_F1(u: Field, ctx: OperatorContext) -> Field:
    _check(u, ctx)
    return Field(ctx.grid, _f1_f2(u, ctx)[0])


def apply_F2(u: Field, ctx: OperatorContext) -> Field:
    _check(u, ctx)
    return Field(ctx.grid, _f1_f2(u, ctx)[1])


def apply_F3(u: Field, ctx: OperatorContext) -> Field:
    _check(u, ctx)
    f1, f2 = _f1_f2(u, ctx)
    return Field(ctx.grid, f1 + ctx.grid.x[None, :] * f2)


def apply_F(u: Field, ctx: OperatorContext) -> Field:
    f3 = apply_F3(u, ctx)
    return Field(ctx.grid, 0.25 * kernel_2d(ctx.g_field.values * f3.values, ctx))


def _check_eps(eps: float, validate: bool):
    if validate and not 0 < eps < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {eps}")


def apply_T(u: Field, ctx: OperatorContext, eps: float, validate: bool = True) -> Field:
    _check_eps(eps, validate)
    return (1 - eps) * u + apply_G(u, ctx)


def apply_S(u: Field, ctx: OperatorContext, eps: float, validate: bool = True) -> Field:
    _check_eps(eps, validate)
    return eps * u + apply_F(u, ctx)


def residual_phi(u: Field, ctx: OperatorContext):
    """``Gu + Fu``; zero exactly when u solves the integral equation."""
    phi = apply_G(u, ctx) + apply_F(u, ctx)
    return phi, phi.sup()


def eq3_residual(u: Field, ctx: OperatorContext) -> Field:
    """The g-free identity ``F3u - V1u`` whose weighted kernel integral is Gu + Fu."""
    return Field(ctx.grid, apply_F3(u, ctx).values - v1(u, ctx))


def lower_bound_rhs(u: Field, ctx: OperatorContext) -> Field:
    """``K[g * int_0^x y (u0(y) - u(t, y)) dy] / 4``, the right side Fu dominates on the audit set."""
    _check(u, ctx)
    x = ctx.grid.x[None, :]
    inner = _x_volterra(x * (ctx.u0_vec[None, :] - u.values), 0, ctx)
    return Field(ctx.grid, 0.25 * kernel_2d(ctx.g_field.values * inner, ctx))


# --- random trial fields ---------------------------------------------------


def _basis(s: np.ndarray) -> np.ndarray:
    return np.stack([np.ones_like(s), s, s**2, np.cos(np.pi * s), np.sin(np.pi * s), np.cos(2 * np.pi * s)])


def random_smooth_field(grid: RectGrid, rng: np.random.Generator, norm: float) -> Field:
    """Fourier-polynomial combination rescaled so its E-norm equals ``norm``."""
    bt = _basis(grid.t / grid.t_max)
    bx = _basis(grid.x / grid.L)
    coeff = rng.standard_normal((bt.shape[0], bx.shape[0]))
    values = bt.T @ coeff @ bx
    raw = Field(grid, values)
    total = e_norm(raw).total
    return Field(grid, values * (norm / total))


# --- bound suites ----------------------------------------------------------


@dataclass
class BoundCheckResult:
    name: str
    trial: int
    measured: float
    bound: float
    slack: float
    witness: dict
    passed: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "trial": self.trial,
            "measured": self.measured,
            "bound": self.bound,
            "slack": self.slack,
            "witness": self.witness,
            "pass": self.passed,
        }


BOUND_TOL = 1e-12


def _result(name, trial, measured, bound, witness) -> BoundCheckResult:
    measured = float(measured)
    bound = float(bound)
    ok = measured <= bound + BOUND_TOL * max(abs(bound), abs(measured))
    return BoundCheckResult(name, trial, measured, bound, bound - measured, witness, bool(ok))


def _trial_fields(trials: int, ctx: OperatorContext, r: float, seed: int, fields=None):
    if fields is not None:
        return list(fields)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(trials):
        scale = r * rng.uniform(0.1, 1.0)
        out.append(random_smooth_field(ctx.grid, rng, scale))
    return out


def _norm_witness(f: Field) -> dict:
    t, x = f.argmax_abs()
    return {"t": t, "x": x}


def bound_check_G(trials: int, ctx: OperatorContext, r: float, A: float, seed: int = 0, fields=None) -> list:
    """``||Gu|| <= 4 r A`` for random smooth u with ``||u|| <= r``."""
    out = []
    for i, u in enumerate(_trial_fields(trials, ctx, r, seed, fields)):
        gu = apply_G(u, ctx)
        out.append(_result("G.norm", i, e_norm(gu).total, 4 * r * A, _norm_witness(gu)))
    return out


def cumulative_c(ctx: OperatorContext) -> np.ndarray:
    """Rows ``int_0^L int_0^t c_j`` over the grid times, one row per j."""
    rows = []
    for c in ctx.c_fields:
        xint = quad.cumulative_integral(c.values.T, ctx.grid.dx)[-1]
        rows.append(quad.cumulative_integral(xint, ctx.grid.dt))
    return np.array(rows)


def bound_check_F(trials: int, ctx: OperatorContext, r: float, A: float, p_list=None, seed: int = 0, fields=None) -> list:
    """``||Fu|| <= 4(r + sum r^p) A`` plus the pointwise F1, F2, F3 bounds."""
    p_list = ctx.problem.p_list if p_list is None else p_list
    L = ctx.grid.L
    t = ctx.grid.t
    s = growth_sum(r, p_list)
    weights = np.array([r**p for p in p_list])
    hist = weights @ cumulative_c(ctx)
    b_f1 = 2 * L**2 * r * (1 + t) + L * t * hist
    b_f2 = 2 * r * L * (1 + t) + t * hist
    b_f3 = 4 * L**2 * r * (1 + t) + 2 * L * t * hist
    out = []
    for i, u in enumerate(_trial_fields(trials, ctx, r, seed, fields)):
        fu = apply_F(u, ctx)
        out.append(_result("F.norm", i, e_norm(fu).total, 4 * (r + s) * A, _norm_witness(fu)))
        f1, f2 = _f1_f2(u, ctx)
        for name, vals, bound in (("F1.pointwise", f1, b_f1), ("F2.pointwise", f2, b_f2),
                                  ("F3.pointwise", f1 + ctx.grid.x[None, :] * f2, b_f3)):
            ratio = np.abs(vals) - bound[:, None]
            k = np.unravel_index(np.argmax(ratio), ratio.shape)
            out.append(_result(name, i, abs(vals[k]), bound[k[0]], {"t": float(t[k[0]]), "x": float(ctx.grid.x[k[1]])}))
    return out


def lipschitz_probe(pairs: int, ctx: OperatorContext, eps: float, R: float, A: float, seed: int = 0, fields=None) -> dict:
    """Ratios ``||(I-T)u - (I-T)v|| / ||u - v||`` against ``[eps - 4A, eps + 4A]``."""
    rng = np.random.default_rng(seed)
    if fields is None:
        fields = []
        for _ in range(pairs):
            u = random_smooth_field(ctx.grid, rng, R * rng.uniform(0.1, 1.0))
            v = random_smooth_field(ctx.grid, rng, R * rng.uniform(0.1, 1.0))
            fields.append((u, v))
    ratios = []
    skipped = 0
    for u, v in fields:
        diff = e_norm(u - v).total
        if diff == 0:
            skipped += 1
            continue
        iu = eps * u - apply_G(u, ctx)
        iv = eps * v - apply_G(v, ctx)
        ratios.append(e_norm(iu - iv).total / diff)
    lo, hi = eps - 4 * A, eps + 4 * A
    ratios = np.array(ratios)
    return {
        "min_ratio": float(ratios.min()) if ratios.size else None,
        "max_ratio": float(ratios.max()) if ratios.size else None,
        "band": [lo, hi],
        "pairs": int(ratios.size),
        "skipped": skipped,
        "seed": seed,
        "pass": bool(ratios.size == 0 or (ratios.min() >= lo - 1e-9 and ratios.max() <= hi + 1e-9)),
    }
