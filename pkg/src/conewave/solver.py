"""Finite-difference solution of the mixed IBVP and the audits around it.

The problem is ``u_tt - u_xx = f(t, x, u)`` on ``[0, L]`` with ``u(t, 0) = 0``,
``u_x(t, L) = 0`` and data ``u(0) = u0``, ``u_t(0) = u1``.  The integral
formulation is used only as a check on the computed solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import quad
from .expr import Expr, evaluate
from .field import EnormBreakdown, Field, GridError, RectGrid, e_norm, partial
from .hypotheses import ProblemSpec
from .operators import OperatorContext, eq3_residual, residual_phi

NONNEG_TOL = 1e-10
DIVERGENCE_FACTOR = 1e3


class SolverError(ArithmeticError):
    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


@dataclass
class SolveReport:
    u: Field
    pde_residual_sup: float
    eq2_residual_sup: float
    eq3_residual_sup: float
    min_u: float
    min_location: tuple
    e_norm: EnormBreakdown
    cfl: float
    substeps: int
    membership: dict

    def to_dict(self) -> dict:
        return {
            "grid": self.u.grid.to_dict(),
            "pde_residual_sup": self.pde_residual_sup,
            "eq2_residual_sup": self.eq2_residual_sup,
            "eq3_residual_sup": self.eq3_residual_sup,
            "min_u": self.min_u,
            "min_location": {"t": self.min_location[0], "x": self.min_location[1]},
            "e_norm": self.e_norm.to_dict(),
            "cfl": self.cfl,
            "substeps": self.substeps,
            "membership": self.membership,
        }


def _data(e: Expr, x: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(evaluate(e, x=x), dtype=float), x.shape).copy()


def _source(spec: ProblemSpec, t: float, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(evaluate(spec.f, t=t, x=x, u=u), dtype=float), x.shape)


def _march(spec: ProblemSpec, grid: RectGrid, cfl: float):
    """Leapfrog on the x-grid with ``s`` substeps per output row; returns (values, cfl, s)."""
    dx = grid.dx
    s = max(1, math.ceil(grid.dt / (cfl * dx) * (1 - 1e-12)))
    dt = grid.dt / s
    c2 = (dt / dx) ** 2
    x = grid.x
    u0 = _data(spec.u0, x)
    u1 = _data(spec.u1, x)

    def lap(u):
        out = np.empty_like(u)
        out[1:-1] = u[2:] - 2 * u[1:-1] + u[:-2]
        out[-1] = 2 * (u[-2] - u[-1])  # ghost node u_{N+1} = u_{N-1}
        out[0] = 0.0
        return out

    out = np.empty((grid.nt, grid.nx))
    out[0] = u0
    prev = u0
    cur = u0 + dt * u1 + 0.5 * (c2 * lap(u0) + dt**2 * _source(spec, 0.0, x, u0))
    cur[0] = 0.0
    step = 1
    for n in range(1, grid.nt):
        while step < n * s:
            t = step * dt
            nxt = 2 * cur - prev + c2 * lap(cur) + dt**2 * _source(spec, t, x, cur)
            nxt[0] = 0.0
            if not np.all(np.isfinite(nxt)):
                raise SolverError(f"non-finite state at step {step + 1} (t={t + dt:.6g})", step + 1)
            prev, cur = cur, nxt
            step += 1
        if not np.all(np.isfinite(cur)):
            raise SolverError(f"non-finite state at step {step}", step)
        out[n] = cur
    return out, dt / dx, s


def pde_residual_field(u: Field, spec: ProblemSpec) -> Field:
    tt, xx = u.grid.mesh()
    f = evaluate(spec.f, t=tt, x=xx, u=u.values)
    res = partial(u, "tt").values - partial(u, "xx").values - f
    out = np.zeros_like(res)
    out[1:-1, 1:-1] = res[1:-1, 1:-1]
    return Field(u.grid, out)


def pde_residual(u: Field, spec: ProblemSpec) -> float:
    """Sup over interior nodes of ``|u_tt - u_xx - f|``."""
    return pde_residual_field(u, spec).sup()


def membership_margins(u: Field, spec: ProblemSpec) -> dict:
    """Pointwise margins of the set U; positive ``max`` values mean violation."""
    grid = u.grid
    u0 = _data(spec.u0, grid.x)
    m = spec.constants.m
    r = spec.constants.r
    diff = u.values - u0[None, :]
    k = np.unravel_index(np.argmax(diff), diff.shape)
    band = (grid.t >= 1.0) & (grid.t <= 2.0)
    out = {
        "max_u_minus_u0": float(diff[k]),
        "max_u_minus_u0_at": {"t": float(grid.t[k[0]]), "x": float(grid.x[k[1]])},
        "max_u_minus_m_u0_on_t_1_2": None,
        "e_norm_total": e_norm(u).total,
        "r": r,
    }
    if band.any():
        d2 = u.values[band] - m * u0[None, :]
        k2 = np.unravel_index(np.argmax(d2), d2.shape)
        out["max_u_minus_m_u0_on_t_1_2"] = float(d2[k2])
        out["max_u_minus_m_u0_on_t_1_2_at"] = {"t": float(grid.t[band][k2[0]]), "x": float(grid.x[k2[1]])}
    out["e_norm_margin"] = r - out["e_norm_total"]
    return out


def solve_fd(spec: ProblemSpec, grid: RectGrid | None = None, cfl: float = 0.9, residuals: bool = True) -> SolveReport:
    """Leapfrog solution sampled on ``grid``.

    The output rows are ``grid.t``; when ``grid.dt / dx`` exceeds ``cfl`` each
    row interval is split into equal substeps so the marching ratio stays
    at or below ``cfl``.  The reported ``cfl`` is the ratio actually used.
    """
    if not 0 < cfl <= 1:
        raise ValueError(f"cfl must lie in (0, 1], got {cfl}")
    grid = grid or spec.grid()
    if abs(grid.L - spec.L) > 1e-14 * spec.L:
        raise GridError("grid length does not match the problem's L")
    values, used, s = _march(spec, grid, cfl)
    u = Field(grid, values)
    eq2 = eq3 = float("nan")
    if residuals:
        ctx = OperatorContext.build(spec, grid)
        eq2 = residual_phi(u, ctx)[1]
        eq3 = eq3_residual(u, ctx).sup()
    k = np.unravel_index(np.argmin(values), values.shape)
    return SolveReport(
        u=u,
        pde_residual_sup=pde_residual(u, spec),
        eq2_residual_sup=eq2,
        eq3_residual_sup=eq3,
        min_u=float(values[k]),
        min_location=(float(grid.t[k[0]]), float(grid.x[k[1]])),
        e_norm=e_norm(u),
        cfl=used,
        substeps=s,
        membership=membership_margins(u, spec),
    )


# --- method of images ------------------------------------------------------

_UNIT_NODES = None


def _unit_rule():
    global _UNIT_NODES
    if _UNIT_NODES is None:
        x, w = quad.nodes_weights(0.0, 1.0, quad.QuadRule(order=16, panels=4))
        _UNIT_NODES = (x, w)
    return _UNIT_NODES


def _reflect(z, L):
    """Map z to ``[0, L]`` with the sign of the odd-at-0, even-at-L extension."""
    z = np.mod(np.asarray(z, dtype=float), 4 * L)
    sign = np.where(z > 2 * L, -1.0, 1.0)
    w = np.where(z > 2 * L, 4 * L - z, z)
    w = np.where(w > L, 2 * L - w, w)
    return sign, w


def _fold_even(z, L):
    """Map z to ``[0, 2L]`` for even, 4L-periodic functions."""
    w = np.mod(np.abs(np.asarray(z, dtype=float)), 4 * L)
    return np.where(w > 2 * L, 4 * L - w, w)


def _as_callable(e):
    if e is None:
        return lambda x: np.zeros_like(x)
    if callable(e):
        return e
    return lambda x: np.broadcast_to(np.asarray(evaluate(e, x=x), dtype=float), np.shape(x))


def _duhamel_tables(f_frozen: Field):
    """Antiderivatives in x of each row extended evenly about L to ``[0, 2L]``."""
    ext = np.concatenate((f_frozen.values, f_frozen.values[:, -2::-1]), axis=1)
    return quad.cumulative_integral(ext.T, f_frozen.grid.dx).T


def _table_lookup(tables, grid: RectGrid, tau, z):
    """Bilinear lookup of the even, periodic antiderivative at (tau, z)."""
    w = _fold_even(z, grid.L)
    st = np.clip(tau / grid.dt, 0.0, grid.nt - 1)
    i = np.minimum(st.astype(int), grid.nt - 2)
    a = st - i
    sx = np.clip(w / grid.dx, 0.0, tables.shape[1] - 1)
    k = np.minimum(sx.astype(int), tables.shape[1] - 2)
    b = sx - k
    return ((1 - a) * (1 - b) * tables[i, k] + a * (1 - b) * tables[i + 1, k]
            + (1 - a) * b * tables[i, k + 1] + a * b * tables[i + 1, k + 1])


def images_oracle(u0, u1, f_frozen: Field | None, t, x, L: float = 1.0, tau_rule: quad.QuadRule | None = None):
    """d'Alembert solution via the odd/even periodic extension plus Duhamel.

    ``u0`` and ``u1`` are expressions in x or vectorised callables on
    ``[0, L]``; ``f_frozen`` is a source sampled on a space-time grid (its L
    takes precedence).  ``t`` and ``x`` broadcast; a float comes back for
    scalar input.
    """
    if f_frozen is not None:
        L = f_frozen.grid.L
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    scalar = t.ndim == 0
    t = np.atleast_1d(t).astype(float)
    x = np.atleast_1d(x).astype(float)
    if np.any(t < 0):
        raise ValueError("images_oracle needs t >= 0")
    if f_frozen is not None and np.any(t > f_frozen.grid.t_max * (1 + 1e-12)):
        raise GridError("t beyond the frozen source's horizon")
    g0 = _as_callable(u0)
    g1 = _as_callable(u1)

    def ext0(z):
        sign, w = _reflect(z, L)
        return sign * g0(w)

    s_nodes, s_weights = _unit_rule()
    psi_L = L * float(np.dot(s_weights, g1(L * s_nodes)))

    def psi(w):
        return w * (g1(w[..., None] * s_nodes) @ s_weights)

    def phi1(z):
        w = _fold_even(z, L)
        low = w <= L
        out = np.empty_like(w)
        out[low] = psi(w[low])
        out[~low] = 2 * psi_L - psi(2 * L - w[~low])
        return out

    with np.errstate(invalid="ignore"):
        u = 0.5 * (ext0(x + t) + ext0(x - t)) + 0.5 * (phi1(x + t) - phi1(x - t))

    if f_frozen is not None:
        rule = tau_rule or quad.QuadRule(order=8, panels=32)
        tables = _duhamel_tables(f_frozen)
        xr, wr = quad.nodes_weights(0.0, 1.0, rule)
        tau = t[..., None] * xr
        wts = t[..., None] * wr
        span = t[..., None] - tau
        plus = _table_lookup(tables, f_frozen.grid, tau, x[..., None] + span)
        minus = _table_lookup(tables, f_frozen.grid, tau, x[..., None] - span)
        u = u + 0.5 * np.sum(wts * (plus - minus), axis=-1)
    return float(u.reshape(-1)[0]) if scalar else u


def oracle_field(spec: ProblemSpec, grid: RectGrid, u_fd: Field | None = None, stride: int = 1,
                 tau_rule: quad.QuadRule | None = None):
    """Images-oracle values on every ``stride``-th node, with the source frozen at ``u_fd``."""
    frozen = None
    if u_fd is not None:
        tt, xx = grid.mesh()
        frozen = Field(grid, np.broadcast_to(evaluate(spec.f, t=tt, x=xx, u=u_fd.values), tt.shape))
    ts = grid.t[::stride]
    xs = grid.x[::stride]
    tt, xx = np.meshgrid(ts, xs, indexing="ij")
    vals = np.empty(tt.shape)
    for i in range(ts.size):
        vals[i] = images_oracle(spec.u0, spec.u1, frozen, tt[i], xx[i], L=grid.L, tau_rule=tau_rule)
    return ts, xs, vals


# --- audits ----------------------------------------------------------------


def lemma1_audit(u: Field, ctx: OperatorContext) -> dict:
    """Integral-equation and differential residuals of a candidate solution."""
    spec = ctx.problem
    ut = partial(u, "t").values
    ux = partial(u, "x").values
    return {
        "eq2_residual": residual_phi(u, ctx)[1],
        "eq3_residual": eq3_residual(u, ctx).sup(),
        "pde_residual": pde_residual(u, spec),
        "ic_errors": {
            "u0": float(np.max(np.abs(u.values[0] - ctx.u0_vec))),
            "u1": float(np.max(np.abs(ut[0] - ctx.u1_vec))),
        },
        "bc_errors": {
            "dirichlet_x0": float(np.max(np.abs(u.values[:, 0]))),
            "neumann_xL": float(np.max(np.abs(ux[:, -1]))),
        },
    }


@dataclass
class IterationHistory:
    entries: list = dc_field(default_factory=list)
    reason: str = "max_iter"
    final: Field | None = None

    def to_dict(self) -> dict:
        return {
            "entries": [{"iteration": k, "residual": r, "e_norm": n} for k, r, n in self.entries],
            "reason": self.reason,
        }


def fixed_point_iterate(u_init: Field, ctx: OperatorContext, eps: float, omega: float = 1.0,
                        tol: float = 1e-10, max_iter: int = 50) -> IterationHistory:
    """Damped iteration ``u <- u + omega (Gu + Fu)`` toward a fixed point of T + S."""
    if not 0 < eps < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {eps}")
    if not 0 < omega <= 1:
        raise ValueError(f"damping must lie in (0, 1], got {omega}")
    if not np.all(np.isfinite(u_init.values)):
        raise SolverError("non-finite initial iterate")
    hist = IterationHistory()
    u = u_init
    first = None
    for k in range(max_iter + 1):
        phi, res = residual_phi(u, ctx)
        hist.entries.append((k, res, e_norm(u).total))
        if first is None:
            first = res
        if res <= tol:
            hist.reason = "tolerance"
            break
        if res > DIVERGENCE_FACTOR * first:
            hist.reason = "divergence"
            break
        if k == max_iter:
            hist.reason = "max_iter"
            break
        u = u + omega * phi
        if not np.all(np.isfinite(u.values)):
            raise SolverError(f"non-finite iterate at iteration {k + 1}", k + 1)
    hist.final = u
    return hist


def audit_theorem(report: SolveReport, spec: ProblemSpec, oracle: bool = True, stride: int = 1) -> dict:
    """Sign and set-membership findings for a computed solution; reported, not asserted."""
    out = {
        "min_u": report.min_u,
        "min_location": {"t": report.min_location[0], "x": report.min_location[1]},
        "nonnegative_within_rounding": report.min_u >= -NONNEG_TOL,
        "e_norm_total": report.e_norm.total,
        "r": spec.constants.r,
        "e_norm_below_r": report.e_norm.total < spec.constants.r,
        "membership": report.membership,
        "note": "U requires u < u0 strictly, which cannot hold at x = 0 where both vanish; margins are reported instead",
    }
    if oracle:
        ts, xs, vals = oracle_field(spec, report.u.grid, report.u, stride=stride)
        k = np.unravel_index(np.argmin(vals), vals.shape)
        sub = report.u.values[::stride, ::stride]
        out["oracle"] = {
            "min_u": float(vals[k]),
            "min_location": {"t": float(ts[k[0]]), "x": float(xs[k[1]])},
            "sup_difference_vs_fd": float(np.max(np.abs(vals - sub))),
            "min_difference_vs_fd": abs(float(vals[k]) - float(np.min(sub))),
            "stride": stride,
        }
    return out
