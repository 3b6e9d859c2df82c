"""Problem data, the standing hypotheses (H1)-(H4), and certificates.

Every inequality is recorded with both sides, its slack and the worst
location found.  Quantifiers over a continuum (all ``u`` in H1, all ``t``
in H4) are checked on samples or on the finite horizon ``[0, t_max]``; the
certificate's provenance says which.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import optimize

from . import quad
from .expr import Expr, check_vars, evaluate, parse, unparse
from .field import RectGrid
from .report import canonical_json

STRICT_TOL = 1e-12
DERIV_TOL = 1e-8


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class HypothesisConstants:
    epsilon: float
    A: float
    r: float
    R: float
    b1: float
    m: float

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "A": self.A, "r": self.r, "R": self.R, "b1": self.b1, "m": self.m}


@dataclass(frozen=True)
class GrowthTerm:
    c: Expr
    p: float
    source: str = ""


@dataclass(frozen=True)
class ProblemSpec:
    L: float
    f: Expr
    growth: tuple
    u0: Expr
    u1: Expr
    g: Expr
    constants: HypothesisConstants
    t_max: float = 2.0
    nt: int = 257
    nx: int = 257
    sources: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.L > 0:
            raise SpecError(f"L must be positive, got {self.L}")
        if len(self.growth) < 1:
            raise SpecError("at least one growth term (c_j, p_j) is required")
        for term in self.growth:
            if not term.p > 0:
                raise SpecError(f"growth exponents must be positive, got {term.p}")
            if not check_vars(term.c, {"t", "x"}):
                raise SpecError("c_j may depend on t and x only")
        if not check_vars(self.f, {"t", "x", "u"}):
            raise SpecError("f may depend on t, x and u only")
        for name in ("u0", "u1"):
            if not check_vars(getattr(self, name), {"x"}):
                raise SpecError(f"{name} may depend on x only")
        if not check_vars(self.g, {"t", "x"}):
            raise SpecError("g may depend on t and x only")
        if not self.t_max > 0:
            raise SpecError("t_max must be positive")
        if self.nt < 3 or self.nx < 3:
            raise SpecError("grid needs at least 3 nodes per axis")

    @property
    def p_list(self) -> list:
        return [term.p for term in self.growth]

    @property
    def B1(self) -> float:
        return compute_B1(self.L)

    def grid(self, t_max=None, nt=None, nx=None) -> RectGrid:
        return RectGrid(t_max or self.t_max, nt or self.nt, self.L, nx or self.nx)

    def with_options(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemSpec":
        try:
            consts = data["constants"]
            constants = HypothesisConstants(
                epsilon=float(consts["epsilon"]),
                A=float(consts["A"]),
                r=float(consts["r"]),
                R=float(consts["R"]),
                b1=float(consts["b1"]),
                m=float(consts["m"]),
            )
            growth = tuple(GrowthTerm(parse(str(c["expr"])), float(c["p"]), str(c["expr"])) for c in data["c"])
            grid = data.get("grid", {})
            return cls(
                L=float(data["L"]),
                f=parse(str(data["f"])),
                growth=growth,
                u0=parse(str(data["u0"])),
                u1=parse(str(data["u1"])),
                g=parse(str(data["g"])),
                constants=constants,
                t_max=float(data.get("t_max", 2.0)),
                nt=int(grid.get("nt", 257)),
                nx=int(grid.get("nx", 257)),
                sources={k: str(data[k]) for k in ("f", "u0", "u1", "g")},
            )
        except KeyError as exc:
            raise SpecError(f"missing field {exc.args[0]!r} in problem spec") from None
        except (TypeError, AttributeError) as exc:
            raise SpecError(f"malformed problem spec: {exc}") from None

    def to_dict(self) -> dict:
        def text(name):
            return self.sources.get(name) or unparse(getattr(self, name))

        return {
            "L": self.L,
            "f": text("f"),
            "c": [{"expr": t.source or unparse(t.c), "p": t.p} for t in self.growth],
            "u0": text("u0"),
            "u1": text("u1"),
            "g": text("g"),
            "constants": self.constants.to_dict(),
            "t_max": self.t_max,
            "grid": {"nt": self.nt, "nx": self.nx},
        }


def load_spec(path) -> ProblemSpec:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise SpecError(f"{path}: top level must be an object")
    return ProblemSpec.from_dict(data)


# --- records ---------------------------------------------------------------


@dataclass
class CheckRecord:
    name: str
    lhs: float
    rhs: float
    relation: str
    slack: float
    passed: bool
    worst_location: dict | None = None
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "relation": self.relation,
            "slack": self.slack,
            "pass": self.passed,
            "worst_location": self.worst_location,
            "note": self.note,
        }


def compare(name: str, lhs: float, relation: str, rhs: float, where=None, note="", tol=STRICT_TOL) -> CheckRecord:
    """Record ``lhs <relation> rhs`` with a scale-relative tolerance.

    Strict relations need slack above ``tol*scale``; non-strict ones tolerate
    slack down to ``-tol*scale``.
    """
    lhs = float(lhs)
    rhs = float(rhs)
    slack = rhs - lhs if relation in ("<", "<=") else lhs - rhs
    scale = max(abs(lhs), abs(rhs))
    if relation in ("<", ">"):
        ok = slack > tol * scale
    elif relation in ("<=", ">="):
        ok = slack >= -tol * scale
    else:
        raise ValueError(f"unknown relation {relation!r}")
    return CheckRecord(name, lhs, rhs, relation, slack, bool(ok), where, note)


@dataclass
class Certificate:
    records: list
    provenance: dict
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def failures(self) -> list:
        return [r for r in self.records if not r.passed]

    def to_dict(self) -> dict:
        return {
            "overall_pass": self.passed,
            "records": [r.to_dict() for r in self.records],
            "provenance": self.provenance,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return canonical_json(self.to_dict())

    def to_text(self) -> str:
        lines = [f"certificate: {'PASS' if self.passed else 'FAIL'}"]
        for r in self.records:
            flag = "ok  " if r.passed else "FAIL"
            lines.append(f"  [{flag}] {r.name}: {r.lhs:.6g} {r.relation} {r.rhs:.6g}  (slack {r.slack:.3g})")
            if r.note:
                lines.append(f"         {r.note}")
        for key in sorted(self.diagnostics):
            lines.append(f"  {key}: {self.diagnostics[key]}")
        prov = self.provenance
        lines.append(f"  horizon t in [0, {prov.get('t_max')}], L = {prov.get('L')}")
        return "\n".join(lines) + "\n"


# --- constants -------------------------------------------------------------


def compute_B1(L: float) -> float:
    if not L > 0:
        raise SpecError(f"L must be positive, got {L}")
    return max(1.0, 2 * L, 2 * L**2, 2 * L**3, 2 * L**4)


def growth_sum(r: float, p_list) -> float:
    """``sum_j r^{p_j}``; the one place this sum is formed."""
    return float(sum(r**p for p in p_list))


def _poly4(t):
    return 1 + t + t**2 + t**3 + t**4


# --- H1 --------------------------------------------------------------------


def check_H1(spec: ProblemSpec, r: float | None = None, samples: int = 33) -> list:
    """Sampled check of ``0 <= f <= sum_j c_j |u|^{p_j}`` for |u| <= r."""
    r = spec.constants.r if r is None else r
    t = np.linspace(0.0, spec.t_max, samples)
    x = np.linspace(0.0, spec.L, samples)
    u = np.linspace(-r, r, 2 * samples - 1)
    tt, xx, uu = np.meshgrid(t, x, u, indexing="ij")
    fv = evaluate(spec.f, t=tt, x=xx, u=uu)
    bound = np.zeros_like(fv)
    for term in spec.growth:
        bound = bound + evaluate(term.c, t=tt, x=xx) * np.abs(uu) ** term.p

    def where(idx):
        return {"t": float(tt[idx]), "x": float(xx[idx]), "u": float(uu[idx])}

    lo = np.unravel_index(np.argmin(fv), fv.shape)
    gap = bound - fv
    hi = np.unravel_index(np.argmin(gap), gap.shape)
    note = f"sampled on {fv.size} points of [0,{spec.t_max}]x[0,{spec.L}]x[-r,r]; not exhaustive"
    return [
        compare("H1.f_nonnegative", fv[lo], ">=", 0.0, where(lo), note),
        compare("H1.f_growth_bound", fv[hi], "<=", bound[hi], where(hi), note),
    ]


# --- H2 --------------------------------------------------------------------


def _endpoint_derivative(e: Expr, x: float, h: float, side: int) -> float:
    """Fourth-order one-sided derivative at an endpoint (side=-1 looks left)."""
    pts = x + side * h * np.arange(5)
    v = evaluate(e, x=pts)
    coeffs = np.array([-25, 48, -36, 16, -3]) / 12.0
    return float(side * np.dot(coeffs, v) / h)


def _extremum(e: Expr, a: float, b: float, n: int, sign: int):
    """Max (sign=1) or min (sign=-1) on [a, b]: dense scan then Brent polish."""
    xs = np.linspace(a, b, n)
    v = sign * evaluate(e, x=xs)
    k = int(np.argmax(v))
    best_x, best_v = float(xs[k]), float(v[k])
    lo, hi = xs[max(k - 1, 0)], xs[min(k + 1, n - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(
            lambda s: -sign * float(evaluate(e, x=float(s))), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-12},
        )
        if -res.fun > best_v:
            best_x, best_v = float(res.x), float(-res.fun)
    return best_x, sign * best_v


def check_H2(spec: ProblemSpec, dense: int = 4097) -> list:
    L = spec.L
    r = spec.constants.r
    h = (L / (spec.nx - 1)) / 16
    recs = []
    for name in ("u0", "u1"):
        e = getattr(spec, name)
        v0 = float(evaluate(e, x=0.0))
        recs.append(compare(f"H2.{name}(0)=0", abs(v0), "<=", DERIV_TOL, {"x": 0.0}))
        d = _endpoint_derivative(e, L, h, -1)
        recs.append(compare(f"H2.{name}_x(L)=0", abs(d), "<=", DERIV_TOL, {"x": L}, f"one-sided 5-point stencil, step {h:.6g}"))
        xmin, vmin = _extremum(e, 0.0, L, dense, -1)
        recs.append(compare(f"H2.{name}>=0", vmin, ">=", 0.0, {"x": xmin}))
        xmax, vmax = _extremum(e, 0.0, L, dense, 1)
        recs.append(compare(f"H2.{name}<r", vmax, "<", r, {"x": xmax}, f"sup {name} = {vmax:.17g}"))
    xpos, vpos = _extremum(spec.u0, L / 3, L / 2, dense, -1)
    recs.append(compare("H2.u0>0_on_[L/3,L/2]", vpos, ">", 0.0, {"x": xpos}))
    return recs


def sup_u0(spec: ProblemSpec, dense: int = 4097) -> tuple:
    return _extremum(spec.u0, 0.0, spec.L, dense, 1)


# --- H3 --------------------------------------------------------------------


def check_H3(consts: HypothesisConstants, p_list, r: float | None = None) -> list:
    """Exact arithmetic on the constants; independent of any grid."""
    r = consts.r if r is None else r
    eps, A, R, b1 = consts.epsilon, consts.A, consts.R, consts.b1
    s = growth_sum(r, p_list)
    recs = [
        compare("H3.epsilon>0", eps, ">", 0.0),
        compare("H3.epsilon<1", eps, "<", 1.0),
        compare("H3.A>0", A, ">", 0.0),
        compare("H3.A<1", A, "<", 1.0),
        compare("H3.4A<epsilon", 4 * A, "<", eps),
        compare("H3.R>=r", R, ">=", r),
        compare("H3.b1>1", b1, ">", 1.0),
        compare("H3.invariance", eps * r + 4 * (r + s) * A, "<=", (eps - 4 * A) * R),
        compare("H3.boundary", 4 * (r + 2 * R + s) * A, "<", 1.0 / b1),
    ]
    return recs


# --- H4 --------------------------------------------------------------------


class _H4Integrals:
    """Cumulative integrals of g (and of g times the c_j history) in time."""

    def __init__(self, spec: ProblemSpec, rule: quad.QuadRule):
        self.spec = spec
        self.rule = rule
        self.xn, self.xw = quad.nodes_weights(0.0, spec.L, quad.QuadRule(rule.kind, rule.order, max(rule.panels // 4, 4)))

    def _xbar(self, e: Expr, t):
        t = np.asarray(t, dtype=float)
        vals = evaluate(e, t=t[..., None], x=self.xn)
        return np.tensordot(vals, self.xw, axes=(-1, 0))

    def gbar(self, t):
        return self._xbar(self.spec.g, t)

    def cum_c(self, j: int, t):
        """``int_0^L int_0^t c_j`` for arbitrary times (any shape)."""
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        order = np.argsort(flat, kind="stable")
        out = np.empty_like(flat)
        out[order] = quad.cumulative_at(lambda s: self._xbar(self.spec.growth[j].c, s), flat[order], self.rule.order)
        return out.reshape(t.shape)

    def integrand(self, j):
        if j is None:
            return self.gbar
        return lambda s: self.gbar(s) * self.cum_c(j, s)

    def cumulative(self, times, j=None):
        return quad.cumulative_at(self.integrand(j), times, self.rule.order)

    def lhs(self, t: float, j=None) -> float:
        val = quad.integrate_1d(self.integrand(j), 0.0, t, self.rule) if t > 0 else 0.0
        return self.spec.B1 * _poly4(t) * val


def h4_lhs_curve(spec: ProblemSpec, t_max: float, samples_per_unit: int = 64, j=None, rule=quad.DEFAULT_RULE):
    ints = _H4Integrals(spec, rule)
    n = max(int(np.ceil(samples_per_unit * t_max)), 16) + 1
    times = np.linspace(0.0, t_max, n)
    cum = np.concatenate(([0.0], ints.cumulative(times[1:], j)))
    return times, spec.B1 * _poly4(times) * cum, ints


def _first_crossing(ints: _H4Integrals, times, lhs, A: float, j=None):
    over = np.nonzero(lhs > A)[0]
    if over.size == 0:
        return None
    k = int(over[0])
    if k == 0:
        return float(times[0])
    return float(optimize.brentq(lambda s: ints.lhs(s, j) - A, times[k - 1], times[k], xtol=1e-12))


def check_H4(spec: ProblemSpec, t_max: float | None = None, rule=quad.DEFAULT_RULE, samples_per_unit: int = 64):
    """The three integral inequalities of (H4) on ``[0, t_max]``.

    Returns ``(records, diagnostics)``.  Diagnostics include whether the
    left side of (i) is still increasing at ``t_max`` and, if it ever
    exceeds A, the first crossing time; otherwise the crossing predicted by
    holding the time integral at its ``t_max`` value while the quartic
    prefactor keeps growing.
    """
    t_max = spec.t_max if t_max is None else t_max
    A = spec.constants.A
    m = spec.constants.m
    L = spec.L
    recs = []
    diag = {}

    gx = np.linspace(0.0, L, 65)
    gt = np.linspace(0.0, t_max, 257)
    gv = evaluate(spec.g, t=gt[:, None], x=gx[None, :])
    k = np.unravel_index(np.argmin(gv), gv.shape)
    recs.append(compare("H4.g_nonnegative", gv[k], ">=", 0.0, {"t": float(gt[k[0]]), "x": float(gx[k[1]])}, "sampled"))

    times, lhs, ints = h4_lhs_curve(spec, t_max, samples_per_unit, None, rule)
    k = int(np.argmax(lhs))
    crossing = _first_crossing(ints, times, lhs, A)
    note = f"sup over [0, {t_max}]"
    if crossing is not None:
        note += f"; first violation at t = {crossing:.12g}"
    recs.append(compare("H4.i", lhs[k], "<=", A, {"t": float(times[k])}, note))
    diag["H4.i.sup_over_A"] = float(lhs[k] / A) if A else None
    diag["H4.i.increasing_at_t_max"] = bool(lhs[-1] > lhs[-2])
    diag["H4.i.first_violation_t"] = crossing
    integral_end = float(lhs[-1] / (spec.B1 * _poly4(t_max)))
    predicted = None
    if crossing is None and integral_end > 0:
        target = A / (spec.B1 * integral_end)
        if _poly4(t_max) < target:
            predicted = float(optimize.brentq(lambda s: _poly4(s) - target, t_max, max(t_max, target**0.25) + 1.0))
    diag["H4.i.predicted_violation_t"] = predicted

    for j in range(len(spec.growth)):
        times_j, lhs_j, _ = h4_lhs_curve(spec, t_max, samples_per_unit, j, rule)
        k = int(np.argmax(lhs_j))
        cross_j = _first_crossing(ints, times_j, lhs_j, A, j)
        note = f"sup over [0, {t_max}]"
        if cross_j is not None:
            note += f"; first violation at t = {cross_j:.12g}"
        recs.append(compare(f"H4.ii[c_{j + 1}]", lhs_j[k], "<=", A, {"t": float(times_j[k])}, note))
        diag[f"H4.ii[c_{j + 1}].first_violation_t"] = cross_j

    lower = lower_bound_integral(spec, rule)
    recs.append(compare("H4.iii", lower, ">=", A / spec.constants.b1, None, "quadrature over [1,3/2]x[L/2,2L/3]x[L/3,L/2]"))
    recs.append(compare("H4.m>0", m, ">", 0.0))
    recs.append(compare("H4.m<1", m, "<", 1.0))
    return recs, diag


def lower_bound_integral(spec: ProblemSpec, rule=quad.DEFAULT_RULE) -> float:
    """``(1-m)/4 * int_1^{3/2} int_{L/2}^{2L/3} (2-t)^2 (L-x)^2 g * int_{L/3}^{L/2} y u0(y)``."""
    L = spec.L
    m = spec.constants.m
    small = quad.QuadRule(rule.kind, rule.order, max(rule.panels // 4, 4))
    inner = quad.integrate_1d(lambda y: y * evaluate(spec.u0, x=y), L / 3, L / 2, small)
    outer = quad.integrate_2d(
        lambda t, x: (2 - t) ** 2 * (L - x) ** 2 * evaluate(spec.g, t=t, x=x),
        (1.0, 1.5),
        (L / 2, 2 * L / 3),
        rule,
        small,
    )
    return (1 - m) / 4 * outer * inner


def check_nonnegative_coefficients(spec: ProblemSpec) -> list:
    t = np.linspace(0.0, spec.t_max, 129)
    x = np.linspace(0.0, spec.L, 65)
    recs = []
    for j, term in enumerate(spec.growth):
        v = evaluate(term.c, t=t[:, None], x=x[None, :])
        k = np.unravel_index(np.argmin(v), v.shape)
        recs.append(compare(f"H1.c_{j + 1}>=0", v[k], ">=", 0.0, {"t": float(t[k[0]]), "x": float(x[k[1]])}, "sampled"))
    return recs


def certify(spec: ProblemSpec, t_max: float | None = None, h1_samples: int = 33, rule=quad.DEFAULT_RULE) -> Certificate:
    """Run every hypothesis check; the certificate passes iff all records pass.

    A pass means the hypotheses of the existence theorem were verified on
    the stated horizon and samples, not on the unbounded domain.
    """
    t_max = spec.t_max if t_max is None else t_max
    spec_h = spec if t_max == spec.t_max else spec.with_options(t_max=t_max)
    records = []
    records += check_H1(spec_h, samples=h1_samples)
    records += check_nonnegative_coefficients(spec_h)
    records += check_H2(spec_h)
    records += check_H3(spec_h.constants, spec_h.p_list)
    h4, diag = check_H4(spec_h, t_max, rule)
    records += h4
    xs, vs = sup_u0(spec_h)
    diag["sup_u0"] = vs
    diag["argmax_u0"] = xs
    diag["B1"] = spec_h.B1
    diag["sum_r_pow_p"] = growth_sum(spec_h.constants.r, spec_h.p_list)
    provenance = {
        "L": spec_h.L,
        "t_max": t_max,
        "grid": {"nt": spec_h.nt, "nx": spec_h.nx},
        "quadrature": rule.to_dict(),
        "h1_samples_per_axis": h1_samples,
        "seed": None,
        "tolerances": {"strict_relative": STRICT_TOL, "endpoint": DERIV_TOL},
        "caveats": [
            "H1 is checked on samples with |u| <= r only",
            "H4 (i)-(ii) are checked for t in [0, t_max], not for all t >= 0",
        ],
        "theorem_hypotheses": ["H1", "H2", "H3", "H4"],
    }
    return Certificate(records, provenance, diag)
