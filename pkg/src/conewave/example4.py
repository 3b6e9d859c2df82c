"""The worked example: ``u_tt - u_xx = |u|^p`` on ``[0, 1]``.

Data ``u0 = x(1-x)^2/10`` and ``u1 = x(1-x)^2/50``, one growth term
``c_1 = 1`` with exponent ``p``, and the weight

    g(t, x) = A/(200 B) * t^3 / ((1 + t^16)(1 + t^2)).

``B`` bounds ``(1+t+...+t^4) * Q(t^4)/4`` where ``Q`` is the
principal-branch antiderivative of ``1/(1+z^4)``.  That expression jumps at
``t = 1``; ``quartic_antiderivative(..., corrected=True)`` gives the
continuous antiderivative for comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import optimize

from . import operators, quad, solver
from .expr import evaluate, parse
from .field import Field, e_norm
from .hypotheses import GrowthTerm, HypothesisConstants, ProblemSpec, certify, check_H3, compare, lower_bound_integral

SQRT2 = math.sqrt(2.0)
U0_TEXT = "x*(1-x)^2/10"
U1_TEXT = "x*(1-x)^2/50"
EPSILON = 0.5
M = 0.5
R_SMALL = 4.0 / 27.0


def h_func(t):
    t = np.asarray(t, dtype=float)
    t4 = t**4
    t8 = t4 * t4
    return np.log((1 + t4 * SQRT2 + t8) / (1 - t4 * SQRT2 + t8))


def l_func(t):
    """Principal-branch arctan; at t = 1 the one-sided limit pi/2 from below."""
    t = np.asarray(t, dtype=float)
    t4 = t**4
    den = 1 - t4 * t4
    with np.errstate(divide="ignore"):
        out = np.arctan(np.where(den == 0, np.inf, t4 * SQRT2 / np.where(den == 0, 1.0, den)))
    return out[()] if out.ndim == 0 else out


def h_prime(t):
    t = np.asarray(t, dtype=float)
    t4 = t**4
    t8 = t4 * t4
    return -8 * SQRT2 * t**3 * (t8 - 1) / ((1 + t4 * SQRT2 + t8) * (1 - t4 * SQRT2 + t8))


def l_prime(t):
    t = np.asarray(t, dtype=float)
    return 4 * SQRT2 * t**3 * (1 + t**8) / (1 + t**16)


def quartic_antiderivative(z, corrected: bool = False):
    """Antiderivative of ``1/(1+z^4)`` vanishing at 0, principal-branch form.

    The arctan term falls from pi/2 to -pi/2 as z passes 1; with
    ``corrected`` the missing ``pi/(2 sqrt 2)`` is added for ``z > 1``.
    """
    z = np.asarray(z, dtype=float)
    log_term = np.log((1 + z * SQRT2 + z**2) / (1 - z * SQRT2 + z**2)) / (4 * SQRT2)
    den = 1 - z**2
    with np.errstate(divide="ignore"):
        atan = np.arctan(np.where(den == 0, np.inf, z * SQRT2 / np.where(den == 0, 1.0, den)))
    out = log_term + atan / (2 * SQRT2)
    if corrected:
        out = out + np.where(z > 1, math.pi / (2 * SQRT2), 0.0)
    return out[()] if out.ndim == 0 else out


def b_expression(t):
    """``(1+t+t^2+t^3+t^4) * (h/(16 sqrt2) + l/(8 sqrt2))``, principal branch."""
    t = np.asarray(t, dtype=float)
    poly = 1 + t + t**2 + t**3 + t**4
    return poly * (h_func(t) / (16 * SQRT2) + l_func(t) / (8 * SQRT2))


def compute_B(n: int = 100001, t_hi: float = 10.0) -> dict:
    """Sup of :func:`b_expression` on ``[0, t_hi]``: grid scan plus Brent polish.

    The scan includes t = 1, where ``l_func`` takes its left limit, so the
    supremum approached as t -> 1- is attained on the grid.
    """
    ts = np.unique(np.concatenate((np.linspace(0.0, t_hi, n), [1.0])))
    vals = b_expression(ts)
    k = int(np.argmax(vals))
    best_t, best = float(ts[k]), float(vals[k])
    lo, hi = float(ts[max(k - 1, 0)]), float(ts[min(k + 1, ts.size - 1)])
    res = optimize.minimize_scalar(lambda s: -float(b_expression(s)), bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    if -res.fun > best:
        best_t, best = float(res.x), float(-res.fun)
    sentinels = np.array([10.0, 20.0, 50.0, 100.0, 1000.0])
    return {
        "B": best,
        "argmax": best_t,
        "tail_max": float(np.max(b_expression(sentinels))),
        "grid_points": int(ts.size),
    }


B1_OVER_B = Fraction(15**2 * (2**16 + 3**16) * (2**2 + 3**2) * 3**4, 2**5)


@dataclass(frozen=True)
class Example4Constants:
    p: float
    B: float
    argmax_B: float
    epsilon: float
    m: float
    r: float
    b1: float
    A: float
    R: float

    def hypothesis_constants(self) -> HypothesisConstants:
        return HypothesisConstants(epsilon=self.epsilon, A=self.A, r=self.r, R=self.R, b1=self.b1, m=self.m)

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "B": self.B,
            "argmax_B": self.argmax_B,
            "epsilon": self.epsilon,
            "m": self.m,
            "r": self.r,
            "b1": self.b1,
            "A": self.A,
            "R": self.R,
        }


def build_constants(p: float = 2.0, B_info: dict | None = None) -> Example4Constants:
    if not p > 1:
        raise ValueError(f"the example needs p > 1, got {p}")
    B_info = B_info or compute_B()
    B = B_info["B"]
    b1 = B * float(B1_OVER_B)
    A = 1 / (20 * b1)
    eps, r = EPSILON, R_SMALL
    R = 2 / (eps - 4 * A) * (eps * r + 4 * (r + r**p) * A)
    consts = Example4Constants(p=p, B=B, argmax_B=B_info["argmax"], epsilon=eps, m=M, r=r, b1=b1, A=A, R=R)
    failed = [rec.name for rec in check_H3(consts.hypothesis_constants(), [p]) if not rec.passed]
    if failed:
        raise ValueError(f"assembled constants violate {failed}")
    return consts


def g_text(consts: Example4Constants) -> str:
    coef = consts.A / (200 * consts.B)
    return f"{coef!r}*t^3/((1+t^16)*(1+t^2))"


def build_g(consts: Example4Constants):
    return parse(g_text(consts))


def build_spec(p: float = 2.0, t_max: float = 2.0, nt: int = 257, nx: int = 257, consts=None) -> ProblemSpec:
    consts = consts or build_constants(p)
    f_text = f"abs(u)^{float(p)!r}"
    return ProblemSpec(
        L=1.0,
        f=parse(f_text),
        growth=(GrowthTerm(parse("1"), float(p), "1"),),
        u0=parse(U0_TEXT),
        u1=parse(U1_TEXT),
        g=build_g(consts),
        constants=consts.hypothesis_constants(),
        t_max=t_max,
        nt=nt,
        nx=nx,
        sources={"f": f_text, "u0": U0_TEXT, "u1": U1_TEXT, "g": g_text(consts)},
    )


def nominal_lower_chain(consts: Example4Constants) -> dict:
    """Lower-bound chain for the third (H4) inequality.

    The nominal prefactor is ``A/(1600 B)``; collecting ``(1-m)/4``,
    ``A/(200 B)`` and the 1/10 of u0 gives ``A/(16000 B)``.  Both are kept.
    """
    A, B = consts.A, consts.B
    factors = (0.5**2) * (1 / 3) ** 2 * (2**18 / ((2**16 + 3**16) * (2**2 + 3**2))) * (1 / 3) ** 2 * (0.5**2) * 0.5 * (1 / 6) ** 2
    closed = 1 / (2**7 * 3**6) * 2**18 / ((2**16 + 3**16) * (2**2 + 3**2))
    return {
        "nominal_prefactor_value": A / (1600 * B) * factors,
        "nominal_closed_form": A / (1600 * B) * closed,
        "collected_prefactor_value": A / (16000 * B) * factors,
        "A_over_b1": A / consts.b1,
        "exact_identity_1600_2^7_3^6_over_2^18_eq_15^2_3^4_over_2^5": Fraction(1600 * 2**7 * 3**6, 2**18)
        == Fraction(15**2 * 3**4, 2**5),
    }


def upper_chain(consts: Example4Constants, t_max: float, n: int = 513) -> dict:
    """Sides of the upper-bound chain for (H4)(i) on a time grid.

    ``measured`` is the actual left side ``B1 P(t) int_0^t int_0^1 g``;
    ``dropped`` replaces ``1/(1+t^2)`` by 1; ``closed_form`` substitutes
    the principal-branch antiderivative, which is what ``B`` bounds.
    """
    A, B = consts.A, consts.B
    ts = np.linspace(0.0, t_max, n)
    poly = 1 + ts + ts**2 + ts**3 + ts**4
    g_int = np.concatenate(([0.0], quad.cumulative_at(lambda s: s**3 / ((1 + s**16) * (1 + s**2)), ts[1:])))
    dropped_int = np.concatenate(([0.0], quad.cumulative_at(lambda s: s**3 / (1 + s**16), ts[1:])))
    measured = 2 * A / (200 * B) * poly * g_int
    dropped = A / (100 * B) * poly * dropped_int
    closed = A / (100 * B) * b_expression(ts)
    k = int(np.argmax(measured))
    kd = int(np.argmax(dropped))
    over = np.nonzero(dropped > A / 100 * (1 + 1e-12))[0]
    return {
        "t_max": t_max,
        "sup_measured_over_A": float(measured[k] / A),
        "argsup_measured": float(ts[k]),
        "sup_dropped_over_A": float(dropped[kd] / A),
        "sup_closed_form_over_A": float(np.max(closed) / A),
        "claimed_bound_over_A": 0.01,
        "first_t_dropped_exceeds_A_over_100": float(ts[over[0]]) if over.size else None,
    }


def special_function_facts() -> dict:
    """Values entering the construction of g, including the fourth-root variant of h(1)."""
    h1 = float(h_func(1.0))
    return {
        "h_at_1": h1,
        "h_at_1_closed_form_sqrt2": math.log((2 + SQRT2) / (2 - SQRT2)),
        "h_at_1_fourth_root_variant": math.log((2 + 2**0.25) / (2 - 2**0.25)),
        "l_at_1": float(l_func(1.0)),
        "t4_h_at_100": float(100.0**4 * h_func(100.0)),
        "t4_l_at_100": float(100.0**4 * l_func(100.0)),
        "limit_t4_h": 2 * SQRT2,
        "limit_t4_l": -SQRT2,
        "quartic_jump_at_1": float(quartic_antiderivative(1 - 1e-12) - quartic_antiderivative(1 + 1e-12)),
        "quartic_total_corrected": float(quartic_antiderivative(1e8, corrected=True)),
    }


def g_integral_check(consts: Example4Constants, t_max: float = 2.0) -> dict:
    g = build_g(consts)
    two_d = quad.integrate_2d(lambda t, x: evaluate(g, t=t, x=x), (0.0, t_max), (0.0, 1.0))
    one_d = consts.A / (200 * consts.B) * quad.integrate_1d(lambda s: s**3 / ((1 + s**16) * (1 + s**2)), 0.0, t_max)
    return {"two_d": two_d, "one_d": one_d, "relative_difference": abs(two_d - one_d) / abs(one_d)}


def _suite_summary(results) -> dict:
    by_name = {}
    for res in results:
        entry = by_name.setdefault(res.name, {"trials": 0, "violations": 0, "max_measured_over_bound": 0.0})
        entry["trials"] += 1
        entry["violations"] += int(not res.passed)
        if res.bound > 0:
            entry["max_measured_over_bound"] = max(entry["max_measured_over_bound"], res.measured / res.bound)
    return by_name


def _step(bundle: dict, key: str, fn):
    try:
        bundle[key] = fn()
    except Exception as exc:  # recorded so the rest of the report is still emitted
        bundle.setdefault("errors", {})[key] = f"{type(exc).__name__}: {exc}"
        bundle[key] = None


def reproduce(p: float = 2.0, t_max: float = 2.0, nt: int = 257, nx: int = 257, seed: int = 0,
              cfl: float = 0.9, trials: int = 100, extended_t_max: float = 50.0, oracle_stride: int = 1) -> dict:
    """Constants, certificate, solve, audits and bound suites for the example, in one bundle."""
    bundle: dict = {
        "inputs": {"p": p, "t_max": t_max, "nt": nt, "nx": nx, "seed": seed, "cfl": cfl, "trials": trials,
                   "extended_t_max": extended_t_max, "oracle_stride": oracle_stride},
    }
    B_info = compute_B()
    consts = build_constants(p, B_info)
    spec = build_spec(p, t_max, nt, nx, consts)
    A = consts.A
    bundle["B_search"] = B_info
    bundle["constants"] = consts.to_dict()
    bundle["b1_over_B_exact"] = {"numerator": B1_OVER_B.numerator, "denominator": B1_OVER_B.denominator}
    bundle["g"] = g_text(consts)
    bundle["special_functions"] = special_function_facts()
    _step(bundle, "g_integral", lambda: g_integral_check(consts, t_max))

    cert = certify(spec, t_max)
    bundle["certificate"] = cert.to_dict()
    sup_ratio = cert.diagnostics.get("H4.i.sup_over_A")
    bundle["h4_i_targets"] = [
        compare("H4.i.sup<=A/100", sup_ratio * A, "<=", A / 100).to_dict(),
        compare("H4.i.sup<=A/50", sup_ratio * A, "<=", A / 50).to_dict(),
    ]
    bundle["chains"] = {
        "upper": upper_chain(consts, t_max),
        "lower_nominal": nominal_lower_chain(consts),
        "lower_measured": lower_bound_integral(spec),
    }

    def extended():
        ext = certify(spec, extended_t_max)
        return {
            "t_max": extended_t_max,
            "overall_pass": ext.passed,
            "failures": [r.name for r in ext.failures()],
            "diagnostics": ext.diagnostics,
        }

    _step(bundle, "extended_certificate", extended)

    ctx = operators.OperatorContext.build(spec)
    report = None

    def solve():
        nonlocal report
        report = solver.solve_fd(spec, spec.grid(), cfl)
        return report.to_dict()

    _step(bundle, "solve", solve)
    if report is not None:
        _step(bundle, "audit_theorem", lambda: solver.audit_theorem(report, spec, stride=oracle_stride))
        _step(bundle, "lemma1_audit", lambda: solver.lemma1_audit(report.u, ctx))
        _step(bundle, "fixed_point", lambda: solver.fixed_point_iterate(report.u, ctx, consts.epsilon, tol=1e-3).to_dict())

    def bounds():
        r = consts.r
        out = {
            "G": _suite_summary(operators.bound_check_G(trials, ctx, r, A, seed=seed)),
            "F": _suite_summary(operators.bound_check_F(trials, ctx, r, A, seed=seed)),
            "negative_control_G": _suite_summary(operators.bound_check_G(trials, ctx, r, A / 1e6, seed=seed)),
            "lipschitz": operators.lipschitz_probe(trials, ctx, consts.epsilon, consts.R, A, seed=seed + 1),
            "seed": seed,
        }
        return out

    _step(bundle, "bounds", bounds)
    u0_field = Field(spec.grid(), np.broadcast_to(ctx.u0_vec, (nt, nx)))
    bundle["u0_e_norm"] = e_norm(u0_field).to_dict()
    return bundle


def narrative(bundle: dict) -> str:
    """Plain-text walk through the bundle in the order of the construction."""
    c = bundle["constants"]
    sf = bundle["special_functions"]
    lines = [
        "Worked example: u_tt - u_xx = |u|^p, u(t,0) = 0, u_x(t,1) = 0",
        f"p = {c['p']}, epsilon = {c['epsilon']}, m = {c['m']}, r = {c['r']:.12g}",
        "",
        "Special functions",
        f"  h(1) = {sf['h_at_1']:.12g} (sqrt 2 form {sf['h_at_1_closed_form_sqrt2']:.12g};"
        f" fourth-root variant {sf['h_at_1_fourth_root_variant']:.12g})",
        f"  l(1) = {sf['l_at_1']:.12g} (left limit pi/2)",
        f"  t^4 h(t) at t=100: {sf['t4_h_at_100']:.12g} -> 2 sqrt 2 = {sf['limit_t4_h']:.12g}",
        f"  t^4 l(t) at t=100: {sf['t4_l_at_100']:.12g} -> -sqrt 2 = {sf['limit_t4_l']:.12g}",
        f"  principal-branch antiderivative jumps by {sf['quartic_jump_at_1']:.12g} at z = 1",
        "",
        "Constants",
        f"  B = {c['B']:.15g} at t = {c['argmax_B']:.12g} (tail max {bundle['B_search']['tail_max']:.3g})",
        f"  b1 = {c['b1']:.15g}, A = {c['A']:.15g}, R = {c['R']:.15g} (R/r = {c['R'] / c['r']:.12g})",
        f"  g = {bundle['g']}",
        "",
        f"Certificate on [0, {bundle['inputs']['t_max']}]: {'PASS' if bundle['certificate']['overall_pass'] else 'FAIL'}",
    ]
    for rec in bundle["certificate"]["records"]:
        lines.append(f"  [{'ok  ' if rec['pass'] else 'FAIL'}] {rec['name']}: {rec['lhs']:.6g} {rec['relation']} {rec['rhs']:.6g}")
    lines.append("Upper chain for (i)")
    for rec in bundle["h4_i_targets"]:
        lines.append(f"  [{'ok  ' if rec['pass'] else 'FAIL'}] {rec['name']}: {rec['lhs'] / c['A']:.6g} A vs {rec['rhs'] / c['A']:.6g} A")
    up = bundle["chains"]["upper"]
    lines.append(f"  with 1/(1+t^2) dropped: sup {up['sup_dropped_over_A']:.6g} A, first above A/100 at t = {up['first_t_dropped_exceeds_A_over_100']}")
    lines.append(f"  principal-branch closed form: sup {up['sup_closed_form_over_A']:.6g} A")
    lo = bundle["chains"]["lower_nominal"]
    lines += [
        "Lower chain for (iii)",
        f"  measured integral     {bundle['chains']['lower_measured']:.9g}",
        f"  nominal prefactor     {lo['nominal_prefactor_value']:.9g}",
        f"  collected prefactor   {lo['collected_prefactor_value']:.9g}",
        f"  A/b1                  {lo['A_over_b1']:.9g}",
    ]
    ext = bundle.get("extended_certificate")
    if ext:
        lines += ["", f"Extended horizon [0, {ext['t_max']}]: {'PASS' if ext['overall_pass'] else 'FAIL'} {ext['failures']}"]
        d = ext["diagnostics"]
        for key in sorted(d):
            if "violation" in key:
                lines.append(f"  {key}: {d[key]}")
    sol = bundle.get("solve")
    if sol:
        lines += [
            "",
            "Finite-difference solution",
            f"  grid {sol['grid']['nt']} x {sol['grid']['nx']}, cfl used {sol['cfl']:.6g} ({sol['substeps']} substeps per row)",
            f"  integral-equation residual {sol['eq2_residual_sup']:.3g}, unweighted {sol['eq3_residual_sup']:.3g}",
            f"  PDE residual {sol['pde_residual_sup']:.3g}",
            f"  min u = {sol['min_u']:.9g} at t = {sol['min_location']['t']:.6g}, x = {sol['min_location']['x']:.6g}",
            f"  E-norm {sol['e_norm']['total']:.6g} vs r = {c['r']:.6g}",
        ]
    aud = bundle.get("audit_theorem")
    if aud and "oracle" in aud:
        o = aud["oracle"]
        lines.append(f"  images oracle min {o['min_u']:.9g} at t = {o['min_location']['t']:.6g}, x = {o['min_location']['x']:.6g}"
                     f" (|difference| {o['min_difference_vs_fd']:.3g})")
        lines.append(f"  nonnegative within rounding: {aud['nonnegative_within_rounding']}")
    b = bundle.get("bounds")
    if b:
        lines += ["", "Bound suites (violations / trials)"]
        for key in ("G", "F", "negative_control_G"):
            for name, s in sorted(b[key].items()):
                lines.append(f"  {key}: {name} {s['violations']}/{s['trials']}")
        lp = b["lipschitz"]
        lines.append(f"  I - T ratios in [{lp['min_ratio']:.15g}, {lp['max_ratio']:.15g}], band {lp['band']}")
    if bundle.get("errors"):
        lines += ["", "Errors"] + [f"  {k}: {v}" for k, v in sorted(bundle["errors"].items())]
    return "\n".join(lines) + "\n"
