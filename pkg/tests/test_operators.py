import numpy as np
import pytest

from conewave import operators as O
from conewave.field import Field, GridError, RectGrid, e_norm, sample, zeros
from conewave.hypotheses import h4_lhs_curve

from conftest import make_spec


def ctx_for(**kw):
    return O.OperatorContext.build(make_spec(**kw))


def test_G_closed_form():
    ctx = ctx_for()
    gu = O.apply_G(sample("1 + 0*t", ctx.grid), ctx)
    tt, xx = ctx.grid.mesh()
    exact = -(xx**3) * tt**5 / 720
    assert np.max(np.abs(gu.values - exact)) <= 1e-10 * np.max(np.abs(exact))
    assert gu.values[-1, -1] == pytest.approx(-1 / 720, rel=1e-10)


def test_G_linear_and_signed():
    ctx = ctx_for()
    rng = np.random.default_rng(3)
    u = O.random_smooth_field(ctx.grid, rng, 1.0)
    v = O.random_smooth_field(ctx.grid, rng, 1.0)
    lhs = O.apply_G(2.0 * u - 3.0 * v, ctx).values
    rhs = 2.0 * O.apply_G(u, ctx).values - 3.0 * O.apply_G(v, ctx).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(rhs))
    pos = sample("1 + t*x + sin(3*x)^2", ctx.grid)
    assert np.all(O.apply_G(pos, ctx).values <= 0)
    assert O.apply_G(zeros(ctx.grid), ctx).sup() == 0.0


def test_F_closed_form():
    ctx = ctx_for(f="1")
    fu = O.apply_F(zeros(ctx.grid), ctx)
    assert fu.values[-1, -1] == pytest.approx(1 / 3600, rel=1e-10)
    f3 = O.apply_F3(zeros(ctx.grid), ctx)
    tt, xx = ctx.grid.mesh()
    assert np.allclose(f3.values, tt**2 / 2 * (xx - xx**2 / 2), atol=1e-14)


def test_F1_beta_value_and_recomposition():
    ctx = ctx_for(u0="x*(1-x)^2/10")
    u = zeros(ctx.grid)
    assert O.apply_F1(u, ctx).values[0, -1] == pytest.approx(1 / 300, rel=1e-12)
    u = O.random_smooth_field(ctx.grid, np.random.default_rng(0), 0.1)
    f3 = O.apply_F3(u, ctx).values
    parts = O.apply_F1(u, ctx).values + ctx.grid.x[None, :] * O.apply_F2(u, ctx).values
    assert np.max(np.abs(f3 - parts)) <= 1e-12


def test_zero_data_gives_zero():
    ctx = ctx_for()
    u = zeros(ctx.grid)
    for op in (O.apply_F1, O.apply_F2, O.apply_F3, O.apply_F, O.apply_G):
        assert op(u, ctx).sup() == 0.0
    assert O.apply_T(u, ctx, 0.5).sup() == 0.0
    assert O.residual_phi(u, ctx)[1] == 0.0


def test_audit_set_positivity_and_lower_bound():
    ctx = ctx_for(u0="x*(1-x)^2/10", u1="x*(1-x)^2/50", f="abs(u)^2")
    u = Field(ctx.grid, 0.5 * np.broadcast_to(ctx.u0_vec, (ctx.grid.nt, ctx.grid.nx)) * np.exp(-ctx.grid.t)[:, None])
    for op in (O.apply_F1, O.apply_F2, O.apply_F3, O.apply_F):
        assert np.min(op(u, ctx).values) >= -1e-15
    fu = O.apply_F(u, ctx).values
    lower = O.lower_bound_rhs(u, ctx).values
    assert np.all(fu >= lower - 1e-15)


def test_T_S_decomposition():
    ctx = ctx_for(u0="x*(1-x)^2/10", f="abs(u)^2")
    u = O.random_smooth_field(ctx.grid, np.random.default_rng(1), 0.2)
    eps = 0.3
    total = O.apply_T(u, ctx, eps) + O.apply_S(u, ctx, eps)
    direct = u + O.apply_G(u, ctx) + O.apply_F(u, ctx)
    assert np.max(np.abs(total.values - direct.values)) <= 1e-12
    with pytest.raises(ValueError):
        O.apply_T(u, ctx, 1.0)
    assert np.array_equal(O.apply_T(u, ctx, 1.0, validate=False).values, O.apply_G(u, ctx).values)


def test_residual_positive_for_non_solution():
    ctx = ctx_for(u0="x*(1-x)^2/10")
    assert O.residual_phi(sample("0.1 + 0*t", ctx.grid), ctx)[1] > 0


def test_fast_matches_direct():
    ctx = ctx_for(u0="x*(1-x)^2/10", u1="x/5", f="abs(u)^2 + t*x", g="t^3/(1+t^2)")
    direct = ctx.with_method("direct")
    u = O.random_smooth_field(ctx.grid, np.random.default_rng(5), 0.3)
    for op in (O.apply_G, O.apply_F, O.apply_F1, O.apply_F2):
        a = op(u, ctx).values
        b = op(u, direct).values
        assert np.max(np.abs(a - b)) <= 1e-8 * np.max(np.abs(b))


def test_context_validation():
    with pytest.raises(ValueError):
        ctx_for(g="t - 0.5")
    with pytest.raises(ValueError):
        ctx_for(c="x - 0.5")
    ctx = ctx_for()
    with pytest.raises(GridError):
        O.apply_G(zeros(RectGrid(1.0, 65, 1.0, 65)), ctx)


def test_random_field_norm_and_seed():
    g = RectGrid(2.0, 65, 1.0, 65)
    a = O.random_smooth_field(g, np.random.default_rng(7), 0.25)
    b = O.random_smooth_field(g, np.random.default_rng(7), 0.25)
    assert e_norm(a).total == pytest.approx(0.25, rel=1e-12)
    assert np.array_equal(a.values, b.values)


def test_bound_suites_and_negative_control():
    spec = make_spec(u0="x*(1-x)^2/10", f="abs(u)^2", g="0.001*t", nt=65, nx=65)
    # smallest A that (H4)(i) allows for this g on [0, 1]
    A = float(np.max(h4_lhs_curve(spec, 1.0)[1]))
    ctx = O.OperatorContext.build(spec)
    g = O.bound_check_G(10, ctx, 0.1, A, seed=1)
    f = O.bound_check_F(10, ctx, 0.1, A, seed=1)
    assert all(r.passed for r in g + f)
    assert {r.name for r in f} == {"F.norm", "F1.pointwise", "F2.pointwise", "F3.pointwise"}
    zero = O.bound_check_G(1, ctx, 0.1, A, fields=[zeros(ctx.grid)])
    assert zero[0].measured == 0.0 and zero[0].passed
    neg = O.bound_check_G(10, ctx, 0.1, A * 1e-6, seed=1)
    assert any(not r.passed for r in neg)


def test_lipschitz_probe():
    ctx = ctx_for(g="0.01", nt=65, nx=65)
    res = O.lipschitz_probe(10, ctx, 0.5, 0.2, 0.01, seed=0)
    assert res["pass"]
    ctx0 = ctx_for(g="0", nt=65, nx=65)
    res0 = O.lipschitz_probe(5, ctx0, 0.5, 0.2, 0.0, seed=0)
    assert res0["min_ratio"] == pytest.approx(0.5, rel=1e-12)
    assert res0["max_ratio"] == pytest.approx(0.5, rel=1e-12)
    u = sample("1 + 0*t", ctx.grid)
    same = O.lipschitz_probe(1, ctx, 0.5, 0.2, 0.01, fields=[(u, u)])
    assert same["skipped"] == 1 and same["pairs"] == 0
