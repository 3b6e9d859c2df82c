import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conewave.field import Field, GridError, RectGrid, e_norm, interp, partial, sample, zeros


GRID = RectGrid(t_max=2.0, nt=65, L=1.0, nx=33)


def test_grid_spacing():
    assert GRID.dt == pytest.approx(2 / 64)
    assert GRID.dx == pytest.approx(1 / 32)
    assert GRID.t[-1] == pytest.approx(2.0)
    with pytest.raises(GridError):
        RectGrid(1.0, 2, 1.0, 10)
    with pytest.raises(GridError):
        RectGrid(-1.0, 10, 1.0, 10)


def test_field_is_read_only_and_finite():
    f = zeros(GRID)
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0
    bad = np.zeros((GRID.nt, GRID.nx))
    bad[3, 3] = np.nan
    with pytest.raises(ValueError):
        Field(GRID, bad)
    with pytest.raises(GridError):
        Field(GRID, np.zeros((3, 3)))


def test_arithmetic():
    a = sample("t + x", GRID)
    b = sample("t*x", GRID)
    assert np.allclose((a + b).values, (a.values + b.values))
    assert np.allclose((2.0 * a - b).values, 2 * a.values - b.values)
    other = zeros(RectGrid(1.0, 65, 1.0, 33))
    with pytest.raises(GridError):
        a + other


def test_sample_rejects_u():
    with pytest.raises(GridError):
        sample("u + x", GRID)


@pytest.mark.parametrize("which,exact", [
    ("t", "cos(t)*sin(x)"),
    ("x", "sin(t)*cos(x)"),
    ("tt", "-sin(t)*sin(x)"),
    ("xx", "-sin(t)*sin(x)"),
])
def test_partials_second_order(which, exact):
    errs = []
    for n in (33, 65):
        g = RectGrid(2.0, 2 * n - 1, 1.0, n)
        d = partial(sample("sin(t)*sin(x)", g), which)
        errs.append(np.max(np.abs(d.values - sample(exact, g).values)))
    assert errs[1] < errs[0] / 3.0


def test_e_norm_of_separable_field():
    g = RectGrid(np.pi / 2, 513, 1.0, 257)
    b = e_norm(sample("sin(t)*x^2", g))
    assert b.sup_u == pytest.approx(1.0)
    assert b.sup_ut == pytest.approx(1.0, abs=1e-4)
    assert b.sup_utt == pytest.approx(1.0, abs=1e-4)
    assert b.sup_ux == pytest.approx(2.0, abs=1e-4)
    assert b.sup_uxx == pytest.approx(2.0, abs=1e-4)
    assert b.total == pytest.approx(7.0, abs=1e-3)


_coef = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=40, deadline=None)
@given(_coef, _coef, _coef, _coef, st.floats(-10, 10))
def test_norm_axioms(a, b, c, d, alpha):
    f = sample(f"{a!r}*sin(t)*x + {b!r}*t^2", GRID)
    h = sample(f"{c!r}*cos(x)*t + {d!r}*x^3", GRID)
    nf, nh = e_norm(f).total, e_norm(h).total
    assert e_norm(f + h).total <= nf + nh + 1e-12 * (1 + nf + nh)
    assert e_norm(alpha * f).total == pytest.approx(abs(alpha) * nf, rel=1e-12, abs=1e-300)
    assert e_norm(zeros(GRID)).total == 0.0


def test_csv_format(tmp_path):
    g = RectGrid(1.0, 3, 1.0, 3)
    f = sample("t + x/3", g)
    text = f.to_csv(tmp_path / "f.csv")
    lines = text.splitlines()
    assert lines[0] == "t,x,value"
    assert len(lines) == 1 + 9
    assert lines[2] == "0,0.5,0.16666666666666666"
    assert (tmp_path / "f.csv").read_text() == text


def test_interp():
    f = sample("t + 2*x", GRID)
    assert interp(f, GRID.t[5], GRID.x[7]) == pytest.approx(f.values[5, 7])
    assert interp(f, 0.123, 0.456) == pytest.approx(0.123 + 0.912)
    with pytest.raises(GridError):
        interp(f, 3.0, 0.5)


def test_example_initial_data_norm_exceeds_r():
    # u0'' = (6x - 4)/10, so the C^2 norm of u0 alone is at least 0.4 > 4/27
    g = RectGrid(2.0, 257, 1.0, 257)
    b = e_norm(sample("x*(1-x)^2/10 + 0*t", g))
    assert b.sup_uxx == pytest.approx(0.4, abs=1e-9)
    assert b.total > 4 / 27
