import json

import pytest

from conewave import hypotheses as H

from conftest import TOY_CONSTANTS, make_spec


def by_name(records):
    return {r.name: r for r in records}


def test_compare_semantics():
    assert H.compare("a", 1.0, "<", 2.0).passed
    assert not H.compare("a", 2.0, "<", 2.0).passed
    assert H.compare("a", 2.0, "<=", 2.0).passed
    assert H.compare("a", 2.0 * (1 + 1e-13), "<=", 2.0).passed
    assert not H.compare("a", 2.0 * (1 + 1e-11), "<=", 2.0).passed
    rec = H.compare("a", 3.0, ">=", 1.0)
    assert rec.slack == 2.0
    with pytest.raises(ValueError):
        H.compare("a", 1.0, "==", 1.0)


def test_spec_validation():
    with pytest.raises(H.SpecError):
        make_spec(u0="t*x")
    with pytest.raises(H.SpecError):
        make_spec(g="u")
    with pytest.raises(H.SpecError):
        make_spec(p=0.0)
    with pytest.raises(H.SpecError):
        make_spec(L=-1.0)


def test_spec_json_roundtrip(tmp_path, ex_spec):
    d = ex_spec.to_dict()
    path = tmp_path / "s.json"
    path.write_text(json.dumps(d))
    again = H.load_spec(path)
    assert again.to_dict() == d
    assert again.g == ex_spec.g


def test_spec_file_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(H.SpecError):
        H.load_spec(bad)
    bad.write_text(json.dumps({"L": 1.0}))
    with pytest.raises(H.SpecError):
        H.load_spec(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(H.SpecError):
        H.load_spec(bad)


def test_B1():
    assert H.compute_B1(1.0) == 2.0
    assert H.compute_B1(0.25) == 1.0
    assert H.compute_B1(2.0) == 32.0


def test_H1_detects_growth_violation():
    ok = by_name(H.check_H1(make_spec(f="abs(u)^2")))
    assert ok["H1.f_growth_bound"].passed and ok["H1.f_nonnegative"].passed
    bad = by_name(H.check_H1(make_spec(f="2*abs(u)^2")))
    assert not bad["H1.f_growth_bound"].passed
    neg = by_name(H.check_H1(make_spec(f="u")))
    assert not neg["H1.f_nonnegative"].passed


def test_H2_on_example_and_failures(ex_spec):
    recs = by_name(H.check_H2(ex_spec))
    assert all(r.passed for r in recs.values())
    xs, vs = H.sup_u0(ex_spec)
    assert vs == pytest.approx(2 / 135, abs=1e-12)
    assert xs == pytest.approx(1 / 3, abs=1e-6)
    bad = by_name(H.check_H2(make_spec(u0="x/100", u1="x*(1-x)^2/50")))
    assert not bad["H2.u0_x(L)=0"].passed
    bad = by_name(H.check_H2(make_spec(u0="x*(1-x)^2/10 - 0.001", u1="0")))
    assert not bad["H2.u0(0)=0"].passed and not bad["H2.u0>=0"].passed


def test_H3():
    assert all(r.passed for r in H.check_H3(TOY_CONSTANTS, [2.0]) if r.name != "H3.boundary")
    broken = H.HypothesisConstants(epsilon=0.1, A=0.03, r=0.1, R=0.2, b1=2.0, m=0.5)
    assert not by_name(H.check_H3(broken, [2.0]))["H3.4A<epsilon"].passed


def test_certify_example(ex_spec, ex_constants):
    cert = H.certify(ex_spec)
    assert cert.passed, cert.to_text()
    assert cert.diagnostics["sup_u0"] == pytest.approx(2 / 135, abs=1e-12)
    iii = by_name(cert.records)["H4.iii"]
    assert iii.lhs >= ex_constants.A / ex_constants.b1
    data = json.loads(cert.to_json())
    assert data["overall_pass"] is True
    assert cert.to_json() == H.certify(ex_spec).to_json()


def test_certify_long_horizon_fails(ex_spec):
    cert = H.certify(ex_spec, t_max=50.0)
    assert not cert.passed
    names = {r.name for r in cert.failures()}
    assert "H4.i" in names
    t_star = cert.diagnostics["H4.i.first_violation_t"]
    assert 4.0 < t_star < 5.5
    lhs = H.h4_lhs_curve(ex_spec, 50.0)[2].lhs
    assert lhs(t_star) == pytest.approx(ex_spec.constants.A, rel=1e-9)


def test_h4_predicts_crossing_when_still_below(ex_spec):
    _, diag = H.check_H4(ex_spec, 2.0)
    assert diag["H4.i.first_violation_t"] is None
    assert diag["H4.i.increasing_at_t_max"]
    assert diag["H4.i.predicted_violation_t"] > 2.0


def test_nonnegative_coefficient_check():
    assert not H.check_nonnegative_coefficients(make_spec(c="x - 0.5"))[0].passed


def test_certificate_text_mentions_failures(ex_spec):
    text = H.certify(ex_spec, t_max=50.0).to_text()
    assert text.startswith("certificate: FAIL")
    assert "first violation at t =" in text
