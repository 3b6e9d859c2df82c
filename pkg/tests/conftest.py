import pytest

from conewave import example4
from conewave.expr import parse
from conewave.hypotheses import GrowthTerm, HypothesisConstants, ProblemSpec

TOY_CONSTANTS = HypothesisConstants(epsilon=0.5, A=0.01, r=0.1, R=0.2, b1=2.0, m=0.5)


def make_spec(f="0", u0="0", u1="0", g="1", c="1", p=2.0, L=1.0, t_max=1.0, nt=129, nx=129, constants=TOY_CONSTANTS):
    return ProblemSpec(
        L=L,
        f=parse(f),
        growth=(GrowthTerm(parse(c), p, c),),
        u0=parse(u0),
        u1=parse(u1),
        g=parse(g),
        constants=constants,
        t_max=t_max,
        nt=nt,
        nx=nx,
    )


@pytest.fixture(scope="session")
def ex_constants():
    return example4.build_constants(2.0)


@pytest.fixture(scope="session")
def ex_spec(ex_constants):
    return example4.build_spec(2.0, consts=ex_constants)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
