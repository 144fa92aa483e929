import numpy as np
import pytest

from copulachain import Clayton, FrechetM, Gumbel, Independence, MarshallOlkin, Mixture, StudentT

CLOSED_FORM = [
    Independence(),
    FrechetM(),
    Clayton(1.0),
    Clayton(4.0),
    Gumbel(2.0),
    Gumbel(1.0),
    MarshallOlkin(0.5, 0.5),
    MarshallOlkin(0.3, 0.7),
    Mixture((Independence(), FrechetM()), (0.5, 0.5)),
    Mixture((Clayton(1.0), Gumbel(2.0)), (0.3, 0.7)),
]
ALL_FAMILIES = CLOSED_FORM + [
    StudentT(0.5, 3.0),
    StudentT(-0.3, 6.0),
    Mixture((Clayton(1.0), Gumbel(2.0), StudentT(0.5, 3.0)), (1 / 3, 1 / 3, 1 / 3)),
]
# families whose conditional law has no atoms
CONTINUOUS = [
    Independence(),
    Clayton(1.0),
    Clayton(4.0),
    Gumbel(2.0),
    StudentT(0.5, 3.0),
    StudentT(-0.3, 6.0),
    Mixture((Clayton(1.0), Gumbel(2.0)), (0.3, 0.7)),
]


def family_id(spec):
    return spec.label


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}")
