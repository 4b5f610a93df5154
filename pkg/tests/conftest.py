import numpy as np
import pytest

from gapflow.ensembles import make_ensemble
from gapflow.fredholm import gap_curve_fredholm


def fredholm_e2(spec, s, order=64):
    """Oracle E_2 along the anchored family."""
    return np.exp([sol.log_det for sol in gap_curve_fredholm(spec, np.atleast_1d(s), order)])


@pytest.fixture
def gue2():
    return make_ensemble("gaussian", 2)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
