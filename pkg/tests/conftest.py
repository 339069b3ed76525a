import numpy as np
import pytest

from ambit.bundle import ModelHead
from ambit.features import ReducedSpace


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_head(rng, n, f, scale=1.0):
    w = scale * rng.standard_normal((n, f))
    b = scale * rng.standard_normal(n)
    return ModelHead(w, b, [f"class-{k}" for k in range(n)])


def random_space(rng, n, f, bound=None, scale=1.0):
    space = ReducedSpace.from_head(random_head(rng, n, f, scale))
    return space if bound is None else space.with_bound(bound)


# acceptance criteria report one line each at the end of the run
ACCEPTANCE_RESULTS = []


def record_acceptance(name, ok, detail=""):
    ACCEPTANCE_RESULTS.append((name, ok, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        verdict = "PASS" if ok else "FAIL"
        suffix = f" ({detail})" if detail else ""
        terminalreporter.write_line(f"[{verdict}] {name}{suffix}")
