import pytest
import torch

from headlift import ExtractionSpec, extract_bundle


@pytest.fixture
def toy_dataset():
    """Labeled synthetic split: 400 uniform-pixel images, 10 classes."""
    gen = torch.Generator().manual_seed(5)
    x = torch.rand((400, 3, 16, 16), generator=gen)
    y = torch.arange(400) % 10
    return x, y


@pytest.fixture(scope="session")
def toy_bundle(tmp_path_factory):
    """One extracted toy-cnn bundle shared across the suite."""
    gen = torch.Generator().manual_seed(5)
    x = torch.rand((400, 3, 16, 16), generator=gen)
    y = torch.arange(400) % 10
    out = tmp_path_factory.mktemp("bundles") / "toy"
    spec = ExtractionSpec("toy-cnn", out, train=(x, y), n_eval=100, seed=7)
    extract_bundle(spec)
    return out, spec, x, y


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
