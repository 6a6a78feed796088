import numpy as np
import pytest

from numtabench.datasetio import scan_sources, validate_and_clean
from numtabench.synthetic import write_numta_like


@pytest.fixture(scope="session")
def synth_root(tmp_path_factory):
    """Two sources, 8 images per digit each (160 images)."""
    return write_numta_like(tmp_path_factory.mktemp("numta"), per_class=8, tags=("a", "c"), seed=3)


@pytest.fixture(scope="session")
def synth_manifest(synth_root):
    manifest, _ = validate_and_clean(scan_sources(synth_root, {"a", "c"}))
    return manifest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
