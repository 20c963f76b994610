import numpy as np
import pytest

from splitwire.synth import BundleSpec, generate

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def square_bundle():
    """The 4-wire, 0.45 m square bundle over a 10 m span, sigma 5 mm."""
    spec = BundleSpec(k=4, layout="square", spacing=0.45, span_length=10.0,
                      points_per_wire=1000, noise_sigma=0.005, seed=11)
    return spec, generate(spec)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def record():
    def _record(criterion, passed, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
