import numpy as np
import pytest

from coverlens import _backend, _kernels_py

BACKENDS = ["python", "cython"]


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per kernel backend."""
    if request.param == "cython":
        if _backend.compiled is None:
            pytest.skip("compiled kernels not built")
        monkeypatch.setattr(_backend, "kernels", _backend.compiled)
    else:
        monkeypatch.setattr(_backend, "compiled", None)
        monkeypatch.setattr(_backend, "kernels", _kernels_py)
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def sine(freq, seconds=1.0, sr=22050, amp=1.0, phase=0.0):
    t = np.arange(int(round(seconds * sr))) / sr
    return amp * np.sin(2 * np.pi * freq * t + phase)


# lines recorded by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
