import warnings

import pytest

from aigrav.physics import PulseSequence

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def seq_ref():
    """Omega_R = 2 pi x 5 kHz, tau_R = 50 us, T = 10 ms."""
    return PulseSequence.from_pulse_duration(50e-6, 10e-3)


@pytest.fixture
def quiet_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
