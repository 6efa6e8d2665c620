import numpy as np
import pytest

from gazesynth.data import SimulatorProfile, TaskSettings, simulate_recording
from gazesynth.signal import GazeRecording


def make_recording(x, y, rate=1000.0, subject="S000", task="HSS", tx=None, ty=None, valid=None):
    return GazeRecording.from_positions(np.asarray(x, float), np.asarray(y, float), rate, subject,
                                        task, tx, ty, valid)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def hss_recording():
    prof = SimulatorProfile("S000", fixation_noise_std=0.02, seed=3)
    return simulate_recording(prof, TaskSettings(task="HSS", duration_s=3.0))


# criterion number -> summary line, filled in by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{n:2d}] {ACCEPTANCE[n]}")
