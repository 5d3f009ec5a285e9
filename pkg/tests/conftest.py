import numpy as np
import pytest

from lteu_coex.config import default_rate_table
from lteu_coex.mac import MacParams
from lteu_coex.ratechan import FadingParams, doppler_from_speed

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(criterion: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(f"[{status}] {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)

REF_OMEGA_DB = 7.78
REF_DOPPLER_HZ = doppler_from_speed(3.0, 5.75e9)   # ~15.98 Hz


@pytest.fixture(scope="session")
def rates():
    return default_rate_table()


@pytest.fixture(scope="session")
def fading_iid():
    return FadingParams(mean_gain_db=REF_OMEGA_DB,
                        doppler_hz=REF_DOPPLER_HZ, user_count=10)


@pytest.fixture(scope="session")
def fading_niid():
    return FadingParams(mean_gain_db=REF_OMEGA_DB,
                        doppler_hz=REF_DOPPLER_HZ, user_count=10,
                        niid_ratio=1.1)


@pytest.fixture
def mac_reference():
    return MacParams(wifi_stations=6, lteu_cw=46)


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
