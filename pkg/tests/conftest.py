import numpy as np
import pytest

from npathsim import metrics
from npathsim.blocks import ReceiverConfig, build_receiver

F_LO = 500e6

# (criterion, "PASS"/"FAIL", detail) collected by the acceptance module
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, status, detail in sorted(ACCEPTANCE_LINES, key=lambda r: (int(r[0].split(".")[0]), r[0])):
        terminalreporter.write_line(f"criterion {label:<5} {status}  {detail}")


@pytest.fixture(scope="session")
def cfg():
    return ReceiverConfig()


@pytest.fixture(scope="session")
def rx_on(cfg):
    return build_receiver(cfg.with_(loop_enabled=True))


@pytest.fixture(scope="session")
def rx_off(cfg):
    return build_receiver(cfg.with_(loop_enabled=False))


@pytest.fixture(scope="session")
def plain_npath(cfg):
    return metrics._npath_system(cfg, 0.0, 0.0)


@pytest.fixture(scope="session")
def bands_off(rx_off):
    return metrics.baseband_harmonic_response(rx_off)


@pytest.fixture(scope="session")
def bands_on(rx_on):
    return metrics.baseband_harmonic_response(rx_on)


@pytest.fixture(scope="session")
def rf_off(rx_off):
    return metrics.rf_node_response(rx_off, np.linspace(300e6, 3e9, 91))


@pytest.fixture(scope="session")
def rf_on(rx_on):
    return metrics.rf_node_response(rx_on, np.linspace(300e6, 3e9, 91))


@pytest.fixture(scope="session")
def hrr_result(cfg):
    return metrics.hrr(cfg)


@pytest.fixture(scope="session")
def compression(cfg):
    powers = np.arange(-30.0, 20.5, 1.0)
    return {loop: metrics.blocker_compression(cfg.with_(loop_enabled=loop), powers_dbm=powers)
            for loop in (False, True)}


@pytest.fixture(scope="session")
def peak_shift(cfg):
    return metrics.peak_shift_study(cfg)
