import numpy as np
import pytest

from combmemory.kernels import MediumParams, MemoryConfig
from combmemory.profiles import PulseTrainProfile
from combmemory.schmidt import build_envelope_matrix, schmidt_decompose
from combmemory.spopo_source import SpopoSource

# headline working point: 90 pulses, T0 = 0.1, T = 1e4, optical depth 10
N_HEAD, T0_HEAD, T_HEAD, L_HEAD, KAPPA_T = 90, 0.1, 1.0e4, 10.0, 0.1


@pytest.fixture(scope="session")
def headline_profile():
    return PulseTrainProfile(N_HEAD, T0_HEAD, T_HEAD)


@pytest.fixture(scope="session")
def headline_cfg(headline_profile):
    return MemoryConfig(headline_profile, MediumParams(L_HEAD))


@pytest.fixture(scope="session")
def headline_env(headline_cfg):
    return build_envelope_matrix(headline_cfg)


@pytest.fixture(scope="session")
def headline_modes(headline_env):
    return schmidt_decompose(headline_env)


@pytest.fixture(scope="session")
def headline_source(headline_profile):
    return SpopoSource(KAPPA_T, headline_profile)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# ---------------------------------------------------------------- acceptance summary

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    number, text = getattr(report, "criterion", (None, None))
    if number is None:
        return
    ok = _criteria.get(number, (text, True))[1] and report.outcome == "passed"
    _criteria[number] = (text, ok)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        text, ok = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {text}")
