import numpy as np
import pytest

from mtjtrng import nominal_config
from mtjtrng.config import load_device_profile
from mtjtrng.magnetics import MtjElectrical


@pytest.fixture(scope="session")
def device():
    return load_device_profile("device_c.toml")


@pytest.fixture(scope="session")
def electrical():
    return MtjElectrical(1000.0, 2500.0)


@pytest.fixture(scope="session")
def cfg2():
    return nominal_config(2)


@pytest.fixture(scope="session")
def cfg4():
    return nominal_config(4)


def random_unit(rng, n):
    v = rng.standard_normal((n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


_CRITERIA: list[str] = []


@pytest.fixture(scope="session")
def criterion_log():
    """Record one acceptance line; echoed immediately and in the terminal summary."""
    def log(number, passed, detail=""):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}" + (f"  ({detail})" if detail else "")
        _CRITERIA.append(line)
        print(line)
    return log


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
