import numpy as np
import pytest
import torch

from uavwpt.energy import default_uav, default_wpt
from uavwpt.policy import init_params


@pytest.fixture(scope="session")
def uav():
    return default_uav()


@pytest.fixture(scope="session")
def wpt():
    return default_wpt()


@pytest.fixture(scope="session")
def weak_wpt(wpt):
    """Link budget weak enough that hover charging takes minutes, not milliseconds."""
    return wpt.replace(P_t=40.0, G_t=42.0)


@pytest.fixture(scope="session")
def tiny_model():
    return init_params(seed=3, d_h=8, M=2, L=1)


@pytest.fixture(scope="session")
def small_model():
    return init_params(seed=5, d_h=32, M=4, L=2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _torch_seed():
    torch.manual_seed(0)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
