import numpy as np
import pytest

from ewod import la
from ewod.mesh import ChannelGeometry, Electrode, build_channel_mesh


@pytest.fixture(params=la.available_backends())
def backend(request):
    prev = la.get_backend()
    la.set_backend(request.param)
    yield request.param
    la.set_backend(prev)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def move_geometry(V00: float = 20.0) -> ChannelGeometry:
    return ChannelGeometry(electrodes=(Electrode("bottom", 0.0, 5.0, V00),))


@pytest.fixture
def coarse_mesh():
    return build_channel_mesh(move_geometry(), 10, 2, 1)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
