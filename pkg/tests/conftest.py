import numpy as np
import pytest

from uavedge.configio import load_config
from uavedge.scenario import HUavState, LUavState, SystemParams


@pytest.fixture(scope="session")
def default_setup():
    """Default scenario: params plus the 4-corner fleet."""
    return load_config(None)


@pytest.fixture()
def params(default_setup):
    return default_setup[0]


@pytest.fixture()
def luavs(default_setup):
    return [LUavState(**vars(u)) for u in default_setup[1]]


@pytest.fixture()
def huav(default_setup):
    return HUavState(**vars(default_setup[2]))


def make_luav(uid=0, x=500.0, y=500.0, cpu_hz=1e10, kappa=1e-27, mass_kg=4.0,
              tx_power_w=1.0, max_speed_mps=5.0, queue_j=0.0):
    return LUavState(id=uid, x=x, y=y, cpu_hz=cpu_hz, kappa=kappa,
                     mass_kg=mass_kg, tx_power_w=tx_power_w,
                     max_speed_mps=max_speed_mps, queue_j=queue_j)


def make_huav(x=500.0, y=500.0, cpu_hz=5e10, max_speed_mps=25.0):
    return HUavState(x=x, y=y, cpu_hz=cpu_hz, max_speed_mps=max_speed_mps)
