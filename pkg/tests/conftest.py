import math

import numpy as np
import pytest

from irsdm.channel import LinkBudget, los_channels
from irsdm.config import load_config
from irsdm.geometry import AngleBox, CartesianCoord, Panel, Scene, Ula


def make_budget(noise_power=1e-11, los_ratio=0.9, rho=1e-3, squared=False):
    return LinkBudget(
        rho=rho,
        los_ratio_uav_irs=los_ratio,
        los_ratio_irs_rx=los_ratio,
        los_ratio_uav_rx=los_ratio,
        noise_power=noise_power,
        squared_irs_pathloss=squared,
    )


def make_small_scene(rng: np.random.Generator, k_u: int = 2, n: int = 6, panel=(3, 4)):
    """Compact random scene: low transmitter, receivers a few meters out."""
    h_r = 1.0
    h_u = rng.uniform(4.0, 7.0)
    dz = h_u - h_r
    box = AngleBox(
        depression_min=0.60 * math.pi,
        depression_max=0.88 * math.pi,
        azimuth_min=0.0,
        azimuth_max=0.5 * math.pi,
    )
    depression = rng.uniform(0.65 * math.pi, 0.85 * math.pi)
    azimuth = rng.uniform(0.1, 1.4)
    rho_h = dz * math.tan(math.pi - depression)
    uav = CartesianCoord(-rho_h * math.cos(azimuth), -rho_h * math.sin(azimuth), dz)
    users = tuple(
        CartesianCoord(rng.uniform(0.5, 5.0), rng.uniform(0.5, 5.0), -h_r) for _ in range(k_u)
    )
    eve = CartesianCoord(rng.uniform(0.5, 5.0), rng.uniform(0.5, 5.0), -h_r)
    return Scene(
        uav=uav,
        irs_origin=CartesianCoord(0.0, 0.0, 0.0),
        users=users,
        eve=eve,
        uav_height_m=h_u,
        irs_height_m=h_r,
        panel=Panel(m_y=panel[0], m_z=panel[1], spacing_m=0.04),
        ula=Ula(n=n, spacing_m=0.05),
        wavelength_m=0.006,
        angle_box=box,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def budget():
    return make_budget()


@pytest.fixture
def small_scene(rng):
    return make_small_scene(rng)


@pytest.fixture
def small_channels(small_scene, budget):
    return los_channels(small_scene, budget)


@pytest.fixture
def desk_cfg():
    return load_config(seed=123)
