import numpy as np
import pytest

from spihet.geometry import desk_geometry
from spihet.shapes import cube, grid_for_geometry, make_volume, sphere


@pytest.fixture(scope="session")
def geom_small():
    """65x65 desk detector (fast unit tests)."""
    return desk_geometry(65, max_angle_deg=1.5)


@pytest.fixture(scope="session")
def geom_default():
    return desk_geometry(129)


@pytest.fixture(scope="session")
def cube_volume_small(geom_small):
    dq = geom_small.q_pixel_step()
    m = grid_for_geometry(geom_small.max_q(), dq)
    return make_volume(cube(42.0), m, dq)


@pytest.fixture(scope="session")
def sphere_volume_small(geom_small):
    dq = geom_small.q_pixel_step()
    m = grid_for_geometry(geom_small.max_q(), dq)
    return make_volume(sphere(42.0), m, dq)


@pytest.fixture(scope="session")
def cube_volume_default(geom_default):
    dq = geom_default.q_pixel_step()
    m = grid_for_geometry(geom_default.max_q(), dq)
    return make_volume(cube(42.0), m, dq)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
