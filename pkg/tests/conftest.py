import numpy as np
import pytest

from wirefit.geometry import Camera
from wirefit.synth import make_cube_scene


@pytest.fixture
def identity_camera():
    """fx=fy=960, principal point at image center, identity pose."""
    K = np.array([[960.0, 0.0, 256.0], [0.0, 960.0, 256.0], [0.0, 0.0, 1.0]])
    return Camera(intrinsics=K, rotation=np.eye(3), translation=np.zeros(3),
                  width=512, height=512)


@pytest.fixture(scope="session")
def cube_scene():
    return make_cube_scene(n_views=20, seed=0)


@pytest.fixture(scope="session")
def small_cube_scene():
    """Low-resolution cube scene for ray-level tests."""
    return make_cube_scene(n_views=4, resolution=96, seed=0)
