from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from depthguide.camera import look_at
from depthguide.fields import Plane, SdfScene, Sphere

settings.register_profile("repo", max_examples=60, deadline=None)
settings.load_profile("repo")


@pytest.fixture
def frontal_camera():
    return look_at((0.0, 0.0, 3.0), (0.0, 0.0, 0.0), width=16, height=16, near=0.5, far=6.0)


@pytest.fixture
def sphere_scene():
    return SdfScene((Sphere((0.0, 0.0, 0.0), 0.5, albedo=(0.9, 0.2, 0.1)),), beta=0.002, sigma_max=500.0)


@pytest.fixture
def wall_scene():
    """Half-space whose surface is the plane z = 0, facing +z."""
    return SdfScene((Plane((0.0, 0.0, 0.0), (0.0, 0.0, 1.0), albedo=(0.2, 0.6, 0.4)),), beta=0.002, sigma_max=500.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
