import numpy as np
import pytest

from hugsim.scene.camera import look_at_camera
from hugsim.scene.gaussians import GaussianSet


def random_gaussians(rng, n=50, sh_coeffs=1, n_classes=4, z_shift=4.0):
    """A cloud in front of the origin-facing camera."""
    mu = rng.normal(0.0, 1.0, (n, 3))
    mu[:, 2] += z_shift
    quat = rng.normal(size=(n, 4))
    quat /= np.linalg.norm(quat, axis=1, keepdims=True)
    return GaussianSet(mu, quat,
                       rng.uniform(0.05, 0.5, (n, 3)),
                       rng.uniform(0.0, 1.0, n),
                       rng.normal(0.0, 0.3, (n, sh_coeffs, 3)),
                       rng.normal(0.0, 1.0, (n, n_classes)),
                       validate=False)


def forward_camera(width=48, height=48, f=40.0):
    return look_at_camera(eye=np.zeros(3), target=np.array([0.0, 0.0, 1.0]),
                          width=width, height=height, f=f)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
