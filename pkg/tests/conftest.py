import numpy as np
import pytest

from tendonsim import models


@pytest.fixture(scope="session")
def planar_arm():
    return models.planar_two_link()


@pytest.fixture(scope="session")
def pulley():
    return models.pulley_pair()


@pytest.fixture(scope="session")
def desk_arm():
    return models.desk_arm()


@pytest.fixture(scope="session")
def big_arm():
    return models.arm_13dof()


def random_pose(model, rng, margin=0.05):
    """Uniform in-limit pose, shrunk away from the limits by ``margin``."""
    lo, hi = model.joint_lower, model.joint_upper
    span = hi - lo
    return rng.uniform(lo + margin * span, hi - margin * span)


def finite_difference_jacobian(f, theta, h=1e-6):
    """Central-difference Jacobian of ``f`` (vector-valued) at ``theta``."""
    theta = np.asarray(theta, dtype=float)
    f0 = np.asarray(f(theta))
    jac = np.empty(f0.shape + theta.shape)
    for j in range(theta.size):
        dp = theta.copy()
        dm = theta.copy()
        dp[j] += h
        dm[j] -= h
        jac[..., j] = (np.asarray(f(dp)) - np.asarray(f(dm))) / (2 * h)
    return jac
