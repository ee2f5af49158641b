import numpy as np
import pytest

from robust_pursuit import envs


@pytest.fixture(scope="session")
def convex_env():
    return envs.load_fixture("convex")


@pytest.fixture(scope="session")
def lshape_env():
    return envs.load_fixture("lshape")


@pytest.fixture(scope="session")
def comb_env():
    return envs.load_fixture("comb")


@pytest.fixture(scope="session")
def rooms_env():
    return envs.load_fixture("rooms")


@pytest.fixture(scope="session")
def all_envs(convex_env, lshape_env, comb_env, rooms_env):
    return {
        "convex": convex_env,
        "lshape": lshape_env,
        "comb": comb_env,
        "rooms": rooms_env,
    }


def random_interior_point(env, rng, margin_factor=2.0):
    """Rejection-sample a point strictly inside the free space."""
    from robust_pursuit import geometry as geo

    xmin, ymin, xmax, ymax = env.shape.bounds
    margin = margin_factor * env.epsilon
    while True:
        p = np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])
        if geo.points_in_env(env, p[None, :], margin=margin)[0]:
            return p
