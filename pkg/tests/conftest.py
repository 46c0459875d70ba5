"""Session fixtures: the measure zoo at the sizes the test suite needs.

Heavy clouds are generated once per session.  Seeds are pinned so every
statistical assertion runs on a fixed draw; tolerances still carry the
Monte Carlo budget they were derived from.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

import cloudmeasure as cm
from cloudmeasure.generators import GeneratorSpec, generate

settings.register_profile("suite", deadline=None, max_examples=30)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def plane_100k():
    cloud = generate(GeneratorSpec(kind="plane", n=2, m=3, N=100_000, extent=1.0, seed=1))
    return cm.build_index(cloud)


@pytest.fixture(scope="session")
def plane_15():
    cloud = generate(GeneratorSpec(kind="plane", n=2, m=3, N=100_000, extent=1.5, seed=3))
    return cm.build_index(cloud)


@pytest.fixture(scope="session")
def sphere_2m():
    cloud = generate(GeneratorSpec(kind="sphere", n=2, m=3, N=2_000_000, extent=1.0, seed=21))
    return cm.build_index(cloud)


@pytest.fixture(scope="session")
def sphere_4m():
    cloud = generate(GeneratorSpec(kind="sphere", n=2, m=3, N=4_000_000, extent=1.0, seed=22))
    return cm.build_index(cloud)


@pytest.fixture(scope="session")
def cone_1m():
    cloud = generate(GeneratorSpec(kind="kp_cone", n=3, m=4, N=1_000_000, extent=1.0, seed=7))
    return cm.build_index(cloud)


@pytest.fixture(scope="session")
def cone_16m():
    cloud = generate(GeneratorSpec(kind="kp_cone", n=3, m=4, N=16_000_000, extent=1.4, seed=9))
    return cm.build_index(cloud)


@pytest.fixture(scope="session")
def holder_500k():
    cloud = generate(
        GeneratorSpec(
            kind="holder_graph", n=2, m=3, N=500_000, extent=1.0, seed=11,
            params={"beta0": 0.5, "amplitude": 0.1},
        )
    )
    return cm.build_index(cloud)


@pytest.fixture(scope="session")
def perturbed_200k():
    cloud = generate(
        GeneratorSpec(
            kind="perturbed_density", n=2, m=3, N=200_000, extent=1.5, seed=12,
            params={"c": 0.2, "alpha": 0.5},
        )
    )
    return cm.build_index(cloud)


@pytest.fixture(scope="session")
def perturbed_2m():
    cloud = generate(
        GeneratorSpec(
            kind="perturbed_density", n=2, m=3, N=2_000_000, extent=1.0, seed=13,
            params={"c": 0.3, "alpha": 0.5},
        )
    )
    return cm.build_index(cloud)


@pytest.fixture(scope="session")
def two_plane_cloud():
    """Base plane through 0 plus a parallel plane at height 0.25 with four
    times the weight: drives a large moment vector along the normal."""
    base = generate(GeneratorSpec(kind="plane", n=2, m=3, N=100_000, extent=1.5, seed=4))
    off = generate(GeneratorSpec(kind="plane", n=2, m=3, N=100_000, extent=1.5, seed=5))
    pts = np.concatenate([base.points, off.points + np.array([0.0, 0.0, 0.25])])
    ws = np.concatenate([base.weights, 4.0 * off.weights])
    cloud = cm.WeightedCloud(points=pts, weights=ws, n=2, meta={"generator": "two_plane"})
    return cm.build_index(cloud)


def mc_density_tolerance(count: int, floor: float = 0.02) -> float:
    """Monte Carlo tolerance budget for density ratios: 3 sigma with
    sigma ~ 1/sqrt(in-ball count), floored at the nominal 2 percent."""
    return max(floor, 3.0 / np.sqrt(max(count, 1)))


def ratio_sigma(inner_count: int, outer_count: int) -> float:
    """Approximate 1-sigma of a nested ball-mass ratio estimate."""
    return np.sqrt(max(1.0 / max(inner_count, 1) - 1.0 / max(outer_count, 1), 0.0))


def rigid_motion(cloud: cm.WeightedCloud, seed: int):
    """A random rotation + translation and the transformed cloud."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((cloud.m, cloud.m))
    Q, _ = np.linalg.qr(A)
    if np.linalg.det(Q) < 0:
        Q[:, 0] *= -1
    shift = rng.standard_normal(cloud.m)
    moved = cm.WeightedCloud(
        points=cloud.points @ Q.T + shift, weights=cloud.weights, n=cloud.n, meta=cloud.meta
    )
    return Q, shift, moved
