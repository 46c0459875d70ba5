import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import cloudmeasure as cm
from cloudmeasure.doubling import default_t_grid, density_csv, doubling_csv
from cloudmeasure.errors import EmptyRegionError, ResolutionExhaustedError
from cloudmeasure.measure import Ball, support_in_ball

from conftest import ratio_sigma


def in_ball_count(mu, x, r):
    return len(support_in_ball(mu, Ball(np.asarray(x, dtype=float), r)))


def perturbed_mass(rho, c, alpha, n=2):
    """Closed form for the radial power density on an n-plane, by polar
    integration: mu(B(0, rho)) = vol_n rho^n (1 + c * n/(n+alpha) * rho^alpha)."""
    from cloudmeasure.measure import unit_ball_volume

    return unit_ball_volume(n) * rho**n * (1.0 + c * n / (n + alpha) * rho**alpha)


def perturbed_R(t, r, c, alpha, n=2):
    num = perturbed_mass(t * r, c, alpha, n)
    den = perturbed_mass(r, c, alpha, n)
    return num / den - t**n


def test_doubling_ratio_t_one_is_zero(plane_100k):
    assert cm.doubling_ratio(plane_100k, np.zeros(3), 1.0, 0.4) == 0.0


def test_doubling_ratio_domain_checks(plane_100k):
    with pytest.raises(ValueError):
        cm.doubling_ratio(plane_100k, np.zeros(3), 1.5, 0.4)
    with pytest.raises(EmptyRegionError, match="not in support"):
        cm.doubling_ratio(plane_100k, np.array([40.0, 0, 0]), 0.5, 0.1)


def test_plane_doubling_ratio_within_noise(plane_100k):
    for t in (0.5, 0.75):
        r = 0.5
        val = cm.doubling_ratio(plane_100k, np.zeros(3), t, r)
        sigma = t**2 * ratio_sigma(
            in_ball_count(plane_100k, np.zeros(3), t * r),
            in_ball_count(plane_100k, np.zeros(3), r),
        )
        assert abs(val) <= 3.0 * sigma + 1e-4


def test_doubling_ratio_lower_bound_property():
    rng = np.random.default_rng(100)
    pts = rng.standard_normal((2000, 3))
    cloud = cm.WeightedCloud(points=pts, weights=rng.uniform(0.5, 2, 2000), n=2, meta={})
    for t in (0.3, 0.5, 0.9):
        val = cm.doubling_ratio(cloud, np.zeros(3), t, 1.0)
        assert val >= -(t**2)


def test_consistency_identity_with_density_ratio(perturbed_200k):
    # density_ratio(x, tr)/density_ratio(x, r) == (R_t + t^n)/t^n on the same
    # masses -- pure algebra, so it must hold to float precision.
    x = np.zeros(3)
    t, r = 0.5, 0.4
    lhs = cm.density_ratio(perturbed_200k, x, t * r) / cm.density_ratio(perturbed_200k, x, r)
    rhs = (cm.doubling_ratio(perturbed_200k, x, t, r) + t**2) / t**2
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_telescope_bound_values():
    assert cm.telescope_bound(1.0, 0.5, 2, 0.1) == pytest.approx(2.0)
    # geometric sum collapses to 1 as n grows
    assert cm.telescope_bound(1.0, 0.5, 400, 0.1) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        cm.telescope_bound(1.0, 0.5, 2, 0.7)
    with pytest.raises(ValueError):
        cm.telescope_bound(-1.0, 0.5, 2, 0.1)


def test_telescoped_doubling_bound_on_perturbed(perturbed_200k):
    # Chained bound: |R_tau(0, r)| <= C_K/(1 - 2^(-n/2)) * r^alpha for
    # tau < 1/2, with C_K = c * n/(n+alpha) from the polar closed form.
    c, alpha, n = 0.2, 0.5, 2
    C_K = c * n / (n + alpha)
    bound = cm.telescope_bound(C_K, alpha, n, 0.1)
    assert bound == pytest.approx(C_K / (1 - 2 ** (-1.0)), rel=1e-12)
    tau = 0.1
    for r in (0.5, 0.6, 0.7):
        val = cm.doubling_ratio(perturbed_200k, np.zeros(3), tau, r)
        sigma = tau**2 * ratio_sigma(
            in_ball_count(perturbed_200k, np.zeros(3), tau * r),
            in_ball_count(perturbed_200k, np.zeros(3), r),
        )
        assert abs(val) <= bound * r**alpha + 3.0 * sigma


def test_perturbed_closed_form_matches_quadrature_and_data(perturbed_200k):
    c, alpha = 0.2, 0.5
    # numeric polar quadrature cross-checks the closed form
    rho = 0.37
    s = np.linspace(0, rho, 20001)[1:]
    quad = 2 * np.pi * np.trapz((1 + c * s**alpha) * s, s)
    assert perturbed_mass(rho, c, alpha) == pytest.approx(quad, rel=1e-6)
    # Monte Carlo agreement within 3 sigma
    t, r = 0.5, 0.5
    expected = perturbed_R(t, r, c, alpha)
    observed = cm.doubling_ratio(perturbed_200k, np.zeros(3), t, r)
    sigma = t**2 * ratio_sigma(
        in_ball_count(perturbed_200k, np.zeros(3), t * r),
        in_ball_count(perturbed_200k, np.zeros(3), r),
    )
    assert observed == pytest.approx(expected, abs=3.0 * sigma + 1e-4)


def test_density_ratio_plane_and_sphere(plane_100k, sphere_2m):
    assert cm.density_ratio(plane_100k, np.zeros(3), 0.3) == pytest.approx(1.0, abs=0.02)
    x = sphere_2m.cloud.points[4242]
    # cap law still exact beyond the unit scale
    assert cm.density_ratio(sphere_2m, x, 1.5) == pytest.approx(1.0, abs=0.02)
    with pytest.raises(ValueError):
        cm.density_ratio(plane_100k, np.zeros(3), 0.0)
    assert cm.density_ratio(plane_100k, np.array([30.0, 0, 0]), 0.1) == 0.0


def test_density_estimate_zoo(plane_100k, perturbed_200k, cone_1m):
    radii = cm.reliable_radius_grid(plane_100k, np.zeros(3), 0.5)
    assert cm.density_estimate(plane_100k, np.zeros(3), radii).D == pytest.approx(1.0, abs=0.02)
    y0 = np.array([1.0, 0.0, 0.0])
    radii = cm.reliable_radius_grid(perturbed_200k, y0, 0.4)
    assert cm.density_estimate(perturbed_200k, y0, radii).D == pytest.approx(1.2, rel=0.03)
    radii = cm.reliable_radius_grid(cone_1m, np.zeros(4), 0.45)
    assert cm.density_estimate(cone_1m, np.zeros(4), radii).D == pytest.approx(1.0, abs=0.02)


def test_density_estimate_resolution_error(plane_100k):
    with pytest.raises(ResolutionExhaustedError, match="resolution exhausted"):
        cm.density_estimate(plane_100k, np.zeros(3), np.array([0.5, 0.01]))


def test_reliable_radius_grid_floor(plane_100k):
    grid = cm.reliable_radius_grid(plane_100k, np.zeros(3), 0.5, min_count=500)
    assert np.all(np.diff(grid) < 0)
    assert in_ball_count(plane_100k, np.zeros(3), grid[-1]) >= 500
    with pytest.raises(ResolutionExhaustedError):
        cm.reliable_radius_grid(plane_100k, np.zeros(3), 1e-4)


def test_holder_log_density_constant_sentinel(plane_100k):
    rng = np.random.default_rng(5)
    pts = plane_100k.cloud.points
    ids = rng.choice(np.flatnonzero(np.linalg.norm(pts[:, :2], axis=1) < 0.4), size=12)
    pairs = [(pts[i], pts[j]) for i in ids[:6] for j in ids[6:]]
    fit = cm.holder_log_density(plane_100k, np.asarray(pairs), radii=0.4 * 2.0 ** (-np.arange(5) / 4))
    assert fit.constant_density
    assert math.isinf(fit.exponent)


def test_holder_log_density_perturbed_slope(perturbed_2m):
    # Centers along a ray from the density's singular point: pair separation
    # then tracks the radial offset, and |log D(x) - log D(y)| scales between
    # the sqrt regime near 0 and the Lipschitz regime away from it.
    s_values = 0.8 * 2.0 ** (-np.arange(11) / 2.0)
    centers = np.stack([s_values, np.zeros_like(s_values), np.zeros_like(s_values)], axis=1)
    pairs = [
        (centers[i], centers[j])
        for i in range(len(centers))
        for j in range(i + 1, len(centers))
    ]
    radii = 0.1 * 2.0 ** (-np.arange(6) / 4)
    fit = cm.holder_log_density(perturbed_2m, np.asarray(pairs), radii=radii)
    assert not fit.constant_density
    # guaranteed regularity exponent of log D is at least alpha/(1+alpha) = 1/3
    assert fit.exponent >= 0.3


def test_holder_log_density_two_plane_gap():
    from cloudmeasure.generators import GeneratorSpec, gen_plane

    a = gen_plane(GeneratorSpec(kind="plane", n=2, m=3, N=50_000, extent=1.0, seed=31))
    b = gen_plane(GeneratorSpec(kind="plane", n=2, m=3, N=200_000, extent=2.0, seed=32))
    pts = np.concatenate([a.points, b.points + np.array([0.0, 0.0, 2.0])])
    ws = np.concatenate([a.weights, 2.0 * b.weights])
    cloud = cm.build_index(cm.WeightedCloud(points=pts, weights=ws, n=2, meta={}))
    lows = np.array([[x, y, 0.0] for x in (-0.2, 0.0, 0.2) for y in (-0.1, 0.1)])
    offsets = np.array([0.0, 0.4, 0.8, 1.2])
    pairs = []
    for low in lows:
        for off in offsets:
            high = low + np.array([off, 0.0, 2.0])
            pairs.append((low, high))
    radii = 0.3 * 2.0 ** (-np.arange(5) / 4)
    fit = cm.holder_log_density(cloud, np.asarray(pairs), radii=radii)
    # the gap log D = log 2 is constant while separations vary
    assert abs(fit.exponent) <= 0.3
    assert math.exp(fit.log_constant) == pytest.approx(math.log(2.0), rel=0.3)


def test_doubling_profile_structure(perturbed_200k):
    radii = 0.5 * 2.0 ** (-np.arange(6) / 4)
    prof = cm.doubling_profile(perturbed_200k, np.zeros(3), radii)
    assert prof.R.shape == (6, default_t_grid().size)
    assert np.all(prof.R[:, -1] == 0.0)  # t = 1 column
    assert np.all(np.diff(prof.radii) < 0)


def test_csv_exports(perturbed_200k):
    radii = 0.5 * 2.0 ** (-np.arange(4) / 4)
    prof = cm.doubling_profile(perturbed_200k, np.zeros(3), radii)
    rep = cm.density_estimate(perturbed_200k, np.zeros(3), radii)
    dcsv = doubling_csv([prof], ids=["p0"])
    assert dcsv.splitlines()[0] == "x_id,r,t,R_t"
    assert len(dcsv.splitlines()) == 1 + 4 * default_t_grid().size
    rcsv = density_csv([rep], ids=["p0"])
    assert rcsv.splitlines()[0] == "x_id,r,ratio"
    assert len(rcsv.splitlines()) == 1 + 4


@given(st.floats(min_value=0.2, max_value=0.9))
def test_R_t_identity_on_uniform_grid_cloud(t):
    # deterministic 1-d lattice cloud: masses are exact counts
    pts = np.stack([np.linspace(-1, 1, 4001), np.zeros(4001)], axis=1)
    cloud = cm.WeightedCloud(points=pts, weights=np.full(4001, 2.0 / 4000), n=1, meta={})
    val = cm.doubling_ratio(cloud, np.zeros(2), t, 1.0)
    assert abs(val) <= 2.0 / (4000 * 1.0)  # quantization of the lattice
