import math

import numpy as np
import pytest

import cloudmeasure as cm
from cloudmeasure.errors import DataFormatError
from cloudmeasure.generators import (
    GeneratorSpec,
    gen_kp_cone,
    gen_plane,
    generate,
    holder_graph_function,
    sphere_area,
)
from cloudmeasure.measure import Ball, unit_ball_volume

from conftest import mc_density_tolerance


@pytest.mark.parametrize(
    "kind,params",
    [
        ("plane", {}),
        ("sphere", {}),
        ("kp_cone", {}),
        ("holder_graph", {"beta0": 0.7, "amplitude": 0.05}),
        ("perturbed_density", {"c": 0.1, "alpha": 0.5}),
    ],
)
def test_generation_is_reproducible(kind, params):
    dims = {"kp_cone": (3, 4), "sphere": (2, 3)}.get(kind, (2, 3))
    spec = GeneratorSpec(kind=kind, n=dims[0], m=dims[1], N=2000, extent=1.0, params=params, seed=42)
    a, b = generate(spec), generate(spec)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.weights, b.weights)
    assert "ground_truth" in a.meta


def test_spec_validation_errors():
    with pytest.raises(DataFormatError):
        GeneratorSpec(kind="torus")
    with pytest.raises(DataFormatError, match="at least 1000"):
        GeneratorSpec(kind="plane", N=10)
    with pytest.raises(DataFormatError):
        GeneratorSpec(kind="plane", n=3, m=3)
    with pytest.raises(DataFormatError):
        GeneratorSpec(kind="plane", extent=-1.0)
    with pytest.raises(DataFormatError, match="n=3, m=4"):
        gen_kp_cone(GeneratorSpec(kind="kp_cone", n=2, m=3, N=2000))
    with pytest.raises(DataFormatError, match="even"):
        gen_kp_cone(GeneratorSpec(kind="kp_cone", n=3, m=4, N=2001))
    with pytest.raises(DataFormatError, match="beta0"):
        generate(
            GeneratorSpec(kind="holder_graph", N=2000, params={"beta0": 1.5, "amplitude": 0.1})
        )
    with pytest.raises(DataFormatError, match="n = m - 1"):
        generate(GeneratorSpec(kind="sphere", n=1, m=3, N=2000))


def test_plane_total_mass_exact():
    cloud = gen_plane(GeneratorSpec(kind="plane", n=2, m=3, N=5000, extent=1.3, seed=2))
    assert cloud.total_mass == pytest.approx(unit_ball_volume(2) * 1.3**2, rel=1e-12)


def test_plane_density_ratio_near_one(plane_100k):
    # Stratified radial sampling makes centered-ball masses nearly exact once
    # the ball spans a few radial strata; at the resolution edge (r = 0.05,
    # a fraction of one stratum) the Monte Carlo budget applies.
    for r in (0.1, 0.2, 0.5):
        assert cm.density_ratio(plane_100k, np.zeros(3), r) == pytest.approx(1.0, abs=0.02)
    count = len(cm.support_in_ball(plane_100k, Ball(np.zeros(3), 0.05)))
    tol = mc_density_tolerance(count)
    assert cm.density_ratio(plane_100k, np.zeros(3), 0.05) == pytest.approx(1.0, abs=tol)


def test_plane_moment_vector_symmetric(plane_100k):
    from cloudmeasure.moments import bootstrap_moment_sigma

    b = cm.moment_vector(plane_100k, np.zeros(3), 0.5)
    sigma = bootstrap_moment_sigma(plane_100k, np.zeros(3), 0.5, seed=1)
    assert np.linalg.norm(b) <= 3.0 * sigma + 1e-12


def test_sphere_cap_law(sphere_4m):
    # A ball of radius r centered on the unit sphere cuts a cap of area
    # exactly pi r^2, so the density ratio is 1 at every scale up to the
    # diameter.
    x = sphere_4m.cloud.points[12345]
    for r in (0.05, 0.1, 0.3, 0.6, 1.0):
        ratio = cm.density_ratio(sphere_4m, x, r)
        assert ratio == pytest.approx(1.0, abs=0.02), f"r={r}"


def test_sphere_doubling_flat(sphere_4m):
    x = sphere_4m.cloud.points[999]
    assert abs(cm.doubling_ratio(sphere_4m, x, 0.5, 0.8)) <= 0.01


def test_sphere_theta_small(sphere_4m):
    x = sphere_4m.cloud.points[777]
    th = cm.theta(sphere_4m, x, 0.05, resolution=2000)
    assert th.value <= 0.1


def test_cone_mass_law_origin(cone_1m):
    # One nappe: sqrt(2) * vol_3 * (r/sqrt(2))^3; both nappes give vol_3 r^3.
    total = cone_1m.cloud.total_mass
    assert total == pytest.approx(unit_ball_volume(3) * 1.0**3, rel=1e-12)
    for r in (0.2, 0.3, 0.45):
        count = len(cm.support_in_ball(cone_1m, Ball(np.zeros(4), r)))
        tol = mc_density_tolerance(count)
        assert cm.density_ratio(cone_1m, np.zeros(4), r) == pytest.approx(1.0, abs=tol)


def test_cone_mass_law_smooth_point(cone_1m):
    a = 0.5 / math.sqrt(2.0)
    x = np.array([a, 0.0, 0.0, a])  # |x| = 0.5, on the upper nappe
    for r in (0.125, 0.2):
        count = len(cm.support_in_ball(cone_1m, Ball(x, r)))
        tol = mc_density_tolerance(count)
        assert cm.density_ratio(cone_1m, x, r) == pytest.approx(1.0, abs=tol)


def test_cone_vertex_spectrum(cone_1m):
    pair = cm.moment_form(cone_1m, np.zeros(4), 0.3)
    assert np.allclose(pair.Q.eigenvalues, [0.5, 0.5, 0.5, 1.5], atol=0.05)


def test_holder_zero_amplitude_is_plane():
    spec = GeneratorSpec(
        kind="holder_graph", n=2, m=3, N=20_000, extent=1.0, seed=6,
        params={"beta0": 0.5, "amplitude": 0.0},
    )
    cloud = generate(spec)
    assert np.allclose(cloud.points[:, 2], 0.0)
    plane = gen_plane(GeneratorSpec(kind="plane", n=2, m=3, N=20_000, extent=1.0, seed=6))
    assert cloud.total_mass == pytest.approx(plane.total_mass, rel=1e-12)
    th = cm.theta(cloud, np.zeros(3), 0.5, resolution=2000)
    assert th.value <= 0.05  # sampling holes only


def test_holder_mass_matches_quadrature():
    spec = GeneratorSpec(
        kind="holder_graph", n=2, m=3, N=200_000, extent=1.0, seed=11,
        params={"beta0": 0.5, "amplitude": 0.1},
    )
    cloud = generate(spec)
    _, jac = holder_graph_function(spec)
    # Dense polar quadrature of the graph area element over the unit disk.
    nr, na = 400, 512
    r_nodes = (np.arange(nr) + 0.5) / nr
    a_nodes = 2.0 * np.pi * (np.arange(na) + 0.5) / na
    rr, aa = np.meshgrid(r_nodes, a_nodes, indexing="ij")
    pts = np.stack([rr * np.cos(aa), rr * np.sin(aa)], axis=-1).reshape(-1, 2)
    J = jac(pts)
    gram = np.einsum("pki,pkj->pij", J, J)
    gram[:, [0, 1], [0, 1]] += 1.0
    element = np.sqrt(np.linalg.det(gram)).reshape(nr, na)
    cell = (1.0 / nr) * (2.0 * np.pi / na)
    area = float(np.sum(element * rr * cell))
    assert cloud.total_mass == pytest.approx(area, rel=0.01)


def test_holder_beta_decay_slope(holder_500k):
    cloud = holder_500k.cloud
    x0 = cloud.points[int(np.argmin(np.linalg.norm(cloud.points[:, :2], axis=1)))]
    radii = 0.5 * (2.0 ** -0.25) ** np.arange(13)
    betas = np.array([cm.beta_inf(holder_500k, x0, r).value for r in radii])
    fit = cm.fit_beta_exponent(radii, betas)
    assert 0.35 <= fit.exponent <= 0.65


def test_perturbed_zero_strength_matches_plane():
    plane = gen_plane(GeneratorSpec(kind="plane", n=2, m=3, N=5000, extent=1.0, seed=8))
    flat = generate(
        GeneratorSpec(
            kind="perturbed_density", n=2, m=3, N=5000, extent=1.0, seed=8,
            params={"c": 0.0, "alpha": 0.5},
        )
    )
    assert flat.total_mass == pytest.approx(plane.total_mass, rel=1e-12)
    assert np.array_equal(flat.points, plane.points)


def test_perturbed_density_estimate_at_origin(perturbed_2m):
    radii = cm.reliable_radius_grid(perturbed_2m, np.zeros(3), 0.6)
    rep = cm.density_estimate(perturbed_2m, np.zeros(3), radii)
    assert rep.D == pytest.approx(1.0, abs=0.02)


def test_perturbed_doubling_exponent_recovered(perturbed_2m):
    # |R_t(0, r)| scales like r^alpha for the radial power density.
    radii = 0.6 * (2.0 ** -0.25) ** np.arange(9)
    profile = cm.doubling_profile(perturbed_2m, np.zeros(3), radii)
    truth = perturbed_2m.cloud.meta["ground_truth"]["alpha"]
    assert not profile.floor_limited
    assert profile.fitted_alpha == pytest.approx(truth, abs=0.15)


def test_sphere_area_values():
    assert sphere_area(3) == pytest.approx(4.0 * np.pi)
    assert sphere_area(2) == pytest.approx(2.0 * np.pi)
