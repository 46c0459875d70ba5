import math

import numpy as np
import pytest

import cloudmeasure as cm
from cloudmeasure.errors import EmptyRegionError, ResolutionExhaustedError
from cloudmeasure.flatness import _disk_pattern, smooth_cutoff
from cloudmeasure.measure import blow_up

from conftest import rigid_motion


def cone_vertex_beta_oracle(samples: int = 4000, planes: int = 3000, seed: int = 0) -> float:
    """Brute-force lower bound for one-sided flatness at the cone vertex.

    For any 3-plane through 0 with unit normal nu = (nu_u, nu_4), the sup of
    |<x, nu>| over cone points (u, +-|u|) with |u| <= R is R (|nu_u| + |nu_4|)
    >= R, attained by u parallel to nu_u with the favorable sign; minimizing
    over normals gives sup distance R = rho/sqrt(2) exactly.  Cross-check by
    a dense random plane family on exact cone points.
    """
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((samples, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    u *= rng.uniform(0, 1, samples)[:, None] ** (1 / 3)
    pts = np.concatenate(
        [
            np.concatenate([u, np.linalg.norm(u, axis=1, keepdims=True)], axis=1),
            np.concatenate([u, -np.linalg.norm(u, axis=1, keepdims=True)], axis=1),
        ]
    )
    pts /= math.sqrt(2.0)  # points of the cone inside the unit ball
    normals = rng.standard_normal((planes, 4))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    sups = np.max(np.abs(pts @ normals.T), axis=0)
    return float(sups.min())


def test_beta_plane_is_zero(plane_100k):
    fit = cm.beta_inf(plane_100k, np.zeros(3), 0.8)
    assert fit.value <= 1e-6
    truth = cm.AffinePlane(np.zeros(3), np.eye(3)[:2])
    assert cm.grassmann_gap(fit.plane, truth) <= 1e-6


def test_theta_plane_below_grid_noise(plane_100k):
    fit = cm.theta(plane_100k, np.zeros(3), 0.8, resolution=10_000)
    assert fit.value < 0.02
    assert fit.details["support_side"] <= 1e-6


def test_beta2_plane_is_zero(plane_100k):
    assert cm.beta2_smooth(plane_100k, np.zeros(3), 0.2).value <= 1e-6


def test_empty_ball_errors(plane_100k):
    far = np.array([50.0, 0.0, 0.0])
    with pytest.raises(EmptyRegionError):
        cm.beta_inf(plane_100k, far, 0.1)
    with pytest.raises(EmptyRegionError):
        cm.theta(plane_100k, far, 0.1)
    with pytest.raises(EmptyRegionError):
        cm.beta2_smooth(plane_100k, far, 0.1)


def test_cone_vertex_beta_certified(cone_1m):
    # analytic value: the best plane leaves sup distance rho/sqrt(2);
    # sampled sups are biased low, never high.
    oracle = cone_vertex_beta_oracle()
    assert oracle >= 0.4
    fit = cm.beta_inf(cone_1m, np.zeros(4), 0.3)
    assert 0.4 <= fit.value <= 1.0 / math.sqrt(2.0) + 1e-9
    assert fit.value == pytest.approx(1.0 / math.sqrt(2.0), abs=0.05)
    assert fit.details["jackknife_value"] >= fit.value


def test_cone_vertex_theta_scale_invariant(cone_1m):
    vals = []
    for r in (0.2, 0.3, 0.45):
        v = cm.theta(cone_1m, np.zeros(4), r, resolution=2000).value
        assert 0.4 <= v <= 1.5
        vals.append(v)
    assert max(vals) - min(vals) <= 0.15  # the cone is scale invariant
    # the symmetric plane x4 = 0 certifies theta <= sqrt(2) in the continuum
    assert max(vals) <= math.sqrt(2.0) + 0.05


def test_theta_bounded_by_two(cone_1m, plane_100k):
    for mu, x, r in ((cone_1m, np.zeros(4), 0.3), (plane_100k, np.zeros(3), 0.5)):
        assert cm.theta(mu, x, r, resolution=1000).value <= 2.0 + 1e-9


def test_cone_vertex_beta2_scale_invariant(cone_1m):
    a = cm.beta2_smooth(cone_1m, np.zeros(4), 0.1).value
    b = cm.beta2_smooth(cone_1m, np.zeros(4), 0.2).value
    assert a >= 0.2 and b >= 0.2
    assert abs(a - b) / max(a, b) <= 0.1


def test_beta_le_theta_on_profiles(holder_500k, cone_1m):
    prof = cm.flatness_profile(
        holder_500k, np.zeros(3), [0.5, 0.3, 0.2], resolution=2000
    )
    for rec in prof.scales:
        assert rec.beta <= rec.theta + 1e-9
        assert rec.beta2 >= 0.0
    prof_cone = cm.flatness_profile(cone_1m, np.zeros(4), [0.3, 0.2], resolution=1000)
    for rec in prof_cone.scales:
        assert rec.beta <= rec.theta + 1e-9


def test_holder_decay_slopes(holder_500k):
    cloud = holder_500k.cloud
    x0 = cloud.points[int(np.argmin(np.linalg.norm(cloud.points[:, :2], axis=1)))]
    radii = 0.5 * (2.0 ** -0.25) ** np.arange(13)
    prof = cm.flatness_profile(holder_500k, x0, radii, resolution=2000)
    assert prof.fits["beta"].exponent == pytest.approx(0.5, abs=0.15)
    assert prof.fits["beta2"].exponent == pytest.approx(0.5, abs=0.2)
    assert not prof.fits["beta"].floor_limited


def test_profile_flags_floor_on_plane(plane_100k):
    prof = cm.flatness_profile(plane_100k, np.zeros(3), [0.6, 0.45, 0.3], resolution=1000)
    assert prof.fits["beta"].floor_limited or np.all(prof.values("beta") < 1e-6)


def test_scale_covariance_bitwise(holder_500k):
    x0, r = np.zeros(3), 0.3
    cloud = holder_500k.cloud
    nu = blow_up(cloud, x0, r)  # mass-normalized; sup functionals ignore weights
    assert (
        cm.theta(cloud, x0, r, resolution=2000).value
        == cm.theta(nu, np.zeros(3), 1.0, resolution=2000).value
    )
    assert cm.beta_inf(cloud, x0, r).value == cm.beta_inf(nu, np.zeros(3), 1.0).value
    b2a = cm.beta2_smooth(cloud, x0, r / 3.0).value
    b2b = cm.beta2_smooth(
        blow_up(cloud, x0, r / 3.0, normalization="scale"), np.zeros(3), 1.0
    ).value
    assert abs(b2a - b2b) <= 1e-9


def test_rigid_motion_invariance(holder_500k):
    cloud = holder_500k.cloud
    x0 = np.zeros(3)
    Q_, t, moved = rigid_motion(cloud, seed=5)
    y0 = Q_ @ x0 + t
    assert abs(
        cm.theta(cloud, x0, 0.3, resolution=2000).value
        - cm.theta(moved, y0, 0.3, resolution=2000).value
    ) <= 1e-9
    assert abs(cm.beta_inf(cloud, x0, 0.3).value - cm.beta_inf(moved, y0, 0.3).value) <= 1e-9
    assert abs(
        cm.beta2_smooth(cloud, x0, 0.1).value - cm.beta2_smooth(moved, y0, 0.1).value
    ) <= 1e-9


def test_beta2_closed_form_beats_random_planes(holder_500k):
    # the eigenplane minimizer is exact for the L2 objective: no random
    # affine plane can do better
    from cloudmeasure.flatness import smooth_cutoff as cutoff
    from cloudmeasure.geometry import plane_distances
    from cloudmeasure.measure import Ball, support_indices_in_ball

    x, r = np.zeros(3), 0.2
    fit = cm.beta2_smooth(holder_500k, x, r)
    cloud = holder_500k.cloud
    idx = support_indices_in_ball(holder_500k, Ball(x, 3 * r))
    pts, w = cloud.points[idx], cloud.weights[idx]
    phi = cutoff(np.linalg.norm(pts - x, axis=1) / r)
    rng = np.random.default_rng(77)
    best_random = np.inf
    for _ in range(10_000):
        plane = cm.AffinePlane(
            x + 0.05 * rng.standard_normal(3), rng.standard_normal((2, 3))
        )
        val = math.sqrt(float(np.sum(w * phi * plane_distances(pts, plane) ** 2)) / r**4)
        best_random = min(best_random, val)
    assert fit.value <= best_random + 1e-12


def test_classify_plane_regular(plane_100k):
    radii = 0.6 * (2.0 ** -0.25) ** np.arange(5)
    rep = cm.classify_points(plane_100k, [np.zeros(3)], 0.1, radii, resolution=1000)
    assert rep.labels == ("regular",)


def test_classify_sphere_regular(sphere_2m):
    x = sphere_2m.cloud.points[100]
    radii = 0.2 * (2.0 ** -0.25) ** np.arange(5)
    rep = cm.classify_points(sphere_2m, [x], 0.3, radii, resolution=1000)
    assert rep.labels == ("regular",)


def test_classify_requires_valid_eta(plane_100k):
    with pytest.raises(ValueError):
        cm.classify_points(plane_100k, [np.zeros(3)], 1.5, [0.3, 0.2])


def test_fit_beta_exponent_synthetic():
    radii = 0.5 * (2.0 ** -0.25) ** np.arange(10)
    fit = cm.fit_beta_exponent(radii, radii**0.7)
    assert fit.exponent == pytest.approx(0.7, abs=1e-6)
    assert fit.ci_low <= 0.7 <= fit.ci_high
    flat = cm.fit_beta_exponent(radii, np.full_like(radii, 0.5))
    assert flat.exponent == pytest.approx(0.0, abs=0.02)
    with pytest.raises(ResolutionExhaustedError, match="dynamic range"):
        cm.fit_beta_exponent(radii[:4], radii[:4] ** 0.5)
    with pytest.raises(ResolutionExhaustedError):
        cm.fit_beta_exponent(radii, np.full_like(radii, 1e-12), noise_floor=1e-9)


def test_theta_resolution_convergence(holder_500k):
    x0 = np.zeros(3)
    v1 = cm.theta(holder_500k, x0, 0.4, resolution=5000).value
    v2 = cm.theta(holder_500k, x0, 0.4, resolution=10_000).value
    assert abs(v1 - v2) / v2 < 0.05


def test_cone_blow_up_at_smooth_point_flattens():
    # a fresh wide cone so the smooth point has low curvature; the
    # mass-normalized blow-up at shrinking radii looks like a plane
    from cloudmeasure.generators import GeneratorSpec, generate

    cone = generate(GeneratorSpec(kind="kp_cone", n=3, m=4, N=4_000_000, extent=4.0, seed=17))
    idx = cm.build_index(cone)
    a = 3.0 / math.sqrt(2.0)
    x = np.array([a, 0.0, 0.0, a])  # |x| = 3, curvature ~ 1/3
    vals = []
    for r in (0.8, 0.4):
        nu = blow_up(idx, x, r)
        vals.append(cm.beta2_smooth(nu, np.zeros(4), 1.0).value)
    assert vals[-1] < vals[0]  # flattens as the scale shrinks
    assert vals[-1] < 0.05


def test_smooth_cutoff_shape():
    s = np.array([0.0, 1.0, 2.0, 2.5, 3.0, 4.0])
    out = smooth_cutoff(s)
    assert np.allclose(out[:3], 1.0)
    assert 0.0 < out[3] < 1.0
    assert out[4] == 0.0 and out[5] == 0.0
    band = smooth_cutoff(np.linspace(2.0, 3.0, 101))
    assert np.all(np.diff(band) <= 1e-12)  # monotone ramp
    assert band[0] == 1.0 and band[-1] == 0.0


def test_disk_pattern_properties():
    for n in (1, 2, 3):
        pat = _disk_pattern(n, 2000)
        assert pat.shape[0] >= 2000
        assert np.all(np.einsum("ij,ij->i", pat, pat) <= 1.0 + 1e-12)
        # closed under full sign flips (hyperoctahedral subgroup spot check)
        flipped = np.unique(-pat, axis=0)
        assert np.array_equal(np.unique(pat, axis=0), flipped)


def test_profile_serialization(holder_500k):
    prof = cm.flatness_profile(holder_500k, np.zeros(3), [0.4, 0.3], resolution=1000)
    d = prof.to_dict(center_id=3)
    assert d["center_id"] == 3
    assert set(d["scales"][0]) == {"r", "theta", "beta", "beta2", "plane"}
    assert "beta" in d["fits"]
