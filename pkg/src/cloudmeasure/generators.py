"""Synthetic measure zoo with exact surface-mass weights and known ground truth.

Every generator is deterministic given its spec (including the seed):
randomness comes from counter-based Philox streams keyed by
(seed, purpose-tag, block-of-point-indices), so generation is reproducible
bit-for-bit and could be parallelized over blocks without changing output.
Weights always carry the exact local surface element, making ball masses
unbiased Monte Carlo estimates of the surface measure.

Low-dimensional samplers stratify the inverse-CDF uniforms over a jittered
grid (variance reduction for ball-count statistics); each sample remains
uniformly distributed on its domain, so estimators stay unbiased.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError
from .measure import WeightedCloud, unit_ball_volume

__all__ = [
    "GeneratorSpec",
    "generate",
    "gen_plane",
    "gen_sphere",
    "gen_kp_cone",
    "gen_holder_graph",
    "gen_perturbed_density",
    "sphere_area",
    "DENSITY_CATALOG",
]

_BLOCK = 1 << 16

# Purpose tags for stream splitting.
_TAG_UNIFORMS = 0
_TAG_EXTRAS = 1
_TAG_NORMALS = 2
_TAG_WAVES = 3

KINDS = ("plane", "sphere", "kp_cone", "holder_graph", "perturbed_density")


def sphere_area(m: int) -> float:
    """Surface area of the unit sphere S^(m-1) in R^m."""
    return 2.0 * math.pi ** (m / 2.0) / math.gamma(m / 2.0)


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters describing one zoo measure.

    kind   -- one of plane, sphere, kp_cone, holder_graph, perturbed_density
    n, m   -- intrinsic / ambient dimension
    N      -- sample count (>= 1000)
    extent -- bounding radius of the sampled patch
    params -- kind-specific extras (beta0/amplitude for holder_graph,
              density_id/c/alpha for perturbed_density)
    seed   -- root RNG seed
    """

    kind: str
    n: int = 2
    m: int = 3
    N: int = 100_000
    extent: float = 1.0
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataFormatError(f"unknown generator kind {self.kind!r}")
        if self.N < 1000:
            raise DataFormatError("N must be at least 1000")
        if not (0 < self.n < self.m):
            raise DataFormatError(f"need 0 < n < m, got n={self.n}, m={self.m}")
        if not (self.extent > 0):
            raise DataFormatError("extent must be positive")
        if not (0 <= self.seed < 2**63):
            raise DataFormatError("seed must be a nonnegative 63-bit integer")


def _stream(seed: int, tag: int, block: int) -> np.random.Generator:
    key = np.array([seed, (tag << 32) | block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _uniform_blocks(seed: int, tag: int, count: int, dims: int) -> np.ndarray:
    out = np.empty((count, dims), dtype=float)
    for b, lo in enumerate(range(0, count, _BLOCK)):
        hi = min(lo + _BLOCK, count)
        out[lo:hi] = _stream(seed, tag, b).random((hi - lo, dims))
    return out


def _normal_blocks(seed: int, tag: int, count: int, dims: int) -> np.ndarray:
    out = np.empty((count, dims), dtype=float)
    for b, lo in enumerate(range(0, count, _BLOCK)):
        hi = min(lo + _BLOCK, count)
        out[lo:hi] = _stream(seed, tag, b).standard_normal((hi - lo, dims))
    return out


def _stratified_uniforms(seed: int, count: int, dims: int) -> np.ndarray:
    """(count, dims) uniforms; the leading g^dims of them are jittered over a
    g x g x ... grid (one point per equal-measure cell), the remainder iid."""
    g = max(int(count ** (1.0 / dims)), 1)
    while (g + 1) ** dims <= count:
        g += 1
    n_grid = g**dims
    jitter = _uniform_blocks(seed, _TAG_UNIFORMS, n_grid, dims)
    cells = np.stack(
        np.unravel_index(np.arange(n_grid), (g,) * dims), axis=1
    ).astype(float)
    grid = (cells + jitter) / g
    if count > n_grid:
        extra = _uniform_blocks(seed, _TAG_EXTRAS, count - n_grid, dims)
        return np.concatenate([grid, extra], axis=0)
    return grid


def _ball_points(seed: int, count: int, n: int, radius: float) -> np.ndarray:
    """count points uniform on the n-ball of the given radius."""
    if n == 1:
        u = _stratified_uniforms(seed, count, 1)
        return radius * (2.0 * u - 1.0)
    if n == 2:
        u = _stratified_uniforms(seed, count, 2)
        rho = radius * np.sqrt(u[:, 0])
        phi = 2.0 * math.pi * u[:, 1]
        return np.stack([rho * np.cos(phi), rho * np.sin(phi)], axis=1)
    if n == 3:
        u = _stratified_uniforms(seed, count, 3)
        rho = radius * np.cbrt(u[:, 0])
        z = 2.0 * u[:, 1] - 1.0
        phi = 2.0 * math.pi * u[:, 2]
        s = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        return rho[:, None] * np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    u = _stratified_uniforms(seed, count, 1)
    rho = radius * u[:, 0] ** (1.0 / n)
    direction = _normal_blocks(seed, _TAG_NORMALS, count, n)
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    return rho[:, None] * direction


def _sphere_points(seed: int, count: int, m: int) -> np.ndarray:
    """count points uniform on the unit sphere S^(m-1)."""
    if m == 3:
        u = _stratified_uniforms(seed, count, 2)
        z = 2.0 * u[:, 0] - 1.0
        phi = 2.0 * math.pi * u[:, 1]
        s = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    direction = _normal_blocks(seed, _TAG_NORMALS, count, m)
    return direction / np.linalg.norm(direction, axis=1, keepdims=True)


def generate(spec: GeneratorSpec) -> WeightedCloud:
    """Dispatch to the generator named by ``spec.kind``."""
    return {
        "plane": gen_plane,
        "sphere": gen_sphere,
        "kp_cone": gen_kp_cone,
        "holder_graph": gen_holder_graph,
        "perturbed_density": gen_perturbed_density,
    }[spec.kind](spec)


def _base_meta(spec: GeneratorSpec) -> dict:
    return {
        "generator": spec.kind,
        "spec": {
            "kind": spec.kind,
            "n": spec.n,
            "m": spec.m,
            "N": spec.N,
            "extent": spec.extent,
            "params": dict(spec.params),
            "seed": spec.seed,
        },
    }


def gen_plane(spec: GeneratorSpec) -> WeightedCloud:
    """Uniform samples on an n-disk of radius ``extent`` inside the coordinate
    n-plane spanned by the first n axes; every weight is vol(disk)/N."""
    if spec.kind != "plane":
        raise DataFormatError("spec.kind must be 'plane'")
    base = _ball_points(spec.seed, spec.N, spec.n, spec.extent)
    pts = np.zeros((spec.N, spec.m))
    pts[:, : spec.n] = base
    mass = unit_ball_volume(spec.n) * spec.extent**spec.n
    w = np.full(spec.N, mass / spec.N)
    meta = _base_meta(spec)
    meta["ground_truth"] = {
        "tangent_axes": list(range(spec.n)),
        "density": 1.0,
        "singular_points": [],
    }
    return WeightedCloud(points=pts, weights=w, n=spec.n, meta=meta)


def gen_sphere(spec: GeneratorSpec) -> WeightedCloud:
    """Uniform samples on the unit sphere S^(m-1); weight = area/N.

    The measure is exactly uniform at scales up to the diameter: a ball of
    radius r centered on the sphere cuts a cap of area pi*r^2 when m = 3.
    """
    if spec.kind != "sphere":
        raise DataFormatError("spec.kind must be 'sphere'")
    if spec.n != spec.m - 1:
        raise DataFormatError("sphere requires n = m - 1")
    pts = _sphere_points(spec.seed, spec.N, spec.m)
    area = sphere_area(spec.m)
    w = np.full(spec.N, area / spec.N)
    meta = _base_meta(spec)
    meta["ground_truth"] = {"density": 1.0, "radius": 1.0, "singular_points": []}
    return WeightedCloud(points=pts, weights=w, n=spec.n, meta=meta)


def gen_kp_cone(spec: GeneratorSpec) -> WeightedCloud:
    """The double cone {x in R^4 : x4^2 = x1^2 + x2^2 + x3^2}, truncated to
    |x| <= extent.

    Base points u are uniform on the 3-ball of radius extent/sqrt(2); each u
    yields the antithetic pair (u, +|u|) and (u, -|u|).  The graph
    x4 = +-|u| has constant area element sqrt(2), so weights represent the
    3-dimensional surface mass exactly; total mass is vol_3 * extent^3.
    """
    if spec.kind != "kp_cone":
        raise DataFormatError("spec.kind must be 'kp_cone'")
    if spec.n != 3 or spec.m != 4:
        raise DataFormatError("kp_cone is fixed at n=3, m=4")
    if spec.N % 2 != 0:
        raise DataFormatError("kp_cone needs an even N (points come in nappe pairs)")
    half = spec.N // 2
    radius = spec.extent / math.sqrt(2.0)
    u = _ball_points(spec.seed, half, 3, radius)
    height = np.linalg.norm(u, axis=1)
    pts = np.empty((spec.N, 4))
    pts[0::2, :3] = u
    pts[0::2, 3] = height
    pts[1::2, :3] = u
    pts[1::2, 3] = -height
    nappe_mass = math.sqrt(2.0) * unit_ball_volume(3) * radius**3
    w = np.full(spec.N, 2.0 * nappe_mass / spec.N)
    meta = _base_meta(spec)
    meta["ground_truth"] = {
        "density": 1.0,
        "singular_points": [[0.0, 0.0, 0.0, 0.0]],
        "vertex_spectrum": [0.5, 0.5, 0.5, 1.5],
    }
    return WeightedCloud(points=pts, weights=w, n=3, meta=meta)


def _wave_directions(seed: int, levels: int, n: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    rng = _stream(seed, _TAG_WAVES, 0)
    v = rng.standard_normal((levels, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    w = rng.standard_normal((levels, k))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    return v, w


def holder_graph_function(spec: GeneratorSpec):
    """The lacunary graph map f and its Jacobian for a holder_graph spec.

    f(u) = sum_j A 2^(-j(1+beta0)) sin(2^j <u, v_j>) w_j, truncated once term
    amplitudes drop below 1e-9.  A classical construction whose graph is C^1
    with Hoelder-beta0 derivative, so one-sided flatness decays like r^beta0.
    Returns (f, jacobian) as vectorized callables over (N, n) arrays.
    """
    beta0 = float(spec.params.get("beta0", 0.5))
    amp = float(spec.params.get("amplitude", 0.1))
    if not (0.0 < beta0 <= 1.0):
        raise DataFormatError("beta0 must lie in (0, 1]")
    k = spec.m - spec.n
    if amp == 0.0:
        levels = 1
        coeffs = np.zeros(1)
    else:
        levels = max(1, int(math.ceil(math.log2(abs(amp) / 1e-9) / (1.0 + beta0))) + 1)
        j = np.arange(levels)
        coeffs = amp * 2.0 ** (-j * (1.0 + beta0))
    freqs = 2.0 ** np.arange(levels)
    v, w = _wave_directions(spec.seed, levels, spec.n, k)

    def f(u: np.ndarray) -> np.ndarray:
        phase = (np.atleast_2d(u) @ v.T) * freqs  # (N, J)
        return (coeffs * np.sin(phase)) @ w  # (N, k)

    def jacobian(u: np.ndarray) -> np.ndarray:
        phase = (np.atleast_2d(u) @ v.T) * freqs
        amp_cos = coeffs * freqs * np.cos(phase)  # (N, J)
        return np.einsum("pj,jk,jn->pkn", amp_cos, w, v)  # (N, k, n)

    return f, jacobian


def gen_holder_graph(spec: GeneratorSpec) -> WeightedCloud:
    """Graph of the lacunary map over an n-disk of radius ``extent``; weights
    carry the exact area element sqrt(det(I + Df^T Df)) of the truncated
    series."""
    if spec.kind != "holder_graph":
        raise DataFormatError("spec.kind must be 'holder_graph'")
    f, jac = holder_graph_function(spec)
    base = _ball_points(spec.seed, spec.N, spec.n, spec.extent)
    values = f(base)
    pts = np.concatenate([base, values], axis=1)
    J = jac(base)  # (N, k, n)
    gram = np.einsum("pki,pkj->pij", J, J)
    gram[:, np.arange(spec.n), np.arange(spec.n)] += 1.0
    area_element = np.sqrt(np.linalg.det(gram))
    cell = unit_ball_volume(spec.n) * spec.extent**spec.n / spec.N
    meta = _base_meta(spec)
    meta["ground_truth"] = {
        "beta0": float(spec.params.get("beta0", 0.5)),
        "amplitude": float(spec.params.get("amplitude", 0.1)),
        "base_axes": list(range(spec.n)),
        "singular_points": [],
    }
    return WeightedCloud(points=pts, weights=cell * area_element, n=spec.n, meta=meta)


def _radial_power_density(c: float, alpha: float):
    def density(y: np.ndarray) -> np.ndarray:
        return 1.0 + c * np.linalg.norm(np.atleast_2d(y), axis=1) ** alpha

    return density


DENSITY_CATALOG = {"radial_power": _radial_power_density}


def gen_perturbed_density(spec: GeneratorSpec) -> WeightedCloud:
    """Plane cloud whose weights are multiplied by a density from the catalog
    (default: D(y) = 1 + c |y|^alpha); the ground-truth exponent is recorded
    in the meta block."""
    if spec.kind != "perturbed_density":
        raise DataFormatError("spec.kind must be 'perturbed_density'")
    density_id = spec.params.get("density_id", "radial_power")
    if density_id not in DENSITY_CATALOG:
        raise DataFormatError(f"unknown density id {density_id!r}")
    c = float(spec.params.get("c", 0.2))
    alpha = float(spec.params.get("alpha", 0.5))
    plane_spec = GeneratorSpec(
        kind="plane", n=spec.n, m=spec.m, N=spec.N, extent=spec.extent, seed=spec.seed
    )
    cloud = gen_plane(plane_spec)
    density = DENSITY_CATALOG[density_id](c, alpha)
    d = density(cloud.points)
    meta = _base_meta(spec)
    meta["ground_truth"] = {
        "density_id": density_id,
        "c": c,
        "alpha": alpha,
        "tangent_axes": list(range(spec.n)),
        "singular_points": [],
    }
    return WeightedCloud(points=cloud.points, weights=cloud.weights * d, n=spec.n, meta=meta)
