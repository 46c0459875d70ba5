"""Flatness functionals of a weighted cloud at a center and scale.

Three functionals, all minimized over candidate n-planes:

* ``beta_inf``  -- one-sided: sup of support distances to a plane THROUGH the
  center, normalized by the radius.
* ``theta``     -- bilateral: adds the sup of distances from the plane-disk to
  the support, so holes count too.  The disk side is discretized by a
  quasi-uniform pattern; its point count is the ``resolution`` parameter.
* ``beta2_smooth`` -- a smooth L2 functional with a C-infinity radial cutoff;
  its minimizing plane is NOT constrained through the center and comes in
  closed form from the weighted second-moment matrix.

The sup-type optimizers start from the moment-form eigenplane and refine by
coordinate descent on the Grassmannian: 1-D rotations in the 2-planes spanned
by (tangent, normal) frame pairs, at most ``sweeps`` full sweeps or until a
sweep improves by less than ``stall`` (relative).  Sup statistics on sampled
supports are biased low; jackknife-corrected values are reported alongside
the raw ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import permutations, product

import numpy as np

from .errors import EmptyRegionError, ResolutionExhaustedError
from .fitting import bootstrap_slope_ci, trimmed_loglog_fit
from .geometry import AffinePlane, orthonormal_complement, sym_eigen
from .measure import Ball, _resolve, support_indices_in_ball, unit_ball_volume

__all__ = [
    "PlaneFitResult",
    "FlatnessProfile",
    "ScaleRecord",
    "ClassificationReport",
    "ExponentFit",
    "beta_inf",
    "theta",
    "beta2_smooth",
    "flatness_profile",
    "classify_points",
    "fit_beta_exponent",
    "smooth_cutoff",
]

_OPT_POINT_CAP = 4000
_OPT_PATTERN_CAP = 512
_ANGLE_COARSE = 17
_ANGLE_TOL = 3e-11


def smooth_cutoff(s: np.ndarray) -> np.ndarray:
    """C-infinity radial cutoff: 1 on [0, 2], 0 beyond 3, exp-based ramp on
    [2, 3].  Fixed once so smooth-flatness values are reproducible."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    out[s <= 2.0] = 1.0
    band = (s > 2.0) & (s < 3.0)
    if np.any(band):
        u = 3.0 - s[band]  # in (0, 1)
        g_u = np.exp(-1.0 / u)
        g_cu = np.exp(-1.0 / (1.0 - u))
        out[band] = g_u / (g_u + g_cu)
    return out


@lru_cache(maxsize=32)
def _disk_pattern(n: int, resolution: int) -> np.ndarray:
    """Quasi-uniform pattern on the closed unit n-ball, closed under signed
    coordinate permutations.

    Closure under the hyperoctahedral group makes the pattern invariant to
    the order/sign ambiguities of the in-plane frame, which keeps the
    discretized plane-side sup equivariant under rigid motions of the data.
    Rows are stored in a fixed pseudorandom order so prefixes are usable as
    reduced-resolution subsets.
    """
    from scipy.stats import qmc

    perms = list(permutations(range(n)))
    signs = np.array(list(product((1.0, -1.0), repeat=n)))

    def orbit_closure(base: np.ndarray) -> np.ndarray:
        pieces = []
        for perm in perms:
            permuted = base[:, perm]
            for sgn in signs:
                pieces.append(permuted * sgn)
        return np.unique(np.concatenate(pieces, axis=0), axis=0)

    sob = qmc.Sobol(d=n, scramble=False)
    collected: list[np.ndarray] = []
    pattern = np.empty((0, n))
    orbit = len(perms) * len(signs)
    ball_fraction = unit_ball_volume(n) / 2.0**n
    # Duplicate orbits (equal/zero coordinates, swapped pairs) shrink the
    # closure, so grow the base until the unique pattern is large enough.
    while pattern.shape[0] < resolution:
        short = resolution - pattern.shape[0]
        chunk = 1 << max(6, math.ceil(math.log2(max(short / (orbit * ball_fraction), 2.0))))
        keep_draw = sob.random(chunk)
        keep = keep_draw[np.einsum("ij,ij->i", keep_draw, keep_draw) <= 1.0]
        if keep.size:
            collected.append(keep)
        pattern = orbit_closure(np.concatenate(collected, axis=0))
    rng = np.random.Generator(np.random.Philox(key=np.array([n, 0xD15C], dtype=np.uint64)))
    pattern = pattern[rng.permutation(pattern.shape[0])]
    pattern.setflags(write=False)
    return pattern


@dataclass(frozen=True)
class PlaneFitResult:
    """Value of a flatness functional plus the plane achieving it."""

    value: float
    plane: AffinePlane
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"value": self.value, "plane": self.plane.to_dict(), "details": self.details}


def _warm_start_frame(rel: np.ndarray, n: int) -> np.ndarray:
    """Tangent frame candidate: top-n eigenspace of the sample second-moment
    matrix.

    Deliberately unweighted: the sup functionals depend only on the support
    SET, and keeping the whole search weight-free makes values exactly
    invariant under weight renormalizations (e.g. mass-normalized blow-ups).
    """
    M = rel.T @ rel
    scale = float(np.max(np.abs(M)))
    if not np.isfinite(scale) or scale <= 0.0:
        return np.eye(rel.shape[1])[:n]
    form = sym_eigen(M / scale)
    return np.ascontiguousarray(form.eigenvectors[:, -n:].T)


def _orthonormalize_rows(rows: np.ndarray) -> np.ndarray:
    out = rows.copy()
    for i in range(out.shape[0]):
        for j in range(i):
            out[i] -= np.dot(out[i], out[j]) * out[j]
        out[i] /= np.linalg.norm(out[i])
    return out


def _canonical_pose(rel: np.ndarray) -> np.ndarray:
    """Orthogonal matrix E whose columns are the sample second-moment
    eigenvectors of the in-ball offsets, signs fixed by third moments.

    Optimizing in the rotated coordinates rel @ E makes the whole descent
    path (coarse grids, golden sections, stalls) a function of the data's
    intrinsic shape only, so values are stable under rigid motions of the
    cloud up to float noise.  Unweighted for the same reason as the warm
    start.
    """
    M = rel.T @ rel
    scale = float(np.max(np.abs(M)))
    if not np.isfinite(scale) or scale <= 0.0:
        return np.eye(rel.shape[1])
    E = np.array(sym_eigen(M / scale).eigenvectors)
    proj = rel @ E
    skew = np.sum(proj**3, axis=0)
    flip = skew < 0.0
    E[:, flip] = -E[:, flip]
    return E


def _canonical_frame(V: np.ndarray, rel: np.ndarray) -> np.ndarray:
    """Rotate the in-plane basis to the principal axes of the projected data.

    Combined with the signed-permutation-closed disk pattern this removes the
    residual frame ambiguity, so discretized values change only at float
    level under rigid motions of the cloud.
    """
    t = rel @ V.T
    C = t.T @ t
    scale = float(np.max(np.abs(C)))
    if not np.isfinite(scale) or scale <= 0:
        return V
    form = sym_eigen(C / scale)
    order = np.argsort(form.eigenvalues, kind="stable")[::-1]
    rotated = form.eigenvectors[:, order].T @ V
    return _orthonormalize_rows(rotated)


def _golden_min(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _line_search(f, f_batch=None) -> tuple[float, float]:
    """Coarse grid then golden-section refinement over [-pi/4, pi/4]."""
    angles = np.linspace(-math.pi / 4.0, math.pi / 4.0, _ANGLE_COARSE)
    vals = f_batch(angles) if f_batch is not None else [f(a) for a in angles]
    best = int(np.argmin(vals))
    lo = angles[max(best - 1, 0)]
    hi = angles[min(best + 1, _ANGLE_COARSE - 1)]
    x, fx = _golden_min(f, lo, hi, _ANGLE_TOL)
    if fx <= vals[best]:
        return x, fx
    return float(angles[best]), float(vals[best])


class _SupObjective:
    """Shared state for the coordinate-descent search of sup-type planes.

    ``pattern`` is None for the one-sided functional; otherwise the bilateral
    objective adds the pattern-to-support sup (nearest-neighbor queries on
    the full in-ball support).
    """

    def __init__(self, rel: np.ndarray, radius: float, pattern: np.ndarray | None, tree):
        self.rel = rel
        self.radius = radius
        self.pattern = pattern
        self.tree = tree

    def _support_distances(self, V: np.ndarray) -> np.ndarray:
        # Residual-vector form: numerically exact for points on the plane,
        # unlike sqrt(|z|^2 - |proj z|^2) whose cancellation noise floor is
        # ~1e-8 |z|.
        t = self.rel @ V.T
        resid = self.rel - t @ V
        normal_sq = np.einsum("ij,ij->i", resid, resid)
        if self.pattern is None:
            return np.sqrt(normal_sq)
        excess = np.maximum(np.sqrt(np.einsum("ij,ij->i", t, t)) - self.radius, 0.0)
        return np.sqrt(normal_sq + excess**2)

    def value(self, V: np.ndarray) -> float:
        support_side = float(np.max(self._support_distances(V)))
        if self.pattern is None:
            return support_side / self.radius
        return (support_side + self._plane_side(V, self.pattern)) / self.radius

    def values_batch(self, frames: list[np.ndarray]) -> np.ndarray:
        """Objective at several frames with one batched neighbor query."""
        support = np.array([np.max(self._support_distances(V)) for V in frames])
        if self.pattern is None:
            return support / self.radius
        grids = np.concatenate([(self.radius * self.pattern) @ V for V in frames], axis=0)
        dist, _ = self.tree.query(grids)
        plane = dist.reshape(len(frames), -1).max(axis=1)
        return (support + plane) / self.radius

    def _plane_side(self, V: np.ndarray, pattern: np.ndarray) -> float:
        grid = (self.radius * pattern) @ V
        dist, _ = self.tree.query(grid)
        return float(np.max(dist))

    def support_sups(self, V: np.ndarray) -> tuple[float, float]:
        """Top two support-side distances, for the jackknife correction."""
        d = self._support_distances(V)
        if d.size == 1:
            return float(d[0]), float(d[0])
        top = np.partition(d, d.size - 2)[-2:]
        return float(top[1]), float(top[0])


def _descend(
    objective: _SupObjective,
    V0: np.ndarray,
    sweeps: int,
    stall: float,
) -> tuple[np.ndarray, float]:
    m = V0.shape[1]
    V = _orthonormalize_rows(V0)
    W = orthonormal_complement(AffinePlane(np.zeros(m), V))
    current = objective.value(V)
    for _ in range(sweeps):
        best_sweep = current
        for i in range(V.shape[0]):
            for j in range(W.shape[0]):
                a, b = V[i].copy(), W[j].copy()

                def frame_at(phi: float) -> np.ndarray:
                    Vt = V.copy()
                    Vt[i] = math.cos(phi) * a + math.sin(phi) * b
                    return Vt

                def f(phi: float) -> float:
                    return objective.value(frame_at(phi))

                def f_batch(phis) -> np.ndarray:
                    return objective.values_batch([frame_at(p) for p in phis])

                phi, val = _line_search(f, f_batch)
                if val < current:
                    c, s = math.cos(phi), math.sin(phi)
                    V[i] = c * a + s * b
                    W[j] = -s * a + c * b
                    current = val
        V = _orthonormalize_rows(V)
        stacked = np.concatenate([V, _orthonormalize_rows(W)], axis=0)
        W = _orthonormalize_rows(stacked)[V.shape[0] :]
        if best_sweep - current <= stall * max(abs(best_sweep), 1e-30):
            break
    return V, current


def _jackknife_sup(d1: float, d2: float, count: int) -> float:
    if count <= 1:
        return d1
    return d1 + (count - 1) * (d1 - d2) / count


def _gather(mu, x, rho: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """In-ball offsets in radius-normalized coordinates (divided by rho).

    Working at unit scale makes every functional an exact rescaling identity:
    evaluating at (x, rho) runs on the same floats as evaluating the blown-up
    cloud at (0, 1).
    """
    cloud, _ = _resolve(mu)
    center = np.asarray(x, dtype=float).ravel()
    idx = support_indices_in_ball(mu, Ball(center, rho))
    if idx.size == 0:
        raise EmptyRegionError(f"no support in B(center, {rho})")
    rel = (cloud.points[idx] - center) / rho
    return center, rel, cloud.weights[idx], cloud.n


def _subsample(rel: np.ndarray, cap: int) -> np.ndarray:
    if rel.shape[0] <= cap:
        return rel
    stride = math.ceil(rel.shape[0] / cap)
    return rel[::stride]


def beta_inf(
    mu,
    x,
    rho: float,
    sweeps: int = 50,
    stall: float = 1e-6,
    extra_planes: tuple[AffinePlane, ...] = (),
) -> PlaneFitResult:
    """One-sided flatness: minimize (1/rho) sup dist(support, P) over
    n-planes P through x.

    Warm starts: the moment-form eigenplane plus any ``extra_planes`` (their
    direction frames, re-based at x).  The reported value is evaluated on the
    full in-ball support at the best plane found.  Distances inside
    ``details`` are radius-normalized (the sup itself is the value).
    """
    center, rel0, w, n = _gather(mu, x, rho)
    pose = _canonical_pose(rel0)
    rel = rel0 @ pose
    starts = [_warm_start_frame(rel, n)]
    starts.extend(np.array(p.frame) @ pose for p in extra_planes)
    full = _SupObjective(rel, 1.0, pattern=None, tree=None)
    reduced = _SupObjective(_subsample(rel, _OPT_POINT_CAP), 1.0, pattern=None, tree=None)
    best_V, best_val = None, math.inf
    for V0 in starts:
        V, _ = _descend(reduced, V0, sweeps, stall)
        for cand in (V, V0):
            val = full.value(cand)
            if val < best_val:
                best_val, best_V = val, cand
    V = _canonical_frame(best_V, rel)
    best_val = full.value(V)
    d1, d2 = full.support_sups(V)
    return PlaneFitResult(
        value=best_val,
        plane=AffinePlane(center, V @ pose.T),
        details={
            "raw_sup": d1,
            "jackknife_value": _jackknife_sup(d1, d2, rel.shape[0]),
            "support_count": int(rel.shape[0]),
        },
    )


def theta(
    mu,
    x,
    r: float,
    resolution: int = 10_000,
    sweeps: int = 50,
    stall: float = 1e-6,
    extra_planes: tuple[AffinePlane, ...] = (),
) -> PlaneFitResult:
    """Bilateral flatness: minimize the summed two-sided sup distance between
    the in-ball support and the plane-disk, normalized by r.

    The disk side is discretized by ``resolution`` quasi-uniform points; the
    support side uses exact distances to the closed disk.  Doubling the
    resolution should move the value by well under 5 percent relative (the
    documented discretization check).
    """
    from scipy.spatial import cKDTree

    center, rel0, w, n = _gather(mu, x, r)
    pose = _canonical_pose(rel0)
    rel = rel0 @ pose
    tree = cKDTree(rel)
    # The pattern stays a full orbit closure (never sliced) so the reported
    # value keeps its rigid-motion equivariance.
    pattern = _disk_pattern(n, resolution)
    pattern_small = pattern[: min(_OPT_PATTERN_CAP, pattern.shape[0])]
    starts = [_warm_start_frame(rel, n)]
    starts.extend(np.array(p.frame) @ pose for p in extra_planes)
    full = _SupObjective(rel, 1.0, pattern=pattern, tree=tree)
    reduced = _SupObjective(_subsample(rel, _OPT_POINT_CAP), 1.0, pattern=pattern_small, tree=tree)
    best_V, best_val = None, math.inf
    for V0 in starts:
        V, _ = _descend(reduced, V0, sweeps, stall)
        for cand in (V, V0):
            val = full.value(cand)
            if val < best_val:
                best_val, best_V = val, cand
    V = _canonical_frame(best_V, rel)
    best_val = full.value(V)
    d1, d2 = full.support_sups(V)
    plane_side = full._plane_side(V, pattern)
    return PlaneFitResult(
        value=best_val,
        plane=AffinePlane(center, V @ pose.T),
        details={
            "support_side": d1,
            "plane_side": plane_side,
            "jackknife_value": _jackknife_sup(d1, d2, rel.shape[0]) + plane_side,
            "resolution": int(pattern.shape[0]),
            "support_count": int(rel.shape[0]),
        },
    )


def beta2_smooth(mu, x, r: float) -> PlaneFitResult:
    """Smooth L2 flatness: sqrt of min_L r^-(n+2) * integral of
    cutoff(|y-x|/r) dist(y, L)^2 dmu over affine n-planes L.

    The minimizer goes through the weighted centroid with the top-n
    eigenspace of the weighted second-moment matrix, which is exact for this
    objective; the value is the square root of the sum of the k smallest
    eigenvalues over r^(n+2).
    """
    cloud, _ = _resolve(mu)
    center = np.asarray(x, dtype=float).ravel()
    idx = support_indices_in_ball(mu, Ball(center, 3.0 * r))
    if idx.size == 0:
        raise EmptyRegionError(f"no support in B(center, {3.0 * r})")
    pts = cloud.points[idx]
    w = cloud.weights[idx]
    cut = smooth_cutoff(np.linalg.norm(pts - center, axis=1) / r)
    wc = w * cut
    total = float(wc.sum())
    n = cloud.n
    if total <= 0.0:
        return PlaneFitResult(
            value=0.0,
            plane=AffinePlane(center, np.eye(cloud.m)[:n]),
            details={"weighted_mass": 0.0},
        )
    centroid = (wc @ pts) / total
    relc = pts - centroid
    S = np.einsum("i,ij,ik->jk", wc, relc, relc)
    form = sym_eigen(0.5 * (S + S.T))
    k = cloud.m - n
    residual = float(np.clip(form.eigenvalues[:k].sum(), 0.0, None))
    value = math.sqrt(residual / r ** (n + 2))
    frame = np.ascontiguousarray(form.eigenvectors[:, k:].T)
    return PlaneFitResult(
        value=value,
        plane=AffinePlane(centroid, frame),
        details={"weighted_mass": total, "spectrum": form.eigenvalues.tolist()},
    )


@dataclass(frozen=True)
class ScaleRecord:
    r: float
    theta: float
    beta: float
    beta2: float
    plane: AffinePlane

    def to_dict(self) -> dict:
        return {
            "r": self.r,
            "theta": self.theta,
            "beta": self.beta,
            "beta2": self.beta2,
            "plane": self.plane.to_dict(),
        }


@dataclass(frozen=True)
class ExponentFit:
    exponent: float
    ci_low: float
    ci_high: float
    scales_used: int
    floor_limited: bool

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "scales_used": self.scales_used,
            "floor_limited": self.floor_limited,
        }


@dataclass(frozen=True)
class FlatnessProfile:
    """Per-scale flatness records at one center plus fitted decay exponents."""

    center: np.ndarray
    scales: tuple[ScaleRecord, ...]
    fits: dict

    @property
    def radii(self) -> np.ndarray:
        return np.array([s.r for s in self.scales])

    def values(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.scales])

    def to_dict(self, center_id=None) -> dict:
        return {
            "center_id": center_id,
            "center": self.center.tolist(),
            "scales": [s.to_dict() for s in self.scales],
            "fits": {k: v.to_dict() for k, v in self.fits.items()},
        }


def _decay_fit(radii: np.ndarray, values: np.ndarray) -> ExponentFit:
    positive = values[values > 0]
    floor_limited = positive.size < 2 or positive.max() / positive.min() < 2.0
    try:
        fit = trimmed_loglog_fit(radii, values, floor=0.0)
        exponent = fit.slope
        used = fit.used
    except ValueError:
        return ExponentFit(float("nan"), float("nan"), float("nan"), 0, True)
    keep = values > 0
    try:
        lo, hi = bootstrap_slope_ci(np.log(radii[keep]), np.log(values[keep]))
    except ValueError:
        lo = hi = float("nan")
    return ExponentFit(exponent, lo, hi, used, bool(floor_limited))


def flatness_profile(
    mu,
    x,
    radii,
    resolution: int = 10_000,
    sweeps: int = 50,
    stall: float = 1e-6,
) -> FlatnessProfile:
    """Evaluate theta, beta and beta2 across a radius grid and fit decay
    exponents by trimmed log-log regression.

    The bilateral plane at each scale is handed to the one-sided optimizer as
    an extra warm start, which enforces beta <= theta pointwise (the
    one-sided objective never exceeds the bilateral one on the same plane).
    """
    center = np.asarray(x, dtype=float).ravel()
    radii_arr = np.sort(np.asarray(radii, dtype=float))[::-1]
    records = []
    for r in radii_arr:
        th = theta(mu, center, r, resolution=resolution, sweeps=sweeps, stall=stall)
        be = beta_inf(mu, center, r, sweeps=sweeps, stall=stall, extra_planes=(th.plane,))
        b2 = beta2_smooth(mu, center, r)
        records.append(
            ScaleRecord(r=float(r), theta=th.value, beta=be.value, beta2=b2.value, plane=be.plane)
        )
    fits = {
        "theta": _decay_fit(radii_arr, np.array([s.theta for s in records])),
        "beta": _decay_fit(radii_arr, np.array([s.beta for s in records])),
        "beta2": _decay_fit(radii_arr, np.array([s.beta2 for s in records])),
    }
    return FlatnessProfile(center=center, scales=tuple(records), fits=fits)


@dataclass(frozen=True)
class ClassificationReport:
    """regular / singular / undetermined labels per center.

    A center is regular when the trailing run of theta below the threshold
    spans at least a factor of two in radius; singular when theta stays at or
    above the threshold throughout the smallest factor-two band; undetermined
    otherwise.
    """

    labels: tuple[str, ...]
    centers: np.ndarray
    eta: float
    radii: np.ndarray
    theta_values: np.ndarray

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "centers": self.centers.tolist(),
            "eta": self.eta,
            "radii": self.radii.tolist(),
            "theta_values": self.theta_values.tolist(),
        }


def classify_points(
    mu,
    centers,
    eta: float,
    radii,
    resolution: int = 2000,
    sweeps: int = 50,
    stall: float = 1e-6,
) -> ClassificationReport:
    """Label each center regular or singular from its theta profile."""
    if not (0.0 < eta < 1.0):
        raise ValueError("eta must lie in (0, 1)")
    centers_arr = np.atleast_2d(np.asarray(centers, dtype=float))
    radii_arr = np.sort(np.asarray(radii, dtype=float))[::-1]
    r_min = radii_arr[-1]
    band = radii_arr <= 2.0 * r_min
    labels = []
    values = np.empty((centers_arr.shape[0], radii_arr.size))
    for ci, c in enumerate(centers_arr):
        for ri, r in enumerate(radii_arr):
            values[ci, ri] = theta(
                mu, c, r, resolution=resolution, sweeps=sweeps, stall=stall
            ).value
        row = values[ci]
        below = row < eta
        run = 0
        for flag in below[::-1]:
            if flag:
                run += 1
            else:
                break
        if run > 0 and radii_arr[radii_arr.size - run] >= 2.0 * r_min:
            labels.append("regular")
        elif np.all(row[band] >= eta):
            labels.append("singular")
        else:
            labels.append("undetermined")
    return ClassificationReport(
        labels=tuple(labels),
        centers=centers_arr,
        eta=float(eta),
        radii=radii_arr,
        theta_values=values,
    )


def fit_beta_exponent(
    profile_or_radii,
    values=None,
    noise_floor: float = 0.0,
    resamples: int = 200,
    seed: int = 0,
    min_scales: int = 6,
) -> ExponentFit:
    """Decay exponent of the one-sided flatness across scales, with a
    percentile-bootstrap confidence interval (``resamples`` refits).

    Accepts either a FlatnessProfile or explicit (radii, values) arrays.
    Scales at or below ``noise_floor`` are discarded; fewer than
    ``min_scales`` usable scales is an error.
    """
    if isinstance(profile_or_radii, FlatnessProfile):
        radii = profile_or_radii.radii
        vals = profile_or_radii.values("beta")
    else:
        radii = np.asarray(profile_or_radii, dtype=float)
        vals = np.asarray(values, dtype=float)
    keep = (vals > noise_floor) & (radii > 0)
    if int(keep.sum()) < min_scales:
        raise ResolutionExhaustedError(
            f"insufficient dynamic range: {int(keep.sum())} scales above the noise floor"
        )
    radii, vals = radii[keep], vals[keep]
    fit = trimmed_loglog_fit(radii, vals)
    lo, hi = bootstrap_slope_ci(np.log(radii), np.log(vals), resamples=resamples, seed=seed)
    positive = vals[vals > 0]
    floor_limited = positive.max() / positive.min() < 2.0
    return ExponentFit(
        exponent=fit.slope,
        ci_low=lo,
        ci_high=hi,
        scales_used=int(vals.size),
        floor_limited=bool(floor_limited),
    )
