"""Doubling and density statistics of a weighted cloud.

The central quantity is the doubling ratio

    R_t(x, r) = mu(B(x, tr)) / mu(B(x, r)) - t^n,

which vanishes identically for measures whose ball masses grow exactly like
r^n.  Densities are ratios mu(B(x, r)) / (vol_n r^n) and their r -> 0
extrapolation.  Radius grids are geometric with ratio 2^(-1/4); the smallest
radius keeps at least ``min_count`` samples in the ball, which is the
statistical floor for all fits here.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyRegionError, ResolutionExhaustedError
from .fitting import LineFit, trimmed_loglog_fit
from .measure import Ball, _resolve, ball_mass, support_indices_in_ball, unit_ball_volume

__all__ = [
    "DoublingProfile",
    "DensityReport",
    "HolderFit",
    "doubling_ratio",
    "doubling_profile",
    "telescope_bound",
    "density_ratio",
    "density_estimate",
    "holder_log_density",
    "reliable_radius_grid",
    "default_t_grid",
    "doubling_csv",
    "density_csv",
]

GRID_RATIO = 2.0 ** -0.25
MIN_BALL_COUNT = 500


def default_t_grid() -> np.ndarray:
    """Geometric t grid spanning [1/2, 1] with ratio 2^(1/4)."""
    return 2.0 ** (-np.arange(4, -1, -1) / 4.0)


def reliable_radius_grid(
    mu,
    x,
    r_max: float,
    ratio: float = GRID_RATIO,
    min_count: int = MIN_BALL_COUNT,
    max_scales: int = 40,
) -> np.ndarray:
    """Descending geometric radii from r_max down to the resolution floor:
    the last radius is the smallest with at least ``min_count`` in-ball
    samples."""
    center = np.asarray(x, dtype=float).ravel()
    radii = []
    r = float(r_max)
    for _ in range(max_scales):
        count = support_indices_in_ball(mu, Ball(center, r)).size
        if count < min_count:
            break
        radii.append(r)
        r *= ratio
    if not radii:
        raise ResolutionExhaustedError(
            f"fewer than {min_count} samples already at the largest radius {r_max}"
        )
    return np.asarray(radii)


@dataclass(frozen=True)
class DoublingProfile:
    """R_t(x, r) on a (radii x t) grid plus the fitted decay law.

    fitted_alpha / fitted_C describe |R_t| <= C r^alpha estimated by a trimmed
    log-log fit of max_t |R_t| against r; ``floor_limited`` is set when the
    profile has no real dynamic range (noise floor), in which case the fit is
    reported but should not be trusted.
    """

    center: np.ndarray
    radii: np.ndarray
    t_values: np.ndarray
    R: np.ndarray
    fitted_alpha: float
    fitted_C: float
    fit_residual: float
    floor_limited: bool

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "radii": self.radii.tolist(),
            "t_values": self.t_values.tolist(),
            "R": self.R.tolist(),
            "fitted_alpha": self.fitted_alpha,
            "fitted_C": self.fitted_C,
            "fit_residual": self.fit_residual,
            "floor_limited": self.floor_limited,
        }


@dataclass(frozen=True)
class DensityReport:
    """Density ratios across radii and the extrapolated point density D."""

    center: np.ndarray
    radii: np.ndarray
    ratios: np.ndarray
    D: float
    fit_residual: float
    alpha_used: float
    holder_exponent: float
    holder_C: float

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "radii": self.radii.tolist(),
            "ratios": self.ratios.tolist(),
            "D": self.D,
            "fit_residual": self.fit_residual,
            "alpha_used": self.alpha_used,
            "holder_exponent": self.holder_exponent,
            "holder_C": self.holder_C,
        }


def doubling_ratio(mu, x, t: float, r: float) -> float:
    """mu(B(x, tr)) / mu(B(x, r)) - t^n."""
    if not (0.0 < t <= 1.0):
        raise ValueError("t must lie in (0, 1]")
    cloud, _ = _resolve(mu)
    center = np.asarray(x, dtype=float).ravel()
    outer = ball_mass(mu, Ball(center, r))
    if outer <= 0.0:
        raise EmptyRegionError(f"x not in support at scale {r}")
    if t == 1.0:
        return 0.0
    inner = ball_mass(mu, Ball(center, t * r))
    return inner / outer - t**cloud.n


def doubling_profile(mu, x, radii, t_values=None) -> DoublingProfile:
    """Evaluate R_t on the grid and fit the decay law of max_t |R_t|."""
    cloud, _ = _resolve(mu)
    center = np.asarray(x, dtype=float).ravel()
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    t_values = default_t_grid() if t_values is None else np.asarray(t_values, dtype=float)
    masses = np.array([ball_mass(mu, Ball(center, r)) for r in radii])
    if np.any(masses <= 0):
        raise EmptyRegionError("x not in support at some grid radius")
    R = np.empty((radii.size, t_values.size))
    for i, r in enumerate(radii):
        for j, t in enumerate(t_values):
            if t == 1.0:
                R[i, j] = 0.0
            else:
                R[i, j] = ball_mass(mu, Ball(center, t * r)) / masses[i] - t**cloud.n
    envelope = np.max(np.abs(R), axis=1)
    try:
        fit = trimmed_loglog_fit(radii, envelope)
        alpha, C, resid = fit.slope, math.exp(fit.intercept), fit.residual_rms
        # Noise envelopes GROW toward small radii (counting noise ~ 1/sqrt
        # of the in-ball count), so a non-positive fitted slope or a tiny
        # dynamic range marks a floor-limited profile.
        dyn = envelope.max() / max(envelope.min(), 1e-300)
        floor_limited = bool(envelope.max() <= 0 or dyn < 1.5 or alpha <= 0.05)
    except ValueError:
        alpha, C, resid = 0.0, float(envelope.max()), float("inf")
        floor_limited = True
    return DoublingProfile(
        center=center,
        radii=radii,
        t_values=t_values,
        R=R,
        fitted_alpha=alpha,
        fitted_C=C,
        fit_residual=resid,
        floor_limited=floor_limited,
    )


def telescope_bound(C_K: float, alpha: float, n: int, t: float) -> float:
    """Constant extending a doubling bound from t in [1/2, 1] to all smaller t.

    Chaining the bound across dyadic steps sums the geometric series
    sum_{i>=0} (2^(-n/2))^i, so |R_t| <= C_K r^alpha / (1 - 2^(-n/2)) for
    every t in (0, 1/2).
    """
    if not (C_K > 0 and alpha > 0 and n >= 1):
        raise ValueError("C_K, alpha must be positive and n >= 1")
    if not (0.0 < t < 0.5):
        raise ValueError("the telescoped range is t in (0, 1/2)")
    return C_K / (1.0 - 2.0 ** (-n / 2.0))


def density_ratio(mu, x, r: float) -> float:
    """mu(B(x, r)) / (vol_n r^n); zero off the support."""
    if not (r > 0):
        raise ValueError("radius must be positive")
    cloud, _ = _resolve(mu)
    center = np.asarray(x, dtype=float).ravel()
    return ball_mass(mu, Ball(center, r)) / (unit_ball_volume(cloud.n) * r**cloud.n)


def density_estimate(mu, x, radii, min_count: int = 50) -> DensityReport:
    """Extrapolate the density ratio to r -> 0.

    Fits ratio ~ D + b * r^alpha by count-weighted least squares.  The
    exponent starts from the doubling-profile fit at the same center but is
    refined over a grid by residual, because the profile exponent alone is
    noise-dominated whenever |R_t| sits near the Monte Carlo floor.  When the
    profile has no dynamic range at all, the smallest-radius ratio is
    reported (residual 0).
    """
    cloud, _ = _resolve(mu)
    center = np.asarray(x, dtype=float).ravel()
    radii = np.sort(np.asarray(radii, dtype=float))[::-1]
    smallest = radii[-1]
    count = support_indices_in_ball(mu, Ball(center, smallest)).size
    if count < min_count:
        raise ResolutionExhaustedError(
            f"resolution exhausted: {count} < {min_count} samples at radius {smallest}"
        )
    ratios = np.array([density_ratio(mu, center, r) for r in radii])
    counts = np.array(
        [support_indices_in_ball(mu, Ball(center, r)).size for r in radii], dtype=float
    )
    profile = doubling_profile(mu, center, radii)
    alpha_hat = profile.fitted_alpha
    sqrt_w = np.sqrt(counts)
    # Constant model: no resolvable r-dependence, every scale estimates the
    # same number; weight by counts (the largest ball carries most samples).
    const = float(np.sum(counts * ratios) / counts.sum())
    rss_const = float(np.sum((sqrt_w * (ratios - const)) ** 2))
    candidates = list(np.geomspace(0.05, 3.0, 40))
    if not profile.floor_limited and 0.0 < alpha_hat <= 4.0:
        candidates.append(float(alpha_hat))
    best = None
    for alpha in candidates:
        z = radii**alpha
        # Exponents whose feature barely varies across the grid are
        # indistinguishable from a constant and extrapolate wild intercepts;
        # they need a wider radius span to be identifiable.
        if 1.0 - float(z.min() / z.max()) < 0.2:
            continue
        A = np.stack([np.ones_like(z), z], axis=1)
        coef, *_ = np.linalg.lstsq(A * sqrt_w[:, None], ratios * sqrt_w, rcond=None)
        rss = float(np.sum((sqrt_w * (ratios - A @ coef)) ** 2))
        if best is None or rss < best[0]:
            best = (rss, float(coef[0]), alpha, A @ coef)
    if best is None:
        best = (np.inf, const, float("nan"), np.full_like(ratios, const))
    rss_fit, D, alpha_used, fitted = best
    if rss_fit < 0.5 * rss_const and D > 0:
        resid = float(np.sqrt(np.mean((ratios - fitted) ** 2)))
    else:
        # The power law does not beat a constant: report the combined ratio.
        D, alpha_used = const, float("nan")
        resid = float(np.sqrt(np.mean((ratios - D) ** 2)))
    try:
        hfit = trimmed_loglog_fit(radii, np.abs(ratios - 1.0), floor=1e-12)
        h_exp, h_C = hfit.slope, math.exp(hfit.intercept)
    except ValueError:
        h_exp, h_C = float("inf"), 0.0
    return DensityReport(
        center=center,
        radii=radii,
        ratios=ratios,
        D=D,
        fit_residual=resid,
        alpha_used=alpha_used,
        holder_exponent=h_exp,
        holder_C=h_C,
    )


@dataclass(frozen=True)
class HolderFit:
    """Empirical regularity of log D across point pairs.

    exponent is +inf (with ``constant_density`` set) when all sampled
    densities agree within tolerance, i.e. there is nothing to fit.
    """

    exponent: float
    log_constant: float
    pairs_used: int
    constant_density: bool


def holder_log_density(
    mu, pairs, radii, rel_tolerance: float = 0.05, min_count: int = 50
) -> HolderFit:
    """Least-squares slope of log |log D(x) - log D(y)| against log |x - y|.

    ``pairs`` is a sequence of (x, y) point pairs (at least 20); densities
    are estimated at each distinct endpoint with :func:`density_estimate`.
    """
    pair_arr = np.asarray(pairs, dtype=float)
    if pair_arr.ndim != 3 or pair_arr.shape[1] != 2:
        raise ValueError("pairs must have shape (P, 2, m)")
    if pair_arr.shape[0] < 20:
        raise ValueError("need at least 20 pairs")
    flat = pair_arr.reshape(-1, pair_arr.shape[2])
    uniq, inverse = np.unique(flat.round(12), axis=0, return_inverse=True)
    dens = np.array([density_estimate(mu, p, radii, min_count=min_count).D for p in uniq])
    log_d = np.log(dens)
    spread = float(log_d.max() - log_d.min())
    if spread < rel_tolerance:
        return HolderFit(
            exponent=float("inf"), log_constant=0.0, pairs_used=pair_arr.shape[0],
            constant_density=True,
        )
    li = inverse.reshape(-1, 2)
    gaps = np.abs(log_d[li[:, 0]] - log_d[li[:, 1]])
    seps = np.linalg.norm(pair_arr[:, 0, :] - pair_arr[:, 1, :], axis=1)
    fit: LineFit = trimmed_loglog_fit(seps, gaps, floor=1e-12)
    return HolderFit(
        exponent=fit.slope,
        log_constant=fit.intercept,
        pairs_used=pair_arr.shape[0],
        constant_density=False,
    )


def doubling_csv(profiles, ids=None) -> str:
    """Rows ``x_id,r,t,R_t`` for a list of doubling profiles."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["x_id", "r", "t", "R_t"])
    for k, prof in enumerate(profiles):
        x_id = k if ids is None else ids[k]
        for i, r in enumerate(prof.radii):
            for j, t in enumerate(prof.t_values):
                writer.writerow([x_id, repr(float(r)), repr(float(t)), repr(float(prof.R[i, j]))])
    return buf.getvalue()


def density_csv(reports, ids=None) -> str:
    """Rows ``x_id,r,ratio`` for a list of density reports."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["x_id", "r", "ratio"])
    for k, rep in enumerate(reports):
        x_id = k if ids is None else ids[k]
        for r, ratio in zip(rep.radii, rep.ratios):
            writer.writerow([x_id, repr(float(r)), repr(float(ratio))])
    return buf.getvalue()
