"""Shared regression and resampling helpers.

Log-log slope fits use ordinary least squares with symmetric trimming of the
most extreme residuals, which keeps resolution-floor outliers from biasing
decay-exponent estimates.  All resampling is seeded and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LineFit", "ols_line", "trimmed_loglog_fit", "bootstrap_slope_ci"]


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    residual_rms: float
    used: int


def ols_line(x: np.ndarray, y: np.ndarray) -> LineFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.ptp(x) == 0.0:
        raise ValueError("need at least two distinct x values")
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return LineFit(
        slope=float(coef[0]),
        intercept=float(coef[1]),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        used=int(x.size),
    )


def trimmed_loglog_fit(x, y, trim: float = 0.05, floor: float = 0.0) -> LineFit:
    """Slope of log y against log x, refit after dropping the ceil(trim*N)
    largest and smallest residuals.  Points with y <= floor are excluded."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > floor) & np.isfinite(x) & np.isfinite(y)
    lx, ly = np.log(x[keep]), np.log(y[keep])
    if lx.size < 2:
        raise ValueError("not enough usable points for a log-log fit")
    fit = ols_line(lx, ly)
    if lx.size >= 5 and trim > 0:
        resid = ly - (fit.slope * lx + fit.intercept)
        drop = int(np.ceil(trim * lx.size))
        order = np.argsort(resid, kind="stable")
        inner = order[drop : lx.size - drop]
        if inner.size >= 2 and np.ptp(lx[inner]) > 0:
            fit = ols_line(lx[inner], ly[inner])
    return fit


def bootstrap_slope_ci(
    x, y, resamples: int = 200, seed: int = 0, level: float = 0.95
) -> tuple[float, float]:
    """Percentile bootstrap confidence interval for the OLS slope of y on x.

    Degenerate resamples (fewer than two distinct x) are skipped; they only
    occur with tiny inputs.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0xB0075], dtype=np.uint64)))
    slopes = []
    for _ in range(resamples):
        idx = rng.integers(0, x.size, size=x.size)
        if np.ptp(x[idx]) == 0.0:
            continue
        slopes.append(ols_line(x[idx], y[idx]).slope)
    if not slopes:
        raise ValueError("all bootstrap resamples degenerate")
    lo = float(np.percentile(slopes, 100 * (1 - level) / 2))
    hi = float(np.percentile(slopes, 100 * (1 + level) / 2))
    return lo, hi
