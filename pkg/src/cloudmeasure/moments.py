"""First and second ball moments of a weighted cloud.

For a center x1 and radius r the moment vector and moment form are

    b = (n+2) / (2 vol_n r^(n+2)) * sum_i w_i (r^2 - |y_i-x1|^2) (y_i - x1)
    Q = (n+2) / (vol_n r^(n+2))   * sum_i w_i (y_i - x1(y_i - x1)^T  (as a form)

with vol_n the unit n-ball volume and the sum running over samples strictly
inside B(x1, r) in index order.  The spectrum of Q encodes the approximate
tangent/normal split of the support: for an n-flat unit-density measure the
eigenvalues are 1 on the tangent space and 0 on the normal space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyRegionError
from .geometry import SymmetricForm, sym_eigen
from .measure import Ball, _resolve, support_indices_in_ball, unit_ball_volume

__all__ = [
    "MomentPair",
    "FlatHypothesis",
    "SpectrumReport",
    "moment_vector",
    "moment_form",
    "trace_deviation",
    "quadratic_residual",
    "spectrum_report",
    "q_tilde",
    "bootstrap_moment_sigma",
]

_PSD_SLACK = 1e-9


@dataclass(frozen=True)
class MomentPair:
    """Ball moments at one (center, radius): vector b, form Q, trace, mass."""

    center: np.ndarray
    radius: float
    n: int
    b: np.ndarray
    Q: SymmetricForm
    trace: float
    mass: float

    def __post_init__(self):
        lam = self.Q.eigenvalues
        if lam[0] < -_PSD_SLACK * max(1.0, abs(lam[-1])):
            raise ValueError(f"moment form lost positive semidefiniteness: {lam[0]}")
        density = self.mass / (unit_ball_volume(self.n) * self.radius**self.n)
        cap = 0.5 * (self.n + 2) * self.radius * density + _PSD_SLACK
        norm_b = float(np.linalg.norm(self.b))
        if norm_b > cap * (1.0 + 1e-9):
            raise ValueError(f"|b| = {norm_b} exceeds the structural cap {cap}")

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "radius": self.radius,
            "n": self.n,
            "b": self.b.tolist(),
            "Q": self.Q.to_dict(),
            "trace": self.trace,
            "mass": self.mass,
        }


def _in_ball_moments(mu, x1, r: float):
    cloud, _ = _resolve(mu)
    center = np.asarray(x1, dtype=float).ravel()
    idx = support_indices_in_ball(mu, Ball(center, r))
    if idx.size == 0:
        raise EmptyRegionError(f"no support mass in B(center, {r})")
    rel = cloud.points[idx] - center
    w = cloud.weights[idx]
    return cloud, center, rel, w


def moment_vector(mu, x1, r: float) -> np.ndarray:
    """The moment vector b at (x1, r); units of length."""
    cloud, _, rel, w = _in_ball_moments(mu, x1, r)
    n = cloud.n
    scale = (n + 2) / (2.0 * unit_ball_volume(n) * r ** (n + 2))
    kernel = w * (r**2 - np.einsum("ij,ij->i", rel, rel))
    return scale * (kernel @ rel)


def moment_form(mu, x1, r: float) -> MomentPair:
    """Assemble b, Q (with eigensystem), trace and ball mass at (x1, r)."""
    cloud, center, rel, w = _in_ball_moments(mu, x1, r)
    n = cloud.n
    vol = unit_ball_volume(n)
    scale = (n + 2) / (vol * r ** (n + 2))
    matrix = scale * np.einsum("i,ij,ik->jk", w, rel, rel)
    matrix = 0.5 * (matrix + matrix.T)
    form = sym_eigen(matrix)
    kernel = w * (r**2 - np.einsum("ij,ij->i", rel, rel))
    b = (0.5 * scale) * (kernel @ rel)
    return MomentPair(
        center=center,
        radius=float(r),
        n=n,
        b=b,
        Q=form,
        trace=form.trace,
        mass=float(w.sum()),
    )


def trace_deviation(pair: MomentPair, n: int | None = None) -> float:
    """Tr(Q) - n.  Vanishes (up to sampling noise) for unit-density measures."""
    n_val = pair.n if n is None else n
    return pair.trace - n_val


def q_tilde(pair: MomentPair, x) -> float:
    """|x|^2 - Q(x), the complementary form."""
    v = np.asarray(x, dtype=float).ravel()
    return float(v @ v) - pair.Q(v)


def quadratic_residual(pair: MomentPair, x) -> float:
    """| 2<b, x-x1> + Q(x-x1) - |x-x1|^2 | for x in B(x1, r/2).

    Support points of an almost unit-density measure almost satisfy this
    quadratic equation; the residual grows like |x-x1|^3 / r.
    """
    v = np.asarray(x, dtype=float).ravel() - pair.center
    dist = float(np.linalg.norm(v))
    if dist >= pair.radius / 2.0:
        raise ValueError(
            f"point at distance {dist} is outside the validity ball of radius {pair.radius / 2}"
        )
    return abs(2.0 * float(pair.b @ v) + pair.Q(v) - dist**2)


@dataclass(frozen=True)
class FlatHypothesis:
    """Exponent bookkeeping for the near-flat spectrum bounds.

    With gamma = theta the first-order error is
    eps1 = r^theta + C r^theta + C C_K r^(alpha - 2 theta) and the spectrum
    bounds use eps2 = n a^-2 eps1.
    """

    theta: float
    alpha: float
    C: float = 1.0
    C_K: float = 1.0
    a: float = 0.05

    def eps1(self, r: float) -> float:
        return r**self.theta + self.C * r**self.theta + self.C * self.C_K * r ** (
            self.alpha - 2.0 * self.theta
        )

    def eps2(self, r: float, n: int) -> float:
        return n * self.a**-2 * self.eps1(r)


@dataclass(frozen=True)
class SpectrumReport:
    """Diagnostics of a moment-form spectrum against the near-flat profile.

    sum_low           -- sum of the k = m - n smallest eigenvalues
    max_top_deviation -- max_i |lambda_{k+i} - 1| over the n largest
    crude_bounds_ok   -- lambda_1 <= (2n+1)/(2m) and lambda_k <= (2n+1)/(2n+2)
    qtilde_error      -- sup_{|z|=1} |Qtilde(z) - sum_{l<=k} <z, e_l>^2|,
                         exact from the spectrum
    split_margin      -- lambda_{k+1} - lambda_k, the tangent/normal eigen gap
    """

    sum_low: float
    max_top_deviation: float
    crude_bounds_ok: bool
    qtilde_error: float
    split_margin: float
    k: int
    eigenvalues: np.ndarray
    normal_frame: np.ndarray
    tangent_frame: np.ndarray
    hypothesis_pass: bool | None = None
    hypothesis_bounds: dict | None = None

    def to_dict(self) -> dict:
        return {
            "sum_low": self.sum_low,
            "max_top_deviation": self.max_top_deviation,
            "crude_bounds_ok": self.crude_bounds_ok,
            "qtilde_error": self.qtilde_error,
            "split_margin": self.split_margin,
            "k": self.k,
            "eigenvalues": self.eigenvalues.tolist(),
            "hypothesis_pass": self.hypothesis_pass,
            "hypothesis_bounds": self.hypothesis_bounds,
        }


def spectrum_report(pair: MomentPair, flat_hypothesis: FlatHypothesis | None = None) -> SpectrumReport:
    """Split the spectrum of Q into normal/tangent candidates and score it."""
    lam = pair.Q.eigenvalues
    m = lam.shape[0]
    n = pair.n
    k = m - n
    if k < 1:
        raise ValueError("moment form needs positive codimension")
    sum_low = float(lam[:k].sum())
    max_top = float(np.max(np.abs(lam[k:] - 1.0)))
    crude = bool(
        lam[0] <= (2 * n + 1) / (2 * m) + _PSD_SLACK
        and lam[k - 1] <= (2 * n + 1) / (2 * n + 2) + _PSD_SLACK
    )
    # Exact sup on the unit sphere of the residual form, whose eigenvalues are
    # -lambda_l (l <= k) and 1 - lambda_{k+i}.
    qtilde_err = max(float(np.max(np.abs(lam[:k]))), max_top)
    split = float(lam[k] - lam[k - 1])
    vecs = pair.Q.eigenvectors
    hypothesis_pass = None
    bounds = None
    if flat_hypothesis is not None:
        eps2 = flat_hypothesis.eps2(pair.radius, n)
        bound_low = eps2 + flat_hypothesis.C * flat_hypothesis.C_K * pair.radius**flat_hypothesis.alpha
        bound_top = eps2 + pair.radius ** (flat_hypothesis.alpha / 2.0)
        hypothesis_pass = bool(sum_low <= bound_low and max_top <= bound_top)
        bounds = {"sum_low": bound_low, "top_deviation": bound_top, "eps2": eps2}
    return SpectrumReport(
        sum_low=sum_low,
        max_top_deviation=max_top,
        crude_bounds_ok=crude,
        qtilde_error=qtilde_err,
        split_margin=split,
        k=k,
        eigenvalues=lam,
        normal_frame=np.ascontiguousarray(vecs[:, :k].T),
        tangent_frame=np.ascontiguousarray(vecs[:, k:].T),
        hypothesis_pass=hypothesis_pass,
        hypothesis_bounds=bounds,
    )


def bootstrap_moment_sigma(mu, x1, r: float, resamples: int = 100, seed: int = 0) -> float:
    """Monte-Carlo sigma of |b|: sqrt of the trace of the bootstrap covariance
    of the moment-vector estimator (resampling in-ball samples)."""
    cloud, _, rel, w = _in_ball_moments(mu, x1, r)
    n = cloud.n
    scale = (n + 2) / (2.0 * unit_ball_volume(n) * r ** (n + 2))
    contrib = scale * (w * (r**2 - np.einsum("ij,ij->i", rel, rel)))[:, None] * rel
    K = contrib.shape[0]
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0xB00], dtype=np.uint64)))
    draws = np.empty((resamples, contrib.shape[1]))
    for i in range(resamples):
        counts = rng.multinomial(K, np.full(K, 1.0 / K))
        draws[i] = counts @ contrib
    return float(np.sqrt(np.sum(np.var(draws, axis=0))))
