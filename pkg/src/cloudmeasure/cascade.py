"""Multiscale normal-frame extraction with an explicit exponent ledger.

A run works down a ladder of radii r_1 > r_2 > ... with r_{i+1} = r_i^(1+gamma_i)
and per-level exponent triples (gamma_i, theta_i, eta_i) that shrink
geometrically: gamma_{i+1} = kappa gamma_i, and likewise for theta and eta,
seeded by

    gamma_1 = kappa^2 (1-kappa),  theta_1 = gamma_1 / (2 (1+4 kappa)),
    eta_1 = 1.5 theta_1,          0 < kappa < 1/16,  4 kappa^2 (1-kappa) < alpha.

At each level the moment vector b at radius r_i is compared with the
threshold r_i^(1+2 theta_i).  A small b (Case 1) certifies one-sided
flatness at the next scale via the eps ladder; a large b (Case 2) hands out
a normal direction tau_i = b/|b| and the run continues, assembling an almost
orthonormal normal frame after k = m - n levels.

``check_schedule`` evaluates every compatibility inequality both with exact
products and through the bounding route with its closed-form floors, so a
schedule is auditable term by term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyRegionError, InfeasibleScheduleError, ResolutionExhaustedError
from .flatness import beta_inf
from .geometry import AffinePlane, orthonormal_complement, plane_distances
from .measure import Ball, _resolve, support_in_ball, support_indices_in_ball
from .moments import SpectrumReport, moment_form, spectrum_report
from .doubling import density_ratio

__all__ = [
    "ExponentSchedule",
    "ScheduleLedger",
    "ConditionRecord",
    "PowerSum",
    "CascadeConfig",
    "CascadeResult",
    "LevelRecord",
    "make_schedule",
    "check_schedule",
    "predicted_exponent",
    "ExponentPrediction",
    "run_cascade",
    "kappa_search",
    "default_start_radius",
]

KAPPA_MAX = 1.0 / 16.0


@dataclass(frozen=True)
class ExponentSchedule:
    """Per-level exponents (gamma_i, theta_i, eta_i), i = 1..k."""

    kappa: float
    alpha: float
    k: int
    gamma: np.ndarray
    theta: np.ndarray
    eta: np.ndarray

    def radii(self, r1: float) -> np.ndarray:
        """The k+1 ladder radii for a given start radius (r in (0, 1))."""
        if not (0.0 < r1 < 1.0):
            raise ValueError("the radius ladder needs 0 < r1 < 1")
        out = [float(r1)]
        for g in self.gamma:
            out.append(out[-1] ** (1.0 + g))
        return np.asarray(out)

    def product(self, i: int = 1) -> float:
        """prod_{l=i..k} (1 + gamma_l) with 1-based i."""
        return float(np.prod(1.0 + self.gamma[i - 1 :]))

    def theta_ext(self, j: int) -> float:
        """theta_j extended one level past k (theta_{k+1} = kappa theta_k)."""
        if j <= self.k:
            return float(self.theta[j - 1])
        return float(self.kappa * self.theta[self.k - 1])

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "alpha": self.alpha,
            "k": self.k,
            "gamma": self.gamma.tolist(),
            "theta": self.theta.tolist(),
            "eta": self.eta.tolist(),
        }


def make_schedule(kappa: float, alpha: float, k: int) -> ExponentSchedule:
    """Build the geometric exponent schedule; rejects infeasible parameters."""
    if not (0.0 < kappa < KAPPA_MAX):
        raise InfeasibleScheduleError(f"kappa must lie in (0, 1/16), got {kappa}")
    if not (alpha > 0.0):
        raise InfeasibleScheduleError("alpha must be positive")
    if not 4.0 * kappa**2 * (1.0 - kappa) < alpha:
        raise InfeasibleScheduleError(
            f"alpha too small for this kappa: need 4*kappa^2*(1-kappa) < alpha, "
            f"got {4.0 * kappa ** 2 * (1.0 - kappa)} >= {alpha}"
        )
    if k < 1:
        raise InfeasibleScheduleError("need at least one level (k >= 1)")
    gamma1 = kappa**2 * (1.0 - kappa)
    theta1 = gamma1 / (2.0 * (1.0 + 4.0 * kappa))
    eta1 = 1.5 * theta1
    decay = kappa ** np.arange(k)
    sched = ExponentSchedule(
        kappa=float(kappa),
        alpha=float(alpha),
        k=int(k),
        gamma=gamma1 * decay,
        theta=theta1 * decay,
        eta=eta1 * decay,
    )
    bad = _basic_violations(sched)
    if bad:
        raise InfeasibleScheduleError("; ".join(bad))
    return sched


def _basic_violations(s: ExponentSchedule) -> list[str]:
    out = []
    for i in range(s.k):
        if not (0.0 < 3.0 * s.theta[i] < s.alpha):
            out.append(f"level {i + 1}: 3*theta must lie in (0, alpha)")
        if not (0.0 < 4.0 * s.gamma[i] < s.alpha):
            out.append(f"level {i + 1}: 4*gamma must lie in (0, alpha)")
        if not (0.0 < s.eta[i] < 2.0 * s.theta[i]):
            out.append(f"level {i + 1}: eta must lie in (0, 2*theta)")
        if not (2.0 * s.eta[i] < s.alpha):
            out.append(f"level {i + 1}: 2*eta must be < alpha")
    return out


@dataclass(frozen=True)
class ConditionRecord:
    condition: str
    i: int
    j: int | None
    margin: float
    passes: bool
    route: str  # "exact" or "reduced"

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "i": self.i,
            "j": self.j,
            "margin": self.margin,
            "passes": self.passes,
            "route": self.route,
        }


@dataclass(frozen=True)
class ScheduleLedger:
    """Every compatibility inequality with its numeric margin."""

    records: tuple[ConditionRecord, ...]
    floor_014: float
    floor_019: float
    floor_014_ok: bool
    floor_019_ok: bool

    @property
    def all_pass(self) -> bool:
        return all(r.passes for r in self.records if r.route == "exact")

    @property
    def reduced_all_pass(self) -> bool:
        return all(r.passes for r in self.records if r.route == "reduced")

    def margin(self, condition: str, i: int = 1, j: int | None = None) -> float:
        for r in self.records:
            if r.condition == condition and r.i == i and r.j == j:
                return r.margin
        raise KeyError(f"no record for {condition} at i={i}, j={j}")

    def to_dict(self) -> dict:
        return {
            "records": [r.to_dict() for r in self.records],
            "all_pass": self.all_pass,
            "reduced_all_pass": self.reduced_all_pass,
            "floor_014": self.floor_014,
            "floor_019": self.floor_019,
            "floor_014_ok": self.floor_014_ok,
            "floor_019_ok": self.floor_019_ok,
        }


def check_schedule(s: ExponentSchedule) -> ScheduleLedger:
    """Evaluate the full inequality ledger, exact products and bounding route.

    Exact route: the basic exponent windows; the cross-level condition
    1 + 2 gamma_i - 2 theta_i - (1 + 2 theta_j) prod_{l=i}^{j-1} (1+gamma_l) > 0
    for all i < j <= k+1; the five terminal-bound conditions per level; and
    the product caps prod(1+gamma_l) <= 1 + g + g^2 (g = gamma_i/(1-kappa))
    and <= 1 + kappa + kappa^2.

    Bounding route: the same conditions after replacing the products by their
    closed-form caps; the level-1 margins carry the analytic floors
    kappa^3/(1+4 kappa) and kappa^2/(32 (1+4 kappa)).
    """
    recs: list[ConditionRecord] = []
    kap = s.kappa
    alpha = s.alpha

    def add(condition, i, j, margin, route="exact", strict=True):
        ok = margin > 0.0 if strict else margin >= 0.0
        recs.append(ConditionRecord(condition, i, j, float(margin), bool(ok), route))

    for i in range(1, s.k + 1):
        g, t, e = s.gamma[i - 1], s.theta[i - 1], s.eta[i - 1]
        add("001:3theta<alpha", i, None, alpha - 3.0 * t)
        add("001:4gamma<alpha", i, None, alpha - 4.0 * g)
        add("001:eta<2theta", i, None, 2.0 * t - e)
        add("001:2eta<alpha", i, None, alpha - 2.0 * e)

    for i in range(1, s.k + 1):
        g_i, t_i = s.gamma[i - 1], s.theta[i - 1]
        for j in range(i + 1, s.k + 2):
            prod_ij = float(np.prod(1.0 + s.gamma[i - 1 : j - 1]))
            margin = 1.0 + 2.0 * g_i - 2.0 * t_i - (1.0 + 2.0 * s.theta_ext(j)) * prod_ij
            add("014", i, j, margin)

    for i in range(1, s.k + 1):
        g_i, t_i, e_i = s.gamma[i - 1], s.theta[i - 1], s.eta[i - 1]
        prod_ik = s.product(i)
        add("016", i, None, 1.0 + 2.0 * g_i - 2.0 * t_i - prod_ik)
        add("017", i, None, 1.0 + 1.5 * g_i - prod_ik)
        add("018", i, None, 1.0 + g_i + 0.5 * t_i - prod_ik)
        add("019", i, None, 1.0 + 0.5 * g_i + e_i - prod_ik)
        add("020", i, None, 1.0 + 0.5 * g_i + 0.5 * t_i + 0.5 * e_i - prod_ik)
        add("021", i, None, 1.0 + 0.5 * g_i + 2.0 * t_i - 0.5 * e_i - prod_ik)
        cap = 1.0 + g_i / (1.0 - kap) + (g_i / (1.0 - kap)) ** 2
        add("026", i, None, cap - prod_ik, strict=False)

    add("031", 1, None, (1.0 + kap + kap**2) - s.product(1), strict=False)

    for i in range(1, s.k + 1):
        g_i, t_i, e_i = s.gamma[i - 1], s.theta[i - 1], s.eta[i - 1]
        gg = g_i / (1.0 - kap)
        cap_tail = gg + gg**2
        add(
            "014R",
            i,
            None,
            2.0 * g_i - 2.0 * t_i * (1.0 + kap) - (1.0 + 2.0 * kap * t_i) * cap_tail,
            route="reduced",
        )
        add("019R", i, None, 0.5 * g_i + e_i - cap_tail, route="reduced")
        add("020R", i, None, 0.5 * g_i + 0.5 * t_i + 0.5 * e_i - cap_tail, route="reduced")
        add("021R", i, None, 0.5 * g_i + 2.0 * t_i - 0.5 * e_i - cap_tail, route="reduced")

    floor_014 = kap**3 / (1.0 + 4.0 * kap)
    floor_019 = kap**2 / (32.0 * (1.0 + 4.0 * kap))
    m014 = next(r.margin for r in recs if r.condition == "014R" and r.i == 1)
    m019 = next(r.margin for r in recs if r.condition == "019R" and r.i == 1)
    return ScheduleLedger(
        records=tuple(recs),
        floor_014=floor_014,
        floor_019=floor_019,
        floor_014_ok=bool(m014 >= floor_014),
        floor_019_ok=bool(m019 >= floor_019),
    )


@dataclass(frozen=True)
class ExponentPrediction:
    """Terminal one-sided-flatness decay: beta(0, t) <= C t^exponent at
    t = r^radii_product / 4."""

    exponent: float
    radii_product: float

    def terminal_scale(self, r: float) -> float:
        return r**self.radii_product / 4.0

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "radii_product": self.radii_product}


def predicted_exponent(s: ExponentSchedule, ledger: ScheduleLedger | None = None) -> ExponentPrediction:
    """kappa^3 / ((1+4 kappa)(1+kappa+kappa^2)) plus the terminal scale map.

    Requires the ledger to pass; the exponent is what the all-levels bound
    guarantees for the decay of one-sided flatness at the terminal scale.
    """
    ledger = check_schedule(s) if ledger is None else ledger
    if not ledger.all_pass:
        failing = [r.condition for r in ledger.records if r.route == "exact" and not r.passes]
        raise InfeasibleScheduleError(f"schedule fails the ledger: {sorted(set(failing))}")
    kap = s.kappa
    return ExponentPrediction(
        exponent=kap**3 / ((1.0 + 4.0 * kap) * (1.0 + kap + kap**2)),
        radii_product=s.product(1),
    )


@dataclass(frozen=True)
class PowerSum:
    """sum_j coeff_j * r^exponent_j -- inspectable error-term bookkeeping."""

    terms: tuple[tuple[float, float], ...]

    def value(self, r: float) -> float:
        return float(sum(c * r**e for c, e in self.terms))

    def scaled(self, factor: float) -> "PowerSum":
        return PowerSum(tuple((factor * c, e) for c, e in self.terms))

    def to_dict(self) -> dict:
        return {"terms": [{"coeff": c, "exponent": e} for c, e in self.terms]}


@dataclass(frozen=True)
class CascadeConfig:
    """Constants for the run: fitted prefactor C, doubling constant C_K, the
    projection constant a (enters eps2 = n a^-2 eps1), the eigen-gap margin
    below which no frame is extracted, and the per-level sample floor."""

    C: float = 1.0
    C_K: float = 1.0
    a: float = 0.05
    gap_margin: float = 0.2
    min_count: int = 500

    def to_dict(self) -> dict:
        return {
            "C": self.C,
            "C_K": self.C_K,
            "a": self.a,
            "gap_margin": self.gap_margin,
            "min_count": self.min_count,
        }


def epsilon_breakdown(
    s: ExponentSchedule, level: int, n: int, config: CascadeConfig
) -> dict[str, PowerSum]:
    """The eps ladder at one level, each stage as an inspectable power sum.

    eps0: rescaled quadratic-residual error; eps1 adds the small-b term;
    eps2 = n a^-2 eps1 (spectrum bounds); eps3: the eigenframe rewrite;
    eps4: the five-term bound whose square root (times 12) bounds one-sided
    flatness at the next scale.
    """
    g = float(s.gamma[level - 1])
    t = float(s.theta[level - 1])
    e = float(s.eta[level - 1])
    C, C_K, a = config.C, config.C_K, config.a
    alpha = s.alpha
    eps0 = PowerSum(((C, g), (C * C_K, alpha - 2.0 * g)))
    eps1 = PowerSum(((1.0, 2.0 * t - g),) + eps0.terms)
    eps2 = eps1.scaled(n * a**-2)
    eps3 = PowerSum(((C, g), (C * C_K, alpha - 2.0 * g), (C, t)))
    eps4 = PowerSum(
        ((C, g), (C, t), (C, 2.0 * e - g), (C, t + e - g), (C, 4.0 * t - e - g))
    )
    return {"eps0": eps0, "eps1": eps1, "eps2": eps2, "eps3": eps3, "eps4": eps4}


@dataclass(frozen=True)
class LevelRecord:
    level: int
    r: float
    b: np.ndarray
    b_norm: float
    threshold: float
    case: int
    tau: np.ndarray | None
    spectrum: SpectrumReport

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "r": self.r,
            "b": self.b.tolist(),
            "b_norm": self.b_norm,
            "threshold": self.threshold,
            "case": self.case,
            "tau": None if self.tau is None else self.tau.tolist(),
            "spectrum": self.spectrum.to_dict(),
        }


@dataclass(frozen=True)
class CascadeResult:
    """Outcome of one multiscale run at a center."""

    center: np.ndarray
    schedule: ExponentSchedule
    config: CascadeConfig
    levels: tuple[LevelRecord, ...]
    case_path: str  # "case1@<i>" or "all_case2"
    stop_level: int
    beta_scale: float
    beta_empirical: float
    predicted_bound: float
    predicted_terms: dict
    best_plane: AffinePlane | None
    frame: np.ndarray | None
    gram: np.ndarray | None
    frame_accepted: bool | None
    frame_refused: bool
    flags: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "schedule": self.schedule.to_dict(),
            "config": self.config.to_dict(),
            "levels": [rec.to_dict() for rec in self.levels],
            "case_path": self.case_path,
            "stop_level": self.stop_level,
            "beta_scale": self.beta_scale,
            "beta_empirical": self.beta_empirical,
            "predicted_bound": self.predicted_bound,
            "predicted_terms": self.predicted_terms,
            "best_plane": None if self.best_plane is None else self.best_plane.to_dict(),
            "frame": None if self.frame is None else self.frame.tolist(),
            "gram": None if self.gram is None else self.gram.tolist(),
            "frame_accepted": self.frame_accepted,
            "frame_refused": self.frame_refused,
            "flags": list(self.flags),
        }


def _require_count(mu, center: np.ndarray, r: float, min_count: int, what: str) -> int:
    count = support_indices_in_ball(mu, Ball(center, r)).size
    if count < min_count:
        raise ResolutionExhaustedError(
            f"resolution exhausted at {what}: {count} < {min_count} samples in radius {r}"
        )
    return count


def run_cascade(
    mu,
    x0,
    r1: float,
    schedule: ExponentSchedule,
    config: CascadeConfig = CascadeConfig(),
) -> CascadeResult:
    """Walk the radius ladder at a center, splitting on the moment-vector
    threshold at every level.

    Case 1 (|b| <= r^(1+2 theta)) stops the run: one-sided flatness at the
    next scale is measured empirically and predicted by 12 sqrt(eps4).  If
    every level lands in Case 2, the normalized moment vectors form the
    candidate normal frame, accepted when all pairwise inner products stay
    below 1/(2k).  Frame extraction (either kind) is refused when the
    tangent/normal eigen gap at the stop level is below ``config.gap_margin``.
    """
    cloud, _ = _resolve(mu)
    center = np.asarray(x0, dtype=float).ravel()
    n = cloud.n
    k = schedule.k
    radii = schedule.radii(r1)
    for i in range(1, k + 1):
        _require_count(mu, center, radii[i - 1], config.min_count, f"level {i}")
    levels: list[LevelRecord] = []
    taus: list[np.ndarray] = []
    flags: list[str] = []
    for i in range(1, k + 1):
        r_i = float(radii[i - 1])
        pair = moment_form(mu, center, r_i)
        spec = spectrum_report(pair)
        b = pair.b
        b_norm = float(np.linalg.norm(b))
        threshold = r_i ** (1.0 + 2.0 * float(schedule.theta[i - 1]))
        if b_norm <= threshold:
            # Case 1: small moment vector at this level.
            levels.append(
                LevelRecord(i, r_i, b, b_norm, threshold, 1, None, spec)
            )
            scale = float(radii[i]) / 4.0
            _require_count(mu, center, scale, config.min_count, f"terminal scale after level {i}")
            eps = epsilon_breakdown(schedule, i, n, config)
            eps4_val = eps["eps4"].value(r_i)
            eps5 = 12.0 * math.sqrt(eps4_val)
            chain_factor = float(radii[i]) / float(radii[k])
            refused = spec.split_margin < config.gap_margin
            if refused:
                flags.extend(["frame_refused", "non_flat"])
                plane = None
            else:
                fit = beta_inf(mu, center, scale)
                plane = fit.plane
            beta_emp = beta_inf(mu, center, scale).value if refused else fit.value
            return CascadeResult(
                center=center,
                schedule=schedule,
                config=config,
                levels=tuple(levels),
                case_path=f"case1@{i}",
                stop_level=i,
                beta_scale=scale,
                beta_empirical=beta_emp,
                predicted_bound=eps5,
                predicted_terms={
                    "eps5": eps5,
                    "eps4": eps["eps4"].to_dict(),
                    "eps_ladder": {name: ps.to_dict() for name, ps in eps.items()},
                    "chained_bound_at_terminal": chain_factor * eps5,
                },
                best_plane=plane,
                frame=None if refused else spec.normal_frame,
                gram=None,
                frame_accepted=None,
                frame_refused=refused,
                flags=tuple(flags),
            )
        tau = b / b_norm
        taus.append(tau)
        levels.append(LevelRecord(i, r_i, b, b_norm, threshold, 2, tau, spec))
    # All k levels were Case 2: assemble the normal frame.
    frame = np.stack(taus, axis=0)
    gram = frame @ frame.T
    off = gram - np.diag(np.diag(gram))
    accepted = bool(np.max(np.abs(off)) < 1.0 / (2.0 * k)) if k > 1 else True
    scale = float(radii[k]) / 4.0
    _require_count(mu, center, scale, config.min_count, "terminal scale")
    pred = config.C * max(
        float(radii[i - 1]) ** (1.0 + 2.0 * float(schedule.gamma[i - 1]) - 2.0 * float(schedule.theta[i - 1]))
        for i in range(1, k + 1)
    ) / float(radii[k])
    if not accepted:
        flags.append("frame_rejected")
        plane = None
        beta_emp = beta_inf(mu, center, scale).value
    else:
        normals = _orthonormalize(frame)
        tangent = orthonormal_complement(AffinePlane(center, normals))
        plane = AffinePlane(center, tangent)
        pts = support_in_ball(mu, Ball(center, scale))
        beta_emp = float(np.max(plane_distances(pts, plane))) / scale if pts.size else 0.0
    pair_bounds = {
        f"({i + 1},{j + 1})": config.C
        * float(radii[j]) ** (-1.0 - 2.0 * float(schedule.theta[j]))
        * float(radii[i]) ** (1.0 + 2.0 * float(schedule.gamma[i]) - 2.0 * float(schedule.theta[i]))
        for i in range(k)
        for j in range(i + 1, k)
    }
    return CascadeResult(
        center=center,
        schedule=schedule,
        config=config,
        levels=tuple(levels),
        case_path="all_case2",
        stop_level=k,
        beta_scale=scale,
        beta_empirical=beta_emp,
        predicted_bound=pred,
        predicted_terms={"max_level_bound": pred, "pair_gram_bounds": pair_bounds},
        best_plane=plane,
        frame=frame,
        gram=gram,
        frame_accepted=accepted,
        frame_refused=False,
        flags=tuple(flags),
    )


def _orthonormalize(rows: np.ndarray) -> np.ndarray:
    out = rows.copy()
    for i in range(out.shape[0]):
        for j in range(i):
            out[i] -= np.dot(out[i], out[j]) * out[j]
        out[i] /= np.linalg.norm(out[i])
    return out


def kappa_search(
    alpha: float, k: int, grid: int = 200, refine_tol: float = 1e-7
) -> tuple[float, ExponentPrediction]:
    """Largest-exponent feasible kappa: grid scan over (0, 1/16) followed by
    bisection refinement of the feasibility boundary.

    The predicted exponent is increasing in kappa, so the optimum sits at the
    upper edge of the feasible region.
    """
    if not (alpha > 0):
        raise InfeasibleScheduleError("alpha must be positive")

    def feasible(kap: float):
        try:
            sched = make_schedule(kap, alpha, k)
        except InfeasibleScheduleError:
            return None
        ledger = check_schedule(sched)
        if not ledger.all_pass:
            return None
        return predicted_exponent(sched, ledger)

    kappas = (np.arange(1, grid + 1) / (grid + 1)) * KAPPA_MAX
    best_kappa, best_pred = None, None
    first_infeasible = None
    for kap in kappas:
        pred = feasible(float(kap))
        if pred is None:
            if best_kappa is not None and first_infeasible is None:
                first_infeasible = float(kap)
        elif best_pred is None or pred.exponent > best_pred.exponent:
            best_kappa, best_pred = float(kap), pred
    if best_kappa is None:
        raise InfeasibleScheduleError(
            f"no feasible kappa for alpha={alpha} at grid resolution {grid}"
        )
    hi = first_infeasible if first_infeasible is not None else KAPPA_MAX
    lo = best_kappa
    while hi - lo > refine_tol:
        mid = 0.5 * (lo + hi)
        pred = feasible(mid)
        if pred is not None and pred.exponent > best_pred.exponent:
            best_kappa, best_pred, lo = mid, pred, mid
        else:
            hi = mid
    return best_kappa, best_pred


def default_start_radius(mu, x, r_max: float | None = None, tolerance: float = 0.1) -> float:
    """Half the largest radius whose density ratio is within ``tolerance`` of
    one -- a measurable stand-in for the qualitative smallness conditions on
    the start of the ladder."""
    cloud, _ = _resolve(mu)
    center = np.asarray(x, dtype=float).ravel()
    if r_max is None:
        spread = cloud.points.max(axis=0) - cloud.points.min(axis=0)
        r_max = 0.5 * float(np.linalg.norm(spread)) / 2.0
    r = float(r_max)
    for _ in range(64):
        try:
            if abs(density_ratio(mu, center, r) - 1.0) <= tolerance:
                return r / 2.0
        except EmptyRegionError:
            pass
        r *= 2.0 ** -0.25
    raise EmptyRegionError("no radius with density ratio near one; pass r1 explicitly")
