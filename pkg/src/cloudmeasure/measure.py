"""Discrete Radon measures as weighted point clouds.

A :class:`WeightedCloud` is a finite set of points in R^m with positive
weights; the weights represent n-dimensional surface mass per sample, so the
cloud is the discrete stand-in for a positive Radon measure with an
n-dimensional support.  Ball membership is strict (open balls).  Summation
order over samples is fixed by index order so results are reproducible and
independent of how queries are executed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, DimensionMismatchError, EmptyRegionError

__all__ = [
    "WeightedCloud",
    "Ball",
    "CloudIndex",
    "ball_mass",
    "support_in_ball",
    "support_indices_in_ball",
    "blow_up",
    "build_index",
    "unit_ball_volume",
    "load_cloud",
    "save_cloud",
]


def unit_ball_volume(n: int) -> float:
    """Lebesgue volume of the unit n-ball."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


@dataclass(frozen=True)
class WeightedCloud:
    """Weighted point cloud representing a measure with n-dimensional support.

    points  -- (N, m) float64 array
    weights -- (N,) positive float64 array, surface mass per sample
    n       -- intrinsic dimension label of the support
    meta    -- provenance tag: generator name + parameters, or the input file
    """

    points: np.ndarray
    weights: np.ndarray
    n: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=float).ravel())
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise DataFormatError("cloud needs at least one point of shape (N, m)")
        if w.shape[0] != pts.shape[0]:
            raise DataFormatError("weights and points disagree in length")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise DataFormatError("cloud data must be finite")
        if np.any(w <= 0):
            raise DataFormatError("all weights must be positive")
        if not (1 <= self.n < pts.shape[1]):
            raise DataFormatError(f"need 1 <= n < m, got n={self.n}, m={pts.shape[1]}")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def m(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())


@dataclass(frozen=True)
class Ball:
    """Open ball B(center, radius)."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).ravel()
        if not np.all(np.isfinite(c)):
            raise ValueError("ball center must be finite")
        if not (self.radius > 0):
            raise ValueError("ball radius must be positive")
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))


class CloudIndex:
    """Uniform-grid spatial index over a cloud.

    Cell size adapts to the median nearest-neighbor spacing so query cost is
    sublinear in expected time, while query RESULTS (the hit index set, in
    ascending index order) are identical to a linear scan.
    """

    def __init__(self, cloud: WeightedCloud, cell_size: float | None = None):
        self.cloud = cloud
        pts = cloud.points
        if cell_size is None:
            cell_size = 3.0 * _median_nn_spacing(pts)
        span = float(np.max(pts.max(axis=0) - pts.min(axis=0)))
        if not (cell_size > 0) or not np.isfinite(cell_size):
            cell_size = max(span, 1.0)
        # Keep the cell lattice coarse enough that per-axis ids fit comfortably.
        cell_size = max(cell_size, span / 2048.0, 1e-300)
        self.cell_size = float(cell_size)
        self.origin = pts.min(axis=0)
        cells = np.floor((pts - self.origin) / self.cell_size).astype(np.int64)
        self.shape = cells.max(axis=0) + 1
        strides = np.concatenate([np.cumprod(self.shape[::-1])[-2::-1], [1]])
        self._strides = strides
        ids = cells @ strides
        order = np.argsort(ids, kind="stable")
        self._sorted_idx = order
        sorted_ids = ids[order]
        uniq, starts = np.unique(sorted_ids, return_index=True)
        self._cell_ids = uniq
        self._cell_starts = np.append(starts, sorted_ids.shape[0])
        # Occupied cell coordinates, for queries whose bounding box would
        # enumerate more cells than actually exist.
        self._cell_coords = cells[order[starts]]

    def _candidate_slots(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        box_cells = float(np.prod((hi - lo + 1).astype(float)))
        if box_cells > self._cell_ids.shape[0]:
            inside = np.all((self._cell_coords >= lo) & (self._cell_coords <= hi), axis=1)
            return np.flatnonzero(inside)
        axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(lo, hi)]
        grids = np.meshgrid(*axes, indexing="ij")
        cand = np.stack([g.ravel() for g in grids], axis=1) @ self._strides
        slots = np.searchsorted(self._cell_ids, cand)
        slots = slots[slots < self._cell_ids.shape[0]]
        return np.unique(slots[np.isin(self._cell_ids[slots], cand)])

    def _candidate_indices(self, ball: Ball) -> np.ndarray:
        lo = np.floor((ball.center - ball.radius - self.origin) / self.cell_size).astype(np.int64)
        hi = np.floor((ball.center + ball.radius - self.origin) / self.cell_size).astype(np.int64)
        lo = np.maximum(lo, 0)
        hi = np.minimum(hi, self.shape - 1)
        if np.any(hi < lo):
            return np.empty(0, dtype=np.int64)
        present = self._candidate_slots(lo, hi)
        if present.size == 0:
            return np.empty(0, dtype=np.int64)
        pieces = [
            self._sorted_idx[self._cell_starts[s] : self._cell_starts[s + 1]] for s in present
        ]
        return np.concatenate(pieces)

    def indices_in_ball(self, ball: Ball) -> np.ndarray:
        cand = self._candidate_indices(ball)
        if cand.size == 0:
            return cand
        rel = self.cloud.points[cand] - ball.center
        hit = cand[np.einsum("ij,ij->i", rel, rel) < ball.radius**2]
        hit.sort()
        return hit


def _median_nn_spacing(pts: np.ndarray, sample_cap: int = 4096) -> float:
    """Median nearest-neighbor distance, estimated on a strided subsample."""
    if pts.shape[0] < 2:
        return 1.0
    from scipy.spatial import cKDTree

    tree = cKDTree(pts)
    stride = max(1, pts.shape[0] // sample_cap)
    query = pts[::stride]
    dist, _ = tree.query(query, k=2)
    vals = dist[:, 1]
    vals = vals[np.isfinite(vals) & (vals > 0)]
    return float(np.median(vals)) if vals.size else 1.0


def build_index(cloud: WeightedCloud, cell_size: float | None = None) -> CloudIndex:
    """Build the uniform-grid index; see :class:`CloudIndex`."""
    return CloudIndex(cloud, cell_size=cell_size)


def _resolve(mu) -> tuple[WeightedCloud, CloudIndex | None]:
    if isinstance(mu, CloudIndex):
        return mu.cloud, mu
    if isinstance(mu, WeightedCloud):
        return mu, None
    raise TypeError(f"expected WeightedCloud or CloudIndex, got {type(mu)!r}")


def support_indices_in_ball(mu, ball: Ball) -> np.ndarray:
    """Ascending indices of the sample points strictly inside the ball."""
    cloud, index = _resolve(mu)
    if ball.center.shape[0] != cloud.m:
        raise DimensionMismatchError("ball center dimension does not match cloud")
    if index is not None:
        return index.indices_in_ball(ball)
    rel = cloud.points - ball.center
    return np.flatnonzero(np.einsum("ij,ij->i", rel, rel) < ball.radius**2)


def ball_mass(mu, ball: Ball) -> float:
    """Total weight of samples strictly inside the ball (open-ball convention,
    fixed index-order summation)."""
    cloud, _ = _resolve(mu)
    idx = support_indices_in_ball(mu, ball)
    return float(cloud.weights[idx].sum())


def support_in_ball(mu, ball: Ball) -> np.ndarray:
    """The sample points inside the ball, in ascending index order."""
    cloud, _ = _resolve(mu)
    return cloud.points[support_indices_in_ball(mu, ball)]


def blow_up(mu, x, r: float, normalization: str = "mass") -> WeightedCloud:
    """Recenter at x and rescale space by 1/r.

    normalization="mass"  -- weights divided by the mass of B(x, r), so the
                             result has unit mass on B(0, 1);
    normalization="scale" -- weights divided by r^n, the pure rescaling under
                             which ball moments transform homogeneously.
    """
    cloud, _ = _resolve(mu)
    center = np.asarray(x, dtype=float).ravel()
    if normalization == "mass":
        denom = ball_mass(mu, Ball(center, r))
        if denom <= 0:
            raise EmptyRegionError("center not in support at this scale")
    elif normalization == "scale":
        denom = float(r) ** cloud.n
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    meta = dict(cloud.meta)
    meta["blow_up"] = {"center": center.tolist(), "r": float(r), "normalization": normalization}
    return WeightedCloud(
        points=(cloud.points - center) / r,
        weights=cloud.weights / denom,
        n=cloud.n,
        meta=meta,
    )


# ---------------------------------------------------------------------------
# File formats: CSV with header x1,...,xm,w and JSON-lines {"p": [...], "w": w}
# ---------------------------------------------------------------------------


def save_cloud(cloud: WeightedCloud, path: str, fmt: str | None = None) -> None:
    """Write a cloud to CSV or JSON-lines, with shortest round-trip floats."""
    if fmt is None:
        fmt = "jsonl" if str(path).endswith((".jsonl", ".ndjson")) else "csv"
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{i + 1}" for i in range(cloud.m)] + ["w"])
            for p, w in zip(cloud.points, cloud.weights):
                writer.writerow([repr(float(v)) for v in p] + [repr(float(w))])
    elif fmt == "jsonl":
        with open(path, "w") as fh:
            for p, w in zip(cloud.points, cloud.weights):
                fh.write(json.dumps({"p": [float(v) for v in p], "w": float(w)}) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    sidecar = {
        "schema_version": 1,
        "n": cloud.n,
        "m": cloud.m,
        "size": cloud.size,
        "meta": cloud.meta,
    }
    with open(str(path) + ".meta.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_cloud(path: str, n: int | None = None) -> WeightedCloud:
    """Load a cloud from CSV (header x1..xm,w) or JSON-lines.

    The intrinsic dimension label comes from the ``.meta.json`` sidecar when
    present, otherwise from the ``n`` argument.
    """
    with open(path) as fh:
        text = fh.read()
    stripped = text.lstrip()
    if not stripped:
        raise DataFormatError(f"{path}: empty file")
    meta: dict = {"source": str(path)}
    sidecar_n = None
    try:
        with open(str(path) + ".meta.json") as fh:
            sidecar = json.load(fh)
        sidecar_n = sidecar.get("n")
        meta.update(sidecar.get("meta", {}))
    except (OSError, json.JSONDecodeError):
        pass
    if stripped[0] == "{":
        pts, ws = _parse_jsonl(stripped, path)
    else:
        pts, ws = _parse_csv(text, path)
    label = n if n is not None else sidecar_n
    if label is None:
        raise DataFormatError(
            f"{path}: intrinsic dimension unknown; pass n= or provide a sidecar"
        )
    try:
        return WeightedCloud(points=pts, weights=ws, n=int(label), meta=meta)
    except DataFormatError as exc:
        raise DataFormatError(f"{path}: {exc}") from None


def _parse_csv(text: str, path: str) -> tuple[np.ndarray, np.ndarray]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataFormatError(f"{path}: empty CSV") from None
    header = [h.strip() for h in header]
    if header[-1] != "w" or any(h != f"x{i + 1}" for i, h in enumerate(header[:-1])):
        raise DataFormatError(f"{path}: expected CSV header x1,...,xm,w, got {header}")
    m = len(header) - 1
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != m + 1:
            raise DataFormatError(f"{path}:{lineno}: expected {m + 1} fields, got {len(row)}")
        try:
            rows.append([float(v) for v in row])
        except ValueError:
            raise DataFormatError(f"{path}:{lineno}: non-numeric value") from None
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    return arr[:, :m], arr[:, m]


def _parse_jsonl(text: str, path: str) -> tuple[np.ndarray, np.ndarray]:
    pts, ws = [], []
    dim = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            p = [float(v) for v in rec["p"]]
            w = float(rec["w"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise DataFormatError(f"{path}:{lineno}: bad JSON-lines record") from None
        if dim is None:
            dim = len(p)
        elif len(p) != dim:
            raise DataFormatError(f"{path}:{lineno}: inconsistent point dimension")
        pts.append(p)
        ws.append(w)
    if not pts:
        raise DataFormatError(f"{path}: no data rows")
    return np.asarray(pts, dtype=float), np.asarray(ws, dtype=float)
