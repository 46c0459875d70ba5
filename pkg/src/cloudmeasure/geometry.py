"""Dimension-generic vector/plane geometry and symmetric eigendecomposition.

Points are plain float64 numpy arrays of shape (m,); finite point sets are
arrays of shape (N, m).  Everything here is pure and allocation-local, so all
operations are safe for unrestricted concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateFrameError, DimensionMismatchError, EmptyRegionError

__all__ = [
    "AffinePlane",
    "SymmetricForm",
    "hausdorff_distance",
    "hausdorff_distance_max",
    "plane_distance",
    "sym_eigen",
    "grassmann_gap",
    "orthonormal_complement",
]

_ORTHO_TOL = 1e-12


def _as_points(arr, name: str) -> np.ndarray:
    pts = np.asarray(arr, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise EmptyRegionError(f"{name} must be a nonempty (N, m) point array")
    if not np.all(np.isfinite(pts)):
        raise ValueError(f"{name} contains non-finite coordinates")
    return pts


@dataclass(frozen=True)
class AffinePlane:
    """Affine n-plane in R^m: a base point plus an orthonormal direction frame.

    ``frame`` holds the n direction vectors as rows.  The constructor always
    re-orthonormalizes by modified Gram-Schmidt; rank-deficient input is an
    error rather than a silent fix.
    """

    base: np.ndarray
    frame: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float).ravel()
        frame = np.atleast_2d(np.asarray(self.frame, dtype=float)).copy()
        m = base.shape[0]
        n = frame.shape[0]
        if frame.shape[1] != m:
            raise DimensionMismatchError(
                f"frame vectors have dimension {frame.shape[1]}, base has {m}"
            )
        if not (1 <= n < m):
            raise DimensionMismatchError(f"need 1 <= n < m, got n={n}, m={m}")
        if not (np.all(np.isfinite(base)) and np.all(np.isfinite(frame))):
            raise ValueError("plane data must be finite")
        scale = np.max(np.abs(frame))
        for i in range(n):
            for j in range(i):
                frame[i] -= np.dot(frame[i], frame[j]) * frame[j]
            norm = np.linalg.norm(frame[i])
            if norm <= 1e-10 * max(scale, 1.0):
                raise DegenerateFrameError(
                    f"frame vector {i} is linearly dependent on the previous ones"
                )
            frame[i] /= norm
        base.setflags(write=False)
        frame.setflags(write=False)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "frame", frame)

    @property
    def m(self) -> int:
        return self.base.shape[0]

    @property
    def n(self) -> int:
        return self.frame.shape[0]

    def projector(self) -> np.ndarray:
        """Orthogonal projection matrix onto the direction space."""
        return self.frame.T @ self.frame

    def project(self, points: np.ndarray) -> np.ndarray:
        """Orthogonal projection of ambient points onto the plane."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rel = pts - self.base
        return self.base + (rel @ self.frame.T) @ self.frame

    def to_dict(self) -> dict:
        return {"base": self.base.tolist(), "frame": self.frame.tolist()}


@dataclass(frozen=True)
class SymmetricForm:
    """An m x m symmetric matrix together with its full eigensystem.

    Eigenvalues are sorted ascending; eigenvectors are the columns of
    ``eigenvectors`` in matching order, each with its first significantly
    nonzero component made positive so the decomposition is deterministic.
    """

    entries: np.ndarray
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))

    def __call__(self, x: np.ndarray) -> float:
        """Evaluate the quadratic form at x."""
        v = np.asarray(x, dtype=float).ravel()
        return float(v @ self.entries @ v)

    def to_dict(self) -> dict:
        return {
            "matrix": self.entries.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenvectors": self.eigenvectors.tolist(),
        }


def hausdorff_distance(E, F) -> float:
    """Bilateral distance between finite point sets: the SUM of the two
    one-sided sup-distances sup_{y in E} dist(y, F) + sup_{y in F} dist(y, E).

    Note this sums the one-sided terms rather than taking their max; see
    :func:`hausdorff_distance_max` for the max convention.
    """
    a = _one_sided_sups(E, F)
    return a[0] + a[1]


def hausdorff_distance_max(E, F) -> float:
    """max-convention variant of :func:`hausdorff_distance`."""
    a = _one_sided_sups(E, F)
    return max(a[0], a[1])


def _one_sided_sups(E, F) -> tuple[float, float]:
    try:
        pe = _as_points(E, "E")
        pf = _as_points(F, "F")
    except EmptyRegionError:
        raise EmptyRegionError("empty set has no Hausdorff distance") from None
    if pe.shape[1] != pf.shape[1]:
        raise DimensionMismatchError("point sets live in different dimensions")
    # Chunk the (N_E, N_F) distance matrix to keep memory bounded.
    sup_ef = 0.0
    sup_fe = np.full(pf.shape[0], np.inf)
    step = max(1, int(4e6) // max(pf.shape[0], 1))
    for lo in range(0, pe.shape[0], step):
        block = pe[lo : lo + step]
        d = np.sqrt(
            np.maximum(
                ((block**2).sum(1)[:, None] + (pf**2).sum(1)[None, :] - 2.0 * block @ pf.T),
                0.0,
            )
        )
        sup_ef = max(sup_ef, float(d.min(axis=1).max()))
        np.minimum(sup_fe, d.min(axis=0), out=sup_fe)
    return sup_ef, float(sup_fe.max())


def plane_distance(x, plane: AffinePlane) -> float:
    """Euclidean distance from a point to an affine plane."""
    v = np.asarray(x, dtype=float).ravel()
    if v.shape[0] != plane.m:
        raise DimensionMismatchError(
            f"point has dimension {v.shape[0]}, plane lives in R^{plane.m}"
        )
    rel = v - plane.base
    tangential = rel @ plane.frame.T
    return float(np.sqrt(max(rel @ rel - tangential @ tangential, 0.0)))


def plane_distances(points: np.ndarray, plane: AffinePlane) -> np.ndarray:
    """Vectorized :func:`plane_distance` over an (N, m) array."""
    rel = np.atleast_2d(np.asarray(points, dtype=float)) - plane.base
    t = rel @ plane.frame.T
    sq = np.einsum("ij,ij->i", rel, rel) - np.einsum("ij,ij->i", t, t)
    return np.sqrt(np.maximum(sq, 0.0))


def sym_eigen(M) -> SymmetricForm:
    """Full eigendecomposition of a small symmetric matrix by cyclic Jacobi.

    Convergence: off-diagonal Frobenius norm below 1e-12 * ||M||_F.  Ascending
    eigenvalue order and a deterministic sign convention make the result
    reproducible bit-for-bit for identical input.
    """
    A = np.array(M, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatchError("matrix must be square")
    m = A.shape[0]
    norm = np.linalg.norm(A)
    if norm > 0 and np.max(np.abs(A - A.T)) > _ORTHO_TOL * norm:
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    original = A.copy()
    V = np.eye(m)
    if norm == 0.0:
        lam = np.zeros(m)
    else:
        for _ in range(64):
            # Off-diagonal Frobenius norm summed entrywise: the difference
            # form ||A||^2 - sum(diag^2) cancels catastrophically near
            # convergence and would never reach the threshold.
            off = np.sqrt(2.0 * np.sum(np.triu(A, 1) ** 2))
            if off < 1e-12 * norm:
                break
            for p in range(m - 1):
                for q in range(p + 1, m):
                    apq = A[p, q]
                    if abs(apq) <= 1e-18 * norm:
                        continue
                    tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                    t = np.sign(tau) / (abs(tau) + np.hypot(1.0, tau)) if tau != 0 else 1.0
                    c = 1.0 / np.hypot(1.0, t)
                    s = t * c
                    rot_p = c * A[:, p] - s * A[:, q]
                    rot_q = s * A[:, p] + c * A[:, q]
                    A[:, p], A[:, q] = rot_p, rot_q
                    rot_p = c * A[p, :] - s * A[q, :]
                    rot_q = s * A[p, :] + c * A[q, :]
                    A[p, :], A[q, :] = rot_p, rot_q
                    A[p, q] = A[q, p] = 0.0
                    rot_p = c * V[:, p] - s * V[:, q]
                    rot_q = s * V[:, p] + c * V[:, q]
                    V[:, p], V[:, q] = rot_p, rot_q
        lam = np.diag(A).copy()
    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    V = V[:, order]
    for j in range(m):
        col = V[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        pivot = nz[0] if nz.size else int(np.argmax(np.abs(col)))
        if col[pivot] < 0:
            V[:, j] = -col
    lam.setflags(write=False)
    V.setflags(write=False)
    original.setflags(write=False)
    return SymmetricForm(entries=original, eigenvalues=lam, eigenvectors=V)


def grassmann_gap(p1: AffinePlane, p2: AffinePlane) -> float:
    """Operator-norm gap between the orthogonal projectors onto the two
    direction spaces.  A metric in [0, 1] on fixed-(n, m) planes; base points
    are ignored.
    """
    if p1.n != p2.n:
        raise DimensionMismatchError(f"planes have different intrinsic dimension: {p1.n} vs {p2.n}")
    if p1.m != p2.m:
        raise DimensionMismatchError(f"planes live in different ambient spaces: {p1.m} vs {p2.m}")
    diff = p1.projector() - p2.projector()
    lam = sym_eigen(diff).eigenvalues
    return float(np.max(np.abs(lam)))


def orthonormal_complement(plane: AffinePlane) -> np.ndarray:
    """An orthonormal basis ((m-n), m) of the normal space of the plane."""
    m, n = plane.m, plane.n
    proj = np.eye(m) - plane.projector()
    form = sym_eigen(proj)
    # Normal space = eigenvectors of the complementary projector with value 1.
    cols = form.eigenvectors[:, np.argsort(form.eigenvalues, kind="stable")[::-1][: m - n]]
    out = np.ascontiguousarray(cols.T)
    # Re-orthonormalize to clean up float noise from the eigensolver.
    for i in range(out.shape[0]):
        for j in range(i):
            out[i] -= np.dot(out[i], out[j]) * out[j]
        out[i] /= np.linalg.norm(out[i])
    return out
