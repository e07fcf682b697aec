"""Designs as weighted point sets, information matrices, and design hygiene."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDesignError, InfeasibleRoundingError, ValidationError

WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Design:
    """Probability measure with finite support: points (m, q), weights (m,)."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        if pts.shape[0] != w.shape[0]:
            raise ValidationError("points and weights length mismatch")
        if pts.shape[0] == 0:
            raise EmptyDesignError("design needs at least one atom")
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(w)):
            raise ValidationError("design entries must be finite")
        if np.any(w <= 0):
            raise ValidationError("weights must be strictly positive")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(f"weights must sum to 1, got {w.sum()!r}")
        # exact duplicate support points are a construction error
        if len({tuple(row) for row in pts}) != pts.shape[0]:
            raise ValidationError("support points must be pairwise distinct")
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def q(self) -> int:
        return self.points.shape[1]

    def atoms(self):
        return list(zip(map(tuple, self.points), self.weights))

    def to_dict(self) -> dict:
        return {"atoms": [{"x": list(x), "w": float(w)} for x, w in self.atoms()]}

    @staticmethod
    def from_dict(obj: dict) -> "Design":
        atoms = obj.get("atoms", [])
        if not atoms:
            raise EmptyDesignError("design file has no atoms")
        pts = np.array([a["x"] for a in atoms], dtype=float)
        w = np.array([a["w"] for a in atoms], dtype=float)
        return Design(pts, w)


def design(points, weights=None, normalize=False) -> Design:
    """Convenience constructor; uniform weights when none are given."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if weights is None:
        w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if normalize:
            w = w / w.sum()
    return Design(pts, w)


def load_design(path) -> Design:
    with open(path, "r", encoding="utf-8") as fh:
        return Design.from_dict(json.load(fh))


@dataclass(frozen=True)
class ExactDesign:
    """Integer-replication design for n experimental runs."""

    points: np.ndarray
    reps: np.ndarray
    n: int

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        reps = np.asarray(self.reps, dtype=int).ravel()
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "reps", reps)
        if reps.sum() != self.n:
            raise ValidationError("replications must sum to n")
        if np.any(reps < 0):
            raise ValidationError("replications must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "n": int(self.n),
            "atoms": [
                {"x": list(map(float, x)), "reps": int(r)}
                for x, r in zip(self.points, self.reps)
            ],
        }


def info_matrix(dsgn: Design, model) -> np.ndarray:
    """M(xi) = sum_i w_i f(x_i) f(x_i)^T; symmetric nonnegative definite."""
    F = model.eval_many(dsgn.points)
    M = F.T @ (dsgn.weights[:, None] * F)
    return 0.5 * (M + M.T)


def assert_info_matrix(M: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Validate symmetry and numerical nonnegative definiteness."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError("information matrix must be square")
    scale = max(np.abs(M).max(), 1.0)
    if np.abs(M - M.T).max() > 1e-12 * scale:
        raise ValidationError("information matrix must be symmetric")
    vals = np.linalg.eigvalsh(0.5 * (M + M.T))
    if vals[0] < -tol * max(vals[-1], 0.0) - 1e-300:
        raise ValidationError(f"matrix is not nonnegative definite (lambda_min={vals[0]:g})")
    return 0.5 * (M + M.T)


def mix_designs(d1: Design, d2: Design, alpha: float) -> Design:
    """Convex combination alpha*d1 + (1-alpha)*d2 as a measure."""
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError("alpha must lie in [0, 1]")
    if alpha == 1.0:
        return d1
    if alpha == 0.0:
        return d2
    seen: dict[tuple, float] = {}
    order: list[tuple] = []
    for pts, w, a in ((d1.points, d1.weights, alpha), (d2.points, d2.weights, 1 - alpha)):
        for x, wi in zip(map(tuple, pts), w):
            if x not in seen:
                seen[x] = 0.0
                order.append(x)
            seen[x] += a * wi
    pts = np.array(order, dtype=float)
    w = np.array([seen[x] for x in order])
    keep = w > 0  # extreme alpha can underflow a component to exactly zero
    return Design(pts[keep], w[keep] / w[keep].sum())


def merge_close(dsgn: Design, tol: float) -> Design:
    """Merge atoms within Euclidean distance ``tol`` to weight-weighted centroids.

    Clusters are the connected components of the "within tol" graph, so chains
    of near-coincident grid neighbors collapse to a single atom.
    """
    if tol < 0:
        raise ValidationError("merge tolerance must be nonnegative")
    m = dsgn.m
    diff = dsgn.points[:, None, :] - dsgn.points[None, :, :]
    close = np.sqrt((diff**2).sum(axis=2)) <= tol
    # union-find over the adjacency
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(m):
        for j in range(i + 1, m):
            if close[i, j]:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)

    clusters: dict[int, list[int]] = {}
    for i in range(m):
        clusters.setdefault(find(i), []).append(i)

    pts, ws = [], []
    for root in sorted(clusters):
        idx = clusters[root]
        w = dsgn.weights[idx]
        pts.append((w[:, None] * dsgn.points[idx]).sum(axis=0) / w.sum())
        ws.append(w.sum())
    w = np.array(ws)
    return Design(np.array(pts), w / w.sum())


def prune(dsgn: Design, wmin: float) -> Design:
    """Drop atoms with weight below ``wmin`` and renormalize."""
    keep = dsgn.weights >= wmin
    if not np.any(keep):
        raise EmptyDesignError(f"all atoms fall below the weight floor {wmin:g}")
    w = dsgn.weights[keep]
    return Design(dsgn.points[keep], w / w.sum())


def round_to_n(dsgn: Design, n: int) -> ExactDesign:
    """Efficient apportionment of n runs to the design weights.

    Start from ceil((n - m/2) * w) and repair one run at a time using the
    multiplier rule: increment the atom minimizing reps/w, decrement the atom
    maximizing (reps - 1)/w. Ties break on the lowest atom index. Every atom
    keeps at least one run.
    """
    m = dsgn.m
    if n < m:
        raise InfeasibleRoundingError(f"n={n} runs cannot cover {m} support points")
    w = dsgn.weights
    reps = np.ceil((n - m / 2.0) * w - 1e-12).astype(int)
    reps = np.maximum(reps, 1)
    while reps.sum() < n:
        reps[np.argmin(reps / w)] += 1
    while reps.sum() > n:
        reps[np.argmax((reps - 1) / w)] -= 1
    return ExactDesign(dsgn.points.copy(), reps, n)
