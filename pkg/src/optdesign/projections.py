"""Euclidean projections onto the probability simplex and the spectahedron."""

from __future__ import annotations

import numpy as np


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Project onto {w : w >= 0, sum w = 1} (sort-based, non-iterative)."""
    v = np.asarray(v, dtype=float).ravel()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    cond = u - css / idx > 0
    rho = idx[cond][-1]
    theta = css[cond][-1] / rho
    return np.maximum(v - theta, 0.0)


def project_spectahedron(S: np.ndarray) -> np.ndarray:
    """Project a symmetric matrix onto {E : E PSD, trace(E) = 1}."""
    S = 0.5 * (S + S.T)
    vals, vecs = np.linalg.eigh(S)
    w = project_simplex(vals)
    return (vecs * w) @ vecs.T
