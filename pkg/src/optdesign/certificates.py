"""Dual certificates, equivalence-theorem verification, and support geometry.

A certificate is a nonnegative definite matrix N with f(x)^T N f(x) <= 1 on
the design space, trace(M N) = 1 and phi(M) * polar(N) = 1; its existence is
equivalent to optimality of M. The eigenbasis of N also exposes the geometry
of the support: squared transformed coordinates of support points fall on at
most k supporting hyperplanes of a polytope, and points sharing a hyperplane
share the Euclidean length of their regression vector. Norm-injectivity of
the induced design space bounds support sizes (saturation).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .criteria import E_GAP_REL, NEG_INF, Criterion, phi, polar, psd_eig
from .designs import Design, info_matrix
from .errors import InconsistencyError, ValidationError
from .models import FAMILIES, CandidateSet, ModelSpec, make_model, truncated_axes

_SING_REL = 1e-14


@dataclass(frozen=True)
class Certificate:
    """Dual matrix N with its eigendecomposition (eigenvalues descending)."""

    N: np.ndarray
    Z: np.ndarray
    eigenvalues: np.ndarray
    bound: float = 1.0

    def __post_init__(self):
        for name in ("N", "Z", "eigenvalues"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
            arr.setflags(write=False)
        scale = max(float(np.abs(self.N).max()), 1.0)
        if np.abs(self.Z @ self.Z.T - np.eye(self.Z.shape[0])).max() > 1e-10:
            raise ValidationError("certificate eigenvector matrix is not orthogonal")
        recomposed = (self.Z * self.eigenvalues) @ self.Z.T
        if np.abs(recomposed - self.N).max() > 1e-10 * scale:
            raise ValidationError("certificate eigendecomposition does not recompose N")


@dataclass(frozen=True)
class CertifyReport:
    optimal: bool
    duality_products: tuple[float, float]  # (trace(MN), phi(M)*polar(N))
    max_violation: float
    violating_point: np.ndarray | None
    support_equalities: np.ndarray
    certificate: Certificate


@dataclass(frozen=True)
class PolytopeReport:
    hyperplanes: list  # (constraint vector c, list of active support points)
    squared_coords: dict  # support point tuple -> squared transformed coordinates
    length_groups: list  # partition of support points by ||f(x)||


@dataclass(frozen=True)
class GarzaReport:
    norm_values: np.ndarray  # ||f(x)||^2 per candidate
    max_equal_group_size: int
    saturation_bound: int
    injective: bool
    monotone_axis_note: str | None


def _e_eigenspace_minimax(H: np.ndarray, budget: int) -> np.ndarray:
    """Trace-one PSD E on the minimal eigenspace minimizing max_i h_i' E h_i.

    The sensitivities are linear in the entries of E, so the minimax is one LP
    over all candidates (dimension r(r+1)/2); definiteness is enforced by
    eigenvalue cuts, and a second LP minimizes the off-diagonal mass among
    worst-case-optimal solutions so the result is deterministic and as
    diagonal as the constraints allow.
    """
    from scipy.optimize import linprog

    n, r = H.shape
    pairs = [(i, j) for i in range(r) for j in range(i + 1, r)]
    nv = r + len(pairs) + 1  # diagonal, off-diagonal, epigraph variable

    def matrix_of(x):
        E = np.diag(x[:r])
        for idx, (i, j) in enumerate(pairs):
            E[i, j] = E[j, i] = x[r + idx]
        return E

    def sens_rows(vectors):
        rows = np.empty((vectors.shape[0], nv))
        rows[:, :r] = vectors**2
        for idx, (i, j) in enumerate(pairs):
            rows[:, r + idx] = 2.0 * vectors[:, i] * vectors[:, j]
        rows[:, -1] = 0.0
        return rows

    base_rows = sens_rows(H)
    base_rows[:, -1] = -1.0
    A_eq = np.zeros((1, nv))
    A_eq[0, :r] = 1.0
    bounds = [(0.0, 1.0)] * r + [(-0.5, 0.5)] * len(pairs) + [(0.0, None)]
    obj = np.zeros(nv)
    obj[-1] = 1.0
    psd_cuts: list[np.ndarray] = []
    best_E, best_worst = np.eye(r) / r, float((H**2).sum(axis=1).max() / r)
    iters = int(np.clip(budget // 100, 20, 80))

    def solve_lp(objective, extra_rows=None, extra_rhs=None, width=nv):
        rows = [base_rows if width == nv else np.hstack([base_rows, np.zeros((n, width - nv))])]
        rhs = [np.zeros(n)]
        if psd_cuts:
            cr = -sens_rows(np.stack(psd_cuts))
            rows.append(cr if width == nv else np.hstack([cr, np.zeros((len(psd_cuts), width - nv))]))
            rhs.append(np.zeros(len(psd_cuts)))
        if extra_rows is not None:
            rows.append(extra_rows)
            rhs.append(extra_rhs)
        eq = A_eq if width == nv else np.hstack([A_eq, np.zeros((1, width - nv))])
        return linprog(
            objective, A_ub=np.vstack(rows), b_ub=np.concatenate(rhs),
            A_eq=eq, b_eq=[1.0],
            bounds=bounds if width == nv else bounds + [(0.0, 0.5)] * (width - nv),
            method="highs",
        )

    for _ in range(iters):
        res = solve_lp(obj)
        if not res.success:
            break
        vals, vecs = np.linalg.eigh(matrix_of(res.x[: nv - 1]))
        if vals[0] < -1e-11:
            psd_cuts.append(vecs[:, 0])
            continue
        E = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
        worst = float(np.einsum("ij,jk,ik->i", H, E, H).max())
        if worst < best_worst:
            best_E, best_worst = E, worst
        break

    # tie-break: minimize total off-diagonal magnitude at the achieved value
    if pairs:
        width = nv + len(pairs)
        obj2 = np.zeros(width)
        obj2[nv:] = 1.0
        cap_row = np.zeros(width)
        cap_row[nv - 1] = 1.0
        abs_rows = []
        for idx in range(len(pairs)):
            row = np.zeros(width)
            row[r + idx] = 1.0
            row[nv + idx] = -1.0
            abs_rows.append(row.copy())
            row[r + idx] = -1.0
            abs_rows.append(row)
        extra = np.vstack([cap_row] + abs_rows)
        rhs = np.concatenate([[best_worst + 1e-11 * max(1.0, best_worst)], np.zeros(2 * len(pairs))])
        for _ in range(10):
            res = solve_lp(obj2, extra_rows=extra, extra_rhs=rhs, width=width)
            if not res.success:
                break
            vals, vecs = np.linalg.eigh(matrix_of(res.x[: nv - 1]))
            if vals[0] < -1e-11:
                psd_cuts.append(vecs[:, 0])
                continue
            E = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
            worst = float(np.einsum("ij,jk,ik->i", H, E, H).max())
            if worst <= best_worst + 1e-9 * max(1.0, best_worst):
                best_E = E
            break
    return best_E


def build_certificate(
    criterion: Criterion,
    M: np.ndarray,
    model: ModelSpec,
    candidates: CandidateSet,
    floor_singular: bool = False,
    search_budget: int = 4000,
) -> Certificate:
    """Matrix-mean dual certificate for M.

    Finite p: N = M^(p-1) / trace(M^p), closed form. E-criterion: N is built on
    the smallest eigenspace; with multiplicity the trace-one factor is chosen
    to minimize the worst sensitivity over the candidates.
    """
    p = criterion.p
    vals, vecs = psd_eig(M, criterion.s)
    lmax = max(vals[-1], 1e-300)
    singular = vals[0] <= _SING_REL * lmax

    if p == NEG_INF:
        if singular:
            raise ValidationError("singular matrix has no E-certificate; value is zero")
        lam_min = vals[0]
        cluster = vals - lam_min < E_GAP_REL * lmax
        r = int(cluster.sum())
        if r == 1:
            N = np.outer(vecs[:, 0], vecs[:, 0]) / lam_min
        else:
            V = vecs[:, :r]
            H = model.eval_many(candidates.points) @ V
            E = _e_eigenspace_minimax(H, search_budget)
            N = V @ E @ V.T / lam_min
    else:
        if singular and p < 1:
            if not floor_singular:
                raise ValidationError(
                    "singular information matrix; certificate needs a positive definite input"
                )
        floored = np.maximum(vals, _SING_REL * lmax)
        if p == 0:
            N = (vecs / floored) @ vecs.T / len(vals)
        else:
            powered = floored**p
            N = (vecs * floored ** (p - 1.0)) @ vecs.T / powered.sum()

    N = 0.5 * (N + N.T)
    nvals, nvecs = np.linalg.eigh(N)
    order = np.argsort(nvals)[::-1]
    return Certificate(N=N, Z=nvecs[:, order], eigenvalues=np.clip(nvals[order], 0.0, None))


def certify(
    design: Design,
    model: ModelSpec,
    candidates: CandidateSet,
    criterion: Criterion,
    tol: float = 1e-5,
) -> CertifyReport:
    """Equivalence-theorem check of a design against its own dual certificate.

    Verifies (i) the normality inequality at every candidate, (ii) equality at
    every support atom, (iii) trace(MN) = 1 and phi(M) * polar(N) = 1. All
    three must hold within ``tol`` for ``optimal=True``. This is a computation,
    not a search: it always returns a report.
    """
    criterion = Criterion(criterion.p, model.k)
    M = info_matrix(design, model)
    cert = build_certificate(criterion, M, model, candidates)
    F = model.eval_many(candidates.points)
    sens = np.einsum("ij,jk,ik->i", F, cert.N, F)
    j = int(np.argmax(sens))
    viol = float(sens[j] - cert.bound)
    F_sup = model.eval_many(design.points)
    support_sens = np.einsum("ij,jk,ik->i", F_sup, cert.N, F_sup)
    tr = float(np.trace(M @ cert.N))
    product = phi(criterion, M) * polar(criterion, cert.N)
    optimal = (
        viol <= tol
        and np.abs(support_sens - cert.bound).max() <= tol
        and abs(tr - 1.0) <= tol
        and abs(product - 1.0) <= tol
    )
    space = candidates.space
    if viol > -tol:
        x_max = candidates.points[j]
        for ax in truncated_axes(space):
            hi = space.bounds[ax][1]
            if abs(x_max[ax] - hi) <= 1e-12 * max(abs(hi), 1.0):
                warnings.warn(
                    "maximum sensitivity attained on the boundary of a truncated axis; "
                    "the continuum guarantee may need a larger domain",
                    RuntimeWarning,
                    stacklevel=2,
                )
                break
    return CertifyReport(
        optimal=bool(optimal),
        duality_products=(tr, float(product)),
        max_violation=max(viol, 0.0),
        violating_point=candidates.points[j].copy() if viol > tol else None,
        support_equalities=support_sens,
        certificate=cert,
    )


def _cluster_rows(rows: np.ndarray, tol: float) -> list[list[int]]:
    """Single-linkage groups of row vectors under the max-norm distance."""
    m = rows.shape[0]
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(m):
        for j in range(i + 1, m):
            if np.abs(rows[i] - rows[j]).max() <= tol:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    return [groups[r] for r in sorted(groups)]


def polytope_report(
    certificate: Certificate,
    design: Design,
    model: ModelSpec,
    candidates: CandidateSet,
    group_tol: float = 1e-5,
    active_tol: float = 1e-4,
) -> PolytopeReport:
    """Supporting-hyperplane structure of a certified design.

    Squared transformed coordinates of a support point give the coefficient
    vector of the hyperplane its constraint is active on; at most k distinct
    hyperplanes can occur and points sharing one share the length ||f(x)||.
    """
    Z, lam = certificate.Z, certificate.eigenvalues
    k = Z.shape[0]
    F_sup = model.eval_many(design.points)
    P_sup = (F_sup @ Z) ** 2
    activity = P_sup @ lam
    bad = np.abs(activity - certificate.bound) > active_tol
    if np.any(bad):
        i = int(np.nonzero(bad)[0][0])
        raise InconsistencyError(
            f"support atom {design.points[i].tolist()} is not active on the certificate "
            f"(value {activity[i]:.8f})"
        )
    F_all = model.eval_many(candidates.points)
    P_all = (F_all @ Z) ** 2
    worst = float((P_all @ lam).max())
    if worst > certificate.bound + active_tol:
        raise InconsistencyError(
            f"certificate violates the normality inequality on the grid (max {worst:.8f})"
        )

    scale = max(float(np.abs(P_sup).max()), 1.0)
    groups = _cluster_rows(P_sup, group_tol * scale)
    if len(groups) > k:
        raise InconsistencyError(f"{len(groups)} hyperplanes found; at most {k} can be active")

    norms = np.sqrt((F_sup**2).sum(axis=1))
    nmax = max(float(norms.max()), 1e-300)
    hyperplanes = []
    for idx in groups:
        c = P_sup[idx].mean(axis=0)
        spread = norms[idx].max() - norms[idx].min()
        if spread > 1e-5 * nmax:
            raise InconsistencyError(
                "support points on one hyperplane have different regression-vector lengths"
            )
        hyperplanes.append((c, [tuple(design.points[i]) for i in idx]))

    length_groups = [
        [tuple(design.points[i]) for i in idx]
        for idx in _cluster_rows(norms[:, None], 1e-5 * nmax)
    ]
    squared_coords = {tuple(design.points[i]): P_sup[i].copy() for i in range(design.m)}
    return PolytopeReport(
        hyperplanes=hyperplanes, squared_coords=squared_coords, length_groups=length_groups
    )


def garza_report(model: ModelSpec, candidates: CandidateSet, norm_tol: float = 1e-7) -> GarzaReport:
    """Norm map of the induced design space and the resulting saturation bound.

    Buckets ||f(x)||^2 over the grid within ``norm_tol``; an injective norm map
    bounds optimal supports by k points, and at most N equal-length vectors
    bound them by N*k.
    """
    F = model.eval_many(candidates.points)
    norms2 = (F**2).sum(axis=1)
    order = np.argsort(norms2, kind="stable")
    sorted_vals = norms2[order]
    sizes = []
    current = 1
    for gap in np.diff(sorted_vals):
        if gap > norm_tol:
            sizes.append(current)
            current = 1
        else:
            current += 1
    sizes.append(current)
    biggest = max(sizes)
    injective = biggest == 1
    k = model.k
    note = None
    if candidates.space.dimension == 1 and len(candidates) > 1:
        xs = candidates.points[:, 0]
        xorder = np.argsort(xs, kind="stable")
        diffs = np.diff(norms2[xorder])
        if np.all(diffs > 0):
            note = "norm map strictly increasing along the predictor axis"
        elif np.all(diffs < 0):
            note = "norm map strictly decreasing along the predictor axis"
    return GarzaReport(
        norm_values=norms2,
        max_equal_group_size=int(biggest),
        saturation_bound=int(k if injective else biggest * k),
        injective=bool(injective),
        monotone_axis_note=note,
    )


def exp_saturation_check(a, lam) -> tuple[bool, np.ndarray]:
    """Saturation condition for exponential-sum models: rate_i >= |a_i| / 2."""
    FAMILIES["exponential-sum"].validate({"a": a, "lambda": lam})
    a = np.asarray(a, dtype=float)
    lam = np.asarray(lam, dtype=float)
    margins = lam - np.abs(a) / 2.0
    return bool(np.all(margins >= 0)), margins


def rescale_invariance_check(
    a,
    lam,
    c: float,
    candidates: CandidateSet,
    criterion: Criterion | None = None,
    opts=None,
) -> bool:
    """D-designs for an exponential sum are invariant under rescaling every
    amplitude to a common constant c > 0 (a diagonal reparametrization).

    Solves both problems on the same grid and compares supports (within one
    grid step) and weights (within 1e-4).
    """
    from .solver import SolverOptions, solve

    if c <= 0:
        raise ValidationError("amplitude constant c must be positive")
    criterion = criterion or Criterion(0.0)
    opts = opts or SolverOptions()
    L = len(np.asarray(lam).ravel())
    model_f = make_model("exponential-sum", space=candidates.space, a=list(a), **{"lambda": list(lam)})
    model_g = make_model(
        "exponential-sum", space=candidates.space, a=[-float(c)] * L, **{"lambda": list(lam)}
    )
    rep_f = solve(model_f, candidates, criterion, opts)
    rep_g = solve(model_g, candidates, criterion, opts)
    if not (rep_f.converged and rep_g.converged):
        return False
    df, dg = rep_f.design, rep_g.design
    if df.m != dg.m:
        return False
    of = np.argsort(df.points[:, 0])
    og = np.argsort(dg.points[:, 0])
    step = candidates.max_step
    if np.any(np.abs(df.points[of, 0] - dg.points[og, 0]) > step + 1e-9):
        return False
    return bool(np.all(np.abs(df.weights[of] - dg.weights[og]) <= 1e-4))
