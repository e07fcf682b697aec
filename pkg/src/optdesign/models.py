"""Design spaces, regression-model catalog, and grid discretization.

A model is a family name plus parameters; evaluating it at a point returns the
regression vector f(x) (for nonlinear families, the parameter gradient of the
mean function at a nominal parameter value, so all downstream machinery sees a
linear model). Continuous design spaces are boxes; solvers and certificates
work on finite candidate grids produced by :func:`discretize`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, MustTruncateError, ValidationError

_BOUND_EPS = 1e-9


@dataclass(frozen=True)
class DesignSpace:
    """Axis-aligned box of predictor values, possibly unbounded above.

    Parameters
    ----------
    bounds : tuple of (lo, hi) pairs
        Closed interval per axis; ``hi`` may be ``math.inf``.
    truncation_note : str, optional
        Records that an originally unbounded axis was cut off, and where.
    """

    bounds: tuple[tuple[float, float], ...]
    truncation_note: str | None = None

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        for j, (lo, hi) in enumerate(bounds):
            if not math.isfinite(lo):
                raise ValidationError(f"axis {j}: lower bound must be finite, got {lo}")
            if not lo <= hi:
                raise ValidationError(f"axis {j}: need lo <= hi, got [{lo}, {hi}]")

    @property
    def dimension(self) -> int:
        return len(self.bounds)

    @property
    def is_bounded(self) -> bool:
        return all(math.isfinite(hi) for _, hi in self.bounds)

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return np.all((pts >= lo - _BOUND_EPS) & (pts <= hi + _BOUND_EPS), axis=1)


def interval(lo: float, hi: float, note: str | None = None) -> DesignSpace:
    return DesignSpace(((lo, hi),), truncation_note=note)


def truncated_axes(space: DesignSpace) -> list[int]:
    """Axes whose upper bound came from a truncation, parsed from the note."""
    import re

    if not space.truncation_note:
        return []
    return sorted({int(a) for a in re.findall(r"axis (\d+) truncated", space.truncation_note)})


def truncate(space: DesignSpace, axis: int, new_hi: float) -> DesignSpace:
    """Cut axis ``axis`` off at ``new_hi``, recording the truncation.

    Already-bounded axes keep the tighter of the two upper bounds; the note is
    appended either way so reports show the domain was clipped.
    """
    if not 0 <= axis < space.dimension:
        raise ValidationError(f"axis {axis} out of range for dimension {space.dimension}")
    lo, hi = space.bounds[axis]
    if not math.isfinite(new_hi) or new_hi <= lo:
        raise ValidationError(f"truncation point must be finite and > {lo}, got {new_hi}")
    clipped = min(hi, new_hi)
    bounds = list(space.bounds)
    bounds[axis] = (lo, clipped)
    note = f"axis {axis} truncated at {clipped:g}"
    if space.truncation_note:
        note = space.truncation_note + "; " + note
    return DesignSpace(tuple(bounds), truncation_note=note)


@dataclass(frozen=True)
class CandidateSet:
    """Finite list of grid points inside a design space."""

    space: DesignSpace
    points: np.ndarray  # (n, q)
    steps: tuple[float, ...]  # effective per-axis grid step

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "steps", tuple(float(s) for s in self.steps))
        if pts.shape[0] == 0:
            raise ValidationError("candidate set must be nonempty")
        if pts.shape[1] != self.space.dimension:
            raise ValidationError("candidate points do not match space dimension")
        if not np.all(self.space.contains(pts)):
            raise ValidationError("candidate point outside design-space bounds")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise ValidationError("candidate points must be pairwise distinct")
        self.points.setflags(write=False)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def max_step(self) -> float:
        return max(self.steps)


def discretize(space: DesignSpace, resolution: float | tuple[float, ...] = 0.01) -> CandidateSet:
    """Regular grid over a bounded box, endpoints of every axis included.

    Per axis the grid has ``floor((hi-lo)/step) + 1`` points; the effective
    step is stretched to ``(hi-lo)/(count-1)`` so the upper endpoint is always
    on the grid.
    """
    if not space.is_bounded:
        j = next(i for i, (_, hi) in enumerate(space.bounds) if not math.isfinite(hi))
        raise MustTruncateError(f"axis {j} is unbounded; call truncate() before discretizing")
    q = space.dimension
    if np.isscalar(resolution):
        steps = (float(resolution),) * q
    else:
        steps = tuple(float(s) for s in resolution)
        if len(steps) != q:
            raise ValidationError(f"expected {q} steps, got {len(steps)}")
    if any(s <= 0 for s in steps):
        raise ValidationError("grid steps must be positive")

    axes = []
    eff = []
    for (lo, hi), step in zip(space.bounds, steps):
        if hi == lo:
            axes.append(np.array([lo]))
            eff.append(step)
            continue
        count = int(math.floor((hi - lo) / step + _BOUND_EPS)) + 1
        count = max(count, 2)
        axes.append(np.linspace(lo, hi, count))
        eff.append((hi - lo) / (count - 1))
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    return CandidateSet(space=space, points=points, steps=tuple(eff))


# ---------------------------------------------------------------------------
# efficiency functions for the heteroscedastic polynomial family
# ---------------------------------------------------------------------------

def _efficiency_values(spec: dict, x: np.ndarray) -> np.ndarray:
    kind = spec.get("kind", "one")
    if kind == "one":
        lam = np.ones_like(x)
    elif kind == "exp":
        lam = np.exp(float(spec.get("rate", 1.0)) * x)
    elif kind == "affine":
        lam = 1.0 + float(spec.get("slope", 1.0)) * x
    else:
        raise ValidationError(f"unknown efficiency kind {kind!r}")
    if np.any(lam <= 0):
        raise ValidationError("efficiency function must be strictly positive on the design space")
    return lam


# ---------------------------------------------------------------------------
# family registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Family:
    name: str
    dim: int  # predictor dimension q (0 = any, unused)
    k_of: Callable[[dict], int]
    validate: Callable[[dict], None]
    evaluate: Callable[[dict, np.ndarray], np.ndarray]  # (params, (n,q)) -> (n,k)
    default_bounds: Callable[[dict], tuple]


def _as_float_vec(params, key, length=None):
    try:
        v = np.asarray(params[key], dtype=float).ravel()
    except KeyError:
        raise ValidationError(f"missing required parameter {key!r}")
    if length is not None and v.size != length:
        raise ValidationError(f"parameter {key!r} must have length {length}, got {v.size}")
    return v


def _poly_validate(params):
    d = params.get("degree")
    if not isinstance(d, int) or d < 0:
        raise ValidationError("polynomial degree must be a nonnegative integer")


def _poly_eval(params, X):
    return np.vander(X[:, 0], params["degree"] + 1, increasing=True)


def _wpoly_validate(params):
    _poly_validate(params)
    eff = params.get("efficiency", {"kind": "one"})
    if not isinstance(eff, dict):
        raise ValidationError("efficiency must be a dict like {'kind': 'exp', 'rate': 1.0}")
    _efficiency_values(eff, np.array([0.0]))


def _wpoly_eval(params, X):
    x = X[:, 0]
    lam = _efficiency_values(params.get("efficiency", {"kind": "one"}), x)
    return np.sqrt(lam)[:, None] * np.vander(x, params["degree"] + 1, increasing=True)


def _expsum_validate(params):
    a = _as_float_vec(params, "a")
    lam = _as_float_vec(params, "lambda")
    if a.size != lam.size or a.size == 0:
        raise ValidationError("'a' and 'lambda' must be nonempty and of equal length")
    if np.any(a == 0):
        raise ValidationError("amplitudes a_l must be nonzero")
    if np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
        raise ValidationError("rates must satisfy 0 < lambda_1 < ... < lambda_L")


def _expsum_eval(params, X):
    x = X[:, 0]
    a = np.asarray(params["a"], dtype=float)
    lam = np.asarray(params["lambda"], dtype=float)
    cols = []
    for al, ll in zip(a, lam):
        e = np.exp(-ll * x)
        cols.append(e)
        cols.append(-al * x * e)
    return np.stack(cols, axis=1)


def _growth_validate(params):
    th = _as_float_vec(params, "theta", 3)
    if th[1] < 1 or th[2] < 1:
        raise ValidationError("exp-growth-2f requires theta_1 >= 1 and theta_2 >= 1")


def _growth_eval(params, X):
    th = np.asarray(params["theta"], dtype=float)
    x1, x2 = X[:, 0], X[:, 1]
    return np.stack(
        [np.ones_like(x1), -x1 * np.exp(-th[1] * x1), -x2 * np.exp(-th[2] * x2)], axis=1
    )


def _product_validate(params):
    th = _as_float_vec(params, "theta", 3)
    if np.any(th <= 0):
        raise ValidationError("exp-product-2f requires all theta_j > 0")


def _product_eval(params, X):
    th = np.asarray(params["theta"], dtype=float)
    x1, x2 = X[:, 0], X[:, 1]
    scale = np.exp(th[1] * x1 + th[2] * x2)
    return scale[:, None] * np.stack([np.ones_like(x1), th[0] * x1, th[0] * x2], axis=1)


def _mixture_validate(params):
    t3 = params.get("theta3")
    if t3 is None or float(t3) <= 0:
        raise ValidationError("mixture-poly-exp requires theta3 > 0")


def _mixture_eval(params, X):
    t3 = float(params["theta3"])
    x1, x2 = X[:, 0], X[:, 1]
    return np.stack([np.ones_like(x1), x1, x1**3, -x2 * np.exp(-t3 * x2)], axis=1)


def _xexp_validate(params):
    if float(params.get("rate", 0.0)) <= 0:
        raise ValidationError("xexp-decay requires rate > 0")


def _xexp_eval(params, X):
    r = float(params["rate"])
    x = X[:, 0]
    return np.stack([np.ones_like(x), x * np.exp(-r * x)], axis=1)


def _cubic_gap_eval(params, X):
    x = X[:, 0]
    return np.stack([np.ones_like(x), x, x**3], axis=1)


FAMILIES: dict[str, _Family] = {
    "polynomial": _Family(
        "polynomial", 1, lambda p: p["degree"] + 1, _poly_validate, _poly_eval,
        lambda p: ((0.0, 1.0),),
    ),
    "weighted-polynomial": _Family(
        "weighted-polynomial", 1, lambda p: p["degree"] + 1, _wpoly_validate, _wpoly_eval,
        lambda p: ((0.0, 1.0),),
    ),
    "linear-2f-no-intercept": _Family(
        "linear-2f-no-intercept", 2, lambda p: 2, lambda p: None,
        lambda p, X: X[:, :2].copy(),
        lambda p: ((0.0, 1.0), (0.0, 1.0)),
    ),
    "interaction-2f": _Family(
        "interaction-2f", 2, lambda p: 4, lambda p: None,
        lambda p, X: np.stack(
            [np.ones_like(X[:, 0]), X[:, 0], X[:, 1], X[:, 0] * X[:, 1]], axis=1
        ),
        lambda p: ((0.0, 1.0), (0.0, 1.0)),
    ),
    "exponential-sum": _Family(
        "exponential-sum", 1, lambda p: 2 * len(p["lambda"]), _expsum_validate, _expsum_eval,
        lambda p: ((0.0, math.inf),),
    ),
    "exp-growth-2f": _Family(
        "exp-growth-2f", 2, lambda p: 3, _growth_validate, _growth_eval,
        lambda p: ((0.0, 1.0), (0.0, 1.0)),
    ),
    "exp-product-2f": _Family(
        "exp-product-2f", 2, lambda p: 3, _product_validate, _product_eval,
        lambda p: ((0.0, 1.0), (0.0, 1.0)),
    ),
    "mixture-poly-exp": _Family(
        "mixture-poly-exp", 2, lambda p: 4, _mixture_validate, _mixture_eval,
        lambda p: ((-1.0, 1.0), (0.0, 2.0)),
    ),
    # one-factor marginal families used by the admissibility machinery
    "xexp-decay": _Family(
        "xexp-decay", 1, lambda p: 2, _xexp_validate, _xexp_eval,
        lambda p: ((0.0, 1.0),),
    ),
    "cubic-gap": _Family(
        "cubic-gap", 1, lambda p: 3, lambda p: None, _cubic_gap_eval,
        lambda p: ((-1.0, 1.0),),
    ),
}


@dataclass(frozen=True)
class ModelSpec:
    """A regression family with fixed parameters on a design space.

    ``eval_many`` returns the n x k matrix of regression vectors; nonlinear
    families return parameter gradients, so every consumer can treat the model
    as linear.
    """

    family: str
    params: dict = field(default_factory=dict)
    space: DesignSpace = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(
                f"unknown family {self.family!r}; known: {sorted(FAMILIES)}"
            )
        fam = FAMILIES[self.family]
        fam.validate(self.params)
        if self.space is None:
            object.__setattr__(self, "space", DesignSpace(fam.default_bounds(self.params)))
        if self.space.dimension != fam.dim:
            raise ValidationError(
                f"{self.family} needs a {fam.dim}-dimensional space, got {self.space.dimension}"
            )

    @property
    def k(self) -> int:
        return FAMILIES[self.family].k_of(self.params)

    def eval_many(self, points: np.ndarray, check_bounds: bool = True) -> np.ndarray:
        X = np.atleast_2d(np.asarray(points, dtype=float))
        if X.shape[1] != self.space.dimension:
            raise ValidationError(
                f"points have dimension {X.shape[1]}, space has {self.space.dimension}"
            )
        if check_bounds:
            inside = self.space.contains(X)
            if not np.all(inside):
                bad = X[~inside][0]
                raise DomainError(f"point {bad.tolist()} outside design-space bounds")
        F = FAMILIES[self.family].evaluate(self.params, X)
        if not np.all(np.isfinite(F)):
            raise ValidationError("regression vector evaluated to a non-finite value")
        return F


def make_model(family: str, space: DesignSpace | None = None, **params) -> ModelSpec:
    return ModelSpec(family=family, params=params, space=space)


def eval_f(model: ModelSpec, x) -> np.ndarray:
    """Regression vector f(x) at a single point."""
    return model.eval_many(np.atleast_2d(np.asarray(x, dtype=float)))[0]


def eval_efficiency(model: ModelSpec, x) -> float:
    """Efficiency value lambda(x) of a weighted-polynomial model."""
    if model.family != "weighted-polynomial":
        raise ValidationError("eval_efficiency is defined for the weighted-polynomial family only")
    xv = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    return float(
        _efficiency_values(model.params.get("efficiency", {"kind": "one"}), xv[:1])[0]
    )


def gram_rank(F: np.ndarray, rtol: float = 1e-8) -> int:
    """Numerical rank of a stack of regression vectors."""
    sv = np.linalg.svd(np.atleast_2d(F), compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def default_truncation(model: ModelSpec) -> float | None:
    """Default cut point for unbounded domains; exponential sensitivity decays
    make 3 / lambda_1 a safe box for exponential-sum models."""
    if model.family == "exponential-sum":
        return 3.0 / float(np.min(np.asarray(model.params["lambda"], dtype=float)))
    return None


def default_candidates(model: ModelSpec, resolution: float | tuple = 0.01) -> CandidateSet:
    """Discretize the model's space, auto-truncating when a default rule exists."""
    space = model.space
    if not space.is_bounded:
        cut = default_truncation(model)
        if cut is None:
            raise MustTruncateError(
                f"{model.family} has an unbounded axis and no default truncation rule"
            )
        for j, (_, hi) in enumerate(space.bounds):
            if not math.isfinite(hi):
                space = truncate(space, j, cut)
    return discretize(space, resolution)


# ---------------------------------------------------------------------------
# JSON model files: {"family": ..., "params": {...}, "space": {"bounds": ..., "steps": ...}}
# ---------------------------------------------------------------------------

def model_from_dict(obj: dict) -> tuple[ModelSpec, tuple | None]:
    """Build a model from its file representation; returns (model, steps or None)."""
    if "family" not in obj:
        raise ValidationError("model file needs a 'family' field")
    params = dict(obj.get("params", {}))
    space = None
    steps = None
    sp = obj.get("space")
    if sp is not None:
        bounds = tuple(
            (float(lo), math.inf if hi is None else float(hi)) for lo, hi in sp["bounds"]
        )
        space = DesignSpace(bounds)
        if sp.get("steps") is not None:
            steps = tuple(float(s) for s in sp["steps"])
    return ModelSpec(family=obj["family"], params=params, space=space), steps


def model_to_dict(model: ModelSpec, steps: tuple | None = None) -> dict:
    sp = {
        "bounds": [[lo, None if math.isinf(hi) else hi] for lo, hi in model.space.bounds],
    }
    if steps is not None:
        sp["steps"] = list(steps)
    return {"family": model.family, "params": model.params, "space": sp}


def load_model(path) -> tuple[ModelSpec, tuple | None]:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
