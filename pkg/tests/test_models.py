import math

import numpy as np
import pytest

from optdesign import (
    DesignSpace,
    DomainError,
    MustTruncateError,
    ValidationError,
    default_candidates,
    discretize,
    eval_efficiency,
    eval_f,
    interval,
    make_model,
    truncate,
)
from optdesign.models import gram_rank, model_from_dict, model_to_dict


def test_eval_linear_2f():
    m = make_model("linear-2f-no-intercept")
    assert np.allclose(eval_f(m, [1.0, 0.0]), [1.0, 0.0])


def test_eval_growth_at_origin():
    m = make_model("exp-growth-2f", theta=[3.0, 1.0, 1.0])
    assert np.allclose(eval_f(m, [0.0, 0.0]), [1.0, 0.0, 0.0])


def test_eval_exponential_sum():
    m = make_model("exponential-sum", space=interval(0.0, 3.0), a=[1.0], **{"lambda": [1.0]})
    f = eval_f(m, [1.0])
    assert np.allclose(f, [math.exp(-1.0), -math.exp(-1.0)])


def test_eval_mixture_components():
    m = make_model("mixture-poly-exp", theta3=2.0)
    f = eval_f(m, [0.5, 1.0])
    assert np.allclose(f, [1.0, 0.5, 0.125, -math.exp(-2.0)])


@pytest.mark.parametrize(
    "eff,x,expected",
    [
        ({"kind": "one"}, 0.5, 1.0),
        ({"kind": "exp", "rate": 1.0}, 0.0, 1.0),
        ({"kind": "affine", "slope": 1.0}, 1.0, 2.0),
    ],
)
def test_eval_efficiency(eff, x, expected):
    m = make_model("weighted-polynomial", degree=2, efficiency=eff)
    assert eval_efficiency(m, [x]) == pytest.approx(expected)


def test_efficiency_must_be_positive():
    m = make_model("weighted-polynomial", degree=1, efficiency={"kind": "affine", "slope": -2.0})
    with pytest.raises(ValidationError):
        m.eval_many([[1.0]])


def test_eval_efficiency_wrong_family():
    with pytest.raises(ValidationError):
        eval_efficiency(make_model("polynomial", degree=1), [0.5])


def test_discretize_counts():
    assert len(discretize(DesignSpace(((0, 1), (0, 1))), 0.5)) == 9
    grid = discretize(interval(0, 1), 0.25)
    assert np.allclose(sorted(grid.points[:, 0]), [0, 0.25, 0.5, 0.75, 1.0])
    assert len(discretize(DesignSpace(((-1, 1), (0, 2))), (0.5, 1.0))) == 15


def test_discretize_includes_endpoints_for_uneven_step():
    grid = discretize(interval(0, 1), 0.3)
    xs = grid.points[:, 0]
    assert xs.min() == 0.0 and xs.max() == 1.0
    assert len(grid) == 4  # floor(1/0.3) + 1


def test_discretize_unbounded_raises():
    with pytest.raises(MustTruncateError):
        discretize(DesignSpace(((0.0, math.inf),)), 0.1)


def test_truncate():
    sp = DesignSpace(((0.0, math.inf),))
    cut = truncate(sp, 0, 10.0)
    assert cut.bounds == ((0.0, 10.0),)
    assert "axis 0 truncated at 10" in cut.truncation_note

    again = truncate(cut, 0, 20.0)  # already bounded: identity plus a note
    assert again.bounds == ((0.0, 10.0),)
    assert again.truncation_note.count("truncated") == 2

    with pytest.raises(ValidationError):
        truncate(sp, 0, -1.0)


def test_default_candidates_truncates_exponential_sum():
    m = make_model("exponential-sum", a=[1.0, 1.0], **{"lambda": [0.5, 1.5]})
    cands = default_candidates(m, 0.01)
    assert cands.space.bounds[0][1] == pytest.approx(3.0 / 0.5)
    assert cands.space.truncation_note


def test_point_outside_bounds():
    m = make_model("linear-2f-no-intercept")
    with pytest.raises(DomainError):
        eval_f(m, [2.0, 0.0])


@pytest.mark.parametrize(
    "family,params",
    [
        ("exponential-sum", {"a": [1.0], "lambda": [-1.0]}),
        ("exponential-sum", {"a": [0.0], "lambda": [1.0]}),
        ("exponential-sum", {"a": [1.0, 1.0], "lambda": [2.0, 1.0]}),
        ("exp-growth-2f", {"theta": [1.0, 0.5, 1.0]}),
        ("exp-product-2f", {"theta": [0.0, 1.0, 1.0]}),
        ("mixture-poly-exp", {"theta3": -1.0}),
        ("xexp-decay", {"rate": 0.0}),
        ("polynomial", {"degree": -1}),
    ],
)
def test_parameter_invariants(family, params):
    with pytest.raises(ValidationError):
        make_model(family, **params)


SAMPLE_MODELS = [
    make_model("polynomial", degree=3),
    make_model("weighted-polynomial", degree=2, efficiency={"kind": "exp", "rate": 0.5}),
    make_model("linear-2f-no-intercept"),
    make_model("interaction-2f"),
    make_model("exponential-sum", space=interval(0, 3), a=[1.0, -0.5], **{"lambda": [1.0, 2.0]}),
    make_model("exp-growth-2f", theta=[1.0, 1.0, 2.0]),
    make_model("exp-product-2f", theta=[1.0, 0.5, 0.5]),
    make_model("mixture-poly-exp", theta3=1.0),
    make_model("xexp-decay", rate=1.0),
    make_model("cubic-gap"),
]


@pytest.mark.parametrize("model", SAMPLE_MODELS, ids=lambda m: m.family)
def test_grid_evaluations_finite(model):
    grid = discretize(model.space, 0.05)
    F = model.eval_many(grid.points)
    assert np.all(np.isfinite(F))
    norms = (F**2).sum(axis=1)
    # only the pure-linear family can vanish (at the origin)
    if model.family != "linear-2f-no-intercept":
        assert np.all(norms > 0)


@pytest.mark.parametrize("model", SAMPLE_MODELS, ids=lambda m: m.family)
def test_linear_independence_on_random_points(model):
    rng = np.random.default_rng(7)
    grid = discretize(model.space, 0.01)
    idx = rng.choice(len(grid), size=model.k + 5, replace=False)
    F = model.eval_many(grid.points[idx])
    assert gram_rank(F, rtol=1e-8) == model.k


def test_exponential_sum_norm_identity():
    a = np.array([1.0, -0.5])
    lam = np.array([1.0, 2.0])
    m = make_model("exponential-sum", space=interval(0, 3), a=list(a), **{"lambda": list(lam)})
    grid = discretize(m.space, 0.05)
    F = m.eval_many(grid.points)
    norms = (F**2).sum(axis=1)
    x = grid.points[:, 0]
    expected = sum(np.exp(-2 * l * x) * (1 + av**2 * x**2) for av, l in zip(a, lam))
    assert np.allclose(norms, expected, rtol=0, atol=1e-12)


def test_weighted_polynomial_reduces_to_polynomial():
    wp = make_model("weighted-polynomial", degree=3, efficiency={"kind": "one"})
    p = make_model("polynomial", degree=3)
    grid = discretize(p.space, 0.1)
    assert np.array_equal(wp.eval_many(grid.points), p.eval_many(grid.points))


def test_model_json_roundtrip(tmp_path):
    m = make_model("exponential-sum", a=[1.0], **{"lambda": [2.0]})
    obj = model_to_dict(m, steps=(0.05,))
    m2, steps = model_from_dict(obj)
    assert m2.family == m.family
    assert steps == (0.05,)
    assert not m2.space.is_bounded  # null upper bound survives the round trip
