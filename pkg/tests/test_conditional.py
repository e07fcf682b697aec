import numpy as np
import pytest

from optdesign import (
    DesignSpace,
    NoConditionalModelError,
    SliceMap,
    ValidationError,
    conditional_audit,
    decompose,
    design,
    discretize,
    dominates,
    find_dominator,
    interval,
    make_model,
    marginal_design,
    marginal_model,
    parse_criterion,
    product_audit,
    recompose_check,
    solve,
)
from optdesign.conditional import admissible_support_bound, slice_grid, splice_slice


@pytest.fixture(scope="module")
def growth():
    return make_model("exp-growth-2f", theta=[1.0, 1.0, 1.0])


@pytest.fixture(scope="module")
def mixture():
    return make_model("mixture-poly-exp", theta3=1.0)


def test_slice_map_validation():
    with pytest.raises(ValidationError):
        SliceMap("coordinate")
    with pytest.raises(ValidationError):
        SliceMap("linear", coeffs=(0.0, 0.0))
    with pytest.raises(ValidationError):
        SliceMap("radial")


def test_decompose_interaction_linear():
    m = make_model("interaction-2f")
    d = design([[0, 0], [0.5, 0.5], [1, 1]])
    deco = decompose(d, SliceMap("linear", coeffs=(1.0, 1.0)), m)
    assert [sl.t for sl in deco.slices] == [0.0, 1.0, 2.0]
    assert all(sl.weight == pytest.approx(1 / 3) for sl in deco.slices)
    assert all(sl.conditional.f_tilde.k == 3 for sl in deco.slices)
    assert all("^2" in sl.conditional.f_tilde.label for sl in deco.slices)


def test_decompose_growth_coordinate(growth):
    d = design([[0, 0], [0, 1], [1, 0], [1, 1]])
    deco = decompose(d, SliceMap("coordinate", axis=0), growth)
    assert [sl.t for sl in deco.slices] == [0.0, 1.0]
    assert all(sl.conditional.f_tilde.k == 2 for sl in deco.slices)
    # the conditional vector for the second factor carries its own rate
    assert "x1" in deco.slices[0].conditional.f_tilde.label


def test_decompose_single_slice(growth):
    d = design([[0.5, 0.0], [0.5, 1.0]], [0.4, 0.6])
    deco = decompose(d, SliceMap("coordinate", axis=0), growth)
    assert len(deco.slices) == 1
    sl = deco.slices[0]
    assert sl.weight == pytest.approx(1.0)
    assert np.allclose(sl.conditional_design.weights, [0.4, 0.6])


def test_no_conditional_model_registered():
    m = make_model("polynomial", degree=2)
    d = design([[0.5]])
    with pytest.raises(NoConditionalModelError):
        decompose(d, SliceMap("coordinate", axis=0), m)
    m2 = make_model("interaction-2f")
    with pytest.raises(NoConditionalModelError):
        decompose(design([[0.5, 0.5]]), SliceMap("linear", coeffs=(1.0, 2.0)), m2)


SUPPORTED_PAIRS = [
    ("interaction-2f", {}, SliceMap("coordinate", axis=0)),
    ("interaction-2f", {}, SliceMap("coordinate", axis=1)),
    ("interaction-2f", {}, SliceMap("linear", coeffs=(1.0, 1.0))),
    ("exp-growth-2f", {"theta": [1.0, 1.0, 2.0]}, SliceMap("coordinate", axis=0)),
    ("exp-growth-2f", {"theta": [1.0, 1.0, 2.0]}, SliceMap("coordinate", axis=1)),
    ("exp-product-2f", {"theta": [1.0, 1.0, 2.0]}, SliceMap("coordinate", axis=0)),
    ("exp-product-2f", {"theta": [1.0, 1.0, 2.0]}, SliceMap("coordinate", axis=1)),
    ("exp-product-2f", {"theta": [1.0, 1.0, 2.0]}, SliceMap("linear", coeffs=(1.0, 2.0))),
    ("mixture-poly-exp", {"theta3": 1.0}, SliceMap("coordinate", axis=0)),
    ("mixture-poly-exp", {"theta3": 1.0}, SliceMap("coordinate", axis=1)),
]


@pytest.mark.parametrize("family,params,tmap", SUPPORTED_PAIRS, ids=str)
def test_recomposition_identity(family, params, tmap):
    model = make_model(family, **params)
    rng = np.random.default_rng(17)
    grid = discretize(model.space, 0.1)
    for _ in range(5):
        idx = rng.choice(len(grid), size=6, replace=False)
        d = design(grid.points[idx], rng.uniform(0.05, 1.0, 6), normalize=True)
        assert recompose_check(d, tmap, model) <= 1e-10


def test_dominates_examples(line2f):
    d_opt = design([[1, 1], [1, 0], [0, 1]], [1 / 3, 1 / 3, 1 / 3])
    e_opt = design([[1, 0], [0, 1]])
    # the two optimal information matrices are Loewner-incomparable
    assert not dominates(d_opt, e_opt, line2f)
    assert not dominates(e_opt, d_opt, line2f)
    assert not dominates(d_opt, d_opt, line2f)


def test_dominates_psd_shift():
    big = make_model("linear-2f-no-intercept", space=DesignSpace(((0, 2), (0, 2))))
    d1 = design([[1, 0], [0, 1]])
    s = np.sqrt(1.2)
    d2 = design([[s, 0], [0, s]])
    # M(d2) = M(d1) + 0.1 I exactly
    assert dominates(d2, d1, big)
    assert not dominates(d1, d2, big)


def test_dominates_partial_order():
    big = make_model("linear-2f-no-intercept", space=DesignSpace(((0, 3), (0, 3))))
    designs = [design([[s, 0], [0, s]]) for s in (1.0, 1.3, 1.9)]
    assert dominates(designs[1], designs[0], big)
    assert dominates(designs[2], designs[1], big)
    assert dominates(designs[2], designs[0], big)  # transitive
    for d in designs:
        assert not dominates(d, d, big)  # irreflexive


@pytest.fixture(scope="module")
def xexp_grid():
    m = make_model("xexp-decay", rate=1.0, space=interval(0.0, 3.0))
    return m, discretize(m.space, 0.05)


def test_find_dominator_three_point(xexp_grid):
    m, grid = xexp_grid
    d1 = design([[0.2], [1.7], [2.6]])
    verdict = find_dominator(d1, grid, m)
    assert not verdict.admissible and not verdict.inconclusive
    sup = [float(x[0]) for x, _ in verdict.dominator.atoms()]
    assert all(min(abs(s), abs(s - 1.0)) <= 0.05 + 1e-9 for s in sup)
    assert dominates(verdict.dominator, d1, m)


def test_find_dominator_admissible_two_point(xexp_grid):
    m, grid = xexp_grid
    d = design([[0.0], [1.0]])
    verdict = find_dominator(d, grid, m)
    assert verdict.admissible and not verdict.inconclusive


def test_find_dominator_optimal_design_is_admissible(line2f):
    pts = np.array([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    d = design(pts, [1 / 3, 1 / 3, 1 / 3])
    verdict = find_dominator(d, pts, line2f)
    assert verdict.admissible


def test_find_dominator_rank_precondition(line2f):
    d = design([[1.0, 1.0], [1.0, 0.0]], [0.5, 0.5])
    with pytest.raises(ValidationError):
        find_dominator(d, np.array([[1.0, 1.0]]), line2f)


def test_splice_slice(growth):
    d = design([[0, 0], [0, 0.5], [1, 0], [1, 1]], [0.25, 0.25, 0.25, 0.25])
    repl = design([[0.0, 0.0], [0.0, 1.0]], [0.6, 0.4])
    spliced = splice_slice(d, SliceMap("coordinate", axis=0), 0.0, repl)
    got = dict((tuple(x), w) for x, w in spliced.atoms())
    assert got[(0.0, 0.0)] == pytest.approx(0.3)
    assert got[(0.0, 1.0)] == pytest.approx(0.2)
    assert got[(1.0, 0.0)] == pytest.approx(0.25)


def test_conditional_audit_detects_off_class_atom(growth):
    d = design([[0, 0], [0, 0.5], [1, 0], [1, 1]], [0.25, 0.25, 0.25, 0.25])
    verdict = conditional_audit(d, SliceMap("coordinate", axis=0), growth)
    assert not verdict.admissible and not verdict.inconclusive
    # the spliced dominator is itself verified in the full model
    assert dominates(verdict.dominator, d, growth, tol=1e-7)


def test_conditional_audit_passes_on_class(growth):
    d = design([[0, 0], [0, 1], [1, 0], [1, 1]], [0.25, 0.25, 0.25, 0.25])
    verdict = conditional_audit(d, SliceMap("coordinate", axis=0), growth)
    assert verdict.admissible
    assert all(v.admissible for _, v in verdict.evidence)


def test_conditional_audit_linear_slices():
    # the quadratic conditional on a diagonal slice has dimension three, so
    # only the constrained-ascent phase is available; a two-interior-atom
    # conditional is dominated there and the splice verifies in full
    m = make_model("interaction-2f")
    d = design([[0.3, 0.7], [0.6, 0.4], [0.0, 0.0]], [0.3, 0.3, 0.4])
    verdict = conditional_audit(d, SliceMap("linear", coeffs=(1.0, 1.0)), m)
    assert not verdict.admissible and not verdict.inconclusive
    assert dominates(verdict.dominator, d, m, tol=1e-7)


def test_conditional_audit_single_atom(growth):
    # a lone atom at (1/theta1, 1/theta2) has admissible one-point conditionals
    verdict = conditional_audit(design([[1.0, 1.0]]), SliceMap("coordinate", axis=0), growth)
    assert verdict.admissible
    # off the class, the single conditional is dominated and the audit fails
    verdict2 = conditional_audit(design([[0.3, 0.7]]), SliceMap("coordinate", axis=0), growth)
    assert not verdict2.admissible and not verdict2.inconclusive


def test_marginal_design_projection():
    d = design([[0, 0], [0, 1], [1, 0], [1, 1]], [0.1, 0.2, 0.3, 0.4])
    m0 = marginal_design(d, 0)
    got = dict((float(x[0]), w) for x, w in m0.atoms())
    assert got[0.0] == pytest.approx(0.3)
    assert got[1.0] == pytest.approx(0.7)


def test_marginal_models(growth, mixture):
    g0 = marginal_model(growth, 0)
    assert g0.family == "xexp-decay" and g0.space.bounds == ((0.0, 1.0),)
    m0 = marginal_model(mixture, 0)
    assert m0.family == "cubic-gap"
    m1 = marginal_model(mixture, 1)
    assert m1.family == "xexp-decay" and m1.space.bounds == ((0.0, 2.0),)
    prod = make_model("exp-product-2f", theta=[2.0, 1.0, 1.0])
    p0 = marginal_model(prod, 0)
    # exp(theta*x) * (1, x) realized as a heteroscedastic line
    grid = np.linspace(0, 1, 7)[:, None]
    F = p0.eval_many(grid)
    assert np.allclose(F[:, 0], np.exp(grid[:, 0]))
    assert np.allclose(F[:, 1], grid[:, 0] * np.exp(grid[:, 0]))
    with pytest.raises(NoConditionalModelError):
        marginal_model(make_model("linear-2f-no-intercept"), 0)


def test_admissible_support_bounds(growth, mixture):
    assert admissible_support_bound(marginal_model(growth, 0)) == 2
    assert admissible_support_bound(marginal_model(mixture, 0)) == 4
    assert admissible_support_bound(marginal_model(mixture, 1)) == 2


def test_product_audit_growth(growth):
    d = design([[0, 0], [0, 1], [1, 0], [1, 1]], [0.25, 0.25, 0.25, 0.25])
    report = product_audit(d, growth)
    assert report.support_bound == 4
    assert all(v.admissible for v in report.factor_verdicts)


@pytest.fixture(scope="module")
def mixture_solution(mixture):
    cands = discretize(mixture.space, 0.01)
    return solve(mixture, cands, parse_criterion("D"))


def test_product_audit_mixture(mixture, mixture_solution):
    report = product_audit(mixture_solution.design, mixture)
    assert report.support_bound == 8
    assert all(v.admissible for v in report.factor_verdicts)
    # first marginal: at most four points, ends included, interior pair symmetric
    m0 = report.marginal_designs[0]
    xs = sorted(float(x[0]) for x, _ in m0.atoms())
    assert len(xs) <= 4
    assert xs[0] == pytest.approx(-1.0) and xs[-1] == pytest.approx(1.0)
    interior = [x for x in xs if abs(abs(x) - 1.0) > 1e-9]
    if len(interior) == 2:
        assert interior[0] == pytest.approx(-interior[1], abs=0.02)
    # second marginal: supported on {0, x2*} with x2* = min(1/theta3, 2)
    m1 = report.marginal_designs[1]
    xs1 = sorted(float(x[0]) for x, _ in m1.atoms())
    assert xs1[0] == pytest.approx(0.0, abs=0.02)
    assert xs1[-1] == pytest.approx(1.0, abs=0.02)


def test_slice_grid_layouts(growth):
    pts = slice_grid(growth, SliceMap("coordinate", axis=0), 0.5, step=0.25)
    assert np.allclose(pts[:, 0], 0.5)
    assert np.allclose(sorted(pts[:, 1]), [0, 0.25, 0.5, 0.75, 1.0])
    m = make_model("interaction-2f")
    seg = slice_grid(m, SliceMap("linear", coeffs=(1.0, 1.0)), 1.5, step=0.25)
    assert np.allclose(seg.sum(axis=1), 1.5)
    assert seg[:, 0].min() == pytest.approx(0.5) and seg[:, 0].max() == pytest.approx(1.0)
