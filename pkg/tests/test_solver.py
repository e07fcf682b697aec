import numpy as np
import pytest

from optdesign import (
    CandidateSet,
    Criterion,
    DegenerateModelError,
    TruncationSlackError,
    certify,
    design,
    discretize,
    interval,
    make_model,
    parse_criterion,
    refine_weights,
    solve,
    truncate,
)
from optdesign.solver import SolverOptions


def test_refine_weights_d(line2f):
    d = refine_weights(line2f, [[1, 1], [1, 0], [0, 1]], Criterion(0.0, 2))
    got = dict((tuple(x), w) for x, w in d.atoms())
    for pt in [(1.0, 1.0), (1.0, 0.0), (0.0, 1.0)]:
        assert got[pt] == pytest.approx(1 / 3, abs=1e-6)


def test_refine_weights_e(line2f):
    d = refine_weights(line2f, [[1, 0], [0, 1]], Criterion(float("-inf"), 2))
    assert np.allclose(sorted(d.weights), [0.5, 0.5], atol=1e-9)


def test_refine_weights_single_point_trace():
    m = make_model("polynomial", degree=1)
    d = refine_weights(m, [[1.0]], Criterion(1.0, 2))
    assert d.m == 1 and d.weights[0] == pytest.approx(1.0)


def test_solve_d_coarse(line2f):
    cands = discretize(line2f.space, 0.05)
    rep = solve(line2f, cands, parse_criterion("D"))
    assert rep.converged
    got = dict((tuple(x), w) for x, w in rep.design.atoms())
    assert set(got) == {(1.0, 1.0), (1.0, 0.0), (0.0, 1.0)}
    assert all(abs(w - 1 / 3) < 1e-5 for w in got.values())


def test_monotone_ascent_history(line2f):
    cands = discretize(line2f.space, 0.05)
    for crit in ("D", "A", "E", "p:0.5"):
        rep = solve(line2f, cands, parse_criterion(crit))
        hist = rep.history
        assert all(b >= a - 1e-12 for a, b in zip(hist, hist[1:]))


def test_seed_independence_of_value(line2f):
    cands = discretize(line2f.space, 0.05)
    values = [
        solve(line2f, cands, parse_criterion("A"), SolverOptions(seed=s)).criterion_value
        for s in range(5)
    ]
    assert max(values) - min(values) <= 1e-6


def test_degenerate_candidates_rejected(line2f):
    # all candidates on the diagonal span a single direction
    pts = np.stack([np.linspace(0, 1, 20)] * 2, axis=1)
    cands = CandidateSet(space=line2f.space, points=pts, steps=(0.05, 0.05))
    with pytest.raises(DegenerateModelError):
        solve(line2f, cands, parse_criterion("D"))


def test_non_convergence_reported(line2f):
    cands = discretize(line2f.space, 0.05)
    init = design([[0.1, 0.1], [0.1, 0.9], [0.9, 0.1]])
    rep = solve(line2f, cands, parse_criterion("D"), SolverOptions(max_outer_iters=1, init=init))
    assert not rep.converged
    assert rep.max_sensitivity_violation > 1e-5


def test_user_init_design(line2f):
    cands = discretize(line2f.space, 0.05)
    init = design([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]], [0.5, 0.25, 0.25])
    rep = solve(line2f, cands, parse_criterion("D"), SolverOptions(init=init))
    assert rep.converged
    assert rep.design.m == 3


def test_solver_certificate_agreement(line2f):
    cands = discretize(line2f.space, 0.05)
    opts = SolverOptions()
    for crit in ("D", "A", "E", "p:-2"):
        c = parse_criterion(crit)
        rep = solve(line2f, cands, c, opts)
        assert rep.converged
        check = certify(rep.design, line2f, cands, c, tol=2 * opts.kkt_tol)
        assert check.optimal


def test_saturated_support_for_injective_model():
    m = make_model("weighted-polynomial", degree=2)
    cands = discretize(m.space, 0.005)
    rep = solve(m, cands, parse_criterion("D"))
    assert rep.converged
    assert rep.design.m <= m.k


def test_truncation_slack_failure():
    # cutting the domain through the optimal support point must fail loudly
    m = make_model("exponential-sum", a=[1.0], **{"lambda": [1.0]})
    space = truncate(m.space, 0, 0.8)
    m2 = make_model("exponential-sum", space=space, a=[1.0], **{"lambda": [1.0]})
    cands = discretize(space, 0.01)
    with pytest.raises(TruncationSlackError):
        solve(m2, cands, parse_criterion("D"))


def test_truncation_slack_passes_on_default_box():
    m = make_model(
        "exponential-sum", space=interval(0.0, 3.0, note="axis 0 truncated at 3"),
        a=[1.0], **{"lambda": [1.0]},
    )
    cands = discretize(m.space, 0.01)
    rep = solve(m, cands, parse_criterion("D"))
    assert rep.converged
