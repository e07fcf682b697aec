"""Survey saturation bounds against realized support sizes.

For each model: the norm-injectivity report (predicted bound) next to the
support size of the converged determinant-optimal design.

Usage: python scripts/saturation_survey.py [--seed 0] [--draws 3]
"""

import argparse
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from optdesign import (  # noqa: E402
    Criterion,
    TruncationSlackError,
    certify,
    discretize,
    exp_saturation_check,
    garza_report,
    make_model,
    solve,
    truncate,
)


def survey_row(name, model, cands):
    rep = garza_report(model, cands, norm_tol=1e-7)
    sol = solve(model, cands, Criterion(0.0))
    check = certify(sol.design, model, cands, Criterion(0.0), tol=2e-5)
    print(
        f"{name:<28} k={model.k}  injective={str(rep.injective):<5} "
        f"bound={rep.saturation_bound:<3} atoms={sol.design.m:<3} "
        f"certified={check.optimal}"
    )


def exponential_sum_row(name, a, lam):
    # enlarge the box until its boundary is slack, as the solver advises
    base = make_model("exponential-sum", a=a, **{"lambda": lam})
    for factor in (1.0, 2.0, 4.0):
        space = truncate(base.space, 0, factor * 3.0 / min(lam))
        model = make_model("exponential-sum", space=space, a=a, **{"lambda": lam})
        try:
            survey_row(name, model, discretize(space, 0.01))
            return
        except TruncationSlackError:
            continue
    print(f"{name:<28} no slack truncation found")


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--draws", type=int, default=3)
    args = parser.parse_args()

    for d in (2, 3, 4):
        model = make_model("weighted-polynomial", degree=d)
        survey_row(f"weighted-poly d={d}", model, discretize(model.space, 0.001))

    rng = np.random.default_rng(args.seed)
    for trial in range(args.draws):
        lam = np.sort(rng.uniform(0.5, 2.5, size=2))
        while lam[1] - lam[0] < 0.3:
            lam = np.sort(rng.uniform(0.5, 2.5, size=2))
        a = rng.choice([-1.0, 1.0], 2) * rng.uniform(0.1, 2.0 * lam)
        ok, margins = exp_saturation_check(list(a), list(lam))
        exponential_sum_row(
            f"exp-sum (margins {np.round(margins, 2)})", list(a), list(lam)
        )

    model = make_model("mixture-poly-exp", theta3=1.0)
    survey_row("mixture-poly-exp", model, discretize(model.space, 0.01))
    return 0


if __name__ == "__main__":
    sys.exit(main())
