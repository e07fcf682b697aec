"""Sweep the criterion exponent on the two-factor line model and compare the
solved corner weight against the closed-form weight law.

Usage: python scripts/weight_law_curve.py [--step 0.01]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from optdesign import Criterion, discretize, make_model, solve  # noqa: E402


def weight_law(p: float) -> float:
    return 1.0 - 4.0 / (3.0 + 3.0 ** (1.0 / (1.0 - p)))


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--step", type=float, default=0.01)
    args = parser.parse_args()

    model = make_model("linear-2f-no-intercept")
    grid = discretize(model.space, args.step)
    print(f"{'p':>6}  {'w(1,1) solved':>14}  {'w(1,1) closed':>14}  {'error':>10}")
    for p in (0.75, 0.5, 0.25, 0.0, -0.5, -1.0, -2.0, -5.0, -20.0):
        rep = solve(model, grid, Criterion(p))
        atoms = dict((tuple(x), w) for x, w in rep.design.atoms())
        w_corner = atoms.get((1.0, 1.0), 0.0)
        w_exact = weight_law(p)
        print(f"{p:>6g}  {w_corner:>14.8f}  {w_exact:>14.8f}  {abs(w_corner - w_exact):>10.2e}")
    rep = solve(model, grid, Criterion(float("-inf")))
    atoms = dict((tuple(x), w) for x, w in rep.design.atoms())
    print(f"{'-inf':>6}  {atoms.get((1.0, 1.0), 0.0):>14.8f}  {0.0:>14.8f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
