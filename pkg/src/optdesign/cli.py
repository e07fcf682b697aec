"""Command-line entry points: solve, certify, geometry, garza, audit, decompose,
and a bundled golden-example suite.

Reports are JSON (sorted keys, embedding the config hash and package version)
plus CSV traces for per-candidate quantities, so runs with identical config
and seed are byte-stable. Exit codes: 0 success, 2 validation error, 3
non-convergence or inconclusive result.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .certificates import certify, garza_report, polytope_report
from .conditional import SliceMap, conditional_audit, decompose, recompose_check
from .criteria import parse_criterion
from .designs import Design, load_design
from .errors import OptDesignError, TruncationSlackError, ValidationError
from .models import default_candidates, load_model, model_from_dict
from .solver import SolverOptions, solve

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_UNSETTLED = 3


def _config_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(f"{v:.17g}" for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _design_payload(dsgn: Design) -> dict:
    return dsgn.to_dict()


def _report_base(args, command: str) -> dict:
    # the hash covers the computation, not where its results are written
    payload = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    payload["command"] = command
    return {
        "command": command,
        "config_hash": _config_hash(payload),
        "version": __version__,
    }


def _load_model_and_grid(args):
    model, file_steps = load_model(args.model)
    steps = args.steps if args.steps is not None else file_steps
    cands = default_candidates(model, steps if steps is not None else 0.01)
    return model, cands


def _parse_steps(text: str):
    vals = tuple(float(s) for s in text.split(","))
    return vals[0] if len(vals) == 1 else vals


def _parse_slice_map(text: str) -> SliceMap:
    kind, _, rest = text.partition(":")
    if kind == "axis":
        return SliceMap("coordinate", axis=int(rest))
    if kind == "linear":
        coeffs = tuple(float(v) for v in rest.split(","))
        return SliceMap("linear", coeffs=coeffs)
    raise ValidationError(f"cannot parse slice map {text!r}; use axis:<j> or linear:<a1,a2>")


def _sensitivity_rows(candidates, sens):
    return (list(x) + [s] for x, s in zip(candidates.points, sens))


def cmd_solve(args) -> int:
    model, cands = _load_model_and_grid(args)
    criterion = parse_criterion(args.criterion, model.k)
    opts = SolverOptions(
        max_outer_iters=args.max_iters,
        kkt_tol=args.tol,
        seed=args.seed,
        init=load_design(args.init_design) if args.init_design else "spread",
    )
    report = solve(model, cands, criterion, opts)
    check = certify(report.design, model, cands, criterion, tol=2 * args.tol)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    body = _report_base(args, "solve")
    body.update(
        {
            "criterion": criterion.name,
            "converged": report.converged,
            "iterations": report.iterations,
            "criterion_value": report.criterion_value,
            "max_sensitivity_violation": report.max_sensitivity_violation,
            "certified_optimal": check.optimal,
            "design": _design_payload(report.design),
            "n_candidates": len(cands),
        }
    )
    _write_json(out / "report.json", body)
    F = model.eval_many(cands.points)
    sens = np.einsum("ij,jk,ik->i", F, check.certificate.N, F)
    q = cands.points.shape[1]
    _write_csv(
        out / "sensitivity.csv",
        [f"x{i}" for i in range(q)] + ["sensitivity"],
        _sensitivity_rows(cands, sens),
    )
    print(f"solve[{criterion.name}] converged={report.converged} "
          f"value={report.criterion_value:.8g} atoms={report.design.m}")
    return EXIT_OK if report.converged else EXIT_UNSETTLED


def _certificate_payload(cert) -> dict:
    return {
        "N": cert.N.tolist(),
        "Z": cert.Z.tolist(),
        "eigenvalues": cert.eigenvalues.tolist(),
        "bound": cert.bound,
    }


def cmd_certify(args) -> int:
    model, cands = _load_model_and_grid(args)
    criterion = parse_criterion(args.criterion, model.k)
    dsgn = load_design(args.design)
    check = certify(dsgn, model, cands, criterion, tol=args.tol)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    body = _report_base(args, "certify")
    tr, prod = check.duality_products
    body.update(
        {
            "criterion": criterion.name,
            "optimal": check.optimal,
            "trace_product": tr,
            "polar_product": prod,
            "max_violation": check.max_violation,
            "violating_point": None
            if check.violating_point is None
            else list(check.violating_point),
            "support_equalities": check.support_equalities.tolist(),
        }
    )
    _write_json(out / "certify.json", body)
    _write_json(out / "certificate.json", _certificate_payload(check.certificate))
    F = model.eval_many(cands.points)
    sens = np.einsum("ij,jk,ik->i", F, check.certificate.N, F)
    q = cands.points.shape[1]
    _write_csv(
        out / "sensitivity.csv",
        [f"x{i}" for i in range(q)] + ["sensitivity"],
        _sensitivity_rows(cands, sens),
    )
    print(f"certify[{criterion.name}] optimal={check.optimal} "
          f"max_violation={check.max_violation:.3g}")
    return EXIT_OK


def cmd_geometry(args) -> int:
    model, cands = _load_model_and_grid(args)
    criterion = parse_criterion(args.criterion, model.k)
    dsgn = load_design(args.design)
    check = certify(dsgn, model, cands, criterion, tol=args.tol)
    if not check.optimal:
        print("design is not certified optimal; geometry needs an optimal design", file=sys.stderr)
        return EXIT_UNSETTLED
    geom = polytope_report(check.certificate, dsgn, model, cands)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    body = _report_base(args, "geometry")
    body.update(
        {
            "criterion": criterion.name,
            "hyperplanes": [
                {"c": list(map(float, c)), "active_support": [list(p) for p in pts]}
                for c, pts in geom.hyperplanes
            ],
            "squared_coords": {
                json.dumps(list(k)): list(map(float, v)) for k, v in geom.squared_coords.items()
            },
            "length_groups": [[list(p) for p in grp] for grp in geom.length_groups],
        }
    )
    _write_json(out / "polytope.json", body)
    _write_json(out / "certificate.json", _certificate_payload(check.certificate))
    F = model.eval_many(cands.points)
    sens = np.einsum("ij,jk,ik->i", F, check.certificate.N, F)
    q = cands.points.shape[1]
    _write_csv(
        out / "sensitivity.csv",
        [f"x{i}" for i in range(q)] + ["sensitivity"],
        _sensitivity_rows(cands, sens),
    )
    print(f"geometry: {len(geom.hyperplanes)} hyperplane(s), "
          f"{len(geom.length_groups)} length group(s)")
    return EXIT_OK


def cmd_garza(args) -> int:
    model, cands = _load_model_and_grid(args)
    rep = garza_report(model, cands, norm_tol=args.norm_tol)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    body = _report_base(args, "garza")
    body.update(
        {
            "injective": rep.injective,
            "max_equal_group_size": rep.max_equal_group_size,
            "saturation_bound": rep.saturation_bound,
            "monotone_axis_note": rep.monotone_axis_note,
        }
    )
    _write_json(out / "garza.json", body)
    q = cands.points.shape[1]
    _write_csv(
        out / "norms.csv",
        [f"x{i}" for i in range(q)] + ["norm_sq"],
        (list(x) + [v] for x, v in zip(cands.points, rep.norm_values)),
    )
    print(f"garza: injective={rep.injective} bound={rep.saturation_bound}")
    return EXIT_OK


def cmd_audit(args) -> int:
    model, _ = _load_model_and_grid(args)
    dsgn = load_design(args.design)
    tmap = _parse_slice_map(args.slice_map)
    verdict = conditional_audit(dsgn, tmap, model, budget=args.budget)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    body = _report_base(args, "audit")
    body.update(
        {
            "admissible": verdict.admissible,
            "inconclusive": verdict.inconclusive,
            "note": verdict.note,
            "dominator": None if verdict.dominator is None else _design_payload(verdict.dominator),
            "slices": [
                {"t": t, "admissible": v.admissible, "inconclusive": v.inconclusive}
                for t, v in verdict.evidence
            ],
        }
    )
    _write_json(out / "audit.json", body)
    print(f"audit: admissible={verdict.admissible} inconclusive={verdict.inconclusive}")
    return EXIT_UNSETTLED if verdict.inconclusive else EXIT_OK


def cmd_decompose(args) -> int:
    model, _ = _load_model_and_grid(args)
    dsgn = load_design(args.design)
    tmap = _parse_slice_map(args.slice_map)
    deco = decompose(dsgn, tmap, model)
    err = recompose_check(dsgn, tmap, model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    body = _report_base(args, "decompose")
    body.update(
        {
            "recompose_error": err,
            "slices": [
                {
                    "t": sl.t,
                    "weight": sl.weight,
                    "conditional_design": _design_payload(sl.conditional_design),
                    "conditional_basis": sl.conditional.f_tilde.label,
                    "p_t": sl.conditional.f_tilde.k,
                    "lift": sl.conditional.lift.tolist(),
                }
                for sl in deco.slices
            ],
        }
    )
    _write_json(out / "decomposition.json", body)
    print(f"decompose: {len(deco.slices)} slice(s), recompose error {err:.3g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bundled golden examples
# ---------------------------------------------------------------------------

GOLDEN = [
    {
        "name": "two-factor-line-D",
        "model": {"family": "linear-2f-no-intercept", "params": {}},
        "criterion": "D",
        "steps": 0.01,
        "value": 0.5773502691896257,
        "atoms": [([0.0, 1.0], 1 / 3), ([1.0, 0.0], 1 / 3), ([1.0, 1.0], 1 / 3)],
    },
    {
        "name": "two-factor-line-E",
        "model": {"family": "linear-2f-no-intercept", "params": {}},
        "criterion": "E",
        "steps": 0.01,
        "value": 0.5,
        "atoms": [([0.0, 1.0], 0.5), ([1.0, 0.0], 0.5)],
    },
    {
        "name": "two-factor-line-A",
        "model": {"family": "linear-2f-no-intercept", "params": {}},
        "criterion": "A",
        "steps": 0.01,
        "value": 0.5358983848622454,
        "atoms": [
            ([0.0, 1.0], 0.4226497308103742),
            ([1.0, 0.0], 0.4226497308103742),
            ([1.0, 1.0], 0.1547005383792515),
        ],
    },
    {
        "name": "quadratic-wpoly-D",
        "model": {"family": "weighted-polynomial", "params": {"degree": 2}},
        "criterion": "D",
        "steps": 0.005,
        "value": 0.13228342099734935,
        "atoms": [([0.0], 1 / 3), ([0.5], 1 / 3), ([1.0], 1 / 3)],
    },
    {
        "name": "exp-sum-L1-D",
        "model": {"family": "exponential-sum", "params": {"a": [1.0], "lambda": [1.0]}},
        "criterion": "D",
        "steps": 0.01,
        "value": 0.18393972058572114,
        "atoms": [([0.0], 0.5), ([1.0], 0.5)],
    },
    {
        "name": "growth-2f-D",
        "model": {"family": "exp-growth-2f", "params": {"theta": [1.0, 1.0, 1.0]}},
        "criterion": "D",
        "steps": 0.02,
        "value": 0.10460859358517782,
        "atoms": [
            ([0.0, 0.0], 0.25),
            ([0.0, 1.0], 0.25),
            ([1.0, 0.0], 0.25),
            ([1.0, 1.0], 0.25),
        ],
    },
    {
        "name": "mixture-poly-exp-D",
        "model": {"family": "mixture-poly-exp", "params": {"theta3": 1.0}},
        "criterion": "D",
        "steps": 0.02,
        "value": 0.1881438162374693,
        "n_atoms": 8,
    },
    {
        "name": "interaction-slice-decompose",
        "kind": "decompose",
        "model": {"family": "interaction-2f", "params": {}},
        "slice_map": "linear:1,1",
        "design": {
            "atoms": [
                {"x": [a, b], "w": 1 / 9} for a in (0.0, 0.5, 1.0) for b in (0.0, 0.5, 1.0)
            ]
        },
        "slice_weights": {0.0: 1 / 9, 0.5: 2 / 9, 1.0: 3 / 9, 1.5: 2 / 9, 2.0: 1 / 9},
    },
]

VALUE_TOL = 1e-4
WEIGHT_TOL = 1e-3


def _run_golden(entry) -> tuple[bool, str]:
    model, _ = model_from_dict(entry["model"])
    if entry.get("kind") == "decompose":
        dsgn = Design.from_dict(entry["design"])
        tmap = _parse_slice_map(entry["slice_map"])
        err = recompose_check(dsgn, tmap, model)
        if err > 1e-10:
            return False, f"recompose error {err:.3g}"
        deco = decompose(dsgn, tmap, model)
        got = {round(sl.t, 9): sl.weight for sl in deco.slices}
        want = entry["slice_weights"]
        if set(got) != set(want):
            return False, f"slice values {sorted(got)} != {sorted(want)}"
        worst = max(abs(got[t] - want[t]) for t in want)
        if worst > 1e-12:
            return False, f"marginal weight off by {worst:.3g}"
        return True, "recomposition exact"

    cands = default_candidates(model, entry["steps"])
    criterion = parse_criterion(entry["criterion"], model.k)
    rep = solve(model, cands, criterion)
    if not rep.converged:
        return False, "did not converge"
    if abs(rep.criterion_value - entry["value"]) > VALUE_TOL * max(1.0, abs(entry["value"])):
        return False, f"value {rep.criterion_value:.8g} != {entry['value']:.8g}"
    if "n_atoms" in entry and rep.design.m != entry["n_atoms"]:
        return False, f"{rep.design.m} atoms != {entry['n_atoms']}"
    if "atoms" in entry:
        if rep.design.m != len(entry["atoms"]):
            return False, f"{rep.design.m} atoms != {len(entry['atoms'])}"
        got = sorted(rep.design.atoms())
        want = sorted((tuple(x), w) for x, w in entry["atoms"])
        for (gx, gw), (wx, ww) in zip(got, want):
            if max(abs(a - b) for a, b in zip(gx, wx)) > 2 * max(
                s for s in cands.steps
            ) or abs(gw - ww) > WEIGHT_TOL:
                return False, f"atom {gx} w={gw:.6f} != {wx} w={ww:.6f}"
    return True, f"value {rep.criterion_value:.8g}"


def cmd_examples(args) -> int:
    failed = 0
    name_w = max(len(e["name"]) for e in GOLDEN)
    for entry in GOLDEN:
        if args.filter and not entry["name"].startswith(args.filter.rstrip("*")):
            continue
        try:
            ok, msg = _run_golden(entry)
        except OptDesignError as exc:
            ok, msg = False, f"error: {exc}"
        status = "pass" if ok else "FAIL"
        print(f"{entry['name']:<{name_w}}  {status}  {msg}")
        if not ok:
            failed += 1
    return EXIT_OK if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="optdesign",
        description="Optimal experimental design: solver, certificates, geometry, audits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, model=True, out=True):
        if model:
            p.add_argument("--model", required=True, help="model JSON file")
            p.add_argument(
                "--steps", type=_parse_steps, default=None,
                help="grid step(s), e.g. 0.01 or 0.01,0.02 (default: model file or 0.01)",
            )
        if out:
            p.add_argument("--out", default=".", help="output directory for report files")

    p = sub.add_parser("solve", help="compute an optimal design")
    add_common(p)
    p.add_argument("--criterion", default="D", help="D, A, E, or p:<real>")
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-design", default=None, help="design JSON to start from")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", help="equivalence-theorem check of a design")
    add_common(p)
    p.add_argument("--design", required=True)
    p.add_argument("--criterion", default="D")
    p.add_argument("--tol", type=float, default=1e-5)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("geometry", help="supporting-hyperplane structure of an optimal design")
    add_common(p)
    p.add_argument("--design", required=True)
    p.add_argument("--criterion", default="D")
    p.add_argument("--tol", type=float, default=1e-5)
    p.set_defaults(func=cmd_geometry)

    p = sub.add_parser("garza", help="norm-injectivity saturation bound")
    add_common(p)
    p.add_argument("--norm-tol", type=float, default=1e-7)
    p.set_defaults(func=cmd_garza)

    p = sub.add_parser("audit", help="conditional-model admissibility audit")
    add_common(p)
    p.add_argument("--design", required=True)
    p.add_argument("--slice-map", required=True, help="axis:<j> or linear:<a1,a2>")
    p.add_argument("--budget", type=int, default=3000)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("decompose", help="slice a design by a scalar map")
    add_common(p)
    p.add_argument("--design", required=True)
    p.add_argument("--slice-map", required=True)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("examples", help="run the bundled golden suite")
    p.add_argument("--filter", default=None, help="only run examples with this name prefix")
    p.set_defaults(func=cmd_examples)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TruncationSlackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSETTLED
    except (ValidationError, FileNotFoundError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OptDesignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSETTLED


if __name__ == "__main__":
    sys.exit(main())
