"""Command-line front door.

Exit codes: 0 success, 1 a verification check failed, 2 bad input.
Input errors are printed to stderr as a JSON object.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .coupling import INF, NotYetConvergedError, build_plan, sample_arrays
from .instance import (
    InstanceError,
    load_json,
    parse_line_instance,
    parse_metric_instance,
)
from .metric import DomainError
from .partition import build_partition_tree
from .quantile import quantile_couple, uniform_grid
from .serialize import plan_from_dict, plan_to_dict, tree_summary, tree_to_dict
from .verification import BOUND_MODES, verify

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    def __init__(self, kind: str, message: str, **extra):
        super().__init__(message)
        self.payload = {"error": kind, "message": message, **extra}


def _write_json(path, payload) -> None:
    text = json.dumps(payload, indent=1)
    if path in (None, "-"):
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _load_instance(args):
    inst = parse_metric_instance(load_json(args.instance))
    if args.delta is not None:
        inst.delta = args.delta
    if args.eps is not None:
        inst.eps = args.eps
    if args.k_max is not None:
        inst.k_max = args.k_max
    return inst


def cmd_partition(args) -> int:
    inst = _load_instance(args)
    tree = build_partition_tree(inst.space, inst.p_inf, inst.delta, inst.eps, inst.k_max)
    summary = tree_summary(tree)
    _write_json(args.out, {"tree": tree_to_dict(tree), "summary": summary})
    for row in summary:
        print(
            f"k={row['k']}  q={row['q']}  remainder={row['remainder_mass']:.6g} (<= {row['eps_k']:.6g})"
            f"  max_diam={row['max_diameter']:.6g} (<= {row['delta_k']:.6g})",
            file=sys.stderr,
        )
    return EXIT_OK


def cmd_couple(args) -> int:
    inst = _load_instance(args)
    tree = build_partition_tree(inst.space, inst.p_inf, inst.delta, inst.eps, inst.k_max)
    try:
        plan = build_plan(inst.p_inf, inst.family, tree, inst.betas)
    except NotYetConvergedError as exc:
        raise InputError("not_yet_converged", str(exc), alpha=exc.alpha, cell=exc.cell) from None
    _write_json(args.out, plan_to_dict(plan))
    ells = ["inf" if v == INF else str(v) for v in plan.ell.values()]
    print("ell: " + " ".join(ells), file=sys.stderr)
    return EXIT_OK


def _load_plan(path):
    return plan_from_dict(load_json(path))


def cmd_sample(args) -> int:
    plan = _load_plan(args.plan)
    n = args.n if args.n is not None else 100_000
    seed = args.seed if args.seed is not None else 42
    labels = plan.space.labels
    header = ["id", "j", "s"] + [f"x_{a}" for a in plan.alphas]
    fh = open(args.out, "w", newline="") if args.out not in (None, "-") else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        if n > 0:
            j, s, x = sample_arrays(plan, seed, n)
            for i in range(n):
                w.writerow([i, int(j[i]), labels[s[i]], *(labels[v] for v in x[i])])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def _print_report(rep, mode) -> None:
    print(f"{'check':<20}{'result':>8}")
    for name, ok in rep.checks(mode).items():
        print(f"{name:<20}{'pass' if ok else 'FAIL':>8}")
    worst = max(rep.marginal_defects.values())
    print(f"max marginal TV defect: {worst:.3e}")
    if rep.inversion_defects:
        print(f"max inversion defect:   {max(rep.inversion_defects.values()):.3e}")
    tails = rep.tail_bounds if mode == "stated" else rep.tail_bounds_corrected
    print(f"{'k':>3} {'union mass':>14} {'bound':>14}")
    for row in tails:
        print(f"{row['k']:>3} {row['mass']:>14.6g} {row['bound']:>14.6g} {'' if row['pass'] else '  FAIL'}")
    if rep.as_convergence:
        print(f"sampled with seed={rep.seed} n={rep.n}")


def cmd_verify(args) -> int:
    plan = _load_plan(args.plan)
    seed = args.seed if args.seed is not None else 42
    n = args.n if args.n is not None else 100_000
    rep = verify(plan, seed=seed, n=n, statistical=not args.exact_only)
    payload = rep.to_dict()
    payload["mode"] = args.bounds
    payload["failing"] = rep.failing_checks(args.bounds)
    if args.out:
        _write_json(args.out, payload)
    _print_report(rep, args.bounds)
    return EXIT_OK if rep.passed(args.bounds) else EXIT_FAILED


def parse_u_grid(text: str):
    """``"10000 uniform"`` (or just ``"10000"``) for midpoints, else a comma list."""
    parts = text.replace(",", " ").split()
    if len(parts) in (1, 2) and parts[0].isdigit() and (len(parts) == 1 or parts[1] == "uniform"):
        return uniform_grid(int(parts[0]))
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise InputError("bad_u_grid", f"cannot parse u-grid {text!r}") from None


def cmd_quantile(args) -> int:
    inst = parse_line_instance(load_json(args.instance))
    u = parse_u_grid(args.u_grid)
    table = quantile_couple(inst.family, inst.f_inf, u)
    if args.out:
        table.write_csv(args.out)
    fails = [float(x) for x in table.failure_set]
    print(json.dumps({"grid_size": len(table.u), "family_size": len(inst.family), "failure_set": fails}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="skorohod-couple", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, instance=False, plan=False):
        if instance:
            p.add_argument("--instance", required=True)
        if plan:
            p.add_argument("--plan", required=True)
        p.add_argument("--out")
        p.add_argument("--seed", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--k-max", type=int)
        p.add_argument("--delta", type=float)
        p.add_argument("--eps", type=float)

    p = sub.add_parser("partition", help="build the nested continuity partition")
    common(p, instance=True)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("couple", help="build the coupling plan")
    common(p, instance=True)
    p.set_defaults(func=cmd_couple)

    p = sub.add_parser("sample", help="draw coupled samples as CSV")
    common(p, plan=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("verify", help="check marginals and distance bounds")
    common(p, plan=True)
    p.add_argument("--bounds", choices=BOUND_MODES, default="stated")
    p.add_argument("--exact-only", action="store_true", help="skip the Monte Carlo check")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("quantile", help="quantile coupling on the real line")
    common(p, instance=True)
    p.add_argument("--u-grid", default="10000 uniform")
    p.set_defaults(func=cmd_quantile)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        err = exc.payload
    except (InstanceError, DomainError, KeyError, TypeError, ValueError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(err), file=sys.stderr)
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
