"""JSON round-trips for partition trees and coupling plans.

Floats go through ``repr`` (shortest round-trip form), so reloading gives
bit-identical weights.
"""

from __future__ import annotations

from .coupling import INF, CouplingPlan, RatioTable, ratio_table
from .instance import InstanceError, parse_beta, parse_space
from .metric import DiscreteMeasure, FiniteMetricSpace, PointSet, diameter
from .partition import PartitionLevel, PartitionTree

PLAN_FORMAT = "skorohod-coupling-plan/1"
TREE_FORMAT = "skorohod-partition-tree/1"


def space_to_dict(space: FiniteMetricSpace) -> dict:
    return {"labels": list(space.labels), "dist": space.dist.tolist()}


def tree_to_dict(tree: PartitionTree) -> dict:
    return {
        "format": TREE_FORMAT,
        "delta": tree.delta,
        "eps": tree.eps,
        "levels": [
            {
                "k": lev.k,
                "cells": [c.sorted() for c in lev.cells],
                "parent_of": {str(j): p for j, p in sorted(lev.parent_of.items())},
                "support": list(tree.support_index(lev.k)),
            }
            for lev in tree.levels
        ],
    }


def tree_from_dict(d: dict, space: FiniteMetricSpace, p_inf: DiscreteMeasure) -> PartitionTree:
    levels = []
    for lev in d["levels"]:
        cells = tuple(PointSet.of(c) for c in lev["cells"])
        parents = {int(j): int(p) for j, p in lev.get("parent_of", {}).items()}
        levels.append(PartitionLevel(int(lev["k"]), cells, parents))
    i_of = tuple(tuple(lev["support"]) for lev in d["levels"]) if all("support" in lev for lev in d["levels"]) else None
    return PartitionTree(space, p_inf, tuple(levels), float(d["delta"]), float(d["eps"]), i_of)


def tree_summary(tree: PartitionTree) -> list[dict]:
    rows = []
    for lev in tree.levels:
        k = lev.k
        rows.append(
            {
                "k": k,
                "q": lev.q,
                "remainder_mass": tree.p_inf.mass(lev.cells[0]),
                "eps_k": tree.eps_k(k),
                "max_diameter": max((diameter(tree.space, c) for c in lev.cells[1:]), default=0.0),
                "delta_k": tree.delta_k(k),
            }
        )
    return rows


def _ell_out(v):
    return "inf" if v == INF else int(v)


def _ell_in(v):
    return INF if v in ("inf", None) else int(v)


def diagnostics(plan: CouplingPlan, table: RatioTable | None = None) -> dict:
    table = table or ratio_table(plan.p_inf, plan.p_alpha, plan.tree)
    out = {}
    for a in plan.alphas:
        rows = []
        for k in range(1, plan.tree.k_max + 1):
            lo, hi = table.eta_range(a, k)
            rows.append(
                {
                    "k": k,
                    "eta_min": lo,
                    "eta_max": hi,
                    "band": max(1.0 - lo, hi - 1.0),
                    "delta": table.delta_dev[a, k],
                    "beta_star": plan.betas.beta_star(k),
                    "beta": plan.betas.beta(k),
                }
            )
        out[str(a)] = rows
    return out


def plan_to_dict(plan: CouplingPlan, with_diagnostics: bool = True) -> dict:
    d = {
        "format": PLAN_FORMAT,
        "space": space_to_dict(plan.space),
        "p_inf": plan.p_inf.w.tolist(),
        "p_alpha": [pa.w.tolist() for pa in plan.p_alpha],
        "beta": plan.betas.to_dict(),
        "tree": tree_to_dict(plan.tree),
        "ell": {str(a): _ell_out(v) for a, v in plan.ell.items()},
        "h_alpha": {str(a): h.w.tolist() for a, h in sorted(plan.h_alpha.items())},
    }
    if with_diagnostics:
        d["diagnostics"] = diagnostics(plan)
    return d


def plan_from_dict(d: dict) -> CouplingPlan:
    """Rebuild a plan exactly as stored; nothing is recomputed."""
    if d.get("format") != PLAN_FORMAT:
        raise InstanceError(f"not a coupling plan (format {d.get('format')!r})")
    space = parse_space(d["space"])
    p_inf = DiscreteMeasure(space, d["p_inf"])
    p_alpha = tuple(DiscreteMeasure(space, w) for w in d["p_alpha"])
    tree = tree_from_dict(d["tree"], space, p_inf)
    ell = {int(a): _ell_in(v) for a, v in d["ell"].items()}
    # stored H weights may be tampered with; accept any non-negative vector and renormalise
    h = {int(a): DiscreteMeasure(space, w, normalize=True) for a, w in d.get("h_alpha", {}).items()}
    for a, lev in ell.items():
        if lev != INF and a not in h:
            raise InstanceError(f"plan lacks a remainder measure for index {a}")
    return CouplingPlan(space, p_inf, p_alpha, tree, parse_beta(d.get("beta")), ell, h)
