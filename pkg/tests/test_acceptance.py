"""Acceptance criteria, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
Tolerances and runtime budgets are pinned below and never loosened.
Criteria 4, 5, 6 (bound half) and 7 are expected to print FAIL: a linear
program over all couplings shows the distance bounds are out of reach on
this instance, and a 200-member family cannot settle grid points within
1/800 of the jump at 0.5.
"""

import json
import math
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from skorohod_coupling.cli import main as cli_main
from skorohod_coupling.coupling import INF, build_plan, check_inversion, sample_arrays
from skorohod_coupling.instance import bernoulli_instance_dict, parse_line_instance, parse_metric_instance, reference_instance_dict
from skorohod_coupling.partition import build_partition_tree
from skorohod_coupling.quantile import quantile_couple, uniform_grid
from skorohod_coupling.serialize import plan_to_dict
from skorohod_coupling.verification import far_mass, union_far_mass, verify_marginals

DELTA, EPS, K_MAX = 1.0, 0.1, 6
SEED, N_SAMPLES = 42, 100_000


def emit(number, title, ok, detail, seconds, budget):
    within = seconds < budget
    verdict = "PASS" if ok and within else "FAIL"
    line = f"[criterion {number}] {verdict}  {title}: {detail}  ({seconds:.2f}s, budget {budget:g}s)"
    return verdict == "PASS", line


def reference_plan(copies=0):
    inst = parse_metric_instance(reference_instance_dict(copies=copies))
    tree = build_partition_tree(inst.space, inst.p_inf, DELTA, EPS, K_MAX)
    return build_plan(inst.p_inf, inst.family, tree, inst.betas)


def criterion_1():
    t0 = time.perf_counter()
    inst = parse_metric_instance(reference_instance_dict())
    tree = build_partition_tree(inst.space, inst.p_inf, DELTA, EPS, K_MAX)
    sp, w = inst.space, inst.p_inf.w
    problems = []
    for k in range(1, K_MAX + 1):
        lev = tree.level(k)
        counts = np.zeros(sp.n, dtype=int)
        for c in lev.cells:
            counts[c.sorted()] += 1
        if not np.all(counts == 1):
            problems.append(f"k={k} partition")
        for c in lev.cells[1:]:
            idx = c.sorted()
            if sp.dist[np.ix_(idx, idx)].max() > 2.0**-k:
                problems.append(f"k={k} diameter")
        if w[lev.cells[0].sorted()].sum() > EPS * 2.0**-k:
            problems.append(f"k={k} remainder")
        if k >= 2:
            prev = tree.level(k - 1).cells
            if not all(c.issubset(prev[lev.parent_of[j]]) for j, c in enumerate(lev.cells[1:], start=1)):
                problems.append(f"k={k} nesting")
    dt = time.perf_counter() - t0
    return emit(1, "partition invariants", not problems, "all hold" if not problems else ", ".join(problems), dt, 1)


def criterion_2():
    t0 = time.perf_counter()
    plan = reference_plan()
    worst_mass = max(abs(h.w.sum() - 1.0) for h in plan.h_alpha.values())
    least = min(h.w.min() for h in plan.h_alpha.values())
    worst_inv = max(
        check_inversion(plan.law(a), plan.h_alpha[a], plan.tree, plan.ell[a], plan.betas) for a in plan.alphas
    )
    dt = time.perf_counter() - t0
    ok = len(plan.h_alpha) == 20 and least >= 0 and worst_mass <= 1e-12 and worst_inv <= 1e-10
    detail = f"min weight {least:.3g}, |mass-1| <= {worst_mass:.1e}, inversion defect {worst_inv:.1e} (<= 1e-10)"
    return emit(2, "remainder measures", ok, detail, dt, 1)


def criterion_3():
    t0 = time.perf_counter()
    plan = reference_plan(copies=3)
    defects = verify_marginals(plan)
    copies = [a for a in plan.alphas if plan.ell[a] == INF]
    dt = time.perf_counter() - t0
    worst = max(defects.values())
    ok = worst <= 1e-10 and len(copies) == 3
    return emit(3, "marginal laws", ok, f"max TV {worst:.1e} over limit + {len(defects) - 1} indices ({len(copies)} exact copies)", dt, 5)


def criterion_4():
    t0 = time.perf_counter()
    plan = reference_plan()
    total, failures, worst = 0, 0, (0.0, None)
    for a in plan.alphas:
        lev = plan.ell[a]
        for k in range(1, lev + 1):
            mass = far_mass(plan, a, k)
            for h in range(lev, lev + 4):
                total += 1
                bound = EPS * 2.0**-h
                if mass > bound:
                    failures += 1
                    if mass / bound > worst[0]:
                        worst = (mass / bound, (a, k, h, mass, bound))
    dt = time.perf_counter() - t0
    detail = f"{failures}/{total} (alpha, k, h) triples exceed 2^-h*0.1 (h = ell..ell+3)"
    if worst[1]:
        a, k, h, m, b = worst[1]
        detail += f"; worst alpha={a} k={k} h={h}: {m:.4g} > {b:.4g}"
    return emit(4, "event bound", failures == 0, detail, dt, 10)


def criterion_5():
    t0 = time.perf_counter()
    plan = reference_plan()
    rows = [(k, union_far_mass(plan, k), 2.0 ** (1 - k) * EPS) for k in range(1, K_MAX + 1)]
    dt = time.perf_counter() - t0
    bad = [f"k={k}: {m:.4g} > {b:.4g}" for k, m, b in rows if m > b]
    detail = "all levels within bound" if not bad else f"{len(bad)}/{K_MAX} levels exceed: " + "; ".join(bad)
    return emit(5, "tail bound", not bad, detail, dt, 10)


def criterion_6():
    t0 = time.perf_counter()
    plan = reference_plan()
    _, s, x = sample_arrays(plan, SEED, N_SAMPLES)
    d = plan.space.dist[s[:, None], x]
    alphas = list(plan.alphas)
    over, disagree = [], []
    for k in range(1, K_MAX + 1):
        cols = [i for i, a in enumerate(alphas) if plan.ell[a] >= k]
        rate = float((d[:, cols] > 2.0**-k).any(axis=1).mean()) if cols else 0.0
        bound = 2.0 ** (1 - k) * EPS
        if rate > bound + 3 * math.sqrt(bound * (1 - bound) / N_SAMPLES):
            over.append(f"k={k}: {rate:.4g}")
        exact = union_far_mass(plan, k)
        if abs(rate - exact) > 3 * math.sqrt(exact * (1 - exact) / N_SAMPLES):
            disagree.append(f"k={k}")
    dt = time.perf_counter() - t0
    detail = (
        f"rate <= bound + 3 sigma: {K_MAX - len(over)}/{K_MAX} levels"
        + (f" (over: {', '.join(over)})" if over else "")
        + f"; agreement with exact union mass within 3 sigma: {K_MAX - len(disagree)}/{K_MAX}"
    )
    return emit(6, "almost-sure convergence (seed 42, n = 1e5)", not over and not disagree, detail, dt, 30)


def criterion_7():
    t0 = time.perf_counter()
    line = parse_line_instance(bernoulli_instance_dict(count=200))
    grid = uniform_grid(10_000)
    assert not np.any(grid == 0.5)
    without = quantile_couple(line.family, line.f_inf, grid)
    with_half = quantile_couple(line.family, line.f_inf, np.sort(np.append(grid, 0.5)))
    dt = time.perf_counter() - t0
    fails = without.failure_set
    ok = fails.size == 0 and with_half.failure_set.tolist() == [0.5]
    detail = f"{fails.size} non-settling grid points without 0.5"
    if fails.size:
        detail += f" (u in [{fails.min():.5f}, {fails.max():.5f}])"
    detail += f"; failure set with 0.5 has {with_half.failure_set.size} points"
    return emit(7, "quantile coupling (n <= 200, 1e4 grid)", ok, detail, dt, 5)


def criterion_8():
    t0 = time.perf_counter()
    plan = reference_plan()
    base = plan_to_dict(plan, with_diagnostics=False)
    caught, total, silent = 0, 0, []
    with tempfile.TemporaryDirectory() as tmp:
        path, rep = Path(tmp) / "plan.json", Path(tmp) / "rep.json"
        for a in plan.alphas:
            for i in range(plan.space.n):
                doc = json.loads(json.dumps(base))
                w = np.asarray(doc["h_alpha"][str(a)])
                w[i] += 1e-3
                doc["h_alpha"][str(a)] = (w / w.sum()).tolist()
                path.write_text(json.dumps(doc))
                code = cli_main(["verify", "--plan", str(path), "--exact-only", "--out", str(rep)])
                failing = set(json.loads(rep.read_text())["failing"])
                total += 1
                # the stated-bound checks already fail on the unmutated plan, so
                # require the exit to come from a check the baseline passes
                if code != 0 and failing & {"marginals", "inversion"}:
                    caught += 1
                else:
                    silent.append((a, i))
    dt = time.perf_counter() - t0
    detail = f"{caught}/{total} single-weight mutations make verify exit nonzero on marginals/inversion"
    if silent:
        detail += f"; missed {silent[:5]}"
    return emit(8, "mutation sensitivity", caught == total, detail, dt, 30)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 9)])
def test_criterion(criterion, capsys):
    ok, line = criterion()
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    import contextlib
    import io

    results = []
    for c in CRITERIA:
        with contextlib.redirect_stdout(io.StringIO()):
            ok, line = c()
        print(line)
        results.append(ok)
    print(f"{sum(results)}/{len(results)} criteria pass")
