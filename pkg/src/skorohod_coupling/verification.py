"""Exact and statistical checks of a coupling plan.

Exact checks enumerate the coupling (no randomness); statistical checks
record their seed and sample size so a report can be regenerated exactly.

Two families of distance bounds are reported.  The ``stated`` bounds are
``nu(d(X_a, X_inf) > delta_k) <= eps_h`` for ``h >= ell[a] >= k`` and
``nu(union over ell[a] >= k) <= 2 eps_k``.  The ``corrected`` bounds also
charge the mass of the components ``j > ell[a]``, where ``X_a`` is drawn
from the remainder measure independently of ``X_inf``:

    nu(d(X_a, X_inf) > delta_k) <= (1 - beta_star(ell[a])) + beta_star(ell[a]) * eps_{ell[a]}
    nu(union over ell[a] >= k)  <= (1 - beta_star(k)) + 2 eps_k
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .coupling import (
    INF,
    ContractError,
    CouplingPlan,
    check_inversion,
    coordinate_marginal,
    enumerate_nu,
    enumerate_sections,
    sample_arrays,
)
from .metric import DomainError
from .quantile import StepCdf, cdf_eval

EXACT_TOL = 1e-10
BOUND_MODES = ("stated", "corrected")


@dataclass
class VerificationReport:
    marginal_defects: dict[str, float] = field(default_factory=dict)
    inversion_defects: dict[str, float] = field(default_factory=dict)
    cc_bounds: list[dict] = field(default_factory=list)
    cc_bounds_corrected: list[dict] = field(default_factory=list)
    tail_bounds: list[dict] = field(default_factory=list)
    tail_bounds_corrected: list[dict] = field(default_factory=list)
    as_convergence: list[dict] = field(default_factory=list)
    seed: int | None = None
    n: int | None = None
    tolerance: float = EXACT_TOL

    def checks(self, mode: str = "stated") -> dict[str, bool]:
        """Named pass flags; ``mode`` picks which distance bounds count."""
        if mode not in BOUND_MODES:
            raise DomainError(f"unknown bound mode {mode!r}")
        out = {
            "marginals": all(v <= self.tolerance for v in self.marginal_defects.values()),
            "inversion": all(v <= self.tolerance for v in self.inversion_defects.values()),
        }
        if mode == "stated":
            out["cc_bound"] = all(r["pass"] for r in self.cc_bounds)
            out["tail_bound"] = all(r["pass"] for r in self.tail_bounds)
            if self.as_convergence:
                out["as_convergence"] = all(r["pass"] for r in self.as_convergence)
        else:
            out["cc_bound"] = all(r["pass"] for r in self.cc_bounds_corrected)
            out["tail_bound"] = all(r["pass"] for r in self.tail_bounds_corrected)
            if self.as_convergence:
                out["as_convergence"] = all(r["pass_corrected"] for r in self.as_convergence)
        if self.as_convergence:
            out["sampler_agreement"] = all(r["agree"] for r in self.as_convergence)
        return out

    def failing_checks(self, mode: str = "stated") -> list[str]:
        return [name for name, ok in self.checks(mode).items() if not ok]

    def passed(self, mode: str = "stated") -> bool:
        return not self.failing_checks(mode)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["checks"] = {m: self.checks(m) for m in BOUND_MODES}
        return d


def verify_marginals(plan: CouplingPlan) -> dict[str, float]:
    """Total-variation gap between each enumerated coordinate law and its target.

    Targets: ``P_inf`` for ``X_inf`` and for indices with infinite depth,
    ``P_a`` otherwise.
    """
    out = {"inf": 0.5 * float(np.abs(coordinate_marginal(plan, None) - plan.p_inf.w).sum())}
    for a in plan.alphas:
        target = plan.p_inf.w if plan.ell[a] == INF else plan.law(a).w
        out[str(a)] = 0.5 * float(np.abs(coordinate_marginal(plan, a) - target).sum())
    return out


def verify_inversion(plan: CouplingPlan) -> dict[str, float]:
    return {
        str(a): check_inversion(plan.law(a), plan.h_alpha[a], plan.tree, plan.ell[a], plan.betas)
        for a in plan.alphas
        if plan.ell[a] != INF
    }


def far_mass(plan: CouplingPlan, alpha: int, k: int) -> float:
    """Exact ``nu(d(X_alpha, X_inf) > delta_k)``."""
    r = plan.tree.delta_k(k)
    dist = plan.space.dist
    return enumerate_nu(plan, lambda w: dist[w.s, w.x[alpha]] > r, [alpha])


def verify_cc_bound(
    plan: CouplingPlan, k: int, alpha: int, h: int, mass: float | None = None
) -> tuple[float, float, bool]:
    """Exact far mass against ``eps_h``; requires ``h >= ell[alpha] >= k``.

    ``mass`` may carry an already enumerated ``far_mass(plan, alpha, k)``.
    """
    lev = plan.ell[alpha]
    if lev != INF and not h >= lev >= k:
        raise ContractError(f"need h >= ell >= k, got h={h}, ell={lev}, k={k}")
    if lev == INF and h < k:
        raise ContractError(f"need h >= k, got h={h}, k={k}")
    if mass is None:
        mass = far_mass(plan, alpha, k)
    bound = plan.tree.eps * 2.0 ** (-h)
    return mass, bound, bool(mass <= bound + EXACT_TOL)


def corrected_cc_bound(plan: CouplingPlan, alpha: int) -> float:
    lev = plan.ell[alpha]
    if lev == INF:
        return 0.0
    return plan.betas.tail(lev) + plan.betas.beta_star(lev) * plan.tree.eps_k(lev)


def union_far_mass(plan: CouplingPlan, k: int) -> float:
    """Exact ``nu(d(X_a, X_inf) > delta_k for some a with ell[a] >= k)``."""
    members = [a for a in plan.alphas if plan.ell[a] >= k]
    if not members:
        return 0.0
    r = plan.tree.delta_k(k)
    near = plan.space.dist <= r
    inside = enumerate_sections(plan, members, lambda a, s: near[s])
    return max(0.0, 1.0 - inside)


def verify_tail_bound(plan: CouplingPlan, k: int) -> tuple[float, float]:
    if not 1 <= k <= plan.tree.k_max:
        raise DomainError(f"level {k} outside 1..{plan.tree.k_max}")
    return union_far_mass(plan, k), 2.0 * plan.tree.eps_k(k)


def corrected_tail_bound(plan: CouplingPlan, k: int) -> float:
    return plan.betas.tail(k) + 2.0 * plan.tree.eps_k(k)


def _sigma(p: float, n: int) -> float:
    p = min(max(p, 0.0), 1.0)
    return math.sqrt(p * (1.0 - p) / n)


def verify_as_convergence(plan: CouplingPlan, seed: int, n: int) -> list[dict]:
    """Empirical rate of ``max_{ell[a] >= k} d(X_a, X_inf) > delta_k`` for every level.

    Each rate is compared with the stated and corrected tail bounds (plus
    three binomial standard errors) and with the exact union mass.
    """
    if n < 1000:
        raise DomainError("need at least 1000 samples")
    _, s, x = sample_arrays(plan, seed, n)
    d = plan.space.dist[s[:, None], x]
    alphas = list(plan.alphas)
    rows = []
    for k in range(1, plan.tree.k_max + 1):
        cols = [i for i, a in enumerate(alphas) if plan.ell[a] >= k]
        far = (d[:, cols] > plan.tree.delta_k(k)).any(axis=1) if cols else np.zeros(n, dtype=bool)
        rate = float(far.mean())
        exact, bound = verify_tail_bound(plan, k)
        corrected = corrected_tail_bound(plan, k)
        rows.append(
            {
                "k": k,
                "rate": rate,
                "bound": bound,
                "pass": bool(rate <= bound + 3 * _sigma(bound, n)),
                "bound_corrected": corrected,
                "pass_corrected": bool(rate <= corrected + 3 * _sigma(corrected, n)),
                "exact": exact,
                "agree": bool(abs(rate - exact) <= 3 * _sigma(exact, n)),
            }
        )
    return rows


@dataclass
class DKWResult:
    passed: bool
    distance: float
    bound: float
    n: int

    def __bool__(self):
        return self.passed


def dkw_check(samples, f: StepCdf, confidence: float = 0.999) -> DKWResult:
    """Sup-distance between the empirical CDF and ``f`` against the DKW radius."""
    if not 0 < confidence < 1:
        raise DomainError("confidence must lie in (0, 1)")
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise DomainError("no samples")
    grid = np.union1d(x, f.locs)
    emp = np.searchsorted(x, grid, side="right") / n
    dist = float(np.abs(emp - cdf_eval(f, grid)).max())
    bound = math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * n))
    return DKWResult(bool(dist <= bound), dist, bound, n)


def verify(plan: CouplingPlan, seed: int = 42, n: int = 100_000, statistical: bool = True, h_extra: int = 3) -> VerificationReport:
    """Run every check and collect the results in one report."""
    rep = VerificationReport()
    rep.marginal_defects = verify_marginals(plan)
    rep.inversion_defects = verify_inversion(plan)
    k_max = plan.tree.k_max
    for a in plan.alphas:
        lev = plan.ell[a]
        top = k_max if lev == INF else lev
        corrected = corrected_cc_bound(plan, a)
        for k in range(1, top + 1):
            mass = far_mass(plan, a, k)
            low = k if lev == INF else lev
            for h in range(low, low + h_extra + 1):
                _, bound, ok = verify_cc_bound(plan, k, a, h, mass=mass)
                rep.cc_bounds.append({"alpha": a, "k": k, "h": h, "mass": mass, "bound": bound, "pass": ok})
            rep.cc_bounds_corrected.append(
                {"alpha": a, "k": k, "mass": mass, "bound": corrected, "pass": bool(mass <= corrected + EXACT_TOL)}
            )
    for k in range(1, k_max + 1):
        mass, bound = verify_tail_bound(plan, k)
        rep.tail_bounds.append({"k": k, "mass": mass, "bound": bound, "pass": bool(mass <= bound + EXACT_TOL)})
        corrected = corrected_tail_bound(plan, k)
        rep.tail_bounds_corrected.append({"k": k, "mass": mass, "bound": corrected, "pass": bool(mass <= corrected + EXACT_TOL)})
    if statistical:
        rep.seed, rep.n = seed, n
        rep.as_convergence = verify_as_convergence(plan, seed, n)
    return rep
