"""The almost-sure coupling of a convergent family of discrete laws.

Given a reference law ``P_inf``, a family ``P_1..P_N`` and a partition tree
for ``P_inf``, each index ``a`` gets a depth ``ell[a]``.  At that depth
``P_a`` splits as

    P_a = (1 - B) * H_a + B * sum_p P_inf(C_p) * P_a( . | C_p),   B = beta_star(ell[a])

with ``H_a`` a genuine probability measure.  The coupling draws a mixture
component ``j`` from the beta schedule and ``X_inf = s`` from ``P_inf``;
for ``j <= ell[a]`` the coordinate ``X_a`` is drawn from ``P_a`` restricted
to the cell of ``s``, otherwise from ``H_a``.  Coordinates are independent
given ``(j, s)``.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .metric import (
    MASS_TOL,
    DiscreteMeasure,
    DomainError,
    FiniteMetricSpace,
    conditional,
    total_variation,
)
from .partition import PartitionTree

INF = math.inf
G2_TOL = 1e-12


class NegativeMassError(DomainError):
    """The remainder measure would put negative mass on some cell."""

    def __init__(self, alpha, k, cell, eta, beta_star):
        self.alpha, self.k, self.cell = alpha, k, cell
        super().__init__(
            f"remainder measure for index {alpha} at level {k} is negative on cell {cell}: "
            f"mass ratio {eta:.6g} < beta_star {beta_star:.6g}"
        )


class NotYetConvergedError(DomainError):
    """Some family member is too far from the limit even at level 1."""

    def __init__(self, alpha, cell, reason):
        self.alpha, self.cell = alpha, cell
        super().__init__(f"index {alpha} has not converged at level 1 (cell {cell}: {reason})")


class ContractError(RuntimeError):
    """An event looked at coordinates it did not declare."""


@dataclass(frozen=True)
class BetaSchedule:
    """Geometric mixture weights ``beta_k = (1 - r) * r**(k-1)``.

    The default ``r = 1/2`` gives ``beta_k = 2**-k``.
    """

    ratio: float = 0.5

    def __post_init__(self):
        if not 0 < self.ratio < 1:
            raise DomainError("ratio must lie in (0, 1)")

    def beta(self, k: int) -> float:
        if k < 1:
            raise DomainError("beta is indexed from 1")
        return (1.0 - self.ratio) * self.ratio ** (k - 1)

    def beta_star(self, k: int | float) -> float:
        if k == INF:
            return 1.0
        return 1.0 - self.ratio**k if k >= 1 else 0.0

    def tail(self, k: int | float) -> float:
        """``1 - beta_star(k)``, computed without cancellation."""
        if k == INF:
            return 0.0
        return self.ratio**k if k >= 1 else 1.0

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.geometric(1.0 - self.ratio, size=n)

    def to_dict(self) -> dict:
        return {"rule": "geometric", "ratio": self.ratio}


@dataclass
class RatioTable:
    eta: dict[tuple[int, int], dict[int, float]]
    eta_min: dict[tuple[int, int], float]
    delta_dev: dict[tuple[int, int], float]
    tv: dict[int, float]
    k_max: int

    def eta_range(self, alpha: int, k: int) -> tuple[float, float]:
        vals = list(self.eta[alpha, k].values())
        return min(vals), max(vals)


def ratio_table(p_inf: DiscreteMeasure, p_alpha: Sequence[DiscreteMeasure], tree: PartitionTree) -> RatioTable:
    """Cell mass ratios ``P_a(C)/P_inf(C)`` and deviations for every index and level.

    Indices are 1-based: ``p_alpha[0]`` is index 1.
    """
    eta, eta_min, dev, tv = {}, {}, {}, {}
    for a, pa in enumerate(p_alpha, start=1):
        tv[a] = total_variation(pa, p_inf)
        for k in range(1, tree.k_max + 1):
            cells = tree.cells(k)
            row = {p: pa.mass(cells[p]) / p_inf.mass(cells[p]) for p in tree.support_index(k)}
            eta[a, k] = row
            eta_min[a, k] = min(row.values())
            dev[a, k] = max(abs(pa.mass(c) - p_inf.mass(c)) for c in cells)
    return RatioTable(eta, eta_min, dev, tv, tree.k_max)


def _level_ok(table: RatioTable, betas: BetaSchedule, a: int, k: int) -> bool:
    return table.eta_min[a, k] >= betas.beta_star(k) - G2_TOL and table.delta_dev[a, k] <= betas.beta(k) + G2_TOL


def compute_ell(table: RatioTable, betas: BetaSchedule, k_max: int | None = None) -> dict[int, int | float]:
    """Deepest level up to which every level passes both gates.

    A level ``k`` passes when the smallest mass ratio is at least
    ``beta_star(k)`` and the largest cell deviation is at most ``beta(k)``.
    Exact copies of the limit get ``inf``; members failing at level 1 get 0.
    """
    k_max = table.k_max if k_max is None else k_max
    ell = {}
    for a in table.tv:
        if table.tv[a] <= MASS_TOL:
            ell[a] = INF
            continue
        depth = 0
        for k in range(1, k_max + 1):
            if not _level_ok(table, betas, a, k):
                break
            depth = k
        ell[a] = depth
    return ell


def build_h_measure(
    p_alpha: DiscreteMeasure,
    p_inf: DiscreteMeasure,
    tree: PartitionTree,
    k: int,
    betas: BetaSchedule,
    alpha=None,
) -> DiscreteMeasure:
    """Remainder measure at level ``k``, checked non-negative and of unit mass."""
    bs = betas.beta_star(k)
    tail = betas.tail(k)
    cells = tree.cells(k)
    support = set(tree.support_index(k))
    h = p_alpha.w / tail
    for p, cell in enumerate(cells):
        if p not in support or not cell.members:
            continue
        idx = cell.sorted()
        pa = p_alpha.w[idx].sum()
        pi = p_inf.w[idx].sum()
        eta = pa / pi
        if eta < bs - G2_TOL:
            raise NegativeMassError(alpha, k, p, eta, bs)
        # a cell with P_a(C) = 0 is ruled out by the gate above
        factor = (1.0 - bs * pi / pa) / tail
        h[idx] = p_alpha.w[idx] * max(factor, 0.0)
    total = h.sum()
    if abs(total - 1.0) > MASS_TOL:
        raise DomainError(f"remainder measure has total mass {total!r}")
    return DiscreteMeasure(p_alpha.space, h)


def check_inversion(
    p_alpha: DiscreteMeasure,
    h: DiscreteMeasure,
    tree: PartitionTree,
    k: int,
    betas: BetaSchedule,
) -> float:
    """Largest atomwise gap between ``P_a`` and its mixture reconstruction."""
    bs = betas.beta_star(k)
    rebuilt = betas.tail(k) * h.w
    for p in tree.support_index(k):
        cell = tree.cell(k, p)
        rebuilt = rebuilt + bs * tree.p_inf.mass(cell) * conditional(p_alpha, cell).w
    return float(np.abs(p_alpha.w - rebuilt).max())


@dataclass(frozen=True, eq=False)
class CouplingPlan:
    space: FiniteMetricSpace
    p_inf: DiscreteMeasure
    p_alpha: tuple[DiscreteMeasure, ...]
    tree: PartitionTree
    betas: BetaSchedule
    ell: dict[int, int | float]
    h_alpha: dict[int, DiscreteMeasure]
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def alphas(self) -> range:
        return range(1, len(self.p_alpha) + 1)

    def law(self, alpha: int) -> DiscreteMeasure:
        return self.p_alpha[alpha - 1]

    def kernel_weights(self, j: int, s: int, alpha: int) -> np.ndarray:
        """Weights of the kernel for component ``j``, limit value ``s``, index ``alpha``."""
        lev = self.ell[alpha]
        if lev == INF:
            key = ("delta", s)
        elif j > lev:
            return self.h_alpha[alpha].w
        else:
            p = int(self.tree.level(lev).cell_of[s])
            key = ("cond", alpha, p, s)
        if key not in self._cache:
            self._cache[key] = self._kernel_uncached(key)
        return self._cache[key]

    def _kernel_uncached(self, key) -> np.ndarray:
        if key[0] == "delta":
            w = np.zeros(self.space.n)
            w[key[1]] = 1.0
            return w
        _, alpha, p, s = key
        cell = self.tree.cell(self.ell[alpha], p)
        pa = self.law(alpha)
        if pa.mass(cell) <= 0:
            # only reachable for s in a P_inf-null cell
            w = np.zeros(self.space.n)
            w[s] = 1.0
            return w
        return conditional(pa, cell).w

    def blocks(self, alphas: Iterable[int]) -> list[tuple[int, float]]:
        """Collapse the component axis into ``(representative j, total weight)`` blocks.

        Kernels depend on ``j`` only through ``j <= ell[a]``, so the blocks
        are delimited by the distinct finite depths of ``alphas``.
        """
        cuts = sorted({self.ell[a] for a in alphas if self.ell[a] != INF})
        out, lo = [], 0
        for c in cuts:
            out.append((lo + 1, self.betas.beta_star(c) - self.betas.beta_star(lo)))
            lo = c
        out.append((lo + 1, self.betas.tail(lo)))
        return out


def build_plan(
    p_inf: DiscreteMeasure,
    p_alpha: Sequence[DiscreteMeasure],
    tree: PartitionTree,
    betas: BetaSchedule | None = None,
) -> CouplingPlan:
    betas = betas or BetaSchedule()
    table = ratio_table(p_inf, p_alpha, tree)
    ell = compute_ell(table, betas)
    for a, lev in ell.items():
        if lev == 0:
            raise _unconverged(table, betas, a, tree, p_alpha[a - 1])
    h = {}
    for a, lev in ell.items():
        if lev != INF:
            h[a] = build_h_measure(p_alpha[a - 1], p_inf, tree, lev, betas, alpha=a)
    return CouplingPlan(p_inf.space, p_inf, tuple(p_alpha), tree, betas, ell, h)


def _unconverged(table, betas, a, tree, pa) -> NotYetConvergedError:
    bs = betas.beta_star(1)
    for p, eta in sorted(table.eta[a, 1].items()):
        if eta < bs - G2_TOL:
            return NotYetConvergedError(a, p, f"mass ratio {eta:.6g} < {bs:.6g}")
    devs = [abs(pa.mass(c) - tree.p_inf.mass(c)) for c in tree.cells(1)]
    p = int(np.argmax(devs))
    return NotYetConvergedError(a, p, f"deviation {devs[p]:.6g} > {betas.beta(1):.6g}")


class _Coordinates(Mapping):
    """Read-only view of sampled coordinates that refuses undeclared indices."""

    def __init__(self, values: dict[int, int]):
        self._values = values

    def __getitem__(self, alpha):
        try:
            return self._values[alpha]
        except KeyError:
            raise ContractError(f"event reads index {alpha}, which was not declared") from None

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def __repr__(self):
        return repr(self._values)


@dataclass(frozen=True)
class CoupledSample:
    j: int
    s: int
    x: Mapping


def kernel(plan: CouplingPlan, j: int, s, alpha: int) -> DiscreteMeasure:
    if j < 1:
        raise DomainError("component index starts at 1")
    if alpha not in plan.ell:
        raise DomainError(f"unknown index {alpha}")
    return DiscreteMeasure(plan.space, plan.kernel_weights(j, plan.space.index(s), alpha), normalize=True)


def enumerate_nu(plan: CouplingPlan, event: Callable[[CoupledSample], bool], alphas: Iterable[int]) -> float:
    """Exact probability of ``event`` under the coupling.

    ``event`` receives a :class:`CoupledSample` whose ``x`` only holds the
    declared ``alphas``; ``j`` is a representative of its block and events
    must not depend on it.
    """
    alphas = list(alphas)
    for a in alphas:
        if a not in plan.ell:
            raise DomainError(f"unknown index {a}")
    total = 0.0
    for j, wb in plan.blocks(alphas):
        if wb <= 0:
            continue
        for s in np.flatnonzero(plan.p_inf.w > 0):
            s = int(s)
            ks = [plan.kernel_weights(j, s, a) for a in alphas]
            supports = [np.flatnonzero(k > 0) for k in ks]
            inner = 0.0
            for combo in itertools.product(*supports):
                sample = CoupledSample(j, s, _Coordinates(dict(zip(alphas, (int(c) for c in combo)))))
                if event(sample):
                    inner += math.prod(k[c] for k, c in zip(ks, combo))
            total += wb * plan.p_inf.w[s] * inner
    return total


def enumerate_sections(
    plan: CouplingPlan,
    alphas: Iterable[int],
    section: Callable[[int, int], np.ndarray],
    limit_event: Callable[[int], bool] | None = None,
) -> float:
    """Exact ``nu(X_inf in A, X_a in section(a, X_inf) for all a)``.

    Uses the conditional independence of coordinates given ``(j, s)`` so the
    cost is linear in the number of indices.  ``section(a, s)`` returns a
    boolean mask over points.
    """
    alphas = list(alphas)
    total = 0.0
    for j, wb in plan.blocks(alphas):
        if wb <= 0:
            continue
        for s in np.flatnonzero(plan.p_inf.w > 0):
            s = int(s)
            if limit_event is not None and not limit_event(s):
                continue
            prod = 1.0
            for a in alphas:
                prod *= float(plan.kernel_weights(j, s, a)[section(a, s)].sum())
            total += wb * plan.p_inf.w[s] * prod
    return total


def coordinate_marginal(plan: CouplingPlan, alpha: int | None) -> np.ndarray:
    """Exact law of ``X_alpha`` (or of ``X_inf`` for ``alpha=None``) under the coupling."""
    out = np.zeros(plan.space.n)
    if alpha is None:
        for _, wb in plan.blocks([]):
            out += wb * plan.p_inf.w
        return out
    for j, wb in plan.blocks([alpha]):
        for s in np.flatnonzero(plan.p_inf.w > 0):
            out += wb * plan.p_inf.w[s] * plan.kernel_weights(j, int(s), alpha)
    return out


def _inverse_cdf(w: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(w)
    cdf[-1] = 1.0
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(w) - 1)


def sample_arrays(plan: CouplingPlan, seed: int, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised draws: component ``j``, limit ``s`` and an ``(n, N)`` array of coordinates."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    j = plan.betas.sample(rng, n)
    s = _inverse_cdf(plan.p_inf.w, rng.random(n))
    u = rng.random((n, len(plan.p_alpha)))
    x = np.empty((n, len(plan.p_alpha)), dtype=int)
    for col, a in enumerate(plan.alphas):
        lev = plan.ell[a]
        if lev == INF:
            x[:, col] = s
            continue
        far = j > lev
        x[far, col] = _inverse_cdf(plan.h_alpha[a].w, u[far, col])
        near = ~far
        cells = plan.tree.level(lev).cell_of[s]
        for p in np.unique(cells[near]):
            rows = near & (cells == p)
            cell = plan.tree.cell(lev, int(p))
            pa = plan.law(a)
            if pa.mass(cell) <= 0:
                x[rows, col] = s[rows]
            else:
                x[rows, col] = _inverse_cdf(conditional(pa, cell).w, u[rows, col])
    return j, s, x


def sample_coupled(plan: CouplingPlan, seed: int, n: int) -> list[CoupledSample]:
    j, s, x = sample_arrays(plan, seed, n)
    alphas = list(plan.alphas)
    return [
        CoupledSample(int(j[i]), int(s[i]), dict(zip(alphas, (int(v) for v in x[i])))) for i in range(n)
    ]
