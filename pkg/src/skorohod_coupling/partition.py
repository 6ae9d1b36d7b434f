"""Nested continuity partitions of a finite metric space.

Level ``k`` splits the space into a remainder cell ``C[0]`` of small
reference mass and cells ``C[1..q]`` of diameter at most ``2**-k * delta``.
Every level-``k+1`` cell is carved out of a single level-``k`` cell, so the
levels form a tree.  Cells are built from open balls whose spheres carry no
reference mass, which is what makes them continuity sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .metric import (
    MASS_TOL,
    DiscreteMeasure,
    DomainError,
    FiniteMetricSpace,
    PointSet,
    ball,
    diameter,
)


def continuity_radius(space: FiniteMetricSpace, center, target: float, mu: DiscreteMeasure) -> float:
    """Smallest convenient radius in ``[target, 2 * target]`` whose sphere is mu-null.

    If some atom sits exactly at ``target`` the midpoint of the gap to the
    next atom distance is used, capped at ``1.5 * target``.
    """
    if target <= 0:
        raise DomainError("target radius must be positive")
    c = space.index(center)
    atom_dists = np.unique(space.dist[c][mu.w > 0])
    if not np.any(atom_dists == target):
        return float(target)
    beyond = atom_dists[atom_dists > target]
    r = 1.5 * target
    if beyond.size:
        r = min(r, 0.5 * (target + float(beyond[0])))
    return float(r)


def level_radius(k: int, delta: float) -> float:
    # continuity_radius stays below 1.5 * target, so diameters stay below 3 * target
    return delta * 2.0 ** (-k) / 3.0


def cover_level(
    space: FiniteMetricSpace,
    p_inf: DiscreteMeasure,
    k: int,
    survivors: PointSet,
    delta: float = 1.0,
    eps: float = 0.1,
    budget: float | None = None,
) -> list[PointSet]:
    """Greedy cover of ``survivors`` by p_inf-continuity balls.

    Centres are taken among uncovered survivors by decreasing atom mass
    (ties by index) until the uncovered mass of ``survivors`` is at most
    ``budget`` (default ``2**-k * eps``).  Returned balls are full open
    balls in ``space``; callers intersect them with their region.
    """
    if k < 1:
        raise DomainError("level must be >= 1")
    if budget is None:
        budget = eps * 2.0 ** (-k)
    target = level_radius(k, delta)
    w = p_inf.w
    uncovered = set(survivors.members)
    balls: list[PointSet] = []
    while True:
        left = sum(w[i] for i in uncovered)
        candidates = [i for i in uncovered if w[i] > 0]
        if left <= budget or not candidates:
            break
        center = min(candidates, key=lambda i: (-w[i], i))
        r = continuity_radius(space, center, target, p_inf)
        b = ball(space, center, r)
        balls.append(b)
        uncovered -= b.members
    return balls


def disjointify(balls: list[PointSet], return_index: bool = False):
    """Turn a union of sets into a disjoint sum, keeping the order.

    ``C_j = D_j minus (D_1 u ... u D_{j-1})``; empty pieces are dropped.
    With ``return_index=True`` also returns, for every kept piece, the
    position of the set it came from.
    """
    seen: set[int] = set()
    cells, kept = [], []
    for n, d in enumerate(balls):
        piece = d.members - seen
        seen |= d.members
        if piece:
            cells.append(PointSet(frozenset(piece)))
            kept.append(n)
    if return_index:
        return cells, kept
    return cells


@dataclass(frozen=True, eq=False)
class PartitionLevel:
    k: int
    cells: tuple[PointSet, ...]
    parent_of: dict[int, int] = field(default_factory=dict)
    cell_of: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.cell_of is None:
            n = max((max(c.members) for c in self.cells if c.members), default=-1) + 1
            idx = np.full(n, -1, dtype=int)
            for j, c in enumerate(self.cells):
                for i in c.members:
                    idx[i] = j
            idx.setflags(write=False)
            object.__setattr__(self, "cell_of", idx)

    @property
    def q(self) -> int:
        return len(self.cells) - 1


@dataclass(frozen=True, eq=False)
class PartitionTree:
    space: FiniteMetricSpace
    p_inf: DiscreteMeasure
    levels: tuple[PartitionLevel, ...]
    delta: float
    eps: float
    i_of: tuple[tuple[int, ...], ...] = None

    def __post_init__(self):
        if self.i_of is None:
            object.__setattr__(self, "i_of", tuple(self._recompute_i(k) for k in range(1, self.k_max + 1)))

    @property
    def k_max(self) -> int:
        return len(self.levels)

    def level(self, k: int) -> PartitionLevel:
        if not 1 <= k <= self.k_max:
            raise DomainError(f"level {k} outside 1..{self.k_max}")
        return self.levels[k - 1]

    def cell(self, k: int, j: int) -> PointSet:
        return self.level(k).cells[j]

    def cells(self, k: int) -> tuple[PointSet, ...]:
        return self.level(k).cells

    def support_index(self, k: int) -> tuple[int, ...]:
        """Indices of the cells at level ``k`` with positive reference mass."""
        return self.i_of[k - 1]

    def delta_k(self, k: int) -> float:
        return self.delta * 2.0 ** (-k)

    def eps_k(self, k: int) -> float:
        return self.eps * 2.0 ** (-k)

    def _recompute_i(self, k: int) -> tuple[int, ...]:
        return tuple(j for j, c in enumerate(self.cells(k)) if self.p_inf.mass(c) > MASS_TOL)

    def invariant_violations(self) -> list[str]:
        """Recompute every structural guarantee from the raw cell sets."""
        bad = []
        everything = set(range(self.space.n))
        for lev in self.levels:
            k = lev.k
            seen: set[int] = set()
            for j, c in enumerate(lev.cells):
                if seen & c.members:
                    bad.append(f"level {k}: cell {j} overlaps earlier cells")
                seen |= c.members
            if seen != everything:
                bad.append(f"level {k}: cells do not cover the space")
            for j, c in enumerate(lev.cells[1:], start=1):
                if diameter(self.space, c) > self.delta_k(k) + 1e-12:
                    bad.append(f"level {k}: cell {j} diameter {diameter(self.space, c)} > {self.delta_k(k)}")
            rem = self.p_inf.mass(lev.cells[0])
            if rem > self.eps_k(k) + MASS_TOL:
                bad.append(f"level {k}: remainder mass {rem} > {self.eps_k(k)}")
            if k >= 2:
                prev = self.level(k - 1).cells
                for j, c in enumerate(lev.cells[1:], start=1):
                    p = lev.parent_of.get(j)
                    if p is None or not 0 <= p < len(prev) or not c.issubset(prev[p]):
                        bad.append(f"level {k}: cell {j} not nested in its parent {p}")
            if set(self.i_of[k - 1]) != set(self._recompute_i(k)):
                bad.append(f"level {k}: stored support index disagrees with recomputation")
        return bad


def build_partition_tree(
    space: FiniteMetricSpace,
    p_inf: DiscreteMeasure,
    delta: float,
    eps: float,
    k_max: int,
) -> PartitionTree:
    """Build levels ``1..k_max`` by refining every cell of the previous level.

    The remainder of the previous level is refined like any other cell, and
    each region ``R`` may leave uncovered at most ``eps_k * P_inf(R)``, so
    the new remainder has mass at most ``eps_k``.
    """
    if not delta > 0:
        raise DomainError("delta must be positive")
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    if k_max < 1:
        raise DomainError("k_max must be >= 1")

    regions: list[PointSet] = [space.all_points()]
    levels: list[PartitionLevel] = []
    for k in range(1, k_max + 1):
        eps_k = eps * 2.0 ** (-k)
        cells: list[PointSet] = []
        parents: dict[int, int] = {}
        remainder: set[int] = set()
        for h, region in enumerate(regions):
            if not region.members:
                continue
            balls = cover_level(space, p_inf, k, region, delta, eps, budget=eps_k * p_inf.mass(region))
            pieces = disjointify([b & region for b in balls])
            covered: set[int] = set()
            for piece in pieces:
                cells.append(piece)
                covered |= piece.members
                if k >= 2:
                    parents[len(cells)] = h
            remainder |= region.members - covered
        lev = PartitionLevel(k, (PointSet(frozenset(remainder)),) + tuple(cells), parents)
        levels.append(lev)
        regions = list(lev.cells)
    return PartitionTree(space, p_inf, tuple(levels), float(delta), float(eps))


def locate_cell(tree: PartitionTree, k: int, s) -> int:
    """Index of the level-``k`` cell holding point ``s``."""
    i = tree.space.index(s)
    return int(tree.level(k).cell_of[i])
