"""Finite metric spaces and discrete probability measures on them.

Everything downstream (partitions, kernels, the coupling itself) works with
integer point indices into a :class:`FiniteMetricSpace`; measures are weight
vectors over those indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MASS_TOL = 1e-12


class DomainError(ValueError):
    """Invalid argument for a metric or measure primitive."""


class NullConditioningError(DomainError):
    """Attempt to condition a measure on a set it gives zero mass."""


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    labels: tuple[str, ...]
    dist: np.ndarray
    atol: float = field(default=1e-12, repr=False)

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        n = len(self.labels)
        if d.shape != (n, n):
            raise DomainError(f"distance matrix has shape {d.shape}, expected ({n}, {n})")
        if len(set(self.labels)) != n:
            raise DomainError("point labels must be unique")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise DomainError("distances must be finite and non-negative")
        if not np.allclose(d, d.T, rtol=0.0, atol=self.atol):
            i, j = np.unravel_index(np.argmax(np.abs(d - d.T)), d.shape)
            raise DomainError(f"distance matrix is not symmetric at ({i}, {j})")
        if np.any(np.abs(np.diag(d)) > self.atol):
            raise DomainError("distance matrix must have a zero diagonal")
        off = ~np.eye(n, dtype=bool)
        if np.any(d[off] <= self.atol):
            raise DomainError("distinct points must be at positive distance")
        # d[i, k] <= d[i, j] + d[j, k] for every j, vectorised over (i, k)
        via = d[:, :, None] + d[None, :, :]
        excess = d - via.min(axis=1)
        if np.any(excess > self.atol):
            i, k = np.unravel_index(np.argmax(excess), excess.shape)
            raise DomainError(f"triangle inequality fails for pair ({i}, {k})")
        d = 0.5 * (d + d.T)
        np.fill_diagonal(d, 0.0)
        d.setflags(write=False)
        object.__setattr__(self, "labels", tuple(str(x) for x in self.labels))
        object.__setattr__(self, "dist", d)

    @classmethod
    def from_points(cls, coords: Sequence[Sequence[float]], labels=None) -> "FiniteMetricSpace":
        """Euclidean metric on a list of coordinate tuples."""
        x = np.asarray(coords, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        d = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=-1))
        if labels is None:
            labels = [f"p{i}" for i in range(len(x))]
        return cls(tuple(labels), d)

    @property
    def n(self) -> int:
        return len(self.labels)

    def index(self, point) -> int:
        """Resolve a label or an integer index to an integer index."""
        if isinstance(point, (int, np.integer)) and not isinstance(point, bool):
            if 0 <= point < self.n:
                return int(point)
            raise DomainError(f"point index {point} out of range for {self.n} points")
        try:
            return self.labels.index(str(point))
        except ValueError:
            raise DomainError(f"unknown point {point!r}") from None

    def all_points(self) -> "PointSet":
        return PointSet(frozenset(range(self.n)))


@dataclass(frozen=True)
class PointSet:
    members: frozenset[int]

    @classmethod
    def of(cls, items: Iterable[int]) -> "PointSet":
        return cls(frozenset(int(i) for i in items))

    def __contains__(self, i) -> bool:
        return i in self.members

    def __iter__(self):
        return iter(sorted(self.members))

    def __len__(self) -> int:
        return len(self.members)

    def __and__(self, other: "PointSet") -> "PointSet":
        return PointSet(self.members & other.members)

    def __or__(self, other: "PointSet") -> "PointSet":
        return PointSet(self.members | other.members)

    def __sub__(self, other: "PointSet") -> "PointSet":
        return PointSet(self.members - other.members)

    def issubset(self, other: "PointSet") -> bool:
        return self.members <= other.members

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[list(self.members)] = True
        return m

    def sorted(self) -> list[int]:
        return sorted(self.members)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability weights over the points of a finite metric space.

    Inputs whose total is within ``MASS_TOL`` of one are kept bit for bit,
    so construction is idempotent and serialised weights reload exactly.
    Totals further off are rejected unless ``normalize=True``, which
    rescales them.
    """

    space: FiniteMetricSpace
    w: np.ndarray
    normalize: bool = field(default=False, repr=False)

    def __post_init__(self):
        w = np.array(self.w, dtype=float).reshape(-1)
        if w.shape != (self.space.n,):
            raise DomainError(f"weight vector has length {w.size}, space has {self.space.n} points")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DomainError("weights must be finite and non-negative")
        total = w.sum()
        if total <= 0:
            raise DomainError("weights must have positive total mass")
        if not self.normalize and abs(total - 1.0) > MASS_TOL:
            raise DomainError(f"weights sum to {total!r}, not 1")
        if abs(total - 1.0) > MASS_TOL:
            w = w / total
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @classmethod
    def point_mass(cls, space: FiniteMetricSpace, point) -> "DiscreteMeasure":
        w = np.zeros(space.n)
        w[space.index(point)] = 1.0
        return cls(space, w)

    @classmethod
    def uniform(cls, space: FiniteMetricSpace) -> "DiscreteMeasure":
        return cls(space, np.full(space.n, 1.0 / space.n))

    def mass(self, cell: PointSet | Iterable[int]) -> float:
        idx = cell.sorted() if isinstance(cell, PointSet) else list(cell)
        return float(self.w[idx].sum()) if idx else 0.0

    def support(self) -> PointSet:
        return PointSet.of(np.flatnonzero(self.w > 0))

    def mix(self, other: "DiscreteMeasure", t: float) -> "DiscreteMeasure":
        """Return ``(1 - t) * self + t * other``."""
        _check_same_space(self, other)
        return DiscreteMeasure(self.space, (1.0 - t) * self.w + t * other.w, normalize=True)

    def __repr__(self):
        return f"DiscreteMeasure({np.array2string(self.w, precision=4)})"


def _check_same_space(mu: DiscreteMeasure, nu: DiscreteMeasure) -> None:
    if mu.space is not nu.space and not (
        mu.space.labels == nu.space.labels and np.array_equal(mu.space.dist, nu.space.dist)
    ):
        raise DomainError("measures live on different spaces")


def ball(space: FiniteMetricSpace, center, r: float) -> PointSet:
    """Open ball ``{x : d(center, x) < r}``."""
    if r < 0:
        raise DomainError("radius must be non-negative")
    c = space.index(center)
    return PointSet.of(np.flatnonzero(space.dist[c] < r))


def closed_ball(space: FiniteMetricSpace, center, r: float) -> PointSet:
    c = space.index(center)
    return PointSet.of(np.flatnonzero(space.dist[c] <= r))


def boundary_mass(space: FiniteMetricSpace, center, r: float, mu: DiscreteMeasure) -> float:
    """Mass of the sphere ``{x : d(center, x) == r}``.

    In a finite space the topological boundary of the open ball sits inside
    this sphere, so a zero return certifies a mu-continuity ball.
    """
    if r < 0:
        raise DomainError("radius must be non-negative")
    c = space.index(center)
    on_sphere = space.dist[c] == r
    return float(mu.w[on_sphere].sum())


def diameter(space: FiniteMetricSpace, cell: PointSet | Iterable[int]) -> float:
    idx = cell.sorted() if isinstance(cell, PointSet) else sorted(cell)
    if len(idx) < 2:
        return 0.0
    return float(space.dist[np.ix_(idx, idx)].max())


def total_variation(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    _check_same_space(mu, nu)
    return 0.5 * float(np.abs(mu.w - nu.w).sum())


def conditional(mu: DiscreteMeasure, cell: PointSet) -> DiscreteMeasure:
    """Restrict ``mu`` to ``cell`` and renormalise."""
    m = cell.mask(mu.space.n)
    total = mu.w[m].sum()
    if total <= 0:
        raise NullConditioningError(f"cannot condition on a null set {cell.sorted()}")
    w = np.where(m, mu.w, 0.0) / total
    return DiscreteMeasure(mu.space, w, normalize=True)
