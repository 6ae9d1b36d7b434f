"""Step CDFs on the real line and the quantile (inverse-CDF) coupling.

Feeding one uniform variable ``U`` through every ``F_n^{-1}`` puts a whole
weakly convergent sequence on a single probability space; the paths
``n -> F_n^{-1}(u)`` converge except on the (finite, here) set of levels
where the limiting quantile function jumps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .metric import MASS_TOL, DomainError


@dataclass(frozen=True, eq=False)
class StepCdf:
    locs: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        locs = np.asarray(self.locs, dtype=float).reshape(-1)
        masses = np.asarray(self.masses, dtype=float).reshape(-1)
        if locs.shape != masses.shape or locs.size == 0:
            raise DomainError("need matching, non-empty location and mass lists")
        if np.any(np.diff(locs) <= 0):
            raise DomainError("jump locations must be strictly increasing")
        if np.any(masses <= 0):
            raise DomainError("jump masses must be positive")
        if abs(masses.sum() - 1.0) > MASS_TOL:
            raise DomainError(f"masses sum to {masses.sum()!r}, not 1")
        cum = np.cumsum(masses)
        cum[-1] = 1.0
        for a in (locs, masses, cum):
            a.setflags(write=False)
        object.__setattr__(self, "locs", locs)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "cum", cum)

    @classmethod
    def from_pairs(cls, jumps) -> "StepCdf":
        """Build from ``(location, mass)`` pairs, merging repeats and dropping null masses."""
        merged: dict[float, float] = {}
        for loc, m in jumps:
            merged[float(loc)] = merged.get(float(loc), 0.0) + float(m)
        items = sorted((x, m) for x, m in merged.items() if m > 0)
        return cls(np.array([x for x, _ in items]), np.array([m for _, m in items]))

    @classmethod
    def bernoulli(cls, p: float) -> "StepCdf":
        return cls.from_pairs([(0.0, 1.0 - p), (1.0, p)])

    def __call__(self, x):
        return cdf_eval(self, x)


def cdf_eval(f: StepCdf, x):
    """``F(x)``: total mass at locations ``<= x``."""
    i = np.searchsorted(f.locs, x, side="right")
    out = np.where(i > 0, f.cum[np.maximum(i - 1, 0)], 0.0)
    return float(out) if np.ndim(out) == 0 else out


def generalized_inverse(f: StepCdf, y):
    """``inf {x : F(x) >= y}`` for ``y`` in ``(0, 1]``."""
    y_arr = np.asarray(y, dtype=float)
    if np.any((y_arr <= 0) | (y_arr > 1)):
        raise DomainError("generalized inverse is defined on (0, 1]")
    i = np.searchsorted(f.cum, y_arr, side="left")
    out = f.locs[np.minimum(i, len(f.locs) - 1)]
    return float(out) if np.ndim(out) == 0 else out


def inverse_jump_levels(f: StepCdf) -> np.ndarray:
    """Levels in ``(0, 1)`` at which ``F^{-1}`` jumps, i.e. ``F`` at its atoms below 1."""
    return f.cum[:-1].copy()


@dataclass
class ProbeDefect:
    probe: float
    defects: np.ndarray
    slope: float
    converging: bool


def weak_convergence_defect(fs: Sequence[StepCdf], f_inf: StepCdf, probes) -> list[ProbeDefect]:
    """``|F_n(x) - F_inf(x)|`` along the family at continuity points ``x`` of the limit.

    ``slope`` is the least-squares exponent of the defect against ``n`` on a
    log-log scale (``nan`` when fewer than two defects are positive).  A
    probe is flagged as converging when its last defect is zero or the
    fitted exponent is negative.
    """
    probes = np.asarray(probes, dtype=float)
    bad = [float(x) for x in probes if np.any(f_inf.locs == x)]
    if bad:
        raise DomainError(f"probes sit on jumps of the limit: {bad}")
    ns = np.arange(1, len(fs) + 1)
    table = np.array([cdf_eval(f, probes) for f in fs]).reshape(len(fs), probes.size)
    limit = np.atleast_1d(cdf_eval(f_inf, probes))
    out = []
    for col, x in enumerate(probes):
        d = np.abs(table[:, col] - limit[col])
        pos = d > 0
        slope = float(np.polyfit(np.log(ns[pos]), np.log(d[pos]), 1)[0]) if pos.sum() >= 2 else float("nan")
        converging = bool(not pos[-1] or slope < 0)
        out.append(ProbeDefect(float(x), d, slope, converging))
    return out


@dataclass
class CouplingTable:
    """Quantile paths ``values[n-1, i] = F_n^{-1}(u_i)`` against the limit."""

    u: np.ndarray
    values: np.ndarray
    limit: np.ndarray
    settled_from: np.ndarray  # first n from which the path equals the limit, 0 if never

    @property
    def converged(self) -> np.ndarray:
        return self.settled_from > 0

    @property
    def failure_set(self) -> np.ndarray:
        return self.u[~self.converged]

    def write_csv(self, path) -> None:
        """One row per ``(u, n)`` pair: ``u, n, value, limit, converged``."""
        text = {}

        def fmt(v):
            # few distinct values occur, so cache their text
            if v not in text:
                text[v] = repr(float(v))
            return text[v]

        prefix = [f"{fmt(u)}," for u in self.u]
        suffix = [f",{fmt(l)},{int(c)}" for l, c in zip(self.limit, self.converged)]
        with open(path, "w") as fh:
            fh.write("u,n,value,limit,converged\n")
            for n in range(1, self.values.shape[0] + 1):
                row = self.values[n - 1]
                fh.write("".join(f"{prefix[i]}{n},{fmt(row[i])}{suffix[i]}\n" for i in range(len(self.u))))


def quantile_couple(fs: Sequence[StepCdf], f_inf: StepCdf, u_grid) -> CouplingTable:
    """Evaluate every ``F_n^{-1}`` and ``F_inf^{-1}`` on a grid of levels.

    A path counts as converged when it equals the limit for every ``n``
    from some index on, within the family given.
    """
    u = np.asarray(u_grid, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise DomainError("u-grid must lie inside (0, 1)")
    values = np.array([generalized_inverse(f, u) for f in fs]).reshape(len(fs), u.size)
    limit = np.atleast_1d(generalized_inverse(f_inf, u))
    hit = values == limit[None, :]
    # length of the run of hits at the end of each path
    miss_rev = ~hit[::-1]
    run = np.where(miss_rev.any(axis=0), miss_rev.argmax(axis=0), len(fs))
    settled = np.where(run > 0, len(fs) - run + 1, 0)
    return CouplingTable(u, values, limit, settled)


def uniform_grid(m: int) -> np.ndarray:
    """Midpoints of ``m`` equal subintervals of ``(0, 1)``."""
    return (np.arange(m) + 0.5) / m
