"""Instance files: JSON descriptions of a space, a limit law and a family.

A metric instance looks like::

    {
      "space": {"labels": [...], "coords": [[x, y], ...]}     # or "dist": [[...]]
      "p_inf": [...],
      "family": [
        {"rule": "contamination", "q": [...], "count": 20},  # P_a = (1 - 1/a) P_inf + (1/a) Q
        {"rule": "copy", "count": 3},                        # exact copies of P_inf
        {"weights": [...]}                                   # one explicit member
      ],
      "delta": 1.0, "eps": 0.1, "k_max": 6,
      "beta": {"rule": "geometric", "ratio": 0.5},
      "seed": 42, "n": 100000
    }

A line instance has ``"mode": "line"``, a limit ``"f_inf": {"locs", "masses"}``
and a family of explicit step CDFs or ``{"rule": "bernoulli", "p": 0.5,
"shift": 0.25, "count": 200}`` meaning ``Bernoulli(p + shift / n)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coupling import BetaSchedule
from .metric import DiscreteMeasure, DomainError, FiniteMetricSpace
from .quantile import StepCdf


class InstanceError(DomainError):
    """The instance file is malformed."""


@dataclass
class MetricInstance:
    space: FiniteMetricSpace
    p_inf: DiscreteMeasure
    family: list[DiscreteMeasure]
    delta: float = 1.0
    eps: float = 0.1
    k_max: int = 6
    betas: BetaSchedule = field(default_factory=BetaSchedule)
    seed: int = 42
    n: int = 100_000


@dataclass
class LineInstance:
    f_inf: StepCdf
    family: list[StepCdf]


def _require(d: dict, key: str):
    if key not in d:
        raise InstanceError(f"missing field {key!r}")
    return d[key]


def parse_space(d: dict) -> FiniteMetricSpace:
    labels = d.get("labels")
    if "dist" in d:
        dist = np.asarray(d["dist"], dtype=float)
        if labels is None:
            labels = [f"p{i}" for i in range(len(dist))]
        return FiniteMetricSpace(tuple(labels), dist)
    if "coords" in d:
        return FiniteMetricSpace.from_points(d["coords"], labels)
    raise InstanceError("space needs either 'dist' or 'coords'")


def parse_beta(d: dict | None) -> BetaSchedule:
    if d is None:
        return BetaSchedule()
    if d.get("rule", "geometric") != "geometric":
        raise InstanceError(f"unknown beta rule {d.get('rule')!r}")
    return BetaSchedule(float(d.get("ratio", 0.5)))


def expand_family(space: FiniteMetricSpace, p_inf: DiscreteMeasure, entries: list) -> list[DiscreteMeasure]:
    out: list[DiscreteMeasure] = []
    for e in entries:
        if "weights" in e:
            out.append(DiscreteMeasure(space, e["weights"]))
            continue
        rule = e.get("rule")
        count = int(_require(e, "count"))
        if rule == "contamination":
            q = DiscreteMeasure(space, _require(e, "q"))
            start = int(e.get("start", 1))
            out.extend(p_inf.mix(q, 1.0 / a) for a in range(start, start + count))
        elif rule == "copy":
            out.extend(DiscreteMeasure(space, p_inf.w) for _ in range(count))
        else:
            raise InstanceError(f"unknown family rule {rule!r}")
    if not out:
        raise InstanceError("family is empty")
    return out


def parse_metric_instance(d: dict) -> MetricInstance:
    if d.get("mode", "metric") != "metric":
        raise InstanceError("expected a metric-space instance")
    space = parse_space(_require(d, "space"))
    p_inf = DiscreteMeasure(space, _require(d, "p_inf"))
    family = expand_family(space, p_inf, _require(d, "family"))
    return MetricInstance(
        space,
        p_inf,
        family,
        delta=float(d.get("delta", 1.0)),
        eps=float(d.get("eps", 0.1)),
        k_max=int(d.get("k_max", 6)),
        betas=parse_beta(d.get("beta")),
        seed=int(d.get("seed", 42)),
        n=int(d.get("n", 100_000)),
    )


def _step(d: dict) -> StepCdf:
    return StepCdf.from_pairs(zip(_require(d, "locs"), _require(d, "masses")))


def parse_line_instance(d: dict) -> LineInstance:
    if d.get("mode") != "line":
        raise InstanceError("expected a line instance (\"mode\": \"line\")")
    fam: list[StepCdf] = []
    for e in _require(d, "family"):
        if e.get("rule") == "bernoulli":
            p, shift = float(e.get("p", 0.5)), float(e.get("shift", 0.25))
            fam.extend(StepCdf.bernoulli(p + shift / n) for n in range(1, int(_require(e, "count")) + 1))
        else:
            fam.append(_step(e))
    return LineInstance(_step(_require(d, "f_inf")), fam)


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: invalid JSON ({exc})") from None


# The reference instance used throughout the test suite: six points in the
# unit square, the lightest atom sitting in the far corner.
REFERENCE_COORDS = [(0.0, 0.0), (0.06, 0.03), (0.1, 0.17), (0.3, 0.25), (0.45, 0.5), (0.7, 0.7)]
REFERENCE_WEIGHTS = [0.3, 0.25, 0.2, 0.15, 0.07, 0.03]
CORNER = 5


def reference_space() -> FiniteMetricSpace:
    return FiniteMetricSpace.from_points(REFERENCE_COORDS)


def corner_measure(space: FiniteMetricSpace, p_inf: DiscreteMeasure, share: float = 0.4) -> DiscreteMeasure:
    """``p_inf`` tilted towards the corner: ``(1 - share) * p_inf + share * delta_corner``.

    With ``share = 0.4`` the cell mass ratios ``1 - 0.4 / a`` never land
    exactly on a gate value ``1 - 2**-k``, so no remainder measure degenerates
    to a point mass.
    """
    return DiscreteMeasure(space, (1.0 - share) * p_inf.w + share * np.eye(space.n)[CORNER])


def reference_instance_dict(copies: int = 0, count: int = 20) -> dict:
    space = reference_space()
    p_inf = DiscreteMeasure(space, REFERENCE_WEIGHTS)
    q = corner_measure(space, p_inf)
    family = [{"rule": "contamination", "q": q.w.tolist(), "count": count}]
    if copies:
        family.append({"rule": "copy", "count": copies})
    return {
        "space": {"labels": list(space.labels), "coords": [list(c) for c in REFERENCE_COORDS]},
        "p_inf": REFERENCE_WEIGHTS,
        "family": family,
        "delta": 1.0,
        "eps": 0.1,
        "k_max": 6,
        "beta": {"rule": "geometric", "ratio": 0.5},
        "seed": 42,
        "n": 100_000,
    }


def bernoulli_instance_dict(count: int = 200) -> dict:
    return {
        "mode": "line",
        "f_inf": {"locs": [0.0, 1.0], "masses": [0.5, 0.5]},
        "family": [{"rule": "bernoulli", "p": 0.5, "shift": 0.25, "count": count}],
    }
