import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skorohod_coupling.metric import (
    DiscreteMeasure,
    DomainError,
    FiniteMetricSpace,
    NullConditioningError,
    PointSet,
    ball,
    boundary_mass,
    closed_ball,
    conditional,
    diameter,
    total_variation,
)


def weights(n):
    return st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=n, max_size=n).filter(lambda w: sum(w) > 1e-3)


def measure(space, raw):
    return DiscreteMeasure(space, np.asarray(raw), normalize=True)


# construction


def test_space_rejects_asymmetric_matrix():
    with pytest.raises(DomainError, match="symmetric"):
        FiniteMetricSpace(("a", "b"), [[0.0, 1.0], [2.0, 0.0]])


def test_space_rejects_triangle_violation():
    d = [[0, 1, 5], [1, 0, 1], [5, 1, 0]]
    with pytest.raises(DomainError, match="triangle"):
        FiniteMetricSpace(("a", "b", "c"), d)


@pytest.mark.parametrize(
    "dist, msg",
    [
        ([[0.0, 0.0], [0.0, 0.0]], "positive distance"),
        ([[1.0, 1.0], [1.0, 0.0]], "zero diagonal"),
        ([[0.0, -1.0], [-1.0, 0.0]], "non-negative"),
        ([[0.0, 1.0]], "shape"),
    ],
)
def test_space_rejects_bad_matrices(dist, msg):
    with pytest.raises(DomainError, match=msg):
        FiniteMetricSpace(("a", "b"), dist)


def test_space_rejects_duplicate_labels():
    with pytest.raises(DomainError, match="unique"):
        FiniteMetricSpace(("a", "a"), [[0.0, 1.0], [1.0, 0.0]])


def test_index_accepts_labels_and_ints(abc):
    assert abc.index("c") == 2
    assert abc.index(1) == 1
    with pytest.raises(DomainError):
        abc.index(3)
    with pytest.raises(DomainError):
        abc.index("z")


def test_measure_rejects_bad_mass(abc):
    with pytest.raises(DomainError, match="not 1"):
        DiscreteMeasure(abc, [0.5, 0.5, 0.5])
    with pytest.raises(DomainError):
        DiscreteMeasure(abc, [1.5, -0.5, 0.0])
    assert DiscreteMeasure(abc, [2, 1, 1], normalize=True).w.tolist() == [0.5, 0.25, 0.25]


def test_measure_weights_are_frozen(abc_uniform):
    with pytest.raises(ValueError):
        abc_uniform.w[0] = 1.0


# balls and spheres


def test_ball_three_points(abc):
    assert ball(abc, "a", 1.5) == PointSet.of([0, 1])
    assert ball(abc, "a", 0) == PointSet.of([])
    assert ball(abc, "a", 1.0) == PointSet.of([0])
    assert closed_ball(abc, "a", 1.0) == PointSet.of([0, 1])


def test_ball_on_reference_matches_scan(reference):
    sp = reference.space
    expected = {i for i in range(sp.n) if sp.dist[0, i] < 0.75}
    assert ball(sp, "p0", 0.75).members == expected
    assert expected == {0, 1, 2, 3, 4}


def test_boundary_mass_three_points(abc, abc_uniform):
    assert boundary_mass(abc, "a", 1, abc_uniform) == pytest.approx(1 / 3)
    assert boundary_mass(abc, "a", 0.5, abc_uniform) == 0.0


def test_boundary_mass_vanishes_between_realized_distances(reference):
    sp, mu = reference.space, reference.p_inf
    for c in range(sp.n):
        ds = np.unique(sp.dist[c])
        for lo, hi in zip(ds[:-1], ds[1:]):
            assert boundary_mass(sp, c, 0.5 * (lo + hi), mu) == 0.0


@given(st.integers(0, 5), st.floats(0, 2, allow_nan=False))
def test_boundary_mass_in_unit_interval(center, r):
    from skorohod_coupling.instance import REFERENCE_WEIGHTS, reference_space

    sp = reference_space()
    mu = DiscreteMeasure(sp, REFERENCE_WEIGHTS)
    m = boundary_mass(sp, center, r, mu)
    assert 0.0 <= m <= 1.0
    if not np.any(sp.dist[center] == r):
        assert m == 0.0


# diameter


def test_diameter_examples(abc):
    assert diameter(abc, PointSet.of([1])) == 0.0
    assert diameter(abc, PointSet.of([])) == 0.0
    assert diameter(abc, PointSet.of([0, 2])) == 2.0


@given(st.sets(st.integers(0, 5)), st.sets(st.integers(0, 5)))
def test_diameter_monotone_under_inclusion(a, b):
    from skorohod_coupling.instance import reference_space

    sp = reference_space()
    small, big = PointSet.of(a), PointSet.of(a | b)
    assert diameter(sp, small) <= diameter(sp, big)


# total variation


def test_total_variation_examples(abc):
    mu = DiscreteMeasure(abc, [0.5, 0.5, 0.0])
    nu = DiscreteMeasure(abc, [0.25, 0.5, 0.25])
    assert total_variation(mu, mu) == 0.0
    assert total_variation(DiscreteMeasure.point_mass(abc, "a"), DiscreteMeasure.point_mass(abc, "b")) == 1.0
    assert total_variation(mu, nu) == pytest.approx(0.25, abs=1e-15)


def test_total_variation_space_mismatch(abc):
    other = FiniteMetricSpace(("x", "y", "z"), abc.dist)
    with pytest.raises(DomainError):
        total_variation(DiscreteMeasure.uniform(abc), DiscreteMeasure.uniform(other))


@settings(max_examples=200)
@given(weights(4), weights(4), weights(4))
def test_total_variation_is_a_metric(a, b, c):
    sp = FiniteMetricSpace.from_points([0.0, 1.0, 2.5, 4.0])
    mu, nu, rho = measure(sp, a), measure(sp, b), measure(sp, c)
    assert total_variation(mu, nu) == total_variation(nu, mu)
    assert 0.0 <= total_variation(mu, nu) <= 1.0
    assert total_variation(mu, mu) <= 1e-12
    assert total_variation(mu, rho) <= total_variation(mu, nu) + total_variation(nu, rho) + 1e-12
    if total_variation(mu, nu) <= 1e-12:
        assert np.allclose(mu.w, nu.w, atol=1e-12)


# conditioning


def test_conditional_examples(abc, abc_uniform):
    assert np.array_equal(conditional(abc_uniform, abc.all_points()).w, abc_uniform.w)
    assert conditional(abc_uniform, PointSet.of([0, 1])).w.tolist() == [0.5, 0.5, 0.0]
    with pytest.raises(NullConditioningError):
        conditional(DiscreteMeasure.point_mass(abc, "c"), PointSet.of([0, 1]))


def test_conditional_on_reference_cells(reference_plan):
    plan = reference_plan
    for a in plan.alphas:
        lev = plan.ell[a]
        pa = plan.law(a)
        for p in plan.tree.support_index(lev):
            cell = plan.tree.cell(lev, p)
            got = conditional(pa, cell).w
            restricted = np.array([pa.w[i] if i in cell else 0.0 for i in range(plan.space.n)])
            np.testing.assert_allclose(got, restricted / restricted.sum(), atol=1e-15)


@given(weights(5), st.sets(st.integers(0, 4), min_size=1))
def test_conditional_properties(raw, members):
    sp = FiniteMetricSpace.from_points([0.0, 0.3, 1.0, 1.7, 3.0])
    mu = measure(sp, raw)
    cell = PointSet.of(members)
    if mu.mass(cell) <= 0:
        with pytest.raises(NullConditioningError):
            conditional(mu, cell)
        return
    c = conditional(mu, cell)
    assert abs(c.w.sum() - 1.0) <= 1e-12
    for i in range(sp.n):
        if i not in cell or mu.w[i] == 0:
            assert c.w[i] == 0.0


def test_mix_is_convex_combination(abc):
    a = DiscreteMeasure.point_mass(abc, "a")
    c = DiscreteMeasure.point_mass(abc, "c")
    assert a.mix(c, 0.25).w.tolist() == [0.75, 0.0, 0.25]


def test_from_points_is_euclidean():
    sp = FiniteMetricSpace.from_points([(0, 0), (3, 4)])
    assert sp.dist[0, 1] == 5.0
    assert sp.labels == ("p0", "p1")


def test_triangle_check_against_loops():
    rng = np.random.default_rng(3)
    for _ in range(20):
        pts = rng.random((5, 2))
        d = np.sqrt(((pts[:, None] - pts[None]) ** 2).sum(-1))
        d[0, 1] = d[1, 0] = d[0, 1] * rng.choice([0.5, 1.0, 3.0])
        violated = any(
            d[i, k] > d[i, j] + d[j, k] + 1e-12 for i, j, k in itertools.product(range(5), repeat=3)
        )
        if violated:
            with pytest.raises(DomainError):
                FiniteMetricSpace(tuple("abcde"), d)
        else:
            FiniteMetricSpace(tuple("abcde"), d)
