import numpy as np
import pytest

from skorohod_coupling.coupling import build_plan
from skorohod_coupling.instance import parse_metric_instance, reference_instance_dict
from skorohod_coupling.metric import DiscreteMeasure, FiniteMetricSpace
from skorohod_coupling.partition import build_partition_tree


def line_space():
    """Three points a, b, c with d(a,b) = d(b,c) = 1 and d(a,c) = 2."""
    d = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.0], [2.0, 1.0, 0.0]])
    return FiniteMetricSpace(("a", "b", "c"), d)


@pytest.fixture
def abc():
    return line_space()


@pytest.fixture
def abc_uniform(abc):
    return DiscreteMeasure.uniform(abc)


@pytest.fixture(scope="session")
def reference():
    return parse_metric_instance(reference_instance_dict())


@pytest.fixture(scope="session")
def reference_tree(reference):
    return build_partition_tree(reference.space, reference.p_inf, reference.delta, reference.eps, reference.k_max)


@pytest.fixture(scope="session")
def reference_plan(reference, reference_tree):
    return build_plan(reference.p_inf, reference.family, reference_tree, reference.betas)


@pytest.fixture(scope="session")
def copies_plan():
    inst = parse_metric_instance(reference_instance_dict(copies=3))
    tree = build_partition_tree(inst.space, inst.p_inf, inst.delta, inst.eps, inst.k_max)
    return build_plan(inst.p_inf, inst.family, tree, inst.betas)
