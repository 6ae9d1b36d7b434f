"""Almost-sure couplings of weakly convergent families of discrete laws."""

from .coupling import (
    BetaSchedule,
    CoupledSample,
    CouplingPlan,
    build_h_measure,
    build_plan,
    check_inversion,
    compute_ell,
    enumerate_nu,
    kernel,
    ratio_table,
    sample_coupled,
)
from .metric import DiscreteMeasure, FiniteMetricSpace, PointSet, total_variation
from .partition import build_partition_tree, locate_cell
from .quantile import StepCdf, generalized_inverse, quantile_couple
from .verification import VerificationReport, verify

__version__ = "0.1.0"
