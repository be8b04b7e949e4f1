"""Simulation laboratory for functional UCB treatment allocation with covariates."""

from ._core import backend_name
from .functionals import (
    BETA_DEFAULT,
    EmpiricalCdf,
    FunctionalSpec,
    eval_functional,
    mean_functional,
    quantile_functional,
    sup_distance,
    trimmed_mean_functional,
    ucb_index,
)
from .partition import CubicPartition, choose_P

__version__ = "0.1.0"
