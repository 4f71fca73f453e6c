"""Exact verification laboratory for martingale representation formulas
in a Poisson filtration progressively enlarged by a random time.

Layers:
  path_engine      exact event grids, piecewise processes, integrals
  random_time      random-time constructions and scenario assembly
  solvers          payoff kernels, closed-form tables and MC oracles
  models           the three survival models and their decompositions
  representations  formula assembly and pathwise residuals
  mc_verify        Monte Carlo martingale tests
  config / cli     YAML batch runs and CSV reports
"""

from .path_engine import (
    EventGrid,
    JumpPath,
    PwProcess,
    bracket,
    integrate_arrays,
    integrate_predictable,
    pw_constant,
    pw_from_increments,
    sample_poisson_path,
)
from .random_time import CdfSpec, RandomTimeSample, Scenario, cox_time, independent_time, indicator
from .solvers import (
    GAMMA,
    StateFunction,
    TimeFunction,
    g_kernel,
    g_mc_oracle,
    htilde,
    htilde_mc_oracle,
    htilde_table,
)
from .models import ModelSpec, build_bundle, make_scenario
from .representations import (
    FORMULAS,
    ResidualReport,
    applicable,
    assemble,
    closed_form_Y,
    payoff_bundle,
    residual,
    residual_batch,
)
from .mc_verify import MCReport, martingale_panel, mean_zero_test, pseudo_stopping_check

__version__ = "1.0.0"
