"""Excited (cookie) random walks on the integers.

Closed-form speed bounds for three cookies per site, the backward branching
process kernel, truncated stationary distributions and Monte Carlo estimators.
"""

from .bounds import (
    AbcCoefficients,
    GapSearchResult,
    SpeedBounds,
    abc_coefficients,
    f_coefficients,
    maximize_gap,
    pi0_bracket,
    speed_interval,
    symmetric_interval,
)
from .branching import (
    ChainPath,
    TransitionKernel,
    mean_next,
    pgf_next,
    series_mean,
    simulate_chain,
    symmetric_closed_form,
    transition_prob,
)
from .environment import (
    Classification,
    CookieEnvironment,
    SpeedSign,
    Transience,
    classify,
    delta,
    mirror,
)
from .exceptions import DomainError, EmptyRegion, ERWError, HittingTimeout, NonConvergence
from .stationary import StationarySolution, check_abc, check_genabc, solve_stationary
from .walker import (
    MonteCarloEstimate,
    WalkResult,
    estimate_speed,
    hitting_time,
    simulate_walk,
    step_probability,
)

__version__ = "0.1.0"
