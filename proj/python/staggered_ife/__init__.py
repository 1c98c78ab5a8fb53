"""Group-time average treatment effects under interactive fixed effects.

Thin python surface over the C++ core: load panels, estimate ATT(g,t) cells,
aggregate them, and run the benchmark Monte Carlo designs.
"""

from ._staggered_ife import (
    EstimationError,
    Panel,
    __version__,
    aggregate,
    bootstrap_se,
    estimate,
    feasible_cells,
    run_monte_carlo,
    simulate_panel,
)

__all__ = [
    "EstimationError",
    "Panel",
    "__version__",
    "aggregate",
    "bootstrap_se",
    "estimate",
    "feasible_cells",
    "run_monte_carlo",
    "simulate_panel",
]
