"""Workload distribution on a (d+1)-dimensional lattice with reinforcement-learned
link preferences.

A unit workload Q enters at the centre of the top hyper-plane and is pushed
level by level toward the bottom.  Each site routes surplus units to its
2d+1 downstream neighbours with logit (softmax) probabilities over learned
link weights, which are reinforced per transferred unit and globally decayed
once per iteration.
"""

from .lattice import LatticeGeometry, LatticeState, make_state
from .engine import (
    SimConfig,
    IterationOutcome,
    RunSummary,
    Variant,
    UpdateMode,
    ConfigError,
    FailureAtBottom,
    choice_probabilities,
    distribute_site,
    run_iteration,
    run,
)
from . import measures
from . import runner

__all__ = [
    "LatticeGeometry",
    "LatticeState",
    "make_state",
    "SimConfig",
    "IterationOutcome",
    "RunSummary",
    "Variant",
    "UpdateMode",
    "ConfigError",
    "FailureAtBottom",
    "choice_probabilities",
    "distribute_site",
    "run_iteration",
    "run",
    "measures",
    "runner",
]

__version__ = "0.1.0"
