"""Type-based planning and verification in stochastic Bayesian games.

Subpackages and modules:

``game``        game model, histories and episode runs
``strategies``  type strategies with explicit finite memory
``beliefs``     product, sum and correlated posteriors; overlap diagnostics
``planner``     finite-horizon expected-payoff planning and the HBA controller
``verifier``    induced Markov chains, reachability, criticality, bisimulation
``kernels``     compiled numeric kernels with a pure-Python fallback
"""
from .beliefs import BeliefState
from .game import EpisodeLog, GameSpec, History, TerminalStateError, run_episode
from .planner import HBAController, PlanConfig, hba_policy
from .strategies import EpsilonGreedyLearner, EpsilonSchedule, SequenceType, TableType, TypeStrategy

__version__ = "0.1.0"

__all__ = [
    "BeliefState", "EpisodeLog", "EpsilonGreedyLearner", "EpsilonSchedule", "GameSpec", "HBAController",
    "History", "PlanConfig", "SequenceType", "TableType", "TerminalStateError", "TypeStrategy",
    "hba_policy", "run_episode",
]
