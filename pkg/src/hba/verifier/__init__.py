"""Termination verification: process chains, reachability, criticality, bisimulation."""
from .build import QuotientError, build_chain, default_quotient
from .chain import ChainFormatError, ProcessChain, chain_from_edges
from .checks import (
    BisimResult,
    CriticalReport,
    Partition,
    ReachResult,
    bisimulation_partition,
    bottom_components,
    bounded_reach_table,
    check_bounded_reach,
    check_theorem_premises,
    check_unbounded_reach,
    detect_critical,
    reach_bounds,
    reach_probabilities,
    success_rate,
    verify_property4,
)

__all__ = [
    "BisimResult", "ChainFormatError", "CriticalReport", "Partition", "ProcessChain", "QuotientError",
    "ReachResult", "bisimulation_partition", "bottom_components", "bounded_reach_table", "build_chain",
    "chain_from_edges", "check_bounded_reach", "check_theorem_premises", "check_unbounded_reach",
    "default_quotient", "detect_critical", "reach_bounds", "reach_probabilities", "success_rate",
    "verify_property4",
]
