"""The worked examples as ready-made games.

Each builder returns ``(spec, config)`` where ``config`` is the planning
configuration the example is meant to be run with.
"""
from __future__ import annotations

import numpy as np

from .game import GameSpec
from .planner import PlanConfig
from .strategies import EpsilonGreedyLearner, EpsilonSchedule, SequenceType, TableType

NAMES = ("ex1", "ex2", "ex3", "ex4", "ex5", "ex6", "ex6-critical")


def _self_loop(n_joint):
    return np.ones((1, n_joint, 1))


def ex1(epsilon=0.2):
    """Two actions; the other player is an epsilon-greedy learner preferring A."""
    eg = EpsilonGreedyLearner("eps-greedy", 1, payoffs=[[1.0, 0.0]], epsilon=EpsilonSchedule(epsilon))
    spec = GameSpec(
        states=["s"], initial=0, terminals=(), actions=[["A", "B"], ["A", "B"]],
        transition=_self_loop(4), latent=[[eg]], delta_profiles=[(0,)], delta_probs=[1.0],
        user=[[eg]], name="ex1",
    )
    return spec, PlanConfig(horizon=1)


def ex2():
    """Mixed distribution over two deterministic types with disjoint actions."""
    a = TableType("A", 1, [1.0, 0.0])
    b = TableType("B", 1, [0.0, 1.0])
    spec = GameSpec(
        states=["s"], initial=0, terminals=(), actions=[["A", "B"], ["A", "B"]],
        transition=_self_loop(4), latent=[[a, b]], delta_profiles=[(0,), (1,)], delta_probs=[0.5, 0.5],
        user=[[a, b]], name="ex2",
    )
    return spec, PlanConfig(horizon=1)


def ex3():
    """Pure distribution on an always-A type; the alternative type is uniform over A, B."""
    a = TableType("A", 1, [1.0, 0.0])
    ab = TableType("AB", 1, [0.5, 0.5])
    spec = GameSpec(
        states=["s"], initial=0, terminals=(), actions=[["A", "B"], ["A", "B"]],
        transition=_self_loop(4), latent=[[a, ab]], delta_profiles=[(0,)], delta_probs=[1.0],
        user=[[a, ab]], name="ex3",
    )
    return spec, PlanConfig(horizon=1)


def ex4():
    """Three players; the two others never share a type."""
    spaces = [[TableType("A", j, [1.0, 0.0]), TableType("B", j, [0.0, 1.0])] for j in (1, 2)]
    spec = GameSpec(
        states=["s"], initial=0, terminals=(), actions=[["A", "B"]] * 3,
        transition=_self_loop(8), latent=spaces, delta_profiles=[(0, 1), (1, 0)], delta_probs=[0.5, 0.5],
        user=spaces, name="ex4",
    )
    return spec, PlanConfig(horizon=1)


def _matching_kernel():
    # states: 0 = s0, 1 = done; joint (a_i, a_j) with L=0, R=1
    t = np.zeros((2, 4, 2))
    for a_i in range(2):
        for a_j in range(2):
            t[0, 2 * a_i + a_j, 1 if a_i == a_j else 0] = 1.0
    t[1, :, 1] = 1.0
    return t


def ex5():
    """Alternating L,R opponent; user types always-R and L,R,R,... (each right about half the time)."""
    lr = SequenceType("LR", 1, 2, [0, 1])
    r = SequenceType("R", 1, 2, [1])
    lrr = SequenceType("LRR", 1, 2, [0, 1, 1])
    spec = GameSpec(
        states=["s"], initial=0, terminals=(), actions=[["L", "R"], ["L", "R"]],
        transition=_self_loop(4), latent=[[lr]], delta_profiles=[(0,)], delta_probs=[1.0],
        user=[[r, lrr]], name="ex5",
    )
    return spec, PlanConfig(horizon=1)


def ex6(critical=False):
    """Matching task against the alternating opponent.

    The uncritical variant uses user types {R, LRR}; the critical one uses
    the single type R,L,R,... which is always out of phase. A discount below
    one makes HBA prefer the action it believes terminates immediately.
    """
    lr = SequenceType("LR", 1, 2, [0, 1])
    if critical:
        user = [SequenceType("RL", 1, 2, [1, 0])]
    else:
        user = [SequenceType("R", 1, 2, [1]), SequenceType("LRR", 1, 2, [0, 1, 1])]
    spec = GameSpec(
        states=["s0", "done"], initial=0, terminals=(1,), actions=[["L", "R"], ["L", "R"]],
        transition=_matching_kernel(), latent=[[lr]], delta_profiles=[(0,)], delta_probs=[1.0],
        user=[user], name="ex6-critical" if critical else "ex6",
    )
    return spec, PlanConfig(gamma=0.9, horizon=3)


def build(name):
    if name == "ex6-critical":
        return ex6(critical=True)
    builders = {"ex1": ex1, "ex2": ex2, "ex3": ex3, "ex4": ex4, "ex5": ex5, "ex6": ex6}
    if name not in builders:
        raise KeyError(f"unknown example {name!r}; choose from {', '.join(NAMES)}")
    return builders[name]()


def coin_chains():
    """A bisimilar pair: a fair-coin loop and a copy of it split over two nodes."""
    from .verifier import chain_from_edges

    coin = chain_from_edges({"c0": {"c0": 0.5, "done": 0.5}}, "c0", ["done"], tag="coin")
    copy = chain_from_edges(
        {"d0": {"d0": 0.25, "d1": 0.25, "done": 0.5}, "d1": {"d0": 0.25, "d1": 0.25, "done": 0.5}},
        "d0", ["done"], tag="copy",
    )
    return coin, copy


def step_chains():
    """A non-bisimilar pair: termination after exactly one step vs. exactly two."""
    from .verifier import chain_from_edges

    one = chain_from_edges({"a0": {"done": 1.0}}, "a0", ["done"], tag="one-step")
    two = chain_from_edges({"b0": {"b1": 1.0}, "b1": {"done": 1.0}}, "b0", ["done"], tag="two-step")
    return one, two
