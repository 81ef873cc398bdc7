"""Type strategies: policies of the other players as functions of history.

A strategy never randomises internally. ``distribution`` returns the full
action distribution for the current step, computed from a finite memory
that is advanced on every observed transition. This makes a strategy a
deterministic function of the history prefix, which is what the posterior,
the planner and the verifier all rely on.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class TypeStrategy:
    """Base class. Subclasses override ``distribution`` and, if stateful, ``advance``."""

    def __init__(self, name: str, player: int, n_actions: int):
        self.name = name
        self.player = player
        self.n_actions = n_actions

    @property
    def key(self):
        return (self.player, self.name)

    def initial_memory(self):
        return None

    def advance(self, memory, state, joint_action, next_state):
        return memory

    def distribution(self, memory, state) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r}, player={self.player})"


class TableType(TypeStrategy):
    """Memoryless type: one distribution per state, or one for all states."""

    def __init__(self, name, player, probs, by_state=None):
        probs = np.asarray(probs, dtype=float)
        super().__init__(name, player, probs.shape[-1])
        self.probs = probs
        self.by_state = by_state is not None or probs.ndim == 2
        _check_rows(name, probs)

    def distribution(self, memory, state):
        return self.probs[state] if self.by_state else self.probs


class SequenceType(TypeStrategy):
    """Plays a fixed action sequence.

    ``cyclic=True`` repeats it forever (L,R,L,R,...); otherwise the last
    action is held once the sequence runs out. Memory is the phase index.
    """

    def __init__(self, name, player, n_actions, actions, cyclic=True):
        super().__init__(name, player, n_actions)
        self.actions = tuple(int(a) for a in actions)
        if not self.actions:
            raise ValueError(f"type {name!r}: empty action sequence")
        if not all(0 <= a < n_actions for a in self.actions):
            raise ValueError(f"type {name!r}: action index out of range")
        self.cyclic = cyclic
        self._rows = np.eye(n_actions)

    def initial_memory(self):
        return 0

    def advance(self, memory, state, joint_action, next_state):
        if self.cyclic:
            return (memory + 1) % len(self.actions)
        return min(memory + 1, len(self.actions) - 1)

    def distribution(self, memory, state):
        return self._rows[self.actions[memory]]


@dataclass(frozen=True)
class EpsilonSchedule:
    """Constant ``start`` before ``t_begin``, linear to zero at ``t_end``, zero after."""

    start: float
    t_begin: int | None = None
    t_end: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.start <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if (self.t_begin is None) != (self.t_end is None):
            raise ValueError("anneal start and end must be given together")
        if self.t_begin is not None and self.t_end < self.t_begin:
            raise ValueError("anneal end precedes anneal start")

    def __call__(self, t: int) -> float:
        if self.t_begin is None or t < self.t_begin:
            return self.start
        if t >= self.t_end:
            return 0.0
        return self.start * (self.t_end - t) / (self.t_end - self.t_begin)


class EpsilonGreedyLearner(TypeStrategy):
    """Tabular value learner with externally randomised epsilon-greedy play.

    The learner observes every transition of the game and updates
    ``Q[s, a_j]`` for the action its player actually took, using its own
    private payoff table. The exposed distribution puts ``1 - eps + eps/|A|``
    on the greedy action (lowest index on ties) and ``eps/|A|`` elsewhere.
    ``initial_value`` is a scalar or a full ``(states, actions)`` table.
    Memory is ``(t, Q)``.
    """

    def __init__(self, name, player, payoffs, epsilon: EpsilonSchedule, learning_rate=0.5,
                 discount=0.0, initial_value=0.0):
        payoffs = np.asarray(payoffs, dtype=float)
        super().__init__(name, player, payoffs.shape[1])
        self.payoffs = payoffs
        self.epsilon = epsilon
        self.learning_rate = learning_rate
        self.discount = discount
        self.initial_value = np.broadcast_to(np.asarray(initial_value, dtype=float), payoffs.shape).copy()

    def initial_memory(self):
        return (0, self.initial_value.copy())

    def advance(self, memory, state, joint_action, next_state):
        t, q = memory
        a = joint_action[self.player]
        target = self.payoffs[state, a]
        if self.discount:
            target += self.discount * q[next_state].max()
        q = q.copy()
        q[state, a] += self.learning_rate * (target - q[state, a])
        return (t + 1, q)

    def greedy(self, memory, state) -> int:
        return int(np.argmax(memory[1][state]))

    def distribution(self, memory, state):
        t, _ = memory
        eps = self.epsilon(t)
        out = np.full(self.n_actions, eps / self.n_actions)
        out[self.greedy(memory, state)] += 1.0 - eps
        return out


def _check_rows(name, probs, tol=1e-12):
    if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=-1) - 1.0) > tol):
        raise ValueError(f"type {name!r}: action distribution must be nonnegative and sum to 1")


class MemoryTracker:
    """Memories of a set of strategies advanced along one concrete history."""

    def __init__(self, strategies):
        self.strategies = {}
        for s in strategies:
            self.strategies.setdefault(s.key, s)
        self.memory = {k: s.initial_memory() for k, s in self.strategies.items()}

    def distribution(self, strategy, state):
        return strategy.distribution(self.memory[strategy.key], state)

    def advance(self, state, joint_action, next_state):
        for k, s in self.strategies.items():
            self.memory[k] = s.advance(self.memory[k], state, joint_action, next_state)

    def snapshot(self):
        return dict(self.memory)


def strategy_distribution(strategy: TypeStrategy, history) -> np.ndarray:
    """Action distribution of ``strategy`` after ``history``, replayed from the start."""
    memory = strategy.initial_memory()
    for tau in range(history.t):
        memory = strategy.advance(memory, history.states[tau], history.actions[tau], history.states[tau + 1])
    return strategy.distribution(memory, history.state)
