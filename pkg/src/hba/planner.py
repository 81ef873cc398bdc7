"""HBA planning: expected payoffs by bounded recursion and uniform argmax play.

The expected payoff of action ``a_i`` at a hypothetical history mixes the
other players' actions with the current posterior (fixed for the whole
planning call) times each user type's prediction at the hypothetical
history. Joint-action values then recurse through the transition kernel.
The recursion stops at depth ``horizon`` with value 0. Type memories
advance along hypothetical histories exactly as they would along real ones.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beliefs import BeliefState, OverlapStats
from .game import GameSpec, draw
from .strategies import MemoryTracker


@dataclass(frozen=True)
class PlanConfig:
    gamma: float = 1.0
    horizon: int = 2
    tie_tol: float = 1e-12

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("discount must lie in [0, 1]")
        if self.horizon < 1:
            raise ValueError("horizon must be a positive integer")


@dataclass
class PlanResult:
    values: np.ndarray
    maximisers: tuple
    distribution: np.ndarray = field(repr=False)


def _hashable(mems):
    try:
        hash(mems)
    except TypeError:
        return False
    return True


class Planner:
    """One planning call: fixed beliefs over the given type spaces."""

    def __init__(self, spec: GameSpec, spaces, joint_posterior, config: PlanConfig):
        self.spec = spec
        self.spaces = spaces
        self.posterior = np.array(joint_posterior, dtype=float)
        self.config = config
        self.strategies = []
        seen = set()
        for space in spaces:
            for s in space:
                if s.key not in seen:
                    seen.add(s.key)
                    self.strategies.append(s)
        self._index = {s.key: k for k, s in enumerate(self.strategies)}
        self._memo = {}
        n = spec.n_states
        self._entry = np.array([1.0 if s in spec.terminals else 0.0 for s in range(n)])
        self._n_i = spec.action_counts[spec.controlled]

    # memories travel as tuples aligned with self.strategies
    def pack(self, memories):
        return tuple(memories[s.key] for s in self.strategies)

    def _advance(self, mems, s, a, s2):
        return tuple(strat.advance(m, s, a, s2) for strat, m in zip(self.strategies, mems))

    def _mixture(self, state, mems):
        w = self.posterior
        for space in self.spaces:
            d = np.array([s.distribution(mems[self._index[s.key]], state) for s in space])
            # contract the leading type axis of w with d's type axis
            w = (w.reshape(w.shape[0], -1).T @ d).reshape(*w.shape[1:], d.shape[1])
        return w

    def expected_payoffs(self, state, mems, depth=0) -> np.ndarray:
        """Expected payoff of every action of the controlled player at ``state``."""
        spec = self.spec
        if state in spec.terminals or depth >= self.config.horizon:
            return np.zeros(self._n_i)
        memo_key = (state, mems, depth) if _hashable(mems) else None
        if memo_key is not None and memo_key in self._memo:
            return self._memo[memo_key]
        w = self._mixture(state, mems)
        if depth + 1 >= self.config.horizon or self.config.gamma == 0.0:
            out = self._last_layer(state, w)
            if memo_key is not None:
                self._memo[memo_key] = out
            return out
        out = np.zeros(self._n_i)
        for others in zip(*np.nonzero(w)):
            weight = w[others]
            for a_i in range(self._n_i):
                joint = self._joint(a_i, others)
                out[a_i] += weight * self.action_value(state, joint, mems, depth)
        if memo_key is not None:
            self._memo[memo_key] = out
        return out

    def _last_layer(self, state, w):
        # no continuation: E[a_i] = sum_{a_-i} w(a_-i) * P(enter a terminal | s, a)
        spec = self.spec
        entry = (spec.transition[state] @ self._entry).reshape(spec.action_counts)
        entry = np.moveaxis(entry, spec.controlled, 0)
        return entry.reshape(self._n_i, -1) @ w.ravel()

    def _joint(self, a_i, others):
        joint = [0] * self.spec.n_players
        joint[self.spec.controlled] = a_i
        for j, a in zip(self.spec.others, others):
            joint[j] = int(a)
        return tuple(joint)

    def action_value(self, state, joint, mems, depth=0) -> float:
        """Value of a joint action: entry reward plus discounted best continuation."""
        spec = self.spec
        row = spec.transition[state, spec.joint_index(joint)]
        value = float(row @ self._entry)
        if depth + 1 >= self.config.horizon or self.config.gamma == 0.0:
            return value
        for s2 in np.nonzero(row)[0]:
            if s2 in spec.terminals:
                continue
            nxt = self._advance(mems, state, joint, int(s2))
            cont = self.expected_payoffs(int(s2), nxt, depth + 1).max()
            value += row[s2] * self.config.gamma * cont
        return value

    def plan(self, state, memories) -> PlanResult:
        values = self.expected_payoffs(state, self.pack(memories), 0)
        return plan_result(values, self.config.tie_tol)


def plan_result(values, tie_tol=1e-12) -> PlanResult:
    values = np.asarray(values, dtype=float)
    best = values.max()
    maximisers = tuple(int(a) for a in np.nonzero(values >= best - tie_tol)[0])
    dist = np.zeros(len(values))
    dist[list(maximisers)] = 1.0 / len(maximisers)
    return PlanResult(values, maximisers, dist)


def expected_payoff(spec, spaces, joint_posterior, memories, state, action, config: PlanConfig, depth=0) -> float:
    """Expected payoff of one action; ``memories`` maps strategy keys to memories."""
    planner = Planner(spec, spaces, joint_posterior, config)
    return float(planner.expected_payoffs(state, planner.pack(memories), depth)[action])


def action_value(spec, spaces, joint_posterior, memories, state, joint_action, config: PlanConfig, depth=0) -> float:
    planner = Planner(spec, spaces, joint_posterior, config)
    return planner.action_value(state, tuple(joint_action), planner.pack(memories), depth)


def select_action(plan: PlanResult, rng: np.random.Generator):
    """Sample uniformly from the maximiser set; returns ``(action, distribution)``."""
    return plan.maximisers[draw(rng, np.ones(len(plan.maximisers)))], plan.distribution


class HBAController:
    """HBA for the controlled player, updating its posterior after every step.

    With ``record=True`` each observed step appends the per-player
    posteriors, the degenerate flag, and the user types' probabilities for
    the observed and all actions to ``trace`` (enough for offline metrics).
    """

    def __init__(self, spec: GameSpec, kind="sum", config: PlanConfig | None = None, record=False):
        self.spec = spec
        self.kind = kind
        self.config = config or PlanConfig()
        self.record = record
        self.reset()

    def reset(self):
        spec = self.spec
        self.beliefs = BeliefState(self.kind, spec.priors, spec.joint_prior)
        self.tracker = MemoryTracker([s for space in spec.user for s in space])
        self.stats = OverlapStats(len(spec.others))
        self.trace = []
        self.last_plan = None

    def plan(self, state) -> PlanResult:
        planner = Planner(self.spec, self.spec.user, self.beliefs.joint(), self.config)
        return planner.plan(state, self.tracker.memory)

    def act(self, history, sampled_types, rng):
        self.last_plan = self.plan(history.state)
        a, dist = select_action(self.last_plan, rng)
        return a, dist, dict(enumerate(self.last_plan.values))

    def observe(self, state, joint_action, next_state):
        spec = self.spec
        dists = [np.array([self.tracker.distribution(s, state) for s in space]) for space in spec.user]
        observed = [d[:, joint_action[j]] for d, j in zip(dists, spec.others)]
        self.beliefs.update(observed)
        self.stats.update(observed, dists)
        self.tracker.advance(state, joint_action, next_state)
        if self.record:
            self.trace.append({
                "t": self.beliefs.t,
                "posteriors": [self.beliefs.posterior(pos).copy() for pos in range(len(spec.others))],
                "joint": self.beliefs.joint().copy(),
                "degenerate": self.beliefs.degenerate,
                "observed": observed,
                "dists": dists,
            })


class OracleController:
    """Controller of the ideal process: plans with the true current types.

    The posterior is a point mass on the sampled latent profile and the
    believed type spaces are the latent ones.
    """

    def __init__(self, spec: GameSpec, config: PlanConfig | None = None):
        self.spec = spec
        self.config = config or PlanConfig()
        self.reset()

    def reset(self):
        self.tracker = MemoryTracker([s for space in self.spec.latent for s in space])

    def plan(self, state, profile) -> PlanResult:
        spec = self.spec
        post = np.zeros(tuple(len(space) for space in spec.latent))
        post[tuple(profile)] = 1.0
        planner = Planner(spec, spec.latent, post, self.config)
        return planner.plan(state, self.tracker.memory)

    def act(self, history, sampled_types, rng):
        result = self.plan(history.state, sampled_types)
        a, dist = select_action(result, rng)
        return a, dist, dict(enumerate(result.values))

    def observe(self, state, joint_action, next_state):
        self.tracker.advance(state, joint_action, next_state)


def hba_policy(spec: GameSpec, kind="sum", config: PlanConfig | None = None, record=False) -> HBAController:
    """HBA controller for ``spec`` using the given posterior kind."""
    for pos, space in enumerate(spec.user):
        if not space:
            raise ValueError(f"user type space of player {spec.others[pos]} is empty")
    return HBAController(spec, kind, config, record=record)


class UniformController:
    """Plays uniformly at random; a baseline and a neutral driver for belief runs."""

    def __init__(self, spec: GameSpec):
        self.n = spec.action_counts[spec.controlled]

    def reset(self):
        pass

    def act(self, history, sampled_types, rng):
        dist = np.full(self.n, 1.0 / self.n)
        return draw(rng, dist), dist, None

    def observe(self, state, joint_action, next_state):
        pass
