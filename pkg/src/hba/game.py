"""Stochastic Bayesian games and run semantics.

Player ``controlled`` is driven by a controller (normally HBA); every other
player ``j`` acts through a type drawn each step from the joint type
distribution. Joint actions are tuples over all players; the transition
kernel is stored densely as ``T[s, joint_index, s']``.

Payoffs follow a terminal-entry convention: the controlled player receives 1
on the transition that enters a terminal state and 0 otherwise, so with
discount 1 a value is a reach probability.
"""
from __future__ import annotations

import csv
import hashlib
import io
import itertools
from dataclasses import dataclass, field

import numpy as np

from .strategies import MemoryTracker, TypeStrategy

TOL = 1e-12


class TerminalStateError(RuntimeError):
    """Raised when asked to step out of a terminal state."""


@dataclass
class GameSpec:
    states: list[str]
    initial: int
    terminals: frozenset
    actions: list[list[str]]
    transition: np.ndarray
    latent: list[list[TypeStrategy]]
    delta_profiles: list[tuple]
    delta_probs: np.ndarray
    user: list[list[TypeStrategy]]
    priors: list[np.ndarray] | None = None
    joint_prior: np.ndarray | None = None
    controlled: int = 0
    name: str = "game"
    positive_priors: bool = False

    def __post_init__(self):
        self.terminals = frozenset(int(s) for s in self.terminals)
        self.transition = np.asarray(self.transition, dtype=float)
        self.delta_probs = np.asarray(self.delta_probs, dtype=float)
        self.delta_profiles = [tuple(int(k) for k in p) for p in self.delta_profiles]
        self.action_counts = tuple(len(a) for a in self.actions)
        self.n_players = len(self.actions)
        self.others = [j for j in range(self.n_players) if j != self.controlled]
        if self.priors is None:
            self.priors = [np.full(len(u), 1.0 / len(u)) if u else np.zeros(0) for u in self.user]
        self.priors = [np.asarray(p, dtype=float) for p in self.priors]
        if self.joint_prior is None:
            self.joint_prior = _outer(self.priors)
        self.joint_prior = np.asarray(self.joint_prior, dtype=float)
        self.joint_actions = list(itertools.product(*(range(k) for k in self.action_counts)))
        self.validate()

    @property
    def n_states(self):
        return len(self.states)

    def validate(self):
        n = self.n_states
        if not 0 <= self.initial < n:
            raise ValueError("initial state is not a state")
        if not all(0 <= s < n for s in self.terminals):
            raise ValueError("terminals must be states")
        if not 0 <= self.controlled < self.n_players:
            raise ValueError("controlled player out of range")
        expected = (n, int(np.prod(self.action_counts)), n)
        if self.transition.shape != expected:
            raise ValueError(f"transition has shape {self.transition.shape}, expected {expected}")
        if np.any(self.transition < 0):
            raise ValueError("negative transition probability")
        live = [s for s in range(n) if s not in self.terminals]
        sums = self.transition[live].sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > TOL):
            s, a = np.argwhere(np.abs(sums - 1.0) > TOL)[0]
            raise ValueError(
                f"transition row ({self.states[live[s]]}, {self.joint_actions[a]}) sums to {sums[s, a]!r}"
            )
        m = len(self.others)
        if len(self.latent) != m or len(self.user) != m or len(self.priors) != m:
            raise ValueError("need one latent type space, user type space and prior per other player")
        for pos, j in enumerate(self.others):
            if not self.user[pos]:
                raise ValueError(f"user type space of player {j} is empty")
            for s in itertools.chain(self.latent[pos], self.user[pos]):
                if s.player != j or s.n_actions != self.action_counts[j]:
                    raise ValueError(f"type {s.name!r} does not belong to player {j}")
            prior = self.priors[pos]
            if prior.shape != (len(self.user[pos]),) or np.any(prior < 0) or abs(prior.sum() - 1.0) > TOL:
                raise ValueError(f"prior of player {j} must be a distribution over its user types")
            if self.positive_priors and np.any(prior <= 0):
                raise ValueError(f"prior of player {j} must be strictly positive")
        if self.joint_prior.shape != tuple(len(u) for u in self.user):
            raise ValueError("joint prior must cover the product of user type spaces")
        if np.any(self.joint_prior < 0) or abs(self.joint_prior.sum() - 1.0) > TOL:
            raise ValueError("joint prior must be a distribution")
        if len(self.delta_profiles) != len(self.delta_probs) or not self.delta_profiles:
            raise ValueError("type distribution needs one probability per profile")
        for prof in self.delta_profiles:
            if len(prof) != m or any(not 0 <= k < len(self.latent[pos]) for pos, k in enumerate(prof)):
                raise ValueError(f"type profile {prof} is out of range")
        if np.any(self.delta_probs < 0) or abs(self.delta_probs.sum() - 1.0) > TOL:
            raise ValueError("type distribution must sum to 1")

    # -- lookups -----------------------------------------------------------

    def joint_index(self, joint_action) -> int:
        return int(np.ravel_multi_index(tuple(joint_action), self.action_counts))

    def row(self, state, joint_action) -> np.ndarray:
        return self.transition[state, self.joint_index(joint_action)]

    def is_terminal(self, state) -> bool:
        return state in self.terminals

    def reward(self, state, next_state) -> float:
        return 1.0 if next_state in self.terminals and state not in self.terminals else 0.0

    @property
    def is_pure(self) -> bool:
        return bool(np.isclose(self.delta_probs.max(), 1.0, atol=TOL, rtol=0.0))

    def delta_marginal(self, pos) -> np.ndarray:
        """Marginal of the type distribution over player ``others[pos]``'s latent types."""
        out = np.zeros(len(self.latent[pos]))
        for prof, p in zip(self.delta_profiles, self.delta_probs):
            out[prof[pos]] += p
        return out

    def delta_over_user(self, pos) -> np.ndarray:
        """Latent marginal re-indexed onto the user type space (missing types get 0)."""
        names = [s.name for s in self.user[pos]]
        out = np.zeros(len(names))
        for s, p in zip(self.latent[pos], self.delta_marginal(pos)):
            if s.name in names:
                out[names.index(s.name)] += p
        return out

    def delta_joint_over_user(self) -> np.ndarray:
        """Joint type distribution re-indexed onto the user type spaces."""
        out = np.zeros(tuple(len(u) for u in self.user))
        names = [[s.name for s in u] for u in self.user]
        for prof, p in zip(self.delta_profiles, self.delta_probs):
            idx = []
            for pos, k in enumerate(prof):
                name = self.latent[pos][k].name
                if name not in names[pos]:
                    break
                idx.append(names[pos].index(name))
            else:
                out[tuple(idx)] += p
        return out

    def all_strategies(self):
        return [s for space in self.latent + self.user for s in space]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.states, self.initial, sorted(self.terminals), self.actions, self.controlled)).encode())
        h.update(np.ascontiguousarray(self.transition).tobytes())
        h.update(repr(self.delta_profiles).encode())
        h.update(self.delta_probs.tobytes())
        for space in self.latent + self.user:
            for s in space:
                h.update(repr(s).encode())
                for attr in ("probs", "actions", "payoffs"):
                    if hasattr(s, attr):
                        h.update(np.asarray(getattr(s, attr)).tobytes())
        for p in self.priors:
            h.update(p.tobytes())
        h.update(self.joint_prior.tobytes())
        return h.hexdigest()


def _outer(vectors):
    out = np.ones(())
    for v in vectors:
        out = np.multiply.outer(out, v)
    return out


class History:
    """Append-only history s0, a0, s1, a1, ..., st.

    Appending after a terminal state is rejected.
    """

    def __init__(self, spec: GameSpec, initial=None):
        self.spec = spec
        self.states = [spec.initial if initial is None else initial]
        self.actions = []

    @property
    def t(self) -> int:
        return len(self.actions)

    @property
    def state(self) -> int:
        return self.states[-1]

    def append(self, joint_action, next_state):
        if self.spec.is_terminal(self.state):
            raise TerminalStateError(f"history already ended in terminal state {self.spec.states[self.state]}")
        joint_action = tuple(int(a) for a in joint_action)
        if len(joint_action) != self.spec.n_players or any(
            not 0 <= a < k for a, k in zip(joint_action, self.spec.action_counts)
        ):
            raise ValueError(f"invalid joint action {joint_action}")
        if not 0 <= next_state < self.spec.n_states:
            raise ValueError(f"invalid state {next_state}")
        self.actions.append(joint_action)
        self.states.append(int(next_state))

    def prefix(self, t) -> History:
        h = History(self.spec, self.states[0])
        h.states = self.states[: t + 1]
        h.actions = self.actions[:t]
        return h

    def __len__(self):
        return self.t

    def __repr__(self):
        return f"History(t={self.t}, state={self.spec.states[self.state]})"


def draw(rng: np.random.Generator, probs) -> int:
    """Index sampled from ``probs`` with a single uniform draw.

    Returns the first index whose cumulative mass exceeds ``u * total``;
    a plain loop is faster than numpy for the short vectors used here.
    """
    vals = probs.tolist() if isinstance(probs, np.ndarray) else list(probs)
    total = 0.0
    for p in vals:
        total += p
    x = rng.random() * total
    acc = 0.0
    for i, p in enumerate(vals):
        acc += p
        if x < acc:
            return i
    return len(vals) - 1


def sample_joint_types(spec: GameSpec, rng: np.random.Generator) -> tuple:
    """Latent type profile (indices into each player's latent space) for one step."""
    return spec.delta_profiles[draw(rng, spec.delta_probs)]


def step_game(spec: GameSpec, state: int, joint_action, rng: np.random.Generator):
    """Sample the successor state; returns ``(next_state, reward)``."""
    if spec.is_terminal(state):
        raise TerminalStateError(f"cannot step from terminal state {spec.states[state]}")
    nxt = draw(rng, spec.row(state, joint_action))
    return nxt, spec.reward(state, nxt)


@dataclass
class StepRecord:
    t: int
    state: int
    joint_action: tuple
    sampled_types: tuple
    reward: float
    distributions: list
    plan: dict | None = None


@dataclass
class EpisodeLog:
    spec: GameSpec
    history: History
    steps: list = field(default_factory=list)

    @property
    def terminated(self) -> bool:
        return self.spec.is_terminal(self.history.state)

    def to_csv(self, include_plan=False) -> str:
        spec = self.spec
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["t", "state", "joint_action", "sampled_types", "reward"]
        if include_plan:
            header.append("plan")
        w.writerow(header)
        for r in self.steps:
            types = "|".join(spec.latent[pos][k].name for pos, k in enumerate(r.sampled_types))
            acts = "|".join(spec.actions[p][a] for p, a in enumerate(r.joint_action))
            row = [r.t, spec.states[r.state], acts, types, repr(float(r.reward))]
            if include_plan:
                plan = r.plan or {}
                row.append(";".join(f"{spec.actions[spec.controlled][a]}={float(v)!r}" for a, v in sorted(plan.items())))
            w.writerow(row)
        return buf.getvalue()


def run_episode(spec: GameSpec, controller, max_steps: int, rng: np.random.Generator) -> EpisodeLog:
    """Play one episode until a terminal state or ``max_steps`` steps.

    ``controller`` provides ``reset()``, ``act(history, sampled_types, rng)``
    returning ``(action, distribution, plan_values)``, and
    ``observe(state, joint_action, next_state)``.
    """
    history = History(spec)
    log = EpisodeLog(spec, history)
    latent = MemoryTracker([s for space in spec.latent for s in space])
    controller.reset()
    for t in range(max_steps):
        state = history.state
        if spec.is_terminal(state):
            break
        profile = sample_joint_types(spec, rng)
        a_i, dist_i, plan = controller.act(history, profile, rng)
        joint = [0] * spec.n_players
        joint[spec.controlled] = a_i
        dists = [None] * spec.n_players
        dists[spec.controlled] = np.asarray(dist_i, dtype=float)
        for pos, j in enumerate(spec.others):
            d = latent.distribution(spec.latent[pos][profile[pos]], state)
            dists[j] = d
            joint[j] = draw(rng, d)
        joint = tuple(joint)
        nxt, reward = step_game(spec, state, joint, rng)
        log.steps.append(StepRecord(t, state, joint, profile, reward, dists, plan))
        controller.observe(state, joint, nxt)
        latent.advance(state, joint, nxt)
        history.append(joint, nxt)
    return log
