"""JSON scenario files.

A scenario either names a built-in game (``"game": "ex3"``) or defines one
inline, and adds controller, run and experiment settings::

    {
      "states": ["s0", "done"], "initial": "s0", "terminals": ["done"],
      "players": [{"actions": ["L", "R"]}, {"actions": ["L", "R"]}],
      "transitions": [
        {"from": "*", "joint": ["*", "*"], "to": {"s0": 1.0}},
        {"from": "s0", "joint": ["L", "L"], "to": {"done": 1.0}}
      ],
      "types": {
        "R":   {"player": 1, "kind": "deterministic-sequence", "actions": ["R"]},
        "LRR": {"player": 1, "kind": "periodic", "actions": ["L", "R", "R"]}
      },
      "latent": [["R", "LRR"]],
      "delta": [{"profile": ["R"], "p": 0.5}, {"profile": ["LRR"], "p": 0.5}],
      "controller": {"posterior": "sum", "gamma": 1.0, "horizon": 2},
      "run": {"steps": 100, "seed": 0, "repetitions": 1},
      "experiment": "episode"
    }

Transition rules are applied in order, later rules overriding earlier ones
for every (state, joint action) they match; ``"*"`` matches anything.
Terminal states always self-loop. ``user`` defaults to ``latent``; ``priors``
and ``joint_prior`` default to uniform.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fixtures
from .experiments import RlTypeConfig, make_rl_type
from .game import GameSpec
from .planner import PlanConfig
from .strategies import EpsilonGreedyLearner, EpsilonSchedule, SequenceType, TableType

EXPERIMENTS = ("episode", "posterior-trace", "figure1", "verify")
POSTERIORS = ("product", "sum", "correlated")
TYPE_KINDS = ("deterministic-sequence", "periodic", "epsilon-greedy-learner", "table")


class ScenarioError(ValueError):
    """Raised for scenario files that do not describe a valid run."""


@dataclass
class Scenario:
    spec: GameSpec | None
    config: PlanConfig
    posterior: str = "sum"
    steps: int = 100
    seed: int = 0
    repetitions: int = 1
    experiment: str = "episode"
    options: dict = field(default_factory=dict)


def _index(names, label, what):
    if isinstance(label, int) and not isinstance(label, bool):
        if not 0 <= label < len(names):
            raise ScenarioError(f"{what} index {label} out of range")
        return label
    try:
        return names.index(label)
    except ValueError:
        raise ScenarioError(f"unknown {what} {label!r}") from None


def _build_type(name, raw, n_states, actions, state_names):
    if "player" not in raw:
        raise ScenarioError(f"type {name!r}: missing 'player'")
    player = int(raw["player"])
    if not 0 <= player < len(actions):
        raise ScenarioError(f"type {name!r}: player {player} out of range")
    acts = actions[player]
    kind = raw.get("kind")
    if kind in ("deterministic-sequence", "periodic"):
        seq = [_index(acts, a, "action") for a in raw.get("actions", [])]
        if not seq:
            raise ScenarioError(f"type {name!r}: empty action sequence")
        return SequenceType(name, player, len(acts), seq, cyclic=kind == "periodic")
    if kind == "table":
        if "by_state" in raw:
            rows = np.zeros((n_states, len(acts)))
            default = raw.get("probs")
            for s in range(n_states):
                row = raw["by_state"].get(state_names[s], default)
                if row is None:
                    raise ScenarioError(f"type {name!r}: no distribution for state {state_names[s]!r}")
                rows[s] = row
            return TableType(name, player, rows)
        if "probs" not in raw:
            raise ScenarioError(f"type {name!r}: table needs 'probs' or 'by_state'")
        return TableType(name, player, raw["probs"])
    if kind == "epsilon-greedy-learner":
        anneal = raw.get("anneal")
        if "payoffs" in raw:
            payoffs = np.asarray(raw["payoffs"], dtype=float)
            if payoffs.ndim == 1:
                payoffs = np.tile(payoffs, (n_states, 1))
            schedule = EpsilonSchedule(raw.get("epsilon", 0.1), *(anneal or (None, None)))
            return EpsilonGreedyLearner(name, player, payoffs, schedule,
                                        learning_rate=raw.get("learning_rate", 0.5),
                                        discount=raw.get("discount", 0.0),
                                        initial_value=raw.get("initial_value", 0.0))
        if "payoff_seed" not in raw:
            raise ScenarioError(f"type {name!r}: learner needs 'payoffs' or 'payoff_seed'")
        cfg = RlTypeConfig(
            payoff_seed=int(raw["payoff_seed"]), learning_rate=raw.get("learning_rate", 0.5),
            epsilon=raw.get("epsilon", 0.7), anneal_start=anneal[0] if anneal else None,
            anneal_end=anneal[1] if anneal else None, discount=raw.get("discount", 0.0),
            initial_value=raw.get("initial_value", 0.9),
        )
        return make_rl_type(cfg, name, player, n_states, len(acts))
    raise ScenarioError(f"type {name!r}: unknown kind {kind!r}; choose from {', '.join(TYPE_KINDS)}")


def _transition(raw, states, actions, terminals):
    n = len(states)
    counts = [len(a) for a in actions]
    shape = (n, *counts, n)
    table = np.zeros(shape)
    covered = np.zeros(shape[:-1], dtype=bool)
    for k, rule in enumerate(raw):
        src = rule.get("from", "*")
        sel = [slice(None) if src == "*" else _index(states, src, "state")]
        joint = rule.get("joint", ["*"] * len(actions))
        if len(joint) != len(actions):
            raise ScenarioError(f"transition rule {k}: joint action has {len(joint)} entries")
        for p, a in enumerate(joint):
            sel.append(slice(None) if a == "*" else _index(actions[p], a, "action"))
        row = np.zeros(n)
        for dst, prob in rule.get("to", {}).items():
            row[_index(states, dst, "state")] += float(prob)
        if abs(row.sum() - 1.0) > 1e-12 or np.any(row < 0):
            raise ScenarioError(f"transition rule {k}: successor probabilities must sum to 1")
        table[tuple(sel)] = row
        covered[tuple(sel)] = True
    for s in terminals:
        table[s] = 0.0
        table[(s, *(slice(None),) * len(actions), s)] = 1.0
        covered[s] = True
    if not covered.all():
        missing = np.argwhere(~covered)[0]
        raise ScenarioError(
            f"no transition rule for state {states[missing[0]]!r} and joint action "
            f"{tuple(actions[p][a] for p, a in enumerate(missing[1:]))}"
        )
    return table.reshape(n, int(np.prod(counts)), n)


def build_game(raw: dict, name="scenario") -> GameSpec:
    """Inline game definition to :class:`GameSpec`."""
    try:
        states = list(raw["states"])
        actions = [list(p["actions"]) for p in raw["players"]]
    except KeyError as exc:
        raise ScenarioError(f"missing field {exc.args[0]!r}") from None
    controlled = int(raw.get("controlled", 0))
    initial = _index(states, raw.get("initial", 0), "state")
    terminals = [_index(states, s, "state") for s in raw.get("terminals", [])]
    transition = _transition(raw.get("transitions", []), states, actions, terminals)
    types = {n: _build_type(n, t, len(states), actions, states) for n, t in raw.get("types", {}).items()}
    others = [j for j in range(len(actions)) if j != controlled]

    def spaces(key):
        lists = raw.get(key)
        if lists is None:
            return None
        if len(lists) != len(others):
            raise ScenarioError(f"'{key}' needs one type list per uncontrolled player")
        out = []
        for j, names in zip(others, lists):
            space = []
            for n in names:
                if n not in types:
                    raise ScenarioError(f"'{key}' refers to undefined type {n!r}")
                if types[n].player != j:
                    raise ScenarioError(f"type {n!r} belongs to player {types[n].player}, listed for player {j}")
                space.append(types[n])
            out.append(space)
        return out

    latent = spaces("latent")
    if latent is None:
        raise ScenarioError("missing field 'latent'")
    user = spaces("user") or latent
    profiles, probs = [], []
    for entry in raw.get("delta", []):
        prof = entry["profile"]
        if len(prof) != len(others):
            raise ScenarioError("delta profile must name one type per uncontrolled player")
        profiles.append(tuple(_index([t.name for t in latent[k]], n, "latent type") for k, n in enumerate(prof)))
        probs.append(float(entry["p"]))
    if not profiles:
        raise ScenarioError("missing field 'delta'")
    try:
        return GameSpec(
            states=states, initial=initial, terminals=terminals, actions=actions, transition=transition,
            latent=latent, delta_profiles=profiles, delta_probs=probs, user=user,
            priors=raw.get("priors"), joint_prior=raw.get("joint_prior"), controlled=controlled,
            name=raw.get("name", name),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc


def parse_scenario(raw: dict, name="scenario") -> Scenario:
    experiment = raw.get("experiment", "episode")
    if experiment not in EXPERIMENTS:
        raise ScenarioError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    ctrl = raw.get("controller", {})
    run = raw.get("run", {})
    if "seed" not in run:
        raise ScenarioError("'run.seed' must be given explicitly")
    posterior = ctrl.get("posterior", "sum")
    if posterior not in POSTERIORS:
        raise ScenarioError(f"unknown posterior {posterior!r}")
    spec, config = None, None
    if experiment != "figure1":
        if "game" in raw:
            try:
                spec, config = fixtures.build(raw["game"])
            except KeyError as exc:
                raise ScenarioError(str(exc.args[0])) from None
        else:
            spec = build_game(raw, name)
    base = config or PlanConfig()
    try:
        config = PlanConfig(gamma=float(ctrl.get("gamma", base.gamma)), horizon=int(ctrl.get("horizon", base.horizon)))
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
    return Scenario(
        spec=spec, config=config, posterior=posterior, steps=int(run.get("steps", 100)), seed=int(run["seed"]),
        repetitions=int(run.get("repetitions", 1)), experiment=experiment, options=dict(raw.get("options", {})),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    return parse_scenario(raw, name=path.stem)
