"""Seeded experiments: random games, learning types, posterior traces, example checks."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from . import fixtures, kernels
from .beliefs import posterior_error
from .game import GameSpec, run_episode
from .planner import OracleController, PlanConfig, hba_policy
from .strategies import EpsilonGreedyLearner, EpsilonSchedule, TableType


@dataclass(frozen=True)
class RlTypeConfig:
    """Settings of one learning type.

    The payoff table is drawn from ``payoff_seed`` (uniform in [0, 0.5));
    when ``preferred`` gives one action per state, that action pays 1. The
    initial value sits between the two ranges, so every untried action
    looks better than a tried poor one and the learners explore
    systematically. ``tie_jitter`` adds seeded noise to the initial values
    so that different types break ties between untried actions differently.
    With ``informed=True`` the values instead start at the type's own payoff
    table plus ``optimism``: the greedy action is then the preferred one from
    the first step, and types with distinct preferred actions never overlap
    once exploration has stopped.
    """

    payoff_seed: int
    learning_rate: float = 0.5
    epsilon: float = 0.7
    anneal_start: int | None = 1000
    anneal_end: int | None = 2000
    discount: float = 0.0
    initial_value: float = 0.9
    preferred: tuple | None = None
    tie_jitter: float = 0.05
    informed: bool = False
    optimism: float = 0.4

    def schedule(self) -> EpsilonSchedule:
        return EpsilonSchedule(self.epsilon, self.anneal_start, self.anneal_end)


def make_rl_type(config: RlTypeConfig, name, player, n_states, n_actions) -> EpsilonGreedyLearner:
    rng = np.random.default_rng(config.payoff_seed)
    payoffs = rng.uniform(0.0, 0.5, size=(n_states, n_actions))
    if config.preferred is not None:
        payoffs[np.arange(n_states), np.asarray(config.preferred)] = 1.0
    if config.informed:
        initial = payoffs + config.optimism
    else:
        initial = config.initial_value + config.tie_jitter * rng.random((n_states, n_actions))
    return EpsilonGreedyLearner(name, player, payoffs, config.schedule(), learning_rate=config.learning_rate,
                                discount=config.discount, initial_value=initial)


def generate_random_sbg(n_states=100, n_actions=10, n_types=3, branching=3, seed=0, n_players=2,
                        n_terminals=0, type_kind="rl", delta=None, rl: RlTypeConfig | None = None,
                        name=None) -> GameSpec:
    """Random game with a seeded sparse kernel.

    Each row of a non-terminal state is supported on ``branching`` distinct
    successors. ``n_terminals=0`` gives a terminal-free game for long
    posterior runs. With ``type_kind="rl"`` the other players get learning
    types whose preferred actions differ in every state (so their overlap
    can vanish once exploration stops); ``"table"`` gives memoryless types
    with random per-state distributions. ``delta`` weights the profiles in
    which every other player takes the same type index (uniform if omitted).
    """
    if min(n_states, n_actions, n_types, branching, n_players) < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    counts = [n_actions] * n_players
    n_joint = n_actions ** n_players
    terminals = list(range(n_states - n_terminals, n_states))
    k = min(branching, n_states)
    transition = np.zeros((n_states, n_joint, n_states))
    for s in range(n_states):
        if s in terminals:
            transition[s, :, s] = 1.0
            continue
        for a in range(n_joint):
            succ = rng.choice(n_states, size=k, replace=False)
            w = rng.random(k) + 0.1
            transition[s, a, succ] = w / w.sum()
    if type_kind == "rl":
        rl = rl or RlTypeConfig(payoff_seed=0)
        perms = np.array([rng.permutation(n_actions) for _ in range(n_states)])
    spaces = []
    for j in range(1, n_players):
        space = []
        for t in range(n_types):
            if type_kind == "rl":
                preferred = tuple(int(x) for x in perms[:, t % n_actions])
                cfg = RlTypeConfig(
                    payoff_seed=int(rng.integers(2**31)), learning_rate=rl.learning_rate, epsilon=rl.epsilon,
                    anneal_start=rl.anneal_start, anneal_end=rl.anneal_end, discount=rl.discount,
                    initial_value=rl.initial_value, preferred=preferred, tie_jitter=rl.tie_jitter,
                    informed=rl.informed, optimism=rl.optimism,
                )
                space.append(make_rl_type(cfg, f"rl{t}", j, n_states, n_actions))
            elif type_kind == "table":
                probs = rng.dirichlet(np.ones(n_actions), size=n_states)
                space.append(TableType(f"tab{t}", j, probs))
            else:
                raise ValueError(f"unknown type kind {type_kind!r}")
        spaces.append(space)
    m = n_players - 1
    if delta is None:
        delta = np.full(n_types, 1.0 / n_types)
    delta = np.asarray(delta, dtype=float)
    profiles = [(t,) * m for t in range(n_types) if delta[t] > 0]
    probs = [delta[t] for t in range(n_types) if delta[t] > 0]
    return GameSpec(
        states=[f"s{s}" for s in range(n_states)], initial=0, terminals=terminals,
        actions=[[f"a{a}" for a in range(c)] for c in counts], transition=transition,
        latent=spaces, delta_profiles=profiles, delta_probs=probs, user=spaces,
        name=name or f"random-{seed}",
    )


# -- posterior traces ------------------------------------------------------------------


@dataclass
class PosteriorTrace:
    spec: GameSpec
    kind: str
    t: np.ndarray
    posteriors: list
    error: np.ndarray
    ao: np.ndarray
    as_: np.ndarray
    degenerate: np.ndarray

    def to_csv(self) -> str:
        spec = self.spec
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        post_cols = [f"p{j}:{s.name}" for pos, j in enumerate(spec.others) for s in spec.user[pos]]
        ao_cols = [f"ao_{j}" for j in spec.others]
        as_cols = [f"as_{j}" for j in spec.others]
        w.writerow(["t", "kind", *post_cols, "error", *ao_cols, *as_cols, "degenerate"])
        for k in range(len(self.t)):
            post = [repr(float(v)) for p in self.posteriors for v in p[k]]
            w.writerow([int(self.t[k]), self.kind, *post, repr(float(self.error[k])),
                        *(repr(float(v)) for v in self.ao[k]), *(repr(float(v)) for v in self.as_[k]),
                        int(self.degenerate[k])])
        return buf.getvalue()


def posterior_trace(spec: GameSpec, controller) -> PosteriorTrace:
    """Trace of a recording HBA controller after an episode."""
    rec = controller.trace
    m = len(spec.others)
    t = np.array([r["t"] for r in rec], dtype=int)
    posteriors = [np.array([r["posteriors"][pos] for r in rec]).reshape(len(rec), -1) for pos in range(m)]
    target = spec.delta_joint_over_user()
    error = np.array([posterior_error(r["joint"], target) for r in rec])
    ao = np.zeros((len(rec), m))
    as_ = np.zeros((len(rec), m))
    for pos in range(m):
        observed = np.array([r["observed"][pos] for r in rec]).reshape(len(rec), -1)
        dists = np.array([r["dists"][pos] for r in rec])
        peak = dists.max(axis=2) if len(rec) else np.zeros_like(observed)
        ao_t, as_t = kernels.overlap_terms(observed, peak, spec.action_counts[spec.others[pos]])
        steps = np.arange(1, len(rec) + 1)
        ao[:, pos] = np.cumsum(ao_t) / steps
        as_[:, pos] = np.cumsum(as_t) / steps
    degenerate = np.array([r["degenerate"] for r in rec], dtype=bool)
    return PosteriorTrace(spec, controller.kind, t, posteriors, error, ao, as_, degenerate)


def run_posterior_trace(spec, kind, steps, seed, config=None) -> PosteriorTrace:
    controller = hba_policy(spec, kind, config or PlanConfig(horizon=1), record=True)
    run_episode(spec, controller, steps, np.random.default_rng(seed))
    return posterior_trace(spec, controller)


FIGURE1_DELTA = (0.3, 0.5, 0.2)


def run_figure1(seed=0, steps=3000, n_states=100, n_actions=10, n_types=3, delta=FIGURE1_DELTA,
                epsilon=0.7, anneal=(1000, 2000), branching=3, learning_rate=0.5,
                informed=True) -> PosteriorTrace:
    """Sum-posterior error over one long run against three learning types."""
    rl = RlTypeConfig(payoff_seed=0, epsilon=epsilon, anneal_start=anneal[0], anneal_end=anneal[1],
                      learning_rate=learning_rate, informed=informed)
    spec = generate_random_sbg(n_states, n_actions, n_types, branching, seed=seed, type_kind="rl",
                               delta=delta, rl=rl, name=f"figure1-{seed}")
    return run_posterior_trace(spec, "sum", steps, seed)


PLOT_COLUMNS = ("t", "error", "ao", "as")


def emit_plot_data(trace_csv: str, stride=10) -> str:
    """Whitespace-separated ``t error ao as`` rows, every ``stride``-th step."""
    if stride < 1:
        raise ValueError("stride must be positive")
    reader = csv.reader(io.StringIO(trace_csv))
    out = ["# " + " ".join(PLOT_COLUMNS)]
    try:
        header = next(reader)
    except StopIteration:
        return out[0] + "\n"
    if "t" not in header or "error" not in header:
        raise ValueError("not a posterior trace: missing 't' or 'error' column")
    ti, ei = header.index("t"), header.index("error")
    ao_i = [k for k, h in enumerate(header) if h.startswith("ao_")]
    as_i = [k for k, h in enumerate(header) if h.startswith("as_")]
    for n, row in enumerate(reader):
        if len(row) != len(header):
            raise ValueError(f"malformed trace row {n + 1}")
        if n % stride:
            continue
        ao = np.mean([float(row[k]) for k in ao_i]) if ao_i else 0.0
        as_ = np.mean([float(row[k]) for k in as_i]) if as_i else 0.0
        out.append(f"{int(row[ti])} {float(row[ei])!r} {float(ao)!r} {float(as_)!r}")
    return "\n".join(out) + "\n"


# -- worked examples ----------------------------------------------------------------------


def _check(name, value, expected, tol=None, passed=None):
    if passed is None:
        passed = bool(np.all(np.abs(np.asarray(value) - np.asarray(expected)) <= tol))
    to_list = lambda v: np.asarray(v, dtype=float).round(12).tolist()  # noqa: E731
    return {"check": name, "value": to_list(value), "expected": to_list(expected) if expected is not None else None,
            "tolerance": tol, "passed": bool(passed)}


def _example_beliefs(name, kind, steps, seed):
    spec, config = fixtures.build(name)
    controller = hba_policy(spec, kind, config, record=True)
    log = run_episode(spec, controller, steps, np.random.default_rng(seed))
    return spec, controller, log


def run_example(name, kind="sum", steps=10_000, seed=0) -> dict:
    """Run a worked example and check its documented outcome."""
    from .verifier import build_chain, detect_critical

    checks = []
    if name == "ex1":
        spec, controller, log = _example_beliefs(name, kind, steps, seed)
        eg = spec.latent[0][0]
        eps = eg.epsilon(0)
        d = eg.distribution(eg.initial_memory(), 0)
        checks.append(_check("external distribution", d, [1 - eps / 2, eps / 2], 1e-12))
        internal = eps * np.array([0.5, 0.5]) + (1 - eps) * np.array([1.0, 0.0])
        checks.append(_check("internal randomisation equivalent", internal, d, 1e-12))
        freq = np.mean([r.joint_action[1] == 0 for r in log.steps])
        checks.append(_check("empirical frequency of A", freq, 1 - eps / 2, 0.02))
    elif name in ("ex2", "ex3", "ex4"):
        spec, controller, log = _example_beliefs(name, kind, steps, seed)
        joint = controller.beliefs.joint()
        events = controller.beliefs.events
        if name == "ex2":
            if kind == "product":
                fired = bool(events)
                checks.append(_check("degenerate event fired", float(fired), 1.0, passed=fired))
                if events:
                    checks.append(_check("first degenerate step", events[0]["t"], 20, passed=events[0]["t"] <= 20))
            else:
                checks.append(_check("posterior", joint, [0.5, 0.5], 0.02))
        elif name == "ex3":
            if kind == "product":
                checks.append(_check("posterior on A", joint[0], 1.0, passed=joint[0] >= 0.99))
            else:
                checks.append(_check("posterior", joint, [2 / 3, 1 / 3], 0.02))
        else:
            if kind == "correlated":
                checks.append(_check("permitted pairs", [joint[0, 1], joint[1, 0]], [0.5, 0.5], 0.02))
                diag = max(joint[0, 0], joint[1, 1])
                checks.append(_check("diagonal pairs", diag, 0.0, passed=diag < 0.01))
            elif kind == "sum":
                checks.append(_check("all pairs", joint.ravel(), [0.25] * 4, 0.02))
            else:
                fired = bool(events)
                checks.append(_check("degenerate event fired", float(fired), 1.0, passed=fired))
    elif name == "ex5":
        spec, controller, log = _example_beliefs(name, kind, steps, seed)
        trace = controller.trace
        for k, strat in enumerate(spec.user[0]):
            hits = np.mean([r["observed"][0][k] for r in trace])
            checks.append(_check(f"prediction rate of {strat.name}", hits, 0.5, 0.02))
    elif name in ("ex6", "ex6-critical"):
        critical = name == "ex6-critical"
        spec, config = fixtures.build(name)
        y = build_chain(spec, "Y", kind, config)
        x = build_chain(spec, "X", config=config)
        report = detect_critical(y, x)
        checks.append(_check("critical verdict", float(report.critical), float(critical),
                             passed=report.critical == critical))
        if critical:
            checks.append(_check("witness size", len(report.witness), 2, passed=len(report.witness) == 2))
        lengths = []
        for k in range(10):
            log = run_episode(spec, hba_policy(spec, kind, config), min(steps, 100),
                              np.random.default_rng(seed + k))
            lengths.append(len(log.steps) if log.terminated else -1)
        if critical:
            checks.append(_check("never terminal", float(max(lengths)), -1.0, passed=all(n == -1 for n in lengths)))
        else:
            checks.append(_check("terminal within 2 steps", float(max(lengths)), 2.0,
                                 passed=all(0 < n <= 2 for n in lengths)))
        xlog = run_episode(spec, OracleController(spec, config), 10, np.random.default_rng(seed))
        checks.append(_check("ideal process terminates in 1 step", len(xlog.steps), 1.0,
                             passed=xlog.terminated and len(xlog.steps) == 1))
    else:
        raise KeyError(f"unknown example {name!r}; choose from {', '.join(fixtures.NAMES)}")
    return {"example": name, "posterior": kind, "steps": steps, "seed": seed,
            "passed": all(c["passed"] for c in checks), "checks": checks}
