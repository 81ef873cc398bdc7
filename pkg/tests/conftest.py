"""Shared random-game builders and brute-force oracles for the test suite."""
import itertools

import numpy as np
import pytest

from hba import kernels
from hba.game import GameSpec
from hba.strategies import SequenceType, TableType


@pytest.fixture(params=kernels.BACKENDS)
def backend(request):
    previous = kernels.use_backend(request.param)
    yield request.param
    kernels.use_backend(previous)


def random_kernel(rng, n_states, n_joint, terminals, sparsity=0.5):
    """Dense random kernel; terminal rows self-loop."""
    T = rng.random((n_states, n_joint, n_states))
    T[rng.random(T.shape) < sparsity] = 0.0
    for s in range(n_states):
        for a in range(n_joint):
            if s in terminals:
                T[s, a] = 0.0
                T[s, a, s] = 1.0
            elif T[s, a].sum() == 0.0:
                T[s, a, rng.integers(n_states)] = 1.0
    return T / T.sum(axis=2, keepdims=True)


def random_table_game(rng, n_states=4, n_actions=2, n_types=2, n_terminals=1, pure=False, stateful=False,
                      support=None, positive=False):
    """Two-player game against memoryless (or cyclic-sequence) types.

    ``pure=True`` puts all type mass on a single latent profile.
    """
    terminals = list(range(n_states - n_terminals, n_states))
    T = random_kernel(rng, n_states, n_actions * n_actions, terminals)
    types = []
    for k in range(n_types):
        if stateful and k % 2:
            seq = rng.integers(n_actions, size=rng.integers(1, 4))
            types.append(SequenceType(f"seq{k}", 1, n_actions, seq, cyclic=True))
        else:
            alpha = np.full(n_actions, 1.0 if positive else 0.5)
            probs = rng.dirichlet(alpha, size=n_states)
            if positive:
                probs = 0.8 * probs + 0.2 / n_actions
            types.append(TableType(f"tab{k}", 1, probs))
    if pure:
        profiles, probs = [(int(rng.integers(n_types)),)], [1.0]
    else:
        w = rng.dirichlet(np.ones(n_types))
        profiles, probs = [(k,) for k in range(n_types)], w
    prior = rng.dirichlet(np.ones(n_types)) if positive else None
    return GameSpec(
        states=[f"s{s}" for s in range(n_states)], initial=0, terminals=terminals,
        actions=[[f"a{a}" for a in range(n_actions)]] * 2, transition=T, latent=[types],
        delta_profiles=profiles, delta_probs=probs, user=[types],
        priors=None if prior is None else [prior], name="random",
    )


def tree_value(spec, posterior, state, mems, depth, horizon, gamma):
    """Materialised path-tree oracle for the expected-payoff recursion.

    Walks every (type profile, joint action, successor) branch explicitly
    with plain dictionaries and loops; no memoisation, no vectorisation.
    """
    n_i = spec.action_counts[spec.controlled]
    if state in spec.terminals or depth >= horizon:
        return [0.0] * n_i
    strategies = {s.key: s for space in spec.user for s in space}
    out = []
    for a_i in range(n_i):
        total = 0.0
        for profile in itertools.product(*(range(len(u)) for u in spec.user)):
            p_prof = float(posterior[profile])
            if p_prof == 0.0:
                continue
            choices = []
            for pos in range(len(spec.others)):
                strat = spec.user[pos][profile[pos]]
                choices.append(list(enumerate(strat.distribution(mems[strat.key], state))))
            for combo in itertools.product(*choices):
                p_act = p_prof
                joint = [0] * spec.n_players
                joint[spec.controlled] = a_i
                for j, (a, p) in zip(spec.others, combo):
                    joint[j] = a
                    p_act *= p
                if p_act == 0.0:
                    continue
                row = spec.transition[state, spec.joint_index(tuple(joint))]
                for s2 in range(spec.n_states):
                    if row[s2] == 0.0:
                        continue
                    v = 1.0 if (s2 in spec.terminals and state not in spec.terminals) else 0.0
                    if s2 not in spec.terminals:
                        nxt = {k: strategies[k].advance(m, state, tuple(joint), s2) for k, m in mems.items()}
                        v += gamma * max(tree_value(spec, posterior, s2, nxt, depth + 1, horizon, gamma))
                    total += p_act * row[s2] * v
        out.append(total)
    return out


def collapsed_mdp(spec, posterior):
    """For memoryless table types: ``P[s, a_i, s']`` with the others' actions mixed out."""
    n, n_i = spec.n_states, spec.action_counts[0]
    space = spec.user[0]
    P = np.zeros((n, n_i, n))
    for s in range(n):
        mix = sum(posterior[k] * space[k].distribution(None, s) for k in range(len(space)))
        for a_i in range(n_i):
            for a_j, w in enumerate(mix):
                P[s, a_i] += w * spec.transition[s, spec.joint_index((a_i, a_j))]
    return P


def optimal_reach(P, terminals, horizon):
    """Value iteration for the maximal probability of entering a terminal within ``horizon`` steps."""
    n, n_i, _ = P.shape
    term = np.zeros(n)
    term[list(terminals)] = 1.0
    v = np.zeros(n)
    q = np.zeros((n, n_i))
    for _ in range(horizon):
        q = P @ (term + (1 - term) * v)
        q[list(terminals)] = 0.0
        v = q.max(axis=1)
    return q


def policy_enumeration_reach(P, terminals, start, horizon):
    """Best h-step reach probability by enumerating every deterministic time-dependent policy."""
    n, n_i, _ = P.shape
    best = np.zeros(n_i)
    nonterm = [s for s in range(n) if s not in terminals]
    for first in range(n_i):
        for rest in itertools.product(range(n_i), repeat=len(nonterm) * max(horizon - 1, 0)):
            policy = {}
            for k, (t, s) in enumerate(itertools.product(range(1, horizon), nonterm)):
                policy[t, s] = rest[k]
            dist = np.zeros(n)
            dist[start] = 1.0
            reached = 0.0
            for t in range(horizon):
                nxt = np.zeros(n)
                for s in nonterm:
                    if dist[s] == 0.0:
                        continue
                    a = first if t == 0 else policy[t, s]
                    nxt += dist[s] * P[s, a]
                reached += sum(nxt[s] for s in terminals)
                for s in terminals:
                    nxt[s] = 0.0
                dist = nxt
            best[first] = max(best[first], reached)
    return best


def enumerate_paths_reach(chain, t):
    """Probability of hitting ``term`` within ``t`` steps by listing every path."""
    total = 0.0
    stack = [(chain.initial, 1.0, 0)]
    while stack:
        s, p, k = stack.pop()
        if chain.term[s]:
            total += p
            continue
        if k == t:
            continue
        for d, q in chain.edges[s].items():
            if q > 0:
                stack.append((d, p * q, k + 1))
    return total


def collapsed_tree_reach(P, terminals, state, horizon):
    """Best ``horizon``-step reach probability per first action, by walking every history of the collapsed MDP.

    No memoisation: each history prefix is a separate node of the tree.
    """
    n_i = P.shape[1]

    def best(s, steps):
        if s in terminals or steps == 0:
            return 0.0
        return max(first(s, a, steps) for a in range(n_i))

    def first(s, a, steps):
        total = 0.0
        for s2 in range(P.shape[2]):
            p = P[s, a, s2]
            if p == 0.0:
                continue
            total += p * (1.0 if s2 in terminals else best(s2, steps - 1))
        return total

    if state in terminals:
        return np.zeros(n_i)
    return np.array([first(state, a, horizon) for a in range(n_i)])


# -- acceptance report ----------------------------------------------------------------

ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
