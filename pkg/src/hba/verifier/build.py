"""Compile the ideal process X or the user process Y into a finite chain.

Histories are explored breadth first and mapped to quotient nodes. The
default quotient is the game state together with the memories of the latent
strategies (and, for Y, of the user strategies); terminal states collapse to
one node per state. A scenario can pass its own quotient function.

The quotient is validated rather than trusted. Every explored history
mapped to a node must reproduce the node's maximiser set and per-action
successor distribution. Otherwise a ``QuotientError`` is raised with the two
offending histories. Y's posterior is history dependent, so histories that
revisit a known node are re-expanded up to ``validate_depth`` further steps
to catch belief drift that the quotient hides.
"""
from __future__ import annotations

import copy
from collections import deque

import numpy as np

from ..beliefs import BeliefState
from ..game import GameSpec
from ..planner import PlanConfig, Planner, plan_result
from .chain import ProcessChain


class QuotientError(ValueError):
    """Two histories in one quotient class behave differently (or the quotient is not finite)."""

    def __init__(self, message, first=None, second=None):
        super().__init__(message)
        self.first = first
        self.second = second


def default_quotient(spec, state, latent_mems, user_mems):
    return (state, latent_mems, user_mems)


def _freeze(m):
    if isinstance(m, tuple):
        return tuple(_freeze(v) for v in m)
    if isinstance(m, np.ndarray):
        raise QuotientError("strategy memory is not finite (array-valued); supply a quotient map")
    return m


class _Explorer:
    def __init__(self, spec, process, kind, config, quotient):
        self.spec = spec
        self.process = process
        self.kind = kind
        self.config = config
        self.quotient = quotient
        self.latent = []
        for space in spec.latent:
            for s in space:
                if s.key not in {x.key for x in self.latent}:
                    self.latent.append(s)
        if process == "X":
            self.spaces = spec.latent
            self.user = []
            prof = spec.delta_profiles[int(np.argmax(spec.delta_probs))]
            self.point = np.zeros(tuple(len(s) for s in spec.latent))
            self.point[tuple(prof)] = 1.0
        else:
            self.spaces = spec.user
            self.user = []
            for space in spec.user:
                for s in space:
                    if s.key not in {x.key for x in self.user}:
                        self.user.append(s)
        self.n_i = spec.action_counts[spec.controlled]

    def initial(self):
        lm = tuple(s.initial_memory() for s in self.latent)
        um = tuple(s.initial_memory() for s in self.user)
        beliefs = None
        if self.process == "Y":
            beliefs = BeliefState(self.kind, self.spec.priors, self.spec.joint_prior)
        return (self.spec.initial, lm, um, beliefs)

    def node_key(self, item):
        s, lm, um, _ = item
        if s in self.spec.terminals:
            return ("term", s)
        if self.process == "X":
            return self.quotient(self.spec, s, _freeze(lm), ())
        return self.quotient(self.spec, s, _freeze(lm), _freeze(um))

    def common_key(self, item):
        s, lm, _, _ = item
        if s in self.spec.terminals:
            return f"{self.spec.states[s]}|term"
        return f"{self.spec.states[s]}|{_freeze(lm)!r}"

    def plan(self, item):
        s, lm, um, beliefs = item
        if self.process == "X":
            planner = Planner(self.spec, self.spaces, self.point, self.config)
            mems = dict(zip((x.key for x in self.latent), lm))
        else:
            planner = Planner(self.spec, self.spaces, beliefs.joint(), self.config)
            mems = dict(zip((x.key for x in self.user), um))
        return planner.plan(s, mems)

    def successors(self, item, a_i):
        """``{(joint, next_state): prob}`` when the controlled player plays ``a_i``."""
        spec = self.spec
        s, lm, _, _ = item
        mem = dict(zip((x.key for x in self.latent), lm))
        out = {}
        for prof, w in zip(spec.delta_profiles, spec.delta_probs):
            dists = [spec.latent[pos][k].distribution(mem[spec.latent[pos][k].key], s) for pos, k in enumerate(prof)]
            for others in np.ndindex(*(len(d) for d in dists)):
                q = w * np.prod([d[a] for d, a in zip(dists, others)])
                if q == 0.0:
                    continue
                joint = [0] * spec.n_players
                joint[spec.controlled] = a_i
                for j, a in zip(spec.others, others):
                    joint[j] = int(a)
                joint = tuple(joint)
                row = spec.row(s, joint)
                for s2 in np.nonzero(row)[0]:
                    k = (joint, int(s2))
                    out[k] = out.get(k, 0.0) + float(q * row[s2])
        return out

    def advance(self, item, joint, s2):
        s, lm, um, beliefs = item
        lm2 = tuple(x.advance(m, s, joint, s2) for x, m in zip(self.latent, lm))
        um2 = tuple(x.advance(m, s, joint, s2) for x, m in zip(self.user, um))
        b2 = None
        if beliefs is not None:
            mem = dict(zip((x.key for x in self.user), um))
            observed = [np.array([u.distribution(mem[u.key], s)[joint[j]] for u in space])
                        for space, j in zip(self.spec.user, self.spec.others)]
            b2 = copy.deepcopy(beliefs)
            b2.update(observed)
        return (s2, lm2, um2, b2)


def _describe(spec, path):
    return [f"{spec.states[s]} -> {'|'.join(spec.actions[p][a] for p, a in enumerate(j))}" for s, j in path]


def build_chain(spec: GameSpec, process="Y", kind="sum", config: PlanConfig | None = None, quotient=None,
                universe=None, validate_depth=12, max_nodes=5000, max_histories=50000) -> ProcessChain:
    """Finite chain of ``process`` ("X" ideal, "Y" user) on ``spec``.

    ``universe="all"`` also discovers nodes reachable under actions the
    process would not choose (the default for X, so that X's values are
    available wherever Y can go); ``"policy"`` follows the process only.
    """
    if process not in ("X", "Y"):
        raise ValueError("process must be 'X' or 'Y'")
    if process == "X" and not spec.is_pure:
        raise ValueError("the ideal process is only constructed for pure type distributions")
    config = config or PlanConfig()
    quotient = quotient or default_quotient
    universe = universe or ("all" if process == "X" else "policy")
    ex = _Explorer(spec, process, kind, config, quotient)

    index, names, states, keys = {}, [], [], []
    records = {}
    edges, values, chosen, aedges = {}, {}, {}, {}
    term = []
    first_path = {}
    expanded_views = set()
    queue = deque([(ex.initial(), [], 0)])
    pending = []
    histories = 0
    actions = spec.actions[spec.controlled]

    def node_of(key, item):
        if key not in index:
            if len(names) >= max_nodes:
                raise QuotientError(f"more than {max_nodes} quotient nodes; the quotient does not look finite")
            index[key] = len(names)
            names.append(f"n{len(names)}")
            states.append(spec.states[item[0]])
            keys.append(ex.common_key(item))
            term.append(item[0] in spec.terminals)
        return index[key]

    while queue:
        item, path, since = queue.popleft()
        histories += 1
        key = ex.node_key(item)
        known = key in index
        n = node_of(key, item)
        if term[n]:
            edges[n] = {n: 1.0}
            continue
        result = ex.plan(item)
        per_action = {}
        for a in range(ex.n_i):
            if universe == "policy" and a not in result.maximisers and known:
                continue
            per_action[a] = ex.successors(item, a)
        succ_keys = {}
        for a, dist in per_action.items():
            agg = {}
            for (joint, s2), p in dist.items():
                nxt = ex.advance(item, joint, s2)
                k2 = ex.node_key(nxt)
                agg[k2] = agg.get(k2, 0.0) + p
                succ_keys.setdefault(a, []).append((joint, s2, nxt, k2))
            per_action[a] = agg
        signature = (result.maximisers, {a: per_action[a] for a in result.maximisers})
        if known:
            ref = records[n]
            if ref[0] != signature[0] or not _same_dists(ref[1], signature[1]):
                raise QuotientError(
                    f"histories mapped to node {names[n]} disagree "
                    f"(maximisers {[actions[a] for a in ref[0]]} vs {[actions[a] for a in signature[0]]})",
                    first=_describe(spec, first_path[n]), second=_describe(spec, path),
                )
        else:
            records[n] = signature
            first_path[n] = path
            values[n] = {actions[a]: float(v) for a, v in enumerate(result.values)}
            chosen[n] = tuple(actions[a] for a in result.maximisers)
            edges[n] = {}
            aedges[n] = {}
        if known and since >= validate_depth:
            continue
        if histories > max_histories:
            continue
        view = (key, _belief_view(item))
        if view in expanded_views:
            continue
        expanded_views.add(view)
        follow = range(ex.n_i) if universe == "all" else result.maximisers
        for a in follow:
            for joint, s2, nxt, k2 in succ_keys.get(a, ()):
                queue.append((nxt, path + [(item[0], joint)], since + 1 if known else 0))
        if not known:
            pending.append((n, per_action, result.maximisers))

    # resolve edges once every successor key has a node; actions leading
    # outside the explored universe get no successor distribution
    for n, per_action, maxset in pending:
        for a, dist in per_action.items():
            if all(k in index for k in dist):
                aedges[n][actions[a]] = {index[k]: p for k, p in dist.items()}
        for a in maxset:
            for k, p in per_action[a].items():
                d = index[k]
                edges[n][d] = edges[n].get(d, 0.0) + p / len(maxset)
    chain = ProcessChain(names, edges, 0, np.array(term, dtype=bool), tag=process, state=states, key=keys,
                         values=values, chosen=chosen, aedges=aedges)
    chain.meta = {"histories": histories, "validated_to": validate_depth, "universe": universe,
                  "truncated": histories > max_histories}
    return chain.validate()


def _belief_view(item):
    beliefs = item[3]
    if beliefs is None:
        return None
    return np.round(beliefs.joint(), 12).tobytes()


def _same_dists(a, b, tol=1e-9):
    if a.keys() != b.keys():
        return False
    for act in a:
        da, db = a[act], b[act]
        if da.keys() != db.keys() or any(abs(da[k] - db[k]) > tol for k in da):
            return False
    return True
