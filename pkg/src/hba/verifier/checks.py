"""Model checking on process chains.

Reachability of ``term`` (bounded and unbounded), success rates, the
premises of the termination theorems, critical type-space detection and
probabilistic bisimulation between an ideal and a user process.
"""
from __future__ import annotations

import operator
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.sparse import csgraph, csr_matrix
from scipy.sparse.linalg import spsolve

from .. import kernels
from .chain import ProcessChain

COMPARATORS = {">": operator.gt, ">=": operator.ge}
BISIM_TOL = 1e-9


@dataclass
class ReachResult:
    probabilities: np.ndarray
    threshold: float
    comparator: str
    steps: int | None
    value: float
    verdict: bool


def _compare(value, threshold, comparator):
    if comparator not in COMPARATORS:
        raise ValueError(f"comparator must be one of {sorted(COMPARATORS)}")
    return bool(COMPARATORS[comparator](value, threshold))


def bounded_reach_table(chain: ProcessChain, t: int) -> np.ndarray:
    """``table[k, s]``: probability of reaching ``term`` from ``s`` within ``k`` steps."""
    if t < 0:
        raise ValueError("step bound must be nonnegative")
    return kernels.bounded_reach(*chain.csr(), chain.term, t)


def check_bounded_reach(chain: ProcessChain, t: int, p: float, comparator=">=") -> ReachResult:
    """Does the initial node satisfy F<=t term with probability ``comparator p``?"""
    table = bounded_reach_table(chain, t)
    value = float(table[t, chain.initial])
    return ReachResult(table[t], p, comparator, t, value, _compare(value, p, comparator))


def can_reach_term(chain: ProcessChain) -> np.ndarray:
    """Mask of nodes with a positive-probability path to ``term``."""
    indptr, indices, data = chain.csr()
    rev = {}
    for s in range(chain.n):
        for e in range(indptr[s], indptr[s + 1]):
            if data[e] > 0:
                rev.setdefault(int(indices[e]), []).append(s)
    mask = chain.term.copy()
    stack = list(np.nonzero(mask)[0])
    while stack:
        d = stack.pop()
        for s in rev.get(int(d), ()):
            if not mask[s]:
                mask[s] = True
                stack.append(s)
    return mask


def reach_probabilities(chain: ProcessChain) -> np.ndarray:
    """Eventual reach probability of ``term`` from every node.

    Nodes without a path to ``term`` are fixed at 0, which makes the
    remaining linear system nonsingular; it is then solved directly.
    """
    n = chain.n
    live = can_reach_term(chain) & ~chain.term
    out = chain.term.astype(float)
    idx = np.nonzero(live)[0]
    if len(idx) == 0:
        return out
    pos = {int(s): k for k, s in enumerate(idx)}
    rows, cols, vals = [], [], []
    b = np.zeros(len(idx))
    for s in idx:
        r = pos[int(s)]
        rows.append(r)
        cols.append(r)
        vals.append(1.0)
        for d, p in chain.edges.get(int(s), {}).items():
            if chain.term[d]:
                b[r] += p
            elif d in pos:
                rows.append(r)
                cols.append(pos[d])
                vals.append(-p)
    a = csr_matrix((vals, (rows, cols)), shape=(len(idx), len(idx)))
    x = spsolve(a.tocsc(), b) if len(idx) > 1 else b / a.toarray()[0, 0]
    out[idx] = np.clip(np.atleast_1d(x), 0.0, 1.0)
    return out


def check_unbounded_reach(chain: ProcessChain, p: float, comparator=">=") -> ReachResult:
    probs = reach_probabilities(chain)
    value = float(probs[chain.initial])
    return ReachResult(probs, p, comparator, None, value, _compare(value, p, comparator))


def success_rate(chain: ProcessChain, node, action) -> float:
    """Probability of eventually reaching ``term`` if ``action`` is played at ``node``.

    The chain's own policy governs every later step. Needs ``aedge``
    annotations for the node.
    """
    s = chain.index(node) if isinstance(node, str) else node
    if chain.term[s]:
        return 1.0
    dist = chain.aedges.get(s, {}).get(action)
    if dist is None:
        raise KeyError(f"no successor distribution for action {action!r} at {chain.names[s]}")
    probs = reach_probabilities(chain)
    return float(sum(p * probs[d] for d, p in dist.items()))


def reach_bounds(chain: ProcessChain, tol=1e-12, max_iter=100_000):
    """Lowest and highest eventual reach probability over maximiser selections.

    At each node only actions in the chain's maximiser set are allowed; one
    process always takes the worst of them, the other the best. Both are
    least fixpoints computed by iteration from zero.
    """
    lo = chain.term.astype(float)
    hi = lo.copy()
    for _ in range(max_iter):
        nlo, nhi = lo.copy(), hi.copy()
        for s in range(chain.n):
            if chain.term[s]:
                continue
            acts = chain.chosen.get(s)
            dists = [chain.aedges[s][a] for a in acts] if acts else [chain.edges.get(s, {})]
            vals_lo = [sum(p * lo[d] for d, p in dist.items()) for dist in dists]
            vals_hi = [sum(p * hi[d] for d, p in dist.items()) for dist in dists]
            nlo[s], nhi[s] = min(vals_lo), max(vals_hi)
        delta = max(np.abs(nlo - lo).max(), np.abs(nhi - hi).max())
        lo, hi = nlo, nhi
        if delta <= tol:
            break
    return float(lo[chain.initial]), float(hi[chain.initial])


# -- bisimulation ---------------------------------------------------------------


@dataclass
class Partition:
    blocks: list
    block_of: dict
    iterations: int

    def same_block(self, a, b) -> bool:
        return self.block_of[a] == self.block_of[b]


@dataclass
class BisimResult:
    bisimilar: bool
    partition: Partition
    initial_x: tuple
    initial_y: tuple


def _union(x: ProcessChain, y: ProcessChain):
    labels = [("X", n) for n in x.names] + [("Y", n) for n in y.names]
    edges = []
    for s in range(x.n):
        edges.append(dict(x.edges.get(s, {})))
    for s in range(y.n):
        edges.append({d + x.n: p for d, p in y.edges.get(s, {}).items()})
    term = np.concatenate([x.term, y.term])
    return labels, edges, term


def _split(members, rows, same):
    groups = []
    for m in members:
        for g in groups:
            if same(rows[g[0]], rows[m]):
                g.append(m)
                break
        else:
            groups.append([m])
    return groups


def bisimulation_partition(x: ProcessChain, y: ProcessChain, tol=BISIM_TOL, exact=False) -> BisimResult:
    """Coarsest probabilistic bisimulation over the disjoint union of two chains.

    Starts from the split into ``term`` and non-``term`` nodes and refines
    any block whose members send different mass into some block. With
    ``exact=True`` probabilities are compared as rationals (parsed from
    their shortest decimal representation) instead of within ``tol``.
    """
    labels, edges, term = _union(x, y)
    n = len(labels)
    block_of = np.where(term, 1, 0).astype(np.int64)
    if not term.any() or term.all():
        block_of[:] = 0
    n_blocks = int(block_of.max()) + 1
    if exact:
        fedges = [{d: Fraction(repr(p)) for d, p in out.items()} for out in edges]
    else:
        indptr = np.zeros(n + 1, dtype=np.int64)
        indices, data = [], []
        for s, out in enumerate(edges):
            for d, p in sorted(out.items()):
                indices.append(d)
                data.append(p)
            indptr[s + 1] = len(indices)
        indices = np.array(indices, dtype=np.int64)
        data = np.array(data, dtype=float)

    iterations = 0
    while True:
        iterations += 1
        if exact:
            rows = [tuple(sum((p for d, p in fedges[s].items() if block_of[d] == b), Fraction(0))
                          for b in range(n_blocks)) for s in range(n)]
            same = operator.eq
        else:
            rows = kernels.block_mass(indptr, indices, data, block_of, n_blocks)
            same = lambda u, v: bool(np.max(np.abs(u - v)) <= tol)  # noqa: E731
        new_block = np.empty(n, dtype=np.int64)
        count = 0
        for b in range(n_blocks):
            members = [s for s in range(n) if block_of[s] == b]
            for group in _split(members, rows, same):
                new_block[group] = count
                count += 1
        if count == n_blocks:
            break
        block_of, n_blocks = new_block, count
    blocks = [frozenset(labels[s] for s in range(n) if block_of[s] == b) for b in range(n_blocks)]
    mapping = {labels[s]: int(block_of[s]) for s in range(n)}
    ix, iy = ("X", x.names[x.initial]), ("Y", y.names[y.initial])
    part = Partition(blocks, mapping, iterations)
    return BisimResult(part.same_block(ix, iy), part, ix, iy)


def verify_property4(x: ProcessChain, y: ProcessChain, t_max=50, tol=1e-9):
    """Bisimulation verdict plus a numeric comparison of bounded reach for ``t <= t_max``."""
    bis = bisimulation_partition(x, y)
    px = bounded_reach_table(x, t_max)[:, x.initial]
    py = bounded_reach_table(y, t_max)[:, y.initial]
    diff = np.abs(px - py)
    mismatch = [int(k) for k in np.nonzero(diff > tol)[0]]
    return {
        "bisimilar": bis.bisimilar,
        "t_max": t_max,
        "max_abs_difference": float(diff.max()),
        "agree": not mismatch,
        "first_mismatch": mismatch[0] if mismatch else None,
        "x": px.tolist(),
        "y": py.tolist(),
    }


# -- criticality ------------------------------------------------------------------


@dataclass
class CriticalReport:
    critical: bool
    witness: list
    candidates: list = field(default_factory=list)


def _x_lookup(x: ProcessChain):
    return {k: s for s, k in enumerate(x.key) if k is not None}


def _positive_everywhere(y: ProcessChain, x: ProcessChain, nodes, xmap):
    """Every node has an action with positive value in both processes (None if unannotated)."""
    for s in nodes:
        vy = y.values.get(s)
        xs = xmap.get(y.key[s])
        vx = x.values.get(xs) if xs is not None else None
        if vy is None or vx is None:
            return None
        if not any(vy[a] > 0 and vx.get(a, 0.0) > 0 for a in vy):
            return False
    return True


def bottom_components(chain: ProcessChain, nodes=None):
    """Closed strongly connected components of the sub-chain reachable from the initial node."""
    nodes = chain.reachable() if nodes is None else nodes
    pos = {s: k for k, s in enumerate(nodes)}
    rows, cols = [], []
    for s in nodes:
        for d in chain.successors(s):
            rows.append(pos[s])
            cols.append(pos[d])
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(nodes), len(nodes)))
    n_comp, labels = csgraph.connected_components(graph, directed=True, connection="strong")
    comps = [[nodes[k] for k in range(len(nodes)) if labels[k] == c] for c in range(n_comp)]
    bottom = []
    for comp in comps:
        members = set(comp)
        if all(d in members for s in comp for d in chain.successors(s)):
            bottom.append(sorted(comp))
    return sorted(bottom)


def detect_critical(y: ProcessChain, x: ProcessChain) -> CriticalReport:
    """Search for a reachable, closed, non-terminal region where both processes see positive value.

    Closed regions entered with positive probability are the bottom strongly
    connected components of Y's reachable sub-chain, so those are the
    candidates.
    """
    xmap = _x_lookup(x)
    reach = set(y.reachable())
    candidates = []
    witness = []
    for comp in bottom_components(y):
        if any(y.term[s] for s in comp):
            continue
        cond1 = _positive_everywhere(y, x, comp, xmap)
        cond2 = any(s in reach for s in comp)
        entry = {"nodes": [y.names[s] for s in comp], "condition_1": cond1, "condition_2": cond2,
                 "condition_3": True}
        candidates.append(entry)
        if cond1 and cond2 and not witness:
            witness = entry["nodes"]
    return CriticalReport(bool(witness), witness, candidates)


# -- theorem premises ------------------------------------------------------------


def _state_mass(chain: ProcessChain, s):
    out = {}
    for d, p in chain.edges.get(s, {}).items():
        label = chain.state[d] if chain.state[d] is not None else chain.names[d]
        out[label] = out.get(label, 0.0) + p
    return out


def check_theorem_premises(x: ProcessChain, y: ProcessChain) -> dict:
    """Per-node premise checks over Y's reachable nodes, matched to X by common key.

    ``positive_in_x``: every action Y may choose has positive value in X.
    ``states_in_x``: every game state Y may move to, X may move to as well.
    ``subset_of_x``: Y's maximiser set is contained in X's.
    """
    xmap = _x_lookup(x)
    nodes = []
    agg = {"positive_in_x": True, "states_in_x": True, "subset_of_x": True}
    for s in y.reachable():
        if y.term[s]:
            continue
        xs = xmap.get(y.key[s])
        if xs is None:
            raise ValueError(f"Y node {y.names[s]} (key {y.key[s]}) has no counterpart in X")
        chosen_y = set(y.chosen.get(s, ()))
        chosen_x = set(x.chosen.get(xs, ()))
        vx = x.values.get(xs, {})
        eq10 = all(vx.get(a, 0.0) > 0 for a in chosen_y)
        mx = _state_mass(x, xs)
        eq11 = all(mx.get(st, 0.0) > 0 for st, p in _state_mass(y, s).items() if p > 0)
        eq12 = chosen_y <= chosen_x
        nodes.append({"node": y.names[s], "x_node": x.names[xs], "positive_in_x": eq10,
                      "states_in_x": eq11, "subset_of_x": eq12})
        agg["positive_in_x"] &= eq10
        agg["states_in_x"] &= eq11
        agg["subset_of_x"] &= eq12
    crit = detect_critical(y, x)
    uncritical = not crit.critical
    px = float(reach_probabilities(x)[x.initial])
    py = float(reach_probabilities(y)[y.initial])
    p_min, p_max = reach_bounds(x) if x.chosen else (px, px)
    return {
        "premises": agg,
        "uncritical": uncritical,
        "critical_witness": crit.witness,
        "certified": {
            "property1": uncritical and agg["positive_in_x"],
            "property2": uncritical and agg["states_in_x"],
            "property3": uncritical and agg["subset_of_x"],
        },
        "reach": {"x": px, "y": py, "x_min": p_min, "x_max": p_max},
        "observed": {
            "property1": (not px > 0) or py > 0,
            "property2": (not px >= 1 - 1e-12) or py >= 1 - 1e-12,
        },
        "nodes": nodes,
    }
