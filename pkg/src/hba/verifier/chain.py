"""Finite labelled Markov chains induced by a controller in a game.

Text format (one record per line, ``#`` starts a comment)::

    init n0
    term n3 n4
    n0 n1 0.5               # edge: src dst prob
    node n0 s0 s0|(0,)      # optional: game state and common key
    value n0 L 0.95 1       # optional: E value of action L, 1 if a maximiser
    aedge n0 L n3 0.5       # optional: successor distribution if L is played

Only ``init``, ``term`` and plain edges are required. The annotations carry
what the premise and criticality checks need.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

EDGE_TOL = 1e-9


class ChainFormatError(ValueError):
    pass


@dataclass
class ProcessChain:
    names: list
    edges: dict
    initial: int
    term: np.ndarray
    tag: str = ""
    state: list = None
    key: list = None
    values: dict = field(default_factory=dict)
    chosen: dict = field(default_factory=dict)
    aedges: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.names)
        self.term = np.asarray(self.term, dtype=bool)
        if self.state is None:
            self.state = [None] * n
        if self.key is None:
            self.key = [None] * n
        self._index = {name: i for i, name in enumerate(self.names)}

    @property
    def n(self):
        return len(self.names)

    def index(self, name) -> int:
        return self._index[name]

    def validate(self, tol=EDGE_TOL):
        if len(self._index) != self.n:
            raise ChainFormatError("duplicate node names")
        for s in range(self.n):
            out = self.edges.get(s, {})
            if self.term[s]:
                if set(out) != {s} or abs(out[s] - 1.0) > tol:
                    raise ChainFormatError(f"term node {self.names[s]} must self-loop with probability 1")
                continue
            total = sum(out.values())
            if abs(total - 1.0) > tol:
                raise ChainFormatError(f"outgoing probabilities of {self.names[s]} sum to {total!r}")
            if any(p < 0 for p in out.values()):
                raise ChainFormatError(f"negative probability out of {self.names[s]}")
        return self

    def csr(self):
        indptr = [0]
        indices, data = [], []
        for s in range(self.n):
            for d, p in sorted(self.edges.get(s, {}).items()):
                indices.append(d)
                data.append(p)
            indptr.append(len(indices))
        return np.array(indptr, dtype=np.int64), np.array(indices, dtype=np.int64), np.array(data, dtype=float)

    def successors(self, s):
        return [d for d, p in self.edges.get(s, {}).items() if p > 0]

    def reachable(self, start=None) -> list:
        start = self.initial if start is None else start
        seen = {start}
        queue = deque([start])
        while queue:
            s = queue.popleft()
            for d in self.successors(s):
                if d not in seen:
                    seen.add(d)
                    queue.append(d)
        return sorted(seen)

    # -- text round trip ----------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"# process {self.tag}" if self.tag else "# process chain"]
        lines.append(f"init {self.names[self.initial]}")
        terms = [self.names[s] for s in range(self.n) if self.term[s]]
        lines.append("term " + " ".join(terms) if terms else "term")
        for s in range(self.n):
            if self.state[s] is not None:
                lines.append(f"node {self.names[s]} {self.state[s]} {self.key[s]}")
        for s in range(self.n):
            for d, p in sorted(self.edges.get(s, {}).items()):
                lines.append(f"{self.names[s]} {self.names[d]} {float(p)!r}")
        for s in sorted(self.values):
            for a, v in self.values[s].items():
                flag = 1 if a in self.chosen.get(s, ()) else 0
                lines.append(f"value {self.names[s]} {a} {float(v)!r} {flag}")
        for s in sorted(self.aedges):
            for a, dist in self.aedges[s].items():
                for d, p in sorted(dist.items()):
                    lines.append(f"aedge {self.names[s]} {a} {self.names[d]} {float(p)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, tag="") -> ProcessChain:
        names, index = [], {}

        def node(name):
            if name not in index:
                index[name] = len(names)
                names.append(name)
            return index[name]

        init = None
        terms = set()
        edges, values, chosen, aedges, labels = {}, {}, {}, {}, {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            if not tag and raw.startswith("# process ") and raw[10:].strip() != "chain":
                tag = raw[10:].strip()
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            head = parts[0]
            try:
                if head == "init":
                    init = node(parts[1])
                elif head == "term":
                    terms.update(node(p) for p in parts[1:])
                elif head == "node":
                    labels[node(parts[1])] = (parts[2], parts[3] if len(parts) > 3 else parts[2])
                elif head == "value":
                    s = node(parts[1])
                    values.setdefault(s, {})[parts[2]] = float(parts[3])
                    if len(parts) > 4 and parts[4] == "1":
                        chosen.setdefault(s, []).append(parts[2])
                elif head == "aedge":
                    s, d = node(parts[1]), node(parts[3])
                    aedges.setdefault(s, {}).setdefault(parts[2], {})[d] = float(parts[4])
                elif len(parts) == 3:
                    s, d = node(parts[0]), node(parts[1])
                    edges.setdefault(s, {})
                    edges[s][d] = edges[s].get(d, 0.0) + float(parts[2])
                else:
                    raise ChainFormatError(f"line {lineno}: cannot parse {raw!r}")
            except (IndexError, ValueError) as exc:
                raise ChainFormatError(f"line {lineno}: {exc}") from None
        if init is None:
            raise ChainFormatError("missing 'init' line")
        term = np.zeros(len(names), dtype=bool)
        term[list(terms)] = True
        for s in terms:
            edges.setdefault(s, {s: 1.0})
        state = [labels.get(s, (None, None))[0] for s in range(len(names))]
        key = [labels.get(s, (None, None))[1] for s in range(len(names))]
        chain = cls(names, edges, init, term, tag=tag, state=state, key=key, values=values,
                    chosen={s: tuple(v) for s, v in chosen.items()}, aedges=aedges)
        return chain.validate()


def chain_from_edges(edges, initial, term, tag="") -> ProcessChain:
    """Build a chain from ``{src: {dst: p}}`` keyed by node names; term nodes get self-loops."""
    names = []
    for s in [initial, *edges, *(d for out in edges.values() for d in out), *term]:
        if s not in names:
            names.append(s)
    idx = {n: i for i, n in enumerate(names)}
    e = {idx[s]: {idx[d]: float(p) for d, p in out.items()} for s, out in edges.items()}
    tmask = np.zeros(len(names), dtype=bool)
    for s in term:
        tmask[idx[s]] = True
        e[idx[s]] = {idx[s]: 1.0}
    return ProcessChain(names, e, idx[initial], tmask, tag=tag).validate()
