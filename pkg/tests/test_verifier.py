import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hba import fixtures
from hba.verifier import (
    ChainFormatError,
    ProcessChain,
    QuotientError,
    bisimulation_partition,
    bounded_reach_table,
    build_chain,
    chain_from_edges,
    check_bounded_reach,
    check_theorem_premises,
    check_unbounded_reach,
    detect_critical,
    reach_bounds,
    reach_probabilities,
    success_rate,
    verify_property4,
)

from conftest import enumerate_paths_reach


def dyadic_chain(rng, n, n_term=1, denominator=8):
    """Random chain whose probabilities are multiples of 1/denominator (exact in floating point)."""
    names = [f"v{k}" for k in range(n)]
    term = names[n - n_term:]
    edges = {}
    for s in names[: n - n_term]:
        cuts = np.sort(rng.integers(0, denominator + 1, size=rng.integers(0, 3)))
        parts = np.diff(np.concatenate([[0], cuts, [denominator]]))
        targets = rng.choice(n, size=len(parts))
        out = {}
        for d, k in zip(targets, parts):
            if k:
                out[names[d]] = out.get(names[d], 0.0) + k / denominator
        edges[s] = out
    return chain_from_edges(edges, names[0], term)


def split_copy(chain, rng):
    """Duplicate every node and spread each edge's mass over the two copies (bisimilar by design).

    Split weights are quarters, so dyadic chains stay exact in floating point.
    """
    edges = {}
    for s in range(chain.n):
        for c in range(2):
            src = f"{chain.names[s]}.{c}"
            if chain.term[s]:
                continue
            out = {}
            for d, p in chain.edges[s].items():
                w = rng.integers(0, 5) / 4
                out[f"{chain.names[d]}.0"] = p * w
                out[f"{chain.names[d]}.1"] = p * (1 - w)
            edges[src] = out
    term = [f"{chain.names[s]}.{c}" for s in range(chain.n) if chain.term[s] for c in range(2)]
    return chain_from_edges(edges, f"{chain.names[chain.initial]}.0", term)


class TestChainFormat:
    def test_round_trip(self):
        spec, config = fixtures.ex6()
        chain = build_chain(spec, "Y", "sum", config)
        again = ProcessChain.from_text(chain.to_text())
        assert again.to_text() == chain.to_text()
        np.testing.assert_allclose(reach_probabilities(again), reach_probabilities(chain))

    def test_rejects_bad_rows(self):
        with pytest.raises(ChainFormatError):
            chain_from_edges({"a": {"b": 0.5}}, "a", ["b"])
        with pytest.raises(ChainFormatError):
            ProcessChain.from_text("init a\nterm b\na b 1.0\nb a 1.0\n")


class TestBoundedReach:
    @pytest.mark.parametrize("seed", range(40))
    def test_matches_path_enumeration_exactly(self, seed, backend):
        rng = np.random.default_rng(seed)
        chain = dyadic_chain(rng, int(rng.integers(1, 7)), n_term=int(rng.integers(0, 2)) or 1)
        table = bounded_reach_table(chain, 5)
        for t in range(6):
            assert table[t, chain.initial] == enumerate_paths_reach(chain, t)

    def test_comparators(self):
        coin, _ = fixtures.coin_chains()
        assert check_bounded_reach(coin, 1, 0.5, ">=").verdict
        assert not check_bounded_reach(coin, 1, 0.5, ">").verdict
        assert check_bounded_reach(coin, 3, 0.875).value == 0.875


class TestUnboundedReach:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_limit_of_bounded(self, seed):
        chain = dyadic_chain(np.random.default_rng(seed), 6, n_term=2)
        p = reach_probabilities(chain)
        table = bounded_reach_table(chain, 3000)
        np.testing.assert_allclose(p, table[-1], atol=1e-6)
        assert np.all(table[-1] <= p + 1e-12)

    def test_absorbing_non_terminal_cycle(self):
        chain = chain_from_edges({"a": {"b": 0.5, "done": 0.5}, "b": {"b": 1.0}}, "a", ["done"])
        np.testing.assert_allclose(reach_probabilities(chain)[chain.initial], 0.5)
        assert check_unbounded_reach(chain, 0.5).verdict
        assert not check_unbounded_reach(chain, 0.5, ">").verdict

    def test_success_rate_and_bounds(self):
        spec, config = fixtures.ex6()
        y = build_chain(spec, "Y", "sum", config, universe="all")
        for a in y.chosen[y.initial]:
            assert 0.0 <= success_rate(y, y.initial, a) <= 1.0
        lo, hi = reach_bounds(y)
        assert lo <= reach_probabilities(y)[y.initial] + 1e-12
        assert hi >= reach_probabilities(y)[y.initial] - 1e-12


def brute_force_coarsest(chain_a, chain_b):
    """Coarsest stable partition of the disjoint union by trying every partition (tiny chains only)."""
    nodes = [("A", s) for s in range(chain_a.n)] + [("B", s) for s in range(chain_b.n)]
    succ = {("A", s): {("A", d): Fraction(p).limit_denominator(1 << 20) for d, p in chain_a.edges[s].items()}
            for s in range(chain_a.n)}
    succ.update({("B", s): {("B", d): Fraction(p).limit_denominator(1 << 20) for d, p in chain_b.edges[s].items()}
                 for s in range(chain_b.n)})
    term = {("A", s): bool(chain_a.term[s]) for s in range(chain_a.n)}
    term.update({("B", s): bool(chain_b.term[s]) for s in range(chain_b.n)})

    def partitions(items):
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for p in partitions(rest):
            for k in range(len(p)):
                yield p[:k] + [[first] + p[k]] + p[k + 1:]
            yield [[first]] + p

    best = None
    for p in partitions(nodes):
        block = {v: k for k, blk in enumerate(p) for v in blk}
        if any(len({term[v] for v in blk}) > 1 for blk in p):
            continue
        stable = True
        for blk in p:
            sigs = set()
            for v in blk:
                mass = [Fraction(0)] * len(p)
                for d, q in succ[v].items():
                    mass[block[d]] += q
                sigs.add(tuple(mass))
            if len(sigs) > 1:
                stable = False
                break
        if stable and (best is None or len(p) < len(best)):
            best = p
    return best


class TestBisimulation:
    def test_reference_pairs(self):
        coin, copy = fixtures.coin_chains()
        assert bisimulation_partition(coin, copy).bisimilar
        one, two = fixtures.step_chains()
        assert not bisimulation_partition(one, two).bisimilar

    @pytest.mark.parametrize("seed", range(15))
    def test_split_copies_are_bisimilar_and_agree(self, seed, backend):
        rng = np.random.default_rng(seed)
        chain = dyadic_chain(rng, 5, n_term=1)
        copy = split_copy(chain, rng)
        report = verify_property4(chain, copy)
        assert report["bisimilar"]
        assert report["max_abs_difference"] <= 1e-9

    @pytest.mark.parametrize("seed", range(12))
    def test_partition_is_coarsest(self, seed):
        rng = np.random.default_rng(1000 + seed)
        a = dyadic_chain(rng, 3, n_term=1, denominator=4)
        b = dyadic_chain(rng, 3, n_term=1, denominator=4)
        result = bisimulation_partition(a, b)
        oracle = brute_force_coarsest(a, b)
        assert len(result.partition.blocks) == len(oracle)
        oracle_block = {v: k for k, blk in enumerate(oracle) for v in blk}
        assert result.bisimilar == (oracle_block[("A", a.initial)] == oracle_block[("B", b.initial)])

    @pytest.mark.parametrize("seed", range(10))
    def test_exact_mode_agrees(self, seed):
        rng = np.random.default_rng(2000 + seed)
        a = dyadic_chain(rng, 5)
        b = split_copy(a, rng) if seed % 2 else dyadic_chain(rng, 5)
        assert bisimulation_partition(a, b).bisimilar == bisimulation_partition(a, b, exact=True).bisimilar

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_bisimilar_implies_equal_bounded_reach(self, seed):
        rng = np.random.default_rng(seed)
        a, b = dyadic_chain(rng, 4), dyadic_chain(rng, 4)
        if bisimulation_partition(a, b).bisimilar:
            pa = bounded_reach_table(a, 20)[:, a.initial]
            pb = bounded_reach_table(b, 20)[:, b.initial]
            np.testing.assert_allclose(pa, pb, atol=1e-9)


def brute_force_critical(y, x):
    """Criticality by scanning every subset of Y's reachable non-terminal nodes."""
    reach = y.reachable()
    xmap = {k: s for s, k in enumerate(x.key)}
    cand = [s for s in reach if not y.term[s]]
    for r in range(1, len(cand) + 1):
        for subset in itertools.combinations(cand, r):
            members = set(subset)
            if not all(d in members for s in subset for d in y.successors(s)):
                continue
            connected = all(set(y.reachable(s)) >= members for s in subset)
            if not connected:
                continue
            if all(any(v > 0 and x.values[xmap[y.key[s]]].get(a, 0) > 0 for a, v in y.values[s].items())
                   for s in subset):
                return True
    return False


def annotated_chain(rng, n):
    chain = dyadic_chain(rng, n, n_term=1)
    chain.key = [f"k{s}" for s in range(chain.n)]
    chain.values = {s: {"a": float(rng.random() < 0.8), "b": float(rng.random() < 0.3)}
                    for s in range(chain.n) if not chain.term[s]}
    return chain


class TestCriticality:
    def test_example6(self):
        for critical in (False, True):
            spec, config = fixtures.ex6(critical=critical)
            y = build_chain(spec, "Y", "sum", config)
            x = build_chain(spec, "X", config=config)
            report = detect_critical(y, x)
            assert report.critical == critical
            if critical:
                assert len(report.witness) == 2

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_subset_oracle(self, seed):
        rng = np.random.default_rng(3000 + seed)
        y = annotated_chain(rng, int(rng.integers(2, 7)))
        assert detect_critical(y, y).critical == brute_force_critical(y, y)


class TestBuild:
    def test_ideal_process_needs_pure_delta(self):
        spec, config = fixtures.ex2()
        with pytest.raises(ValueError):
            build_chain(spec, "X", config=config)

    def test_example6_structure(self):
        spec, config = fixtures.ex6()
        y = build_chain(spec, "Y", "sum", config)
        x = build_chain(spec, "X", config=config)
        assert reach_probabilities(x)[x.initial] == pytest.approx(1.0)
        assert reach_probabilities(y)[y.initial] == pytest.approx(1.0)
        assert bounded_reach_table(y, 2)[2, y.initial] == pytest.approx(1.0)
        report = check_theorem_premises(x, y)
        assert report["uncritical"] and report["certified"]["property1"]

    def test_inconsistent_quotient_reported(self):
        spec, config = fixtures.ex6()
        with pytest.raises(QuotientError) as info:
            build_chain(spec, "Y", "sum", config, quotient=lambda sp, s, lm, um: s)
        assert info.value.first is not None and info.value.second is not None

    def test_deterministic_text(self):
        spec, config = fixtures.ex6(critical=True)
        assert build_chain(spec, "Y", "sum", config).to_text() == build_chain(spec, "Y", "sum", config).to_text()
