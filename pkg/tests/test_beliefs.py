import itertools
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hba import fixtures
from hba.beliefs import (
    BeliefState,
    average_overlap,
    average_stochasticity,
    combined_posterior,
    correlated_posterior,
    k_step_prediction_prob,
    marginal_action_prob,
    posterior_error,
    posterior_per_player,
    product_likelihood,
    replay_beliefs,
    sum_likelihood,
    true_prediction_prob,
)
from hba.game import run_episode
from hba.planner import UniformController, hba_policy
from hba.strategies import MemoryTracker

from conftest import random_table_game


def _run(spec, kind, steps, seed):
    ctrl = hba_policy(spec, kind, fixtures.build(spec.name)[1] if spec.name.startswith("ex") else None)
    log = run_episode(spec, ctrl, steps, np.random.default_rng(seed))
    return ctrl, log


class TestPosteriorQuotient:
    def test_hand_example(self):
        post, degenerate = posterior_per_player([0.2, 0.6], [0.5, 0.5])
        np.testing.assert_allclose(post, [0.25, 0.75])
        assert not degenerate

    def test_zero_mass_falls_back_to_prior(self):
        post, degenerate = posterior_per_player([0.0, 0.0], [0.3, 0.7])
        np.testing.assert_array_equal(post, [0.3, 0.7])
        assert degenerate

    def test_empty_history_is_prior(self):
        for kind in ("product", "sum", "correlated"):
            b = BeliefState(kind, [np.array([0.2, 0.8])])
            np.testing.assert_allclose(b.posterior(0), [0.2, 0.8])
            assert not b.degenerate

    @settings(max_examples=60, deadline=None)
    @given(st.sampled_from(["product", "sum", "correlated"]), st.integers(0, 10_000), st.integers(1, 30))
    def test_normalised_and_zero_prior_preserved(self, kind, seed, steps):
        rng = np.random.default_rng(seed)
        prior = rng.dirichlet(np.ones(3))
        prior[rng.integers(3)] = 0.0
        prior /= prior.sum()
        b = BeliefState(kind, [prior, np.array([0.5, 0.5])])
        for _ in range(steps):
            b.update([rng.random(3) * (rng.random(3) < 0.8), rng.random(2)])
        for pos in range(2):
            np.testing.assert_allclose(b.posterior(pos).sum(), 1.0)
            assert np.all(b.posterior(pos) >= 0)
        np.testing.assert_allclose(b.joint().sum(), 1.0)
        assert np.all(b.posterior(0)[prior == 0] == 0)

    def test_combined_is_outer_product(self):
        joint = combined_posterior([np.array([0.25, 0.75]), np.array([0.5, 0.5])])
        np.testing.assert_allclose(joint, [[0.125, 0.125], [0.375, 0.375]])


class TestAgainstHistoryOracles:
    @pytest.mark.parametrize("seed", range(4))
    def test_incremental_matches_replay(self, seed):
        spec = random_table_game(np.random.default_rng(seed), n_states=5, n_actions=3, n_types=3, stateful=True)
        log = run_episode(spec, UniformController(spec), 25, np.random.default_rng(seed))
        space = spec.user[0]
        prior = spec.priors[0]
        for kind, lik in (("product", product_likelihood), ("sum", sum_likelihood)):
            b = BeliefState(kind, spec.priors, spec.joint_prior)
            tracker = MemoryTracker(space)
            for t in range(log.history.t):
                s, a, s2 = log.history.states[t], log.history.actions[t], log.history.states[t + 1]
                b.update([np.array([tracker.distribution(x, s)[a[1]] for x in space])])
                tracker.advance(s, a, s2)
            expected, _ = posterior_per_player([lik(log.history, x) for x in space], prior)
            np.testing.assert_allclose(b.posterior(0), expected, atol=1e-12)

    def test_correlated_matches_replay(self):
        spec, config = fixtures.ex4()
        ctrl = hba_policy(spec, "correlated", config)
        log = run_episode(spec, ctrl, 200, np.random.default_rng(0))
        expected, _ = correlated_posterior(log.history, spec.user, spec.joint_prior)
        np.testing.assert_allclose(ctrl.beliefs.joint(), expected, atol=1e-12)

    def test_product_underflow_safe(self):
        b = BeliefState("product", [np.array([0.5, 0.5])])
        for _ in range(5000):
            b.update([np.array([0.1, 0.09])])
        assert np.all(np.isfinite(b.posterior(0)))
        assert b.posterior(0)[0] > 0.999


class TestDegenerateEvent:
    def test_event_recorded_once_and_logged(self, caplog):
        b = BeliefState("product", [np.array([0.5, 0.5])])
        b.update([np.array([1.0, 0.0])])
        with caplog.at_level(logging.WARNING, logger="hba.beliefs"):
            b.update([np.array([0.0, 1.0])])
            b.update([np.array([0.0, 1.0])])
        assert b.degenerate
        np.testing.assert_array_equal(b.posterior(0), [0.5, 0.5])
        assert [e["event"] for e in b.events] == ["posterior-degenerate"]
        assert b.events[0]["t"] == 2
        assert len(caplog.records) == 1


class TestDiagnostics:
    def test_disjoint_deterministic_types_have_zero_overlap(self):
        spec, config = fixtures.ex2()
        log = run_episode(spec, hba_policy(spec, "sum", config), 200, np.random.default_rng(0))
        assert average_overlap(log.history, spec.user[0]) == 0.0
        assert average_stochasticity(log.history, spec.user[0]) == 0.0

    def test_example3_overlap_positive(self):
        spec, config = fixtures.ex3()
        log = run_episode(spec, hba_policy(spec, "sum", config), 200, np.random.default_rng(0))
        assert average_overlap(log.history, spec.user[0]) > 0.0
        assert average_stochasticity(log.history, spec.user[0]) > 0.0

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_ranges(self, seed):
        spec = random_table_game(np.random.default_rng(seed), n_states=4, n_actions=3, n_types=3, n_terminals=0)
        log = run_episode(spec, UniformController(spec), 20, np.random.default_rng(seed))
        assert 0.0 <= average_overlap(log.history, spec.user[0]) <= 1.0
        assert 0.0 <= average_stochasticity(log.history, spec.user[0]) <= 1.0 + 1e-12

    def test_preconditions(self):
        spec, _ = fixtures.ex2()
        log = run_episode(spec, UniformController(spec), 0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            average_overlap(log.history, spec.user[0])

    def test_marginal_and_error(self):
        dists = np.array([[1.0, 0.0], [0.5, 0.5]])
        np.testing.assert_allclose(marginal_action_prob(dists, [0.5, 0.5]), [0.75, 0.25])
        assert posterior_error([0.6, 0.4], [0.5, 0.5]) == pytest.approx(0.2)


class TestPredictions:
    def test_suffix_probabilities_sum_to_one(self):
        spec = random_table_game(np.random.default_rng(7), n_states=3, n_actions=2, n_types=2, n_terminals=0,
                                 stateful=True)
        mems = {s.key: s.initial_memory() for s in spec.user[0]}
        post = np.array([0.3, 0.7])
        for a_i in range(2):
            total = 0.0
            for a_j, s2, b_j, s3 in itertools.product(range(2), range(3), range(2), range(3)):
                suffix = [((a_i, a_j), s2), ((a_i, b_j), s3)]
                total += k_step_prediction_prob(spec, post, mems, 0, suffix)
            assert total == pytest.approx(1.0)

    def test_point_posterior_on_pure_delta_matches_truth(self):
        spec = random_table_game(np.random.default_rng(8), n_states=3, n_actions=2, n_types=2, n_terminals=0,
                                 pure=True)
        k = spec.delta_profiles[0][0]
        post = np.eye(2)[k]
        mems = {s.key: s.initial_memory() for s in spec.user[0]}
        suffix = [((0, 1), 2), ((1, 0), 1), ((0, 0), 0)]
        assert k_step_prediction_prob(spec, post, mems, 0, suffix) == pytest.approx(
            true_prediction_prob(spec, mems, 0, suffix))


class TestReplay:
    @pytest.mark.parametrize("kind", ["product", "sum", "correlated"])
    def test_replay_matches_online(self, kind):
        spec, config = fixtures.ex4()
        ctrl = hba_policy(spec, kind, config)
        log = run_episode(spec, ctrl, 300, np.random.default_rng(1))
        np.testing.assert_allclose(replay_beliefs(spec, log.history, kind).joint(), ctrl.beliefs.joint(), atol=1e-12)
