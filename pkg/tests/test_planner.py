import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hba import fixtures
from hba.game import run_episode
from hba.planner import (
    OracleController,
    PlanConfig,
    Planner,
    action_value,
    expected_payoff,
    hba_policy,
    plan_result,
    select_action,
)

from conftest import collapsed_mdp, optimal_reach, policy_enumeration_reach, random_table_game, tree_value


def _initial_mems(spec):
    return {s.key: s.initial_memory() for space in spec.user for s in space}


class TestPlanConfig:
    @pytest.mark.parametrize("kwargs", [{"gamma": 1.5}, {"gamma": -0.1}, {"horizon": -1}, {"horizon": 0}])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            PlanConfig(**kwargs)


class TestRecursionOracles:
    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("gamma", [1.0, 0.9])
    def test_matches_path_tree_with_stateful_types(self, seed, gamma):
        rng = np.random.default_rng(seed)
        spec = random_table_game(rng, n_states=4, n_actions=2, n_types=3, stateful=True)
        post = rng.dirichlet(np.ones(3))
        mems = _initial_mems(spec)
        for h in range(1, 5):
            config = PlanConfig(gamma=gamma, horizon=h)
            planner = Planner(spec, spec.user, post, config)
            got = planner.expected_payoffs(0, planner.pack(mems))
            np.testing.assert_allclose(got, tree_value(spec, post, 0, mems, 0, h, gamma), atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_collapsed_value_iteration(self, seed):
        rng = np.random.default_rng(100 + seed)
        spec = random_table_game(rng, n_states=6, n_actions=3, n_types=2, n_terminals=2)
        post = rng.dirichlet(np.ones(2))
        P = collapsed_mdp(spec, post)
        mems = _initial_mems(spec)
        for h in (1, 2, 4, 6):
            q = optimal_reach(P, spec.terminals, h)
            for s in range(4):
                values = [expected_payoff(spec, spec.user, post, mems, s, a, PlanConfig(horizon=h)) for a in range(3)]
                np.testing.assert_allclose(values, q[s], atol=1e-12)

    def test_matches_policy_enumeration(self):
        rng = np.random.default_rng(9)
        spec = random_table_game(rng, n_states=3, n_actions=2, n_types=2, n_terminals=1)
        post = np.array([0.4, 0.6])
        P = collapsed_mdp(spec, post)
        mems = _initial_mems(spec)
        for h in (1, 2, 3):
            planner = Planner(spec, spec.user, post, PlanConfig(horizon=h))
            np.testing.assert_allclose(planner.expected_payoffs(0, planner.pack(mems)),
                                       policy_enumeration_reach(P, spec.terminals, 0, h), atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 4))
    def test_values_are_probabilities_and_monotone_in_horizon(self, seed, h):
        rng = np.random.default_rng(seed)
        spec = random_table_game(rng, n_states=4, n_actions=2, n_types=2, stateful=True)
        post = rng.dirichlet(np.ones(2))
        mems = _initial_mems(spec)
        v = Planner(spec, spec.user, post, PlanConfig(horizon=h)).expected_payoffs(0, tuple(mems.values()))
        w = Planner(spec, spec.user, post, PlanConfig(horizon=h + 1)).expected_payoffs(0, tuple(mems.values()))
        assert np.all((v >= -1e-12) & (v <= 1 + 1e-12))
        assert np.all(w >= v - 1e-12)


class TestPlannerEdges:
    def test_leaf_depth_and_terminal_are_zero(self):
        spec, _ = fixtures.ex6()
        mems = _initial_mems(spec)
        done = spec.states.index("done")
        p = Planner(spec, spec.user, spec.joint_prior, PlanConfig(horizon=3))
        np.testing.assert_array_equal(p.expected_payoffs(0, p.pack(mems), depth=3), 0.0)
        np.testing.assert_array_equal(p.expected_payoffs(done, p.pack(mems)), 0.0)

    def test_action_value_is_entry_probability_at_last_layer(self):
        spec, _ = fixtures.ex6()
        mems = _initial_mems(spec)
        done = spec.states.index("done")
        for joint in spec.joint_actions:
            v = action_value(spec, spec.user, spec.joint_prior, mems, 0, joint, PlanConfig(horizon=1))
            assert v == pytest.approx(spec.row(0, joint)[done])

    def test_ties_and_selection(self):
        plan = plan_result([0.5, 0.5 - 1e-13, 0.2])
        assert plan.maximisers == (0, 1)
        np.testing.assert_allclose(plan.distribution, [0.5, 0.5, 0.0])
        rng = np.random.default_rng(0)
        picks = [select_action(plan, rng)[0] for _ in range(2000)]
        assert set(picks) == {0, 1}
        assert abs(np.mean(picks) - 0.5) < 0.05


class TestControllers:
    def test_oracle_terminates_example6_in_one_step(self):
        for critical in (False, True):
            spec, config = fixtures.ex6(critical=critical)
            for seed in range(5):
                log = run_episode(spec, OracleController(spec, config), 20, np.random.default_rng(seed))
                assert log.terminated and len(log.steps) == 1

    def test_empty_user_space_rejected(self):
        spec, config = fixtures.ex2()
        spec.user = [[]]
        with pytest.raises(ValueError):
            hba_policy(spec, "sum", config)

    def test_controller_reset_clears_state(self):
        spec, config = fixtures.ex3()
        ctrl = hba_policy(spec, "sum", config)
        run_episode(spec, ctrl, 20, np.random.default_rng(0))
        ctrl.reset()
        assert ctrl.beliefs.t == 0
        np.testing.assert_allclose(ctrl.beliefs.posterior(0), spec.priors[0])
