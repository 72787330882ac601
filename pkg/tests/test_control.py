import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freeutility import oracles
from freeutility.errors import CapacityError
from freeutility.gvp import gvp_objective, gvp_solve
from freeutility.solvers.control import (
    ControlProblem,
    as_gvp_problem,
    dp_limit,
    evaluate_policy,
    solve_optimal_control,
)


def tv(p, q):
    return 0.5 * float(np.max(np.sum(np.abs(p - q), axis=-1)))


def one_step(ra, alpha=1.0):
    return ControlProblem.build(1, 2, 2, lambda h, a: [0.5, 0.5],
                                reward_action=lambda h: ra, alpha=alpha)


def seeds():
    return st.integers(0, 2**32 - 1)


class TestExamples:
    def test_single_step(self):
        pol = solve_optimal_control(one_step([1.0, 0.0]))
        np.testing.assert_allclose(pol.probs(()), [2 / 3, 1 / 3])
        assert pol.value(()) == pytest.approx(np.log2(1.5))

    def test_dp_single_step(self):
        dp = dp_limit(one_step([1.0, 0.0]))
        assert dp.action(()) == 0 and dp.value(()) == 1.0

    def test_dp_zero_rewards(self, rng):
        p = oracles.random_control_problem(rng, 2)
        p = ControlProblem(2, 2, 2, p.environment, p.reference, (0, 0), (0, 0))
        dp = dp_limit(p)
        assert all(np.all(a == 0) for a in dp.actions)
        assert all(np.all(v == 0) for v in dp.values)

    def test_cold_and_hot(self, rng):
        p = oracles.random_control_problem(rng, 2, min_gap=0.1)
        dp = dp_limit(p)
        cold = solve_optimal_control(p.with_alpha(1e-6))
        hot = solve_optimal_control(p.with_alpha(1e6))
        for t in range(2):
            assert tv(cold.action_probs[t], dp.one_hot(t, 2)) < 1e-3
            assert tv(hot.action_probs[t], p.reference[t]) < 1e-3

    def test_capacity(self):
        with pytest.raises(CapacityError) as err:
            ControlProblem.build(12, 2, 2, lambda h, a: [0.5, 0.5])
        assert err.value.size > err.value.limit


class TestProperties:
    @settings(max_examples=20)
    @given(seeds())
    def test_dp_matches_enumeration(self, seed):
        p = oracles.random_control_problem(np.random.default_rng(seed), 2)
        best, _ = oracles.enumerate_deterministic_policies(p)
        assert dp_limit(p).value(()) == pytest.approx(best, abs=1e-12)

    @settings(max_examples=20)
    @given(seeds())
    def test_dp_against_expectimax(self, seed):
        p = oracles.random_control_problem(np.random.default_rng(seed), 2, n_actions=3)
        dp = dp_limit(p)
        for h, (value, best, _) in oracles.brute_force_values(p).items():
            assert dp.value(h) == pytest.approx(value, abs=1e-12)
            assert dp.action(h) == min(best)

    @settings(max_examples=20)
    @given(seeds())
    def test_sweep_tv_decreases(self, seed):
        p = oracles.random_control_problem(np.random.default_rng(seed), 2, min_gap=0.1)
        dp = dp_limit(p)
        dists = [max(tv(solve_optimal_control(p.with_alpha(a)).action_probs[t], dp.one_hot(t, 2))
                     for t in range(2)) for a in (1, 0.1, 0.01, 0.001)]
        assert all(b <= a + 1e-12 for a, b in zip(dists, dists[1:]))

    @settings(max_examples=20)
    @given(seeds())
    def test_value_identity_cold(self, seed):
        p = oracles.random_control_problem(np.random.default_rng(seed), 2, alpha=1e-3, min_gap=0.1)
        pol = solve_optimal_control(p)
        assert abs(p.alpha * pol.value(()) - dp_limit(p).value(())) < 0.01

    @given(seeds(), st.integers(1, 3), st.floats(0.05, 5))
    def test_matches_gvp_solve(self, seed, T, alpha):
        p = oracles.random_control_problem(np.random.default_rng(seed), T, alpha=alpha)
        pol = solve_optimal_control(p)
        g = as_gvp_problem(p)
        sol = gvp_solve(g)
        for t in range(T):
            assert np.max(np.abs(sol.conditionals[2 * t].probs - pol.action_probs[t])) < 1e-9
        stats = evaluate_policy(p, pol.action_probs)
        assert stats.objective == pytest.approx(alpha * pol.value(()), abs=1e-9)
        assert stats.objective == pytest.approx(gvp_objective(g.with_candidate(sol)), abs=1e-9)
