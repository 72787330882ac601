import numpy as np
import pytest

from freeutility.envs import (
    FixedPolicyAgent,
    bcr_agent_for,
    make_bernoulli_bandit,
    make_finite_mdp,
    run_interaction,
    soft_controllers,
)
from freeutility.errors import ValidationError

STAY = [[[1.0, 0.0], [0.0, 1.0]]]  # one action, identity
CYCLE = [[[0.0, 1.0], [1.0, 0.0]]]


def states(record, enc):
    return [enc.decode(s.observation)[0] for s in record.steps]


class TestBandit:
    def test_sure_arm(self):
        env = make_bernoulli_bandit([1.0, 0.0])
        rec = run_interaction(FixedPolicyAgent((1.0, 0.0)), env, 50, 0)
        assert all(s.observation == 1 for s in rec.steps)

    def test_fair_arms(self):
        env = make_bernoulli_bandit([0.5, 0.5])
        np.testing.assert_allclose(env.observation_probs(0, (), 1), [0.5, 0.5])

    def test_empirical_mean(self):
        env = make_bernoulli_bandit([0.8, 0.2])
        n = 10_000
        rec = run_interaction(FixedPolicyAgent((1.0, 0.0)), env, n, 3)
        mean = np.mean([s.reward for s in rec.steps])
        assert abs(mean - 0.8) < 3 * np.sqrt(0.16 / n)

    def test_invalid_means(self):
        with pytest.raises(ValidationError):
            make_bernoulli_bandit([1.5, 0.2])


class TestMdp:
    def test_identity(self):
        env, enc = make_finite_mdp(STAY, initial_state=1)
        rec = run_interaction(FixedPolicyAgent((1.0,)), env, 20, 0)
        assert set(states(rec, enc)) == {1}

    def test_cycle(self):
        env, enc = make_finite_mdp(CYCLE)
        rec = run_interaction(FixedPolicyAgent((1.0,)), env, 10, 0)
        assert states(rec, enc) == [1, 0] * 5

    def test_stationary_frequencies(self):
        P = np.array([[0.9, 0.1], [0.3, 0.7]])
        env, enc = make_finite_mdp([P])
        rec = run_interaction(FixedPolicyAgent((1.0,)), env, 10_000, 5)
        pi = np.array([0.5, 0.5])
        for _ in range(1000):  # power iteration
            pi = pi @ P
        visits = np.bincount(states(rec, enc), minlength=2) / 10_000
        assert np.max(np.abs(visits - pi)) < 0.02

    def test_non_stochastic(self):
        with pytest.raises(ValidationError):
            make_finite_mdp([[[0.5, 0.4], [0.5, 0.5]]])

    def test_reward_symbols(self):
        env, enc = make_finite_mdp(CYCLE, reward_map=[[[0, 1]], [[0, 0]]], reward_values=[0.0, 2.0])
        rec = run_interaction(FixedPolicyAgent((1.0,)), env, 4, 0)
        assert [s.reward for s in rec.steps] == [2.0, 0.0, 2.0, 0.0]


class TestInteraction:
    def test_horizon_zero(self):
        env = make_bernoulli_bandit([0.5, 0.5])
        rec = run_interaction(bcr_agent_for(env), env, 0, 1)
        assert len(rec) == 0 and rec.regret == 0.0

    def test_deterministic_record(self):
        env = make_bernoulli_bandit([1.0, 0.0])
        rec = run_interaction(FixedPolicyAgent((0.0, 1.0)), env, 5, 42)
        assert [(s.action, s.observation) for s in rec.steps] == [(1, 0)] * 5
        assert rec.regret == pytest.approx(5.0)

    def test_reproducible(self):
        env = make_bernoulli_bandit([[0.8, 0.2], [0.2, 0.8]])
        a = run_interaction(bcr_agent_for(env), env, 200, 11)
        b = run_interaction(bcr_agent_for(env), env, 200, 11)
        assert a == b

    def test_alphabet_mismatch(self):
        env = make_bernoulli_bandit([0.5, 0.5, 0.5])
        with pytest.raises(ValidationError):
            run_interaction(FixedPolicyAgent((0.5, 0.5)), env, 3, 0)

    def test_theta_hidden_from_agent(self):
        env = make_bernoulli_bandit([[0.8, 0.2], [0.2, 0.8]])
        agent = bcr_agent_for(env)
        assert not any("theta" in f for f in agent.__dataclass_fields__)

    def test_oracle_beats_agent_on_average(self):
        env = make_bernoulli_bandit([[0.8, 0.2], [0.2, 0.8]])
        agent = bcr_agent_for(env)
        rewards = np.array([run_interaction(agent, env, 50, s).cumulative_reward / 50 for s in range(100)])
        sem = rewards.std(ddof=1) / np.sqrt(rewards.size)
        assert 0.8 >= rewards.mean() - 3 * sem

    def test_soft_controllers_limit(self):
        env = make_bernoulli_bandit([[0.8, 0.2], [0.2, 0.8]])
        np.testing.assert_allclose(soft_controllers(env, 1e-6)(()), [[1, 0], [0, 1]], atol=1e-12)
        np.testing.assert_allclose(soft_controllers(env, 1e6)(()), 0.5, atol=1e-6)
