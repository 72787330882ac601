"""Desk-scale environments and the agent/environment interaction loop.

An environment draws a hidden parameter once, then answers each action with
an observation.  Rewards are part of the observation symbol; ``reward_values``
maps observation indices to reals.  The parameter is never handed to the
agent: agents only see ``act(rng)`` and ``observe(action, observation)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Protocol

import numpy as np

from ._numerics import normalize_log2
from .conjugate import check_alpha
from .errors import ValidationError
from .prob import check_distribution
from .solvers.bcr import MIXTURE, BcrAgent


class Agent(Protocol):
    def act(self, rng: np.random.Generator) -> int: ...

    def observe(self, action: int, observation: int) -> "Agent": ...


@dataclass(frozen=True)
class Environment:
    """Family of environments indexed by a hidden parameter.

    ``likelihoods(history, action)`` returns an ``(n_theta, n_obs)`` array
    of observation distributions, one row per parameter; ``history`` is the
    tuple of past ``(action, observation)`` pairs.
    """

    prior: np.ndarray
    n_actions: int
    n_obs: int
    likelihoods: Callable
    reward_values: np.ndarray
    name: str = "environment"

    def __post_init__(self):
        prior = check_distribution(self.prior, "environment prior")
        rewards = np.asarray(self.reward_values, float)
        if rewards.shape != (self.n_obs,):
            raise ValidationError(f"reward_values must have {self.n_obs} entries")
        prior.setflags(write=False)
        rewards.setflags(write=False)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "reward_values", rewards)

    @property
    def n_theta(self) -> int:
        return self.prior.size

    def observation_probs(self, theta: int, history, action: int) -> np.ndarray:
        return np.asarray(self.likelihoods(tuple(history), int(action)), float)[theta]

    def expected_rewards(self, theta: int, history) -> np.ndarray:
        """Expected immediate reward of every action under parameter ``theta``."""
        return np.array([
            self.observation_probs(theta, history, a) @ self.reward_values
            for a in range(self.n_actions)
        ])


def make_bernoulli_bandit(means, prior=None) -> Environment:
    """Bandit with ``P(o=1 | theta, arm) = means[theta][arm]``; reward is ``o``."""
    means = np.atleast_2d(np.asarray(means, dtype=float))
    if means.ndim != 2 or np.any(~np.isfinite(means)) or np.any((means < 0) | (means > 1)):
        raise ValidationError("arm means must be a (n_theta, n_arms) array in [0, 1]")
    n_theta, n_arms = means.shape
    prior = np.full(n_theta, 1.0 / n_theta) if prior is None else prior
    table = np.stack([1.0 - means, means], axis=-1)  # (theta, arm, o)
    table.setflags(write=False)
    return Environment(
        np.asarray(prior, float), n_arms, 2,
        lambda history, action: table[:, action, :],
        np.array([0.0, 1.0]),
        name="bernoulli-bandit",
    )


@dataclass(frozen=True)
class MdpEncoding:
    n_states: int
    n_rewards: int

    def encode(self, state: int, reward_symbol: int) -> int:
        return state * self.n_rewards + reward_symbol

    def decode(self, observation: int):
        return divmod(observation, self.n_rewards)


def make_finite_mdp(
    transitions,
    reward_map=None,
    reward_values=(0.0,),
    initial_state: int = 0,
    prior=None,
):
    """Finite MDP with parameter-dependent transitions.

    ``transitions`` has shape ``(n_theta, n_actions, n_states, n_states)``.
    ``reward_map[s, a, s']`` is an index into ``reward_values``.  Each
    observation encodes ``(next_state, reward_symbol)``; the current state is
    read back from the last observation.  Returns ``(environment, encoding)``.
    """
    transitions = np.asarray(transitions, dtype=float)
    if transitions.ndim == 3:
        transitions = transitions[None]
    if transitions.ndim != 4 or transitions.shape[-1] != transitions.shape[-2]:
        raise ValidationError("transitions must have shape (n_theta, A, S, S)")
    transitions = check_distribution(transitions, "transitions")
    n_theta, n_actions, n_states, _ = transitions.shape
    reward_values = np.asarray(reward_values, dtype=float)
    n_rewards = reward_values.size
    if reward_map is None:
        reward_map = np.zeros((n_states, n_actions, n_states), dtype=int)
    reward_map = np.asarray(reward_map, dtype=int)
    if reward_map.shape != (n_states, n_actions, n_states):
        raise ValidationError("reward_map must have shape (S, A, S)")
    if np.any((reward_map < 0) | (reward_map >= n_rewards)):
        raise ValidationError("reward_map refers to unknown reward symbols")
    if not 0 <= initial_state < n_states:
        raise ValidationError(f"initial_state {initial_state} out of range")
    enc = MdpEncoding(n_states, n_rewards)
    n_obs = n_states * n_rewards

    # obs_table[theta, s, a, o]
    obs_table = np.zeros((n_theta, n_states, n_actions, n_obs))
    for s in range(n_states):
        for a in range(n_actions):
            for s2 in range(n_states):
                obs_table[:, s, a, enc.encode(s2, reward_map[s, a, s2])] += transitions[:, a, s, s2]
    obs_table.setflags(write=False)

    def likelihoods(history, action):
        state = enc.decode(history[-1][1])[0] if history else initial_state
        return obs_table[:, state, action, :]

    prior = np.full(n_theta, 1.0 / n_theta) if prior is None else prior
    rewards = np.tile(reward_values, n_states)
    env = Environment(np.asarray(prior, float), n_actions, n_obs, likelihoods, rewards, name="finite-mdp")
    return env, enc


def greedy_controllers(env: Environment) -> Callable:
    """Per-parameter controllers that pick the best immediate expected reward.

    Optimal for bandits; a myopic baseline elsewhere.  Ties share mass evenly.
    """
    reward_values = env.reward_values

    def controllers(history):
        lik = np.stack([env.likelihoods(history, a) for a in range(env.n_actions)], axis=1)
        expected = lik @ reward_values  # (theta, action)
        best = np.isclose(expected, expected.max(axis=1, keepdims=True), rtol=0, atol=1e-12)
        return best / best.sum(axis=1, keepdims=True)

    return controllers


def soft_controllers(env: Environment, alpha: float) -> Callable:
    """Per-parameter controllers ``P(a | theta) ~ 2**(E[r | theta, a] / alpha)``.

    Uniform reference over actions; approaches ``greedy_controllers`` as
    ``alpha -> 0``.
    """
    alpha = check_alpha(alpha)
    reward_values = env.reward_values

    def controllers(history):
        lik = np.stack([env.likelihoods(history, a) for a in range(env.n_actions)], axis=1)
        p, _ = normalize_log2((lik @ reward_values) / alpha)
        return p

    return controllers


def bcr_agent_for(env: Environment, controllers: Optional[Callable] = None,
                  mode: str = MIXTURE, floor: float = 0.0) -> BcrAgent:
    """BCR agent that knows the environment family but not its parameter."""
    return BcrAgent(
        env.prior, controllers or greedy_controllers(env), env.likelihoods,
        floor=floor, mode=mode,
    )


@dataclass(frozen=True)
class FixedPolicyAgent:
    """Stateless agent drawing actions from a fixed distribution."""

    probs: tuple

    def act(self, rng: np.random.Generator) -> int:
        p = np.asarray(self.probs, float)
        return int(rng.choice(p.size, p=p / p.sum()))

    def observe(self, action: int, observation: int) -> "FixedPolicyAgent":
        return self


@dataclass(frozen=True)
class Step:
    action: int
    observation: int
    reward: float
    regret: float
    posterior: Optional[tuple] = None


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    theta: int
    steps: tuple
    cumulative_reward: float
    regret: float

    def __len__(self):
        return len(self.steps)

    @property
    def final_posterior(self):
        return self.steps[-1].posterior if self.steps else None


def _check_compatible(agent, env: Environment):
    if isinstance(agent, BcrAgent):
        ctl = np.asarray(agent.controllers(()), float)
        lik = np.asarray(agent.likelihoods((), 0), float)
        if ctl.shape[-1] != env.n_actions or lik.shape[-1] != env.n_obs:
            raise ValidationError(
                f"agent alphabets (|A|={ctl.shape[-1]}, |O|={lik.shape[-1]}) do not "
                f"match environment (|A|={env.n_actions}, |O|={env.n_obs})"
            )
    elif isinstance(agent, FixedPolicyAgent) and len(agent.probs) != env.n_actions:
        raise ValidationError(
            f"agent has {len(agent.probs)} actions; environment has {env.n_actions}"
        )


def run_interaction(agent, env: Environment, horizon: int, seed: int) -> TrialRecord:
    """Run one trial of the standard protocol.

    The parameter is drawn once from the environment prior; in every cycle
    the agent acts, the environment responds and the agent observes.  Regret
    is per-step pseudo-regret against an oracle that knows the parameter.
    """
    if horizon < 0:
        raise ValidationError("horizon must be non-negative")
    _check_compatible(agent, env)
    env_rng, agent_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    theta = int(env_rng.choice(env.n_theta, p=env.prior))
    history = ()
    steps = []
    total_reward = 0.0
    total_regret = 0.0
    for _ in range(horizon):
        action = agent.act(agent_rng)
        if not 0 <= action < env.n_actions:
            raise ValidationError(f"agent chose action {action}; environment has {env.n_actions}")
        probs = env.observation_probs(theta, history, action)
        if probs.size != env.n_obs:
            raise ValidationError("environment returned a distribution of the wrong size")
        observation = int(env_rng.choice(env.n_obs, p=probs))
        expected = env.expected_rewards(theta, history)
        regret = float(expected.max() - expected[action])
        reward = float(env.reward_values[observation])
        agent = agent.observe(action, observation)
        belief = getattr(agent, "belief", None)
        steps.append(Step(action, observation, reward, regret,
                          None if belief is None else tuple(float(b) for b in belief)))
        total_reward += reward
        total_regret += regret
        history = history + ((action, observation),)
    return TrialRecord(seed, theta, tuple(steps), total_reward, total_regret)
