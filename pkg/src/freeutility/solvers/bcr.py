"""Bayesian control rule: act by sampling the posterior mixture of controllers.

The agent's own actions are causal updates, so only observation likelihoods
move the posterior.  The agent is an immutable value; ``bcr_observe``
returns a new one.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from ..errors import ValidationError, ZeroProbabilityError
from ..prob import check_distribution

MIXTURE = "mixture"
POSTERIOR_SAMPLE = "posterior-sample"


@dataclass(frozen=True)
class BcrAgent:
    """Posterior over parameters plus per-parameter controllers and likelihoods.

    ``controllers(history)`` returns an ``(n_theta, n_actions)`` array and
    ``likelihoods(history, action)`` an ``(n_theta, n_obs)`` array, where
    ``history`` is the tuple of past ``(action, observation)`` pairs.
    """

    posterior: np.ndarray
    controllers: Callable
    likelihoods: Callable
    history: tuple = ()
    floor: float = 0.0
    mode: str = MIXTURE

    def __post_init__(self):
        w = check_distribution(self.posterior, "posterior")
        w.setflags(write=False)
        object.__setattr__(self, "posterior", w)
        if self.mode not in (MIXTURE, POSTERIOR_SAMPLE):
            raise ValidationError(f"unknown sampling mode {self.mode!r}")
        if not 0.0 <= self.floor < 1.0:
            raise ValidationError(f"likelihood floor must lie in [0, 1), got {self.floor}")

    @property
    def n_theta(self) -> int:
        return self.posterior.size

    def action_distribution(self) -> np.ndarray:
        """Predictive action law ``sum_theta w(theta) P(a | theta, history)``."""
        return self.posterior @ np.asarray(self.controllers(self.history), float)

    # agent protocol used by envs.run_interaction
    def act(self, rng: np.random.Generator) -> int:
        return bcr_act(self, rng, self.mode)

    def observe(self, action: int, observation: int) -> "BcrAgent":
        return bcr_observe(self, action, observation)

    @property
    def belief(self) -> np.ndarray:
        return self.posterior


def bcr_act(agent: BcrAgent, rng: np.random.Generator, mode: str = MIXTURE) -> int:
    """Sample an action from the posterior predictive.

    ``mixture`` draws from the mixed action law directly; ``posterior-sample``
    first draws a parameter and then an action from its controller.  Both
    have the same distribution.
    """
    if mode == MIXTURE:
        p = agent.action_distribution()
        return int(rng.choice(p.size, p=p / p.sum()))
    if mode == POSTERIOR_SAMPLE:
        theta = int(rng.choice(agent.n_theta, p=agent.posterior))
        p = np.asarray(agent.controllers(agent.history), float)[theta]
        return int(rng.choice(p.size, p=p / p.sum()))
    raise ValidationError(f"unknown sampling mode {mode!r}")


def bcr_observe(agent: BcrAgent, action: int, observation: int) -> BcrAgent:
    """Reweight by ``P(o | theta, history, action)`` only and log the pair."""
    lik = np.asarray(agent.likelihoods(agent.history, int(action)), float)
    if lik.ndim != 2 or lik.shape[0] != agent.n_theta:
        raise ValidationError(f"likelihoods returned shape {lik.shape}")
    if not 0 <= observation < lik.shape[1]:
        raise ValidationError(f"observation {observation} out of range")
    factor = lik[:, observation]
    if agent.floor > 0:
        factor = np.maximum(factor, agent.floor)
    w = agent.posterior * factor
    z = w.sum()
    if z <= 0:
        raise ZeroProbabilityError(
            f"observation {observation} after action {action} is impossible under "
            "every parameter in the posterior support"
        )
    return replace(
        agent,
        posterior=w / z,
        history=agent.history + ((int(action), int(observation)),),
    )


def make_bcr_agent(prior, controllers: Callable, likelihoods: Callable, **kwargs) -> BcrAgent:
    return BcrAgent(np.asarray(prior, float), controllers, likelihoods, **kwargs)
