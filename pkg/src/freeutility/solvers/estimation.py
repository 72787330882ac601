"""Adaptive estimation of an unknown symbol source from a finite family."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import ValidationError, ZeroProbabilityError
from ..gvp import GvpProblem, UtilityTable
from ..prob import (
    Alphabet,
    CausalModel,
    DistTable,
    IOType,
    VPMode,
    VariableSpec,
    check_distribution,
)


@dataclass(frozen=True)
class EstimationProblem:
    """Prior ``w(theta)`` and source likelihoods ``P(o | theta, o_<n)``.

    ``likelihood(history)`` returns a ``(n_theta, n_obs)`` array whose rows
    are the next-symbol distributions of each source.
    """

    prior: np.ndarray
    likelihood: Callable
    n_obs: int
    horizon: int

    def __post_init__(self):
        prior = check_distribution(self.prior, "prior")
        prior.setflags(write=False)
        object.__setattr__(self, "prior", prior)

    @property
    def n_theta(self) -> int:
        return self.prior.size

    @classmethod
    def iid(cls, prior, probs, horizon: int) -> "EstimationProblem":
        """Each source emits i.i.d. symbols with distribution ``probs[theta]``."""
        probs = check_distribution(probs, "source probabilities")
        if probs.ndim != 2 or probs.shape[0] != np.size(prior):
            raise ValidationError("probs must have shape (n_theta, n_obs)")
        probs.setflags(write=False)
        return cls(np.asarray(prior, float), lambda history: probs, probs.shape[1], horizon)

    def source_probs(self, history) -> np.ndarray:
        lik = check_distribution(self.likelihood(tuple(history)), "likelihood")
        if lik.shape != (self.n_theta, self.n_obs):
            raise ValidationError(
                f"likelihood returned shape {lik.shape}, expected {(self.n_theta, self.n_obs)}"
            )
        return lik


def _check_history(problem, history):
    history = tuple(int(o) for o in history)
    if any(not 0 <= o < problem.n_obs for o in history):
        raise ValidationError(f"observation out of range in {history}")
    return history


def predictive_update(problem: EstimationProblem, history=()):
    """Sequential Bayes: posterior over sources and next-symbol predictive."""
    history = _check_history(problem, history)
    posterior = problem.prior.copy()
    for n, o in enumerate(history):
        posterior = posterior * problem.source_probs(history[:n])[:, o]
        z = posterior.sum()
        if z <= 0:
            raise ZeroProbabilityError(f"history {history[: n + 1]} has probability zero")
        posterior /= z
    predictive = posterior @ problem.source_probs(history)
    return posterior, predictive


def batch_posterior(problem: EstimationProblem, history=()) -> np.ndarray:
    """Posterior from the full likelihood product in one pass."""
    history = _check_history(problem, history)
    log_w = np.log(problem.prior, where=problem.prior > 0, out=np.full(problem.n_theta, -np.inf))
    for n, o in enumerate(history):
        lik = problem.source_probs(history[:n])[:, o]
        with np.errstate(divide="ignore"):
            log_w = log_w + np.log(lik)
    if not np.any(np.isfinite(log_w)):
        raise ZeroProbabilityError(f"history {history} has probability zero")
    w = np.exp(log_w - log_w.max())
    return w / w.sum()


def as_gvp_problem(problem: EstimationProblem) -> GvpProblem:
    """Sequence form: an undisclosed source index followed by disclosed symbols."""
    K, O, N = problem.n_theta, problem.n_obs, problem.horizon
    theta = VariableSpec("theta", Alphabet.of_size(K), IOType.UNDISCLOSED_INPUT, VPMode.ESTIMATED)
    variables = [theta]
    tables = [DistTable(theta, problem.prior)]
    for n in range(N):
        var = VariableSpec(f"o{n + 1}", Alphabet.of_size(O), IOType.DISCLOSED_INPUT, VPMode.ESTIMATED)
        arr = np.zeros((K,) + (O,) * n + (O,))
        for hist in np.ndindex(*((O,) * n)):
            arr[(slice(None),) + hist] = problem.source_probs(hist)
        variables.append(var)
        tables.append(DistTable(var, arr))
    variables = tuple(variables)
    return GvpProblem(CausalModel(variables, tuple(tables)), UtilityTable.zeros(variables), 1.0)
