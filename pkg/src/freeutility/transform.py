"""Constrained transformation of a single-variable measure.

Adding target utilities ``u_star`` to a system with prior ``p_i`` changes its
free utility by ``E_{p_f}[u_star] - alpha * KL(p_f || p_i)``.  Maximizing
over ``p_f`` is the control problem; maximizing over ``p_i`` is estimation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._numerics import expect, kl_bits, log2sumexp2
from .conjugate import UtilityVector, check_alpha
from .errors import DegenerateError, ValidationError
from .prob import check_distribution


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, UtilityVector) else np.asarray(u, dtype=float)


@dataclass(frozen=True)
class TransformProblem:
    prior: np.ndarray
    target_utility: np.ndarray
    alpha: float

    def __post_init__(self):
        prior = check_distribution(self.prior, "prior")
        u = _values(self.target_utility)
        if u.shape != prior.shape:
            raise ValidationError(
                f"target utility shape {u.shape} does not match prior {prior.shape}"
            )
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "target_utility", u)
        object.__setattr__(self, "alpha", check_alpha(self.alpha))


def free_utility_difference(p_i, p_f, u_star, alpha) -> float:
    """Expected target utility under ``p_f`` minus ``alpha * KL(p_f || p_i)``.

    Returns ``-inf`` when ``p_f`` is not absolutely continuous w.r.t. ``p_i``.
    """
    alpha = check_alpha(alpha)
    p_i = np.asarray(p_i, dtype=float)
    p_f = np.asarray(p_f, dtype=float)
    kl = float(kl_bits(p_f, p_i))
    if np.isinf(kl):
        return -np.inf
    return float(expect(p_f, _values(u_star))) - alpha * kl


def log_partition_value(p_i, u_star, alpha) -> float:
    """Optimal objective ``alpha * log2 sum_x p_i(x) 2**(u_star(x)/alpha)``."""
    alpha = check_alpha(alpha)
    with np.errstate(divide="ignore"):
        logits = np.log2(np.asarray(p_i, dtype=float)) + _values(u_star) / alpha
    return float(alpha * log2sumexp2(logits))


def control_solution(problem: TransformProblem) -> np.ndarray:
    """``p_f(x)`` proportional to ``p_i(x) * 2**(u_star(x)/alpha)``."""
    with np.errstate(divide="ignore"):
        logits = np.log2(problem.prior) + problem.target_utility / problem.alpha
    if not np.any(np.isfinite(logits)):
        raise DegenerateError("prior support and finite-utility support are disjoint")
    z = log2sumexp2(logits)
    p = np.exp2(logits - z)
    return np.where(np.isneginf(logits), 0.0, p)


def estimation_solution(p_f) -> np.ndarray:
    # minimum relative entropy: the best initial measure is p_f itself
    return check_distribution(p_f, "p_f")
