"""Soft optimal control, adaptive estimation and the Bayesian control rule."""
from .bcr import BcrAgent, bcr_act, bcr_observe, make_bcr_agent
from .control import (
    ControlProblem,
    DeterministicPolicy,
    Policy,
    PolicyStats,
    dp_limit,
    evaluate_policy,
    solve_optimal_control,
)
from .estimation import EstimationProblem, batch_posterior, predictive_update

__all__ = [
    "BcrAgent",
    "ControlProblem",
    "DeterministicPolicy",
    "EstimationProblem",
    "Policy",
    "PolicyStats",
    "batch_posterior",
    "bcr_act",
    "bcr_observe",
    "dp_limit",
    "evaluate_policy",
    "make_bcr_agent",
    "predictive_update",
    "solve_optimal_control",
]
