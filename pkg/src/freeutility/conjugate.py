"""Conversion between probability measures and conjugate utilities.

Utilities and probabilities are tied by ``U(x) = alpha * log2 P(x) + beta``;
the inverse map is the Gibbs measure ``P(x) = 2**(U(x)/alpha) / Z``.  All
logarithms are base 2, so utility is measured in ``alpha`` units per bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._numerics import LN2, expect, log2sumexp2, plogp
from .errors import DegenerateError, ParameterError, ValidationError
from .prob import VariableSpec, check_distribution

CONJUGACY_TOL = 1e-9


def check_alpha(alpha) -> float:
    alpha = float(alpha)
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ParameterError(f"temperature must be positive and finite, got {alpha}")
    return alpha


@dataclass(frozen=True)
class UtilityVector:
    """Utilities over one alphabet; ``-inf`` marks impossible symbols."""

    values: np.ndarray
    beta: float = 0.0
    variable: Optional[VariableSpec] = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1:
            raise ValidationError(f"utility vector must be 1-D, got shape {values.shape}")
        if np.any(np.isnan(values)) or np.any(np.isposinf(values)):
            raise ValidationError("utilities must be finite or -inf")
        if not np.any(np.isfinite(values)):
            raise DegenerateError("all utilities are -inf")
        if not math.isfinite(self.beta):
            raise ValidationError(f"beta must be finite, got {self.beta}")
        if self.variable is not None and self.variable.size != values.size:
            raise ValidationError("utility vector does not match its variable's alphabet")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "beta", float(self.beta))

    def __len__(self):
        return self.values.size

    @property
    def energy(self) -> np.ndarray:
        return -self.values


@dataclass(frozen=True)
class FreeUtilityReport:
    expected_utility: float
    entropy_term: float
    total: float


def _as_utility(u) -> np.ndarray:
    if isinstance(u, UtilityVector):
        return u.values
    return np.asarray(u, dtype=float)


def utility_from_measure(p, alpha, beta: float = 0.0) -> UtilityVector:
    """``U = alpha * log2 p + beta``; zero probabilities map to ``-inf``."""
    alpha = check_alpha(alpha)
    p = check_distribution(p, "measure")
    with np.errstate(divide="ignore"):
        values = alpha * np.log2(p) + beta
    return UtilityVector(values, beta)


def _log2_partition(u, alpha):
    return log2sumexp2(u / alpha)


def measure_from_utility(u, alpha):
    """Gibbs measure of ``u`` at temperature ``alpha``.

    Returns ``(p, beta)`` with ``beta = alpha * log2 Z`` so that
    ``utility_from_measure(p, alpha, beta)`` reproduces ``u`` on the support.
    """
    alpha = check_alpha(alpha)
    values = _as_utility(u)
    if not np.any(np.isfinite(values)):
        raise DegenerateError("all utilities are -inf")
    log_z = _log2_partition(values, alpha)
    with np.errstate(invalid="ignore"):
        p = np.exp2(values / alpha - log_z)
    p = np.where(np.isneginf(values), 0.0, p)
    return p, float(alpha * log_z)


def free_utility(p, u, alpha) -> FreeUtilityReport:
    """Expected utility plus ``alpha`` times the entropy of ``p`` (bits)."""
    alpha = check_alpha(alpha)
    p = np.asarray(p, dtype=float)
    values = _as_utility(u)
    eu = float(expect(p, values))
    ent = float(-alpha * np.sum(plogp(p)))
    return FreeUtilityReport(eu, ent, eu + ent)


def verify_conjugacy(p, u, alpha, tol: float = CONJUGACY_TOL):
    """Check that ``u - alpha*log2 p`` is constant on the support of ``p``.

    Off the support ``u`` must be ``-inf``.  Returns ``(ok, max_deviation)``.
    """
    alpha = check_alpha(alpha)
    p = np.asarray(p, dtype=float)
    values = _as_utility(u)
    if p.shape != values.shape:
        raise ValidationError(f"shape mismatch {p.shape} vs {values.shape}")
    support = p > 0
    if np.any(~support & ~np.isneginf(values)) or np.any(support & ~np.isfinite(values)):
        return False, math.inf
    gap = values[support] - alpha * np.log2(p[support])
    dev = float(gap.max() - gap.min()) if gap.size else 0.0
    return dev <= tol, dev


def to_nats(bits):
    """Convert an information quantity from bits to nats (display only)."""
    return np.asarray(bits) * LN2
