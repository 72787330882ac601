"""Sequence-level variational principle over typed I/O variables.

Given a reference causal model ``R`` and target utilities ``U``, a candidate
``P`` is scored through two auxiliary measures: ``G`` draws controlled
variables from ``P`` and estimated ones from ``R``; the second measure does
the opposite.  The objective is ``E_G[U] - alpha * KL(G || R_aux)``.

``gvp_solve`` maximizes it over candidates whose conditionals depend only on
the observable part of the history (undisclosed inputs are hidden from the
system being designed).  The backward sweep is exact: controlled variables
get a soft-max over posterior-averaged utilities, estimated variables the
posterior predictive mixture of the reference.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import rel_entr

from ._numerics import LN2, expect, kl_bits, normalize_log2
from .conjugate import check_alpha
from .errors import DegenerateError, ValidationError
from .prob import CausalModel, DistTable, IOType, VPMode, VariableSpec


@dataclass(frozen=True)
class UtilityTable:
    """Per-variable utilities ``U(x_t | x_<t)``, arrays of shape ``sizes[:t+1]``."""

    variables: tuple
    values: tuple

    def __post_init__(self):
        variables = tuple(self.variables)
        sizes = tuple(v.size for v in variables)
        if len(self.values) != len(variables):
            raise ValidationError("one utility array per variable is required")
        values = []
        for t, (var, arr) in enumerate(zip(variables, self.values)):
            arr = np.broadcast_to(np.asarray(arr, dtype=float), sizes[: t + 1]).copy()
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"utilities for {var.name!r} must be finite")
            arr.setflags(write=False)
            values.append(arr)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "values", tuple(values))

    @classmethod
    def zeros(cls, variables: Sequence[VariableSpec]) -> "UtilityTable":
        return cls(tuple(variables), tuple(np.zeros(()) for _ in variables))

    def sequence_utility(self) -> np.ndarray:
        """Strictly additive utility of every full sequence, shape ``sizes``."""
        T = len(self.variables)
        total = np.zeros(tuple(v.size for v in self.variables))
        for t, arr in enumerate(self.values):
            total = total + arr.reshape(arr.shape + (1,) * (T - t - 1))
        return total


@dataclass(frozen=True)
class GvpProblem:
    reference: CausalModel
    target_utility: UtilityTable
    alpha: float
    candidate: Optional[CausalModel] = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        variables = self.reference.variables
        if self.target_utility.variables != variables:
            raise ValidationError("target utility variables differ from the reference")
        if self.candidate is not None and self.candidate.variables != variables:
            raise ValidationError(
                "candidate and reference must share variables, alphabets, "
                "io_types and vp_modes"
            )
        for var, arr in zip(variables, self.target_utility.values):
            if var.io_type is IOType.UNDISCLOSED_INPUT and np.any(arr != 0):
                raise ValidationError(
                    f"target utility on undisclosed variable {var.name!r} must be zero"
                )

    @property
    def variables(self) -> tuple:
        return self.reference.variables

    def with_candidate(self, candidate: CausalModel) -> "GvpProblem":
        return GvpProblem(self.reference, self.target_utility, self.alpha, candidate)


def _require_candidate(problem: GvpProblem) -> CausalModel:
    if problem.candidate is None:
        raise ValidationError("problem has no candidate model")
    return problem.candidate


def build_auxiliary(problem: GvpProblem):
    """Return ``(G, R)``: controlled variables swap roles with estimated ones."""
    cand = _require_candidate(problem)
    ref = problem.reference
    g_tables, r_tables = [], []
    for t, var in enumerate(problem.variables):
        if var.vp_mode is VPMode.CONTROLLED:
            g_tables.append(cand.conditionals[t])
            r_tables.append(ref.conditionals[t])
        else:
            g_tables.append(ref.conditionals[t])
            r_tables.append(cand.conditionals[t])
    return (
        CausalModel(problem.variables, tuple(g_tables)),
        CausalModel(problem.variables, tuple(r_tables)),
    )


def gvp_objective(problem: GvpProblem) -> float:
    """Exact objective by enumeration of all sequences."""
    g, r = build_auxiliary(problem)
    gj = g.joint_array()
    kl = float(kl_bits(gj, r.joint_array()))
    if np.isinf(kl):
        return -np.inf
    eu = float(expect(gj, problem.target_utility.sequence_utility()))
    return eu - problem.alpha * kl


@dataclass(frozen=True)
class VariableTerm:
    name: str
    expected_utility: float
    kl: float


def gvp_objective_terms(problem: GvpProblem) -> list:
    """Per-variable expected utility and KL contributions under ``G``."""
    g, r = build_auxiliary(problem)
    terms = []
    for t, var in enumerate(problem.variables):
        mass = g.prefix_array(t)
        gt = g.conditionals[t].probs
        rt = r.conditionals[t].probs
        eu = float(expect(mass[..., None] * gt, problem.target_utility.values[t]))
        with np.errstate(invalid="ignore"):
            row_kl = np.sum(rel_entr(gt, rt), axis=-1) / LN2
        terms.append(VariableTerm(var.name, eu, float(expect(mass, row_kl))))
    return terms


def _hidden_axes(variables, t) -> tuple:
    return tuple(s for s in range(t) if not variables[s].observable)


def _check_solvable(variables):
    for var in variables:
        if var.vp_mode is VPMode.CONTROLLED and not var.observable:
            raise ValidationError(
                f"controlled variable {var.name!r} must be observable "
                "(undisclosed inputs cannot be controlled)"
            )


def gvp_solve(problem: GvpProblem) -> CausalModel:
    """Maximize the objective over observation-measurable candidates.

    Information sets that the reference never reaches get the reference
    conditional (they carry zero weight).
    """
    ref = problem.reference
    variables = ref.variables
    _check_solvable(variables)
    alpha = problem.alpha
    T = ref.T

    # Within an information set, the posterior over hidden histories only
    # involves the reference factors of estimated variables.
    weights = [np.ones(())]
    for t in range(T - 1):
        factor = ref.conditionals[t].probs
        if variables[t].vp_mode is VPMode.CONTROLLED:
            factor = np.ones_like(factor)
        weights.append(weights[-1][..., None] * factor)

    future = np.zeros(ref.sizes)
    solution = [None] * T
    for t in reversed(range(T)):
        w = weights[t]
        axes = _hidden_axes(variables, t)
        denom = w.sum(axis=axes, keepdims=True) if axes else w
        reach = np.broadcast_to(denom > 0, w.shape)
        post = np.where(denom > 0, w / np.where(denom > 0, denom, 1.0), 0.0)
        live = w > 0
        rt = ref.conditionals[t].probs
        ut = problem.target_utility.values[t]
        with np.errstate(divide="ignore"):
            log_r = np.log2(rt)

        if variables[t].vp_mode is VPMode.ESTIMATED:
            mix = post[..., None] * rt
            pt = mix.sum(axis=axes, keepdims=True) if axes else mix
            pt = np.where(reach[..., None], np.broadcast_to(pt, rt.shape), rt)
            with np.errstate(divide="ignore", invalid="ignore"):
                inner = ut - alpha * (log_r - np.log2(pt)) + future
            value = expect(rt, inner, axis=-1)
        else:
            inner = ut + alpha * log_r + future
            with np.errstate(invalid="ignore"):
                weighted = np.where(post[..., None] > 0, post[..., None] * inner, 0.0)
            q = weighted.sum(axis=axes, keepdims=True) if axes else weighted
            q_reach = np.broadcast_to(denom > 0, q.shape[:-1])
            dead = q_reach & np.all(np.isneginf(q), axis=-1)
            if np.any(dead):
                raise DegenerateError(
                    f"no admissible distribution for {variables[t].name!r}: "
                    "reference excludes every symbol on some information set"
                )
            pt, _ = normalize_log2(np.where(q_reach[..., None], q, 0.0) / alpha)
            pt = np.where(reach[..., None], np.broadcast_to(pt, rt.shape), rt)
            with np.errstate(divide="ignore", invalid="ignore"):
                inner = inner - alpha * np.log2(pt)
            value = expect(pt, inner, axis=-1)

        future = np.where(live, value, 0.0)
        solution[t] = pt

    return CausalModel(
        variables, tuple(DistTable(v, p) for v, p in zip(variables, solution))
    )


def observation_measurable(model: CausalModel, tol: float = 1e-12) -> bool:
    """True if every conditional is constant across undisclosed history values."""
    for t, table in enumerate(model.conditionals):
        for ax in _hidden_axes(model.variables, t):
            spread = table.probs.max(axis=ax) - table.probs.min(axis=ax)
            if np.any(spread > tol):
                return False
    return True
