"""Soft optimal control over a known environment and its alpha -> 0 limit.

Histories alternate actions and observations: ``a_1 o_1 a_2 o_2 ...``.
Tables for cycle ``t`` (0-based) are dense arrays indexed by the history:

* ``environment[t]``: shape ``(A, O) * t + (A, O)``, ``Q(o_t | ao_<t a_t)``
* ``reference[t]``: shape ``(A, O) * t + (A,)``, ``R(a_t | ao_<t)``
* ``reward_action[t]`` like ``reference[t]``; ``reward_observation[t]`` like
  ``environment[t]``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .._numerics import expect, log2sumexp2
from ..conjugate import check_alpha
from ..errors import CapacityError, ValidationError
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

MAX_TABLE_ENTRIES = 5_000_000


def table_entries(horizon: int, n_actions: int, n_obs: int) -> int:
    """Number of environment-table entries an exact solve must touch."""
    return sum((n_actions * n_obs) ** (t + 1) for t in range(horizon))


def _check_capacity(horizon, n_actions, n_obs, limit):
    size = table_entries(horizon, n_actions, n_obs)
    if size > limit:
        raise CapacityError(
            f"exact solve needs {size} table entries (horizon={horizon}, "
            f"|A|={n_actions}, |O|={n_obs}); limit is {limit}",
            size=size,
            limit=limit,
        )


@dataclass(frozen=True)
class ControlProblem:
    horizon: int
    n_actions: int
    n_obs: int
    environment: tuple
    reference: tuple
    reward_action: tuple
    reward_observation: tuple
    alpha: float = 1.0

    def __post_init__(self):
        A, O, T = self.n_actions, self.n_obs, self.horizon
        if T < 0 or A < 1 or O < 1:
            raise ValidationError("horizon must be >= 0 and alphabets non-empty")
        for name in ("environment", "reference", "reward_action", "reward_observation"):
            if len(getattr(self, name)) != T:
                raise ValidationError(f"{name} needs one table per cycle ({T})")
        env, ref, ra, ro = [], [], [], []
        for t in range(T):
            hist = (A, O) * t
            env.append(check_distribution(
                np.broadcast_to(self.environment[t], hist + (A, O)), f"environment[{t}]"))
            ref.append(check_distribution(
                np.broadcast_to(self.reference[t], hist + (A,)), f"reference[{t}]"))
            r_a = np.broadcast_to(np.asarray(self.reward_action[t], float), hist + (A,)).copy()
            r_o = np.broadcast_to(np.asarray(self.reward_observation[t], float), hist + (A, O)).copy()
            if not (np.all(np.isfinite(r_a)) and np.all(np.isfinite(r_o))):
                raise ValidationError(f"rewards at cycle {t} must be finite")
            ra.append(r_a)
            ro.append(r_o)
        object.__setattr__(self, "environment", tuple(env))
        object.__setattr__(self, "reference", tuple(ref))
        object.__setattr__(self, "reward_action", tuple(ra))
        object.__setattr__(self, "reward_observation", tuple(ro))
        object.__setattr__(self, "alpha", check_alpha(self.alpha))

    @classmethod
    def build(
        cls,
        horizon: int,
        n_actions: int,
        n_obs: int,
        environment: Callable,
        reference: Optional[Callable] = None,
        reward_action: Optional[Callable] = None,
        reward_observation: Optional[Callable] = None,
        alpha: float = 1.0,
        max_entries: int = MAX_TABLE_ENTRIES,
    ) -> "ControlProblem":
        """Tabulate callables over every history.

        ``environment(history, a)`` and ``reward_observation(history, a)``
        return vectors over observations; ``reference(history)`` and
        ``reward_action(history)`` vectors over actions.  ``history`` is the
        flat tuple ``(a_1, o_1, ..., a_{t-1}, o_{t-1})``.
        """
        _check_capacity(horizon, n_actions, n_obs, max_entries)
        A, O = n_actions, n_obs
        reference = reference or (lambda h: np.full(A, 1.0 / A))
        reward_action = reward_action or (lambda h: np.zeros(A))
        reward_observation = reward_observation or (lambda h, a: np.zeros(O))
        env, ref, ra, ro = [], [], [], []
        for t in range(horizon):
            shape = (A, O) * t
            e = np.zeros(shape + (A, O))
            r = np.zeros(shape + (A,))
            rwa = np.zeros(shape + (A,))
            rwo = np.zeros(shape + (A, O))
            for h in itertools.product(*(range(n) for n in shape)):
                r[h] = reference(h)
                rwa[h] = reward_action(h)
                for a in range(A):
                    e[h + (a,)] = environment(h, a)
                    rwo[h + (a,)] = reward_observation(h, a)
            env.append(e)
            ref.append(r)
            ra.append(rwa)
            ro.append(rwo)
        return cls(horizon, A, O, tuple(env), tuple(ref), tuple(ra), tuple(ro), alpha)

    def with_alpha(self, alpha: float) -> "ControlProblem":
        return ControlProblem(
            self.horizon, self.n_actions, self.n_obs, self.environment,
            self.reference, self.reward_action, self.reward_observation, alpha,
        )


@dataclass(frozen=True)
class Policy:
    """Solved soft controller.

    ``action_probs[t]`` has shape ``(A, O) * t + (A,)``; ``log_partition[t]``
    holds ``V(ao_<t) = log2 Z(ao_<t)`` with shape ``(A, O) * t``.
    """

    action_probs: tuple
    log_partition: tuple
    alpha: float

    def probs(self, history) -> np.ndarray:
        t = len(history) // 2
        return self.action_probs[t][tuple(history)]

    def value(self, history=()) -> float:
        t = len(history) // 2
        return float(self.log_partition[t][tuple(history)])


def solve_optimal_control(
    problem: ControlProblem, max_entries: int = MAX_TABLE_ENTRIES
) -> Policy:
    """Backward recursion for the soft-optimal action probabilities.

    ``P(a|h) = R(a|h) / Z(h) * 2**(r(a|h)/alpha + sum_o Q(o|ha) r(o|ha)/alpha
    + sum_o Q(o|ha) log2 Z(hao))``, with the last term absent at the horizon.
    """
    _check_capacity(problem.horizon, problem.n_actions, problem.n_obs, max_entries)
    alpha = problem.alpha
    T = problem.horizon
    probs = [None] * T
    log_z = [None] * (T + 1)
    next_log_z = None
    for t in reversed(range(T)):
        q = problem.environment[t]
        exponent = problem.reward_action[t] / alpha + np.sum(
            q * problem.reward_observation[t], axis=-1) / alpha
        if next_log_z is not None:
            exponent = exponent + np.sum(q * next_log_z, axis=-1)
        with np.errstate(divide="ignore"):
            logits = np.log2(problem.reference[t]) + exponent
        z = log2sumexp2(logits, axis=-1, keepdims=True)
        p = np.where(np.isneginf(logits), 0.0, np.exp2(logits - z))
        probs[t] = p
        log_z[t] = np.squeeze(z, -1)
        next_log_z = log_z[t]
    log_z[T] = np.zeros((problem.n_actions, problem.n_obs) * T)
    return Policy(tuple(probs), tuple(log_z), alpha)


@dataclass(frozen=True)
class DeterministicPolicy:
    """``actions[t]`` (shape ``(A, O) * t``) and values ``V0`` per history."""

    actions: tuple
    values: tuple

    def action(self, history) -> int:
        return int(self.actions[len(history) // 2][tuple(history)])

    def value(self, history=()) -> float:
        return float(self.values[len(history) // 2][tuple(history)])

    def one_hot(self, t: int, n_actions: int) -> np.ndarray:
        return np.eye(n_actions)[self.actions[t]]


def dp_limit(problem: ControlProblem) -> DeterministicPolicy:
    """Maximum-expected-utility dynamic program (the alpha -> 0 limit).

    Ties go to the lowest action index.  Actions outside the reference
    support are never selected.
    """
    T = problem.horizon
    A, O = problem.n_actions, problem.n_obs
    actions = [None] * T
    values = [None] * (T + 1)
    values[T] = np.zeros((A, O) * T)
    for t in reversed(range(T)):
        q = problem.environment[t]
        q_values = problem.reward_action[t] + np.sum(
            q * (problem.reward_observation[t] + values[t + 1]), axis=-1)
        q_values = np.where(problem.reference[t] > 0, q_values, -np.inf)
        actions[t] = np.argmax(q_values, axis=-1)
        values[t] = np.max(q_values, axis=-1)
    return DeterministicPolicy(tuple(actions), tuple(values))


@dataclass(frozen=True)
class PolicyStats:
    expected_utility: float
    kl_cost: float
    objective: float


def evaluate_policy(problem: ControlProblem, action_probs) -> PolicyStats:
    """Forward pass: expected reward and KL(policy || reference) in bits."""
    mass = np.ones(())
    eu = 0.0
    kl = 0.0
    for t in range(problem.horizon):
        p = np.asarray(action_probs[t], float)
        q = problem.environment[t]
        step = problem.reward_action[t] + np.sum(q * problem.reward_observation[t], axis=-1)
        joint_a = mass[..., None] * p
        eu += float(expect(joint_a, step))
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(p > 0, np.log2(p) - np.log2(problem.reference[t]), 0.0)
        kl += float(expect(joint_a, ratio))
        mass = joint_a[..., None] * q
    return PolicyStats(eu, kl, eu - problem.alpha * kl)


def as_gvp_problem(problem: ControlProblem) -> GvpProblem:
    """Equivalent sequence problem: actions controlled, observations estimated."""
    A, O = problem.n_actions, problem.n_obs
    variables, tables, utils = [], [], []
    for t in range(problem.horizon):
        a_var = VariableSpec(f"a{t + 1}", Alphabet.of_size(A), IOType.OUTPUT, VPMode.CONTROLLED)
        o_var = VariableSpec(f"o{t + 1}", Alphabet.of_size(O), IOType.DISCLOSED_INPUT, VPMode.ESTIMATED)
        variables += [a_var, o_var]
        tables += [DistTable(a_var, problem.reference[t]), DistTable(o_var, problem.environment[t])]
        utils += [problem.reward_action[t], problem.reward_observation[t]]
    variables = tuple(variables)
    return GvpProblem(
        CausalModel(variables, tuple(tables)),
        UtilityTable(variables, tuple(utils)),
        problem.alpha,
    )
