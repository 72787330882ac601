"""Seeded property suites with independent oracles.

Each suite returns a ``SuiteResult`` made of named checks.  A check carries
the measured violation, the tolerance it is held to, and whether it passed.
``scale`` shrinks the sample counts for quick runs; at ``scale=1`` the sizes
are the full acceptance sizes.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import conjugate, gvp, oracles, prob, transform
from .envs import bcr_agent_for, make_bernoulli_bandit, run_interaction
from .solvers import control, estimation

SEED = 20240601


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class SuiteResult:
    name: str
    checks: tuple
    seconds: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_violation(self) -> float:
        return max(c.value for c in self.checks)


def _below(name, value, tol, strict=True):
    value = float(value)
    ok = value < tol if strict else value <= tol
    return Check(name, value, tol, bool(ok))


def _n(count, scale, minimum=1):
    return max(minimum, int(round(count * scale)))


def suite_conjugacy(scale=1.0, seed=SEED):
    rng = np.random.default_rng(seed)
    worst_p = worst_b = 0.0
    for _ in range(_n(1000, scale)):
        k = int(rng.integers(2, 9))
        p = oracles.random_simplex(rng, k)
        p = np.maximum(p, 1e-6)
        p /= p.sum()
        alpha = float(rng.uniform(0.1, 10))
        beta = float(rng.uniform(-5, 5))
        u = conjugate.utility_from_measure(p, alpha, beta)
        q, b = conjugate.measure_from_utility(u, alpha)
        worst_p = max(worst_p, float(np.max(np.abs(q - p))))
        worst_b = max(worst_b, abs(b - beta))
    return [
        _below("roundtrip_measure", worst_p, 1e-9),
        _below("roundtrip_beta", worst_b, 1e-9),
    ]


def suite_variational(scale=1.0, seed=SEED):
    rng = np.random.default_rng(seed + 1)
    excess = 0.0
    gibbs_gap = 0.0
    for _ in range(_n(100, scale)):
        k = int(rng.integers(2, 7))
        u = rng.normal(0, 2, size=k)
        alpha = float(rng.uniform(0.1, 5))
        p, beta = conjugate.measure_from_utility(u, alpha)
        best = conjugate.free_utility(p, u, alpha).total
        gibbs_gap = max(gibbs_gap, abs(best - beta))
        q = oracles.random_simplex(rng, k, _n(10_000, scale))
        # vectorized free utility of all candidates
        with np.errstate(divide="ignore", invalid="ignore"):
            ent = -np.sum(np.where(q > 0, q * np.log2(q), 0.0), axis=1)
        cand = q @ u + alpha * ent
        excess = max(excess, float(np.max(cand) - best))
    return [
        _below("candidate_excess", excess, 1e-9, strict=False),
        _below("gibbs_equals_beta", gibbs_gap, 1e-9),
    ]


def suite_control_closed_form(scale=1.0, seed=SEED):
    rng = np.random.default_rng(seed + 2)
    excess = 0.0
    gap = 0.0
    for _ in range(_n(100, scale)):
        k = int(rng.integers(2, 7))
        p_i = oracles.random_simplex(rng, k)
        u = rng.normal(0, 2, size=k)
        alpha = float(rng.uniform(0.1, 5))
        sol = transform.control_solution(transform.TransformProblem(p_i, u, alpha))
        best = transform.free_utility_difference(p_i, sol, u, alpha)
        # direct sum, no log-domain tricks
        direct = alpha * np.log2(np.sum(p_i * np.power(2.0, u / alpha)))
        gap = max(gap, abs(best - direct))
        qs = oracles.perturb_simplex(rng, sol, _n(10_000, scale))
        with np.errstate(divide="ignore", invalid="ignore"):
            kl = np.sum(np.where(qs > 0, qs * (np.log2(qs) - np.log2(p_i)), 0.0), axis=1)
        vals = qs @ u - alpha * kl
        excess = max(excess, float(np.max(vals) - best))
    return [
        _below("candidate_excess", excess, 1e-9, strict=False),
        _below("log_partition_identity", gap, 1e-9),
    ]


def chain_model():
    b = prob.Alphabet.of_size(2)
    v1 = prob.VariableSpec("x1", b)
    v2 = prob.VariableSpec("x2", b)
    return prob.CausalModel.from_arrays([v1, v2], [[0.8, 0.2], [[0.5, 0.5], [0.9, 0.1]]])


def suite_intervention(scale=1.0, seed=SEED):
    rng = np.random.default_rng(seed + 3)
    worst = 0.0
    for _ in range(_n(100, scale)):
        T = int(rng.integers(1, 5))
        model = oracles.random_causal_model(rng, T)
        for t in range(T):
            for v in range(2):
                after = prob.intervene(model, t, v)
                for s in range(t):
                    worst = max(worst, float(np.max(np.abs(
                        prob.marginal(after, s) - prob.marginal(model, s)))))
                worst = max(worst, float(np.max(np.abs(after.prefix_array(t) - model.prefix_array(t)))))
    chain = chain_model()
    base = prob.marginal(chain, 0)[1]
    cond_shift = abs(prob.marginal(prob.condition(chain, 1, 0), 0)[1] - base)
    int_shift = abs(prob.marginal(prob.intervene(chain, 1, 0), 0)[1] - base)
    return [
        _below("past_marginal_shift", worst, 1e-12),
        Check("regression_condition_shift", cond_shift, 0.05, bool(cond_shift >= 0.05)),
        _below("regression_intervene_shift", int_shift, 1e-12),
    ]


def suite_gvp(scale=1.0, seed=SEED):
    rng = np.random.default_rng(seed + 4)
    vs_random = vs_ascent = 0.0
    for _ in range(_n(20, scale)):
        T = int(rng.integers(1, 4))
        problem = oracles.random_gvp_problem(rng, T)
        value = gvp.gvp_objective(problem.with_candidate(gvp.gvp_solve(problem)))
        rand_best = oracles.gvp_random_search(problem, _n(100_000, scale), rng)
        ca_best, _ = oracles.gvp_coordinate_ascent(problem, rng, tol=1e-10)
        vs_random = max(vs_random, rand_best - value)
        vs_ascent = max(vs_ascent, ca_best - value)
    return [
        _below("random_search_excess", vs_random, 1e-6, strict=False),
        _below("coordinate_ascent_excess", vs_ascent, 1e-6, strict=False),
    ]


def suite_dp_limit(scale=1.0, seed=SEED):
    rng = np.random.default_rng(seed + 5)
    mismatches = 0
    enum_gap = 0.0
    for _ in range(_n(10, scale)):
        problem = oracles.random_control_problem(rng, 2, alpha=1e-3, min_gap=0.1)
        soft = control.solve_optimal_control(problem)
        dp = control.dp_limit(problem)
        for t in range(problem.horizon):
            mismatches += int(np.sum(np.argmax(soft.action_probs[t], axis=-1) != dp.actions[t]))
        best, values = oracles.enumerate_deterministic_policies(problem)
        enum_gap = max(enum_gap, abs(best - dp.value(())))
        hist = [h for t in range(problem.horizon)
                for h in np.ndindex(*((problem.n_actions, problem.n_obs) * t))]
        dp_choice = tuple(dp.action(h) for h in hist)
        enum_gap = max(enum_gap, abs(values[dp_choice] - best))
    return [
        Check("argmax_mismatches", float(mismatches), 0.0, mismatches == 0),
        _below("enumeration_gap", enum_gap, 1e-12, strict=False),
    ]


def suite_temperature(scale=1.0, seed=SEED):
    rng = np.random.default_rng(seed + 6)
    hot = cold = 0.0
    for _ in range(_n(10, scale)):
        problem = oracles.random_control_problem(rng, 2, min_gap=0.1)
        ref = control.solve_optimal_control(problem.with_alpha(1e6))
        for t in range(problem.horizon):
            hot = max(hot, 0.5 * float(np.max(np.sum(np.abs(ref.action_probs[t] - problem.reference[t]), axis=-1))))
        greedy = control.solve_optimal_control(problem.with_alpha(1e-6))
        dp = control.dp_limit(problem)
        for t in range(problem.horizon):
            onehot = dp.one_hot(t, problem.n_actions)
            cold = max(cold, 0.5 * float(np.max(np.sum(np.abs(greedy.action_probs[t] - onehot), axis=-1))))
    return [
        _below("tv_reference_at_high_alpha", hot, 1e-3),
        _below("tv_dp_at_low_alpha", cold, 1e-3),
    ]


def _random_source(rng, K, O, N):
    tables = {}
    for n in range(N + 1):
        for h in np.ndindex(*((O,) * n)):
            tables[h] = oracles.random_rows(rng, (K,), O, 0.01)
    return lambda history: tables[tuple(history)]


def suite_estimation(scale=1.0, seed=SEED):
    rng = np.random.default_rng(seed + 7)
    seq_gap = 0.0
    martingale = 0.0
    N = 6
    for _ in range(_n(10, scale)):
        K = int(rng.integers(1, 5))
        O = 2
        lik = _random_source(rng, K, O, N)
        prior = oracles.random_simplex(rng, K)
        problem = estimation.EstimationProblem(prior, lik, O, N)
        for n in range(N + 1):
            mean_post = np.zeros(K)
            for hist in np.ndindex(*((O,) * n)):
                # batch oracle: explicit joint over (theta, history, next)
                joint = prior.copy()
                for i, o in enumerate(hist):
                    joint = joint * lik(hist[:i])[:, o]
                mass = joint.sum()
                post_b = joint / mass
                pred_b = (joint[:, None] * lik(hist)).sum(axis=0) / mass
                post_s, pred_s = estimation.predictive_update(problem, hist)
                seq_gap = max(seq_gap, float(np.max(np.abs(pred_s - pred_b))),
                              float(np.max(np.abs(post_s - post_b))))
                mean_post += mass * post_s
            martingale = max(martingale, float(np.max(np.abs(mean_post - prior))))
    return [
        _below("sequential_vs_batch", seq_gap, 1e-12),
        _below("martingale", martingale, 1e-9),
    ]


def suite_bcr(scale=1.0, seed=SEED):
    env = make_bernoulli_bandit([[0.8, 0.2], [0.2, 0.8]])
    runs = _n(100, scale)
    horizon = 1000
    concentrated = 0
    tail_regret = []
    for s in range(runs):
        record = run_interaction(bcr_agent_for(env), env, horizon, seed + s)
        if record.steps[199].posterior[record.theta] > 0.95:
            concentrated += 1
        tail_regret.extend(step.regret for step in record.steps[900:1000])
    need = int(np.ceil(0.95 * runs))
    return [
        Check("runs_not_concentrated_by_200", float(max(0, need - concentrated)), 0.0,
              concentrated >= need),
        _below("mean_regret_steps_901_1000", float(np.mean(tail_regret)), 0.05),
    ]


SUITES: dict = {
    "conjugacy": suite_conjugacy,
    "variational": suite_variational,
    "control_closed_form": suite_control_closed_form,
    "intervention": suite_intervention,
    "gvp": suite_gvp,
    "dp_limit": suite_dp_limit,
    "temperature": suite_temperature,
    "estimation": suite_estimation,
    "bcr": suite_bcr,
}


def run_suite(name: str, scale: float = 1.0, seed: int = SEED) -> SuiteResult:
    fn: Callable = SUITES[name]
    start = time.perf_counter()
    checks = fn(scale=scale, seed=seed)
    return SuiteResult(name, tuple(checks), time.perf_counter() - start)


def run_all(names=None, scale: float = 1.0, seed: int = SEED) -> list:
    names = list(SUITES) if not names or names == ["all"] else list(names)
    return [run_suite(n, scale, seed) for n in names]
