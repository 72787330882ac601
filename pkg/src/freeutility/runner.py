"""Turn a validated experiment config into result rows and CSV text.

Every ``(alpha, seed)`` cell is independent and seeded, so cells may run in
worker processes; rows are sorted before writing, which makes the CSV
byte-identical across reruns and job counts.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import verify as verify_mod
from ._numerics import LN2
from .config import ConfigError, ExperimentConfig, control_keys
from .envs import (
    bcr_agent_for,
    greedy_controllers,
    make_bernoulli_bandit,
    make_finite_mdp,
    run_interaction,
    soft_controllers,
)
from .gvp import GvpProblem, UtilityTable, gvp_objective_terms, gvp_solve
from .prob import CausalModel, DistTable, VariableSpec
from .solvers.control import ControlProblem, evaluate_policy, solve_optimal_control

CSV_COLUMNS = ("experiment_id", "kind", "alpha", "seed", "metric", "value", "wall_ms")
NAT_METRICS = ("kl_cost", "log_loss")


@dataclass(frozen=True)
class ResultRow:
    experiment_id: str
    kind: str
    alpha: float  # nan when the experiment has no temperature
    seed: int
    metric: str
    value: float
    wall_ms: float = 0.0

    def sort_key(self):
        a = -math.inf if math.isnan(self.alpha) else self.alpha
        return (a, self.seed, self.metric)

    def fields(self):
        return (
            self.experiment_id,
            self.kind,
            "" if math.isnan(self.alpha) else repr(float(self.alpha)),
            str(self.seed),
            self.metric,
            format_value(self.value),
            repr(round(float(self.wall_ms), 3)),
        )


def format_value(x) -> str:
    x = float(x)
    if math.isnan(x):
        raise ValueError("metric values must not be NaN")
    return repr(x)


# control

def _control_problem(cfg: ExperimentConfig, alpha: float) -> ControlProblem:
    sec = cfg.section
    acts, obs = sec["actions"].symbols, sec["observations"].symbols

    def names(h):
        return [acts[x] if i % 2 == 0 else obs[x] for i, x in enumerate(h)]

    return ControlProblem.build(
        cfg.horizon, len(acts), len(obs),
        environment=lambda h, a: sec["environment"].lookup(control_keys(names(h), acts[a])),
        reference=lambda h: sec["reference"].lookup(control_keys(names(h))),
        reward_action=lambda h: sec["reward_action"].lookup(control_keys(names(h))),
        reward_observation=lambda h, a: sec["reward_observation"].lookup(control_keys(names(h), acts[a])),
        alpha=alpha,
    )


def _run_control(cfg, alpha, seed):
    problem = _control_problem(cfg, alpha)
    policy = solve_optimal_control(problem)
    stats = evaluate_policy(problem, policy.action_probs)
    return {"expected_utility": stats.expected_utility, "kl_cost": stats.kl_cost,
            "objective": stats.objective}


# estimate

def _run_estimate(cfg, alpha, seed):
    sec = cfg.section
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    probs, prior = sec["probs"], sec["prior"]
    truth = sec["truth"] if sec["truth"] is not None else int(rng.choice(prior.size, p=prior))
    posterior = prior.copy()
    log_loss = 0.0
    for _ in range(cfg.horizon):
        o = int(rng.choice(probs.shape[1], p=probs[truth]))
        predictive = posterior @ probs
        log_loss -= math.log2(predictive[o])
        posterior = posterior * probs[:, o]
        posterior /= posterior.sum()
    return {"log_loss": log_loss, "posterior_truth_mass": float(posterior[truth])}


# bcr

def _bcr_env(sec):
    if sec["environment"] == "bernoulli-bandit":
        return make_bernoulli_bandit(sec["means"], sec["prior"])
    env, _ = make_finite_mdp(sec["transitions"], sec["reward_map"], sec["reward_values"],
                             sec["initial_state"], sec["prior"])
    return env


def _run_bcr(cfg, alpha, seed):
    sec = cfg.section
    env = _bcr_env(sec)
    ctl = soft_controllers(env, alpha) if sec["controller"] == "soft" else greedy_controllers(env)
    agent = bcr_agent_for(env, ctl, mode=sec["mode"], floor=sec["floor"])
    record = run_interaction(agent, env, cfg.horizon, seed)
    post = record.final_posterior
    truth_mass = env.prior[record.theta] if post is None else post[record.theta]
    return {"cum_regret": record.regret, "cum_reward": record.cumulative_reward,
            "posterior_truth_mass": float(truth_mass)}


# gvp

def gvp_problem_from_config(cfg: ExperimentConfig, alpha: float) -> GvpProblem:
    sec = cfg.section
    variables = tuple(VariableSpec(n, a, io, m) for n, a, io, m in sec["variables"])
    sizes = [v.size for v in variables]
    tables, utils = [], []
    for t, var in enumerate(variables):
        ref = np.zeros(tuple(sizes[: t + 1]))
        util = np.zeros(tuple(sizes[: t + 1]))
        for h in np.ndindex(*sizes[:t]):
            key = " ".join(variables[i].alphabet.symbols[x] for i, x in enumerate(h))
            ref[h] = sec["reference"][t].lookup([key, "*"])
            util[h] = sec["utility"][t].lookup([key, "*"])
        tables.append(DistTable(var, ref))
        utils.append(util)
    return GvpProblem(CausalModel(variables, tuple(tables)), UtilityTable(variables, tuple(utils)), alpha)


def _run_gvp(cfg, alpha, seed):
    problem = gvp_problem_from_config(cfg, alpha)
    terms = gvp_objective_terms(problem.with_candidate(gvp_solve(problem)))
    eu = sum(t.expected_utility for t in terms)
    kl = sum(t.kl for t in terms)
    return {"expected_utility": eu, "kl_cost": kl, "objective": eu - alpha * kl}


# verify

def _run_verify(cfg, alpha, seed):
    results = verify_mod.run_all(list(cfg.section["suites"]), cfg.section["scale"], seed)
    metrics = {}
    for r in results:
        for c in r.checks:
            metrics[f"max_violation/{r.name}.{c.name}"] = c.value
    return metrics, results


RUNNERS = {
    "control": _run_control,
    "estimate": _run_estimate,
    "bcr": _run_bcr,
    "gvp": _run_gvp,
    "verify": _run_verify,
}


def run_cell(cfg: ExperimentConfig, alpha: float, seed: int, log_base: str = "2"):
    """Run one ``(alpha, seed)`` cell; returns ``(rows, verify results or None)``."""
    start = time.perf_counter()
    out = RUNNERS[cfg.kind](cfg, alpha, seed)
    results = None
    if cfg.kind == "verify":
        out, results = out
    ms = (time.perf_counter() - start) * 1000.0
    rows = []
    for metric, value in out.items():
        if log_base == "e" and metric in NAT_METRICS:
            value = value * LN2
        rows.append(ResultRow(cfg.experiment_id, cfg.kind, alpha, seed, metric, float(value), ms))
    return rows, results


def cells(cfg: ExperimentConfig):
    alphas = (math.nan,) if cfg.kind == "verify" else cfg.alphas
    return [(a, s) for a in alphas for s in cfg.seeds]


def run(cfg: ExperimentConfig, log_base: str = "2", jobs: int = 1, timing: bool = False):
    """Run every cell; returns sorted rows and any verify suite results."""
    if log_base not in ("2", "e"):
        raise ConfigError(f"log base must be '2' or 'e', got {log_base!r}")
    todo = cells(cfg)
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_cell, cfg, a, s, log_base) for a, s in todo]
            outputs = [f.result() for f in futures]
    else:
        outputs = [run_cell(cfg, a, s, log_base) for a, s in todo]
    rows, results = [], []
    for r, res in outputs:
        rows.extend(r)
        if res:
            results.extend(res)
    if not timing:
        rows = [replace(r, wall_ms=0.0) for r in rows]
    rows.sort(key=ResultRow.sort_key)
    return rows, results


def to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow(r.fields())
    return buf.getvalue()


def summary_table(rows) -> str:
    """Aligned per-(alpha, metric) summary over seeds."""
    groups = {}
    for r in rows:
        groups.setdefault((r.sort_key()[0], r.alpha, r.metric), []).append(r.value)
    header = ("alpha", "metric", "mean", "min", "max", "n")
    body = []
    for (_, alpha, metric), vals in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][2])):
        v = np.asarray(vals)
        body.append(("-" if math.isnan(alpha) else f"{alpha:g}", metric,
                     f"{v.mean():.6g}", f"{v.min():.6g}", f"{v.max():.6g}", str(v.size)))
    return _align([header] + body)


def verify_report(results) -> str:
    lines = []
    for r in results:
        lines.append(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}  ({r.seconds:.2f} s)")
        table = [("check", "value", "tolerance", "status")]
        for c in r.checks:
            table.append((c.name, f"{c.value:.3e}", f"{c.tolerance:.0e}", "ok" if c.passed else "VIOLATED"))
        lines.extend("    " + line for line in _align(table).splitlines())
    total = sum(r.seconds for r in results)
    failed = [r.name for r in results if not r.passed]
    lines.append(f"{len(results) - len(failed)}/{len(results)} suites passed in {total:.2f} s"
                 + (f"; failed: {', '.join(failed)}" if failed else ""))
    return "\n".join(lines)


def _align(rows) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows)
