"""Independent reference computations used by ``verify`` and the test suite.

Nothing here calls the closed-form solvers: the oracles work by random
search, exhaustive enumeration or coordinate ascent on the raw objectives.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy.special import rel_entr

from ._numerics import LN2
from .gvp import GvpProblem, UtilityTable
from .prob import Alphabet, CausalModel, DistTable, IOType, VPMode, VariableSpec


def random_simplex(rng, k, n=None, concentration=1.0):
    alpha = np.full(k, concentration)
    return rng.dirichlet(alpha, size=n)


def perturb_simplex(rng, center, n):
    """Random points near and far from ``center``, all on its support's simplex."""
    center = np.asarray(center, float)
    k = center.size
    mix = rng.uniform(0.0, 1.0, size=(n, 1)) ** 3
    noise = rng.dirichlet(np.full(k, 0.5), size=n)
    return (1 - mix) * center + mix * noise


def random_rows(rng, shape, k, min_prob=0.0):
    rows = rng.dirichlet(np.ones(k), size=shape)
    if min_prob:
        rows = (rows + min_prob) / (1 + k * min_prob)
    return rows


def random_causal_model(rng, T, sizes=None, io_types=None, vp_modes=None, min_prob=0.0):
    sizes = sizes or (2,) * T
    io_types = io_types or (IOType.DISCLOSED_INPUT,) * T
    vp_modes = vp_modes or (VPMode.ESTIMATED,) * T
    variables = tuple(
        VariableSpec(f"x{t + 1}", Alphabet.of_size(sizes[t]), io_types[t], vp_modes[t])
        for t in range(T)
    )
    tables = tuple(
        DistTable(v, random_rows(rng, sizes[:t], sizes[t], min_prob))
        for t, v in enumerate(variables)
    )
    return CausalModel(variables, tables)


def random_gvp_problem(rng, T, alpha=None, allow_hidden=True):
    """Random binary instance; the first variable may be an undisclosed input."""
    io, vp = [], []
    hidden_first = allow_hidden and T >= 2 and rng.random() < 0.5
    for t in range(T):
        if t == 0 and hidden_first:
            io.append(IOType.UNDISCLOSED_INPUT)
            vp.append(VPMode.ESTIMATED)
        elif rng.random() < 0.5:
            io.append(IOType.OUTPUT)
            vp.append(VPMode.CONTROLLED)
        else:
            io.append(IOType.DISCLOSED_INPUT)
            vp.append(VPMode.ESTIMATED)
    ref = random_causal_model(rng, T, io_types=tuple(io), vp_modes=tuple(vp), min_prob=0.02)
    utils = []
    for t, var in enumerate(ref.variables):
        if var.observable:
            utils.append(rng.normal(0.0, 1.0, size=ref.sizes[: t + 1]))
        else:
            utils.append(np.zeros(ref.sizes[: t + 1]))
    alpha = float(rng.uniform(0.2, 2.0)) if alpha is None else alpha
    return GvpProblem(ref, UtilityTable(ref.variables, tuple(utils)), alpha)


# -- generalized variational principle ---------------------------------------

def _hidden_axes(variables, t):
    return tuple(s for s in range(t) if not variables[s].observable)


def _expand(arr, T, t):
    """Reshape a table over ``x_<=t`` to broadcast against full sequences."""
    extra = (1,) * (T - t - 1)
    return arr.reshape(arr.shape + extra)


def _batch_objective(problem: GvpProblem, cand_tables):
    """Objective for a batch of candidates; tables have a leading batch axis."""
    ref = problem.reference
    T = ref.T
    n = cand_tables[0].shape[0]
    full = (n,) + ref.sizes
    g = np.ones(full)
    r = np.ones(full)
    for t, var in enumerate(ref.variables):
        c = _expand(cand_tables[t], T, t)
        rt = _expand(ref.conditionals[t].probs, T, t)[None]
        if var.vp_mode is VPMode.CONTROLLED:
            g = g * c
            r = r * rt
        else:
            g = g * rt
            r = r * c
    u = problem.target_utility.sequence_utility()[None]
    axes = tuple(range(1, g.ndim))
    kl = np.sum(rel_entr(g, r), axis=axes) / LN2
    eu = np.sum(g * u, axis=axes)
    return np.where(np.isinf(kl), -np.inf, eu - problem.alpha * kl)


def random_measurable_tables(rng, problem: GvpProblem, n):
    """Random candidates that ignore undisclosed history values."""
    ref = problem.reference
    tables = []
    for t, var in enumerate(ref.variables):
        shape = list(ref.sizes[:t])
        for ax in _hidden_axes(ref.variables, t):
            shape[ax] = 1
        rows = rng.dirichlet(np.full(var.size, 0.7), size=(n,) + tuple(shape))
        tables.append(np.broadcast_to(rows, (n,) + ref.sizes[: t + 1]))
    return tables


def gvp_random_search(problem: GvpProblem, n, rng, chunk=10_000):
    """Best objective among ``n`` random observation-measurable candidates."""
    best = -np.inf
    done = 0
    while done < n:
        m = min(chunk, n - done)
        vals = _batch_objective(problem, random_measurable_tables(rng, problem, m))
        best = max(best, float(np.max(vals)))
        done += m
    return best


def tables_to_model(problem: GvpProblem, tables) -> CausalModel:
    variables = problem.reference.variables
    return CausalModel(variables, tuple(DistTable(v, np.asarray(p)) for v, p in zip(variables, tables)))


def gvp_coordinate_ascent(problem: GvpProblem, rng, tol=1e-10, max_sweeps=20_000):
    """Block coordinate ascent over (variable, information set) conditionals.

    Each block is maximized exactly using coefficients computed by summing
    over all full sequences.  Returns ``(objective, tables)``.
    """
    ref = problem.reference
    variables = ref.variables
    T = ref.T
    sizes = ref.sizes
    alpha = problem.alpha
    tables = [np.array(t[0]) for t in random_measurable_tables(rng, problem, 1)]
    u = problem.target_utility.sequence_utility()
    ref_full = [np.broadcast_to(_expand(ref.conditionals[t].probs, T, t), sizes) for t in range(T)]

    def factors():
        g, log_ratio = [], []
        for t, var in enumerate(variables):
            c = np.broadcast_to(_expand(tables[t], T, t), sizes)
            if var.vp_mode is VPMode.CONTROLLED:
                g.append(c)
                with np.errstate(divide="ignore", invalid="ignore"):
                    log_ratio.append(np.log2(c) - np.log2(ref_full[t]))
            else:
                g.append(ref_full[t])
                with np.errstate(divide="ignore", invalid="ignore"):
                    log_ratio.append(np.log2(ref_full[t]) - np.log2(c))
        return g, log_ratio

    def objective():
        return float(_batch_objective(problem, [t[None] for t in tables])[0])

    blocks = []
    for t in range(T):
        hidden = _hidden_axes(variables, t)
        proj = tuple(1 if ax in hidden else sizes[ax] for ax in range(t))
        for info in np.ndindex(*proj):
            mask = np.ones(sizes[:t], dtype=bool)
            for ax in range(t):
                if ax not in hidden:
                    keep = np.zeros(sizes[ax], dtype=bool)
                    keep[info[ax]] = True
                    mask &= keep.reshape([sizes[ax] if i == ax else 1 for i in range(t)])
            blocks.append((t, mask))

    prev = objective()
    for _ in range(max_sweeps):
        for t, mask in blocks:
            g, log_ratio = factors()
            in_block = np.broadcast_to(mask.reshape(mask.shape + (1,) * (T - t)), sizes)
            prefix = np.ones(sizes)
            for s in range(t):
                prefix = prefix * g[s]
            later = np.ones(sizes)
            for s in range(t + 1, T):
                later = later * g[s]
            k = sizes[t]
            onehot = [np.broadcast_to(
                (np.arange(k) == v).reshape((1,) * t + (k,) + (1,) * (T - t - 1)), sizes)
                for v in range(k)]
            if variables[t].vp_mode is VPMode.CONTROLLED:
                w = prefix * later
                stuff = u.copy()
                for s in range(T):
                    if s != t:
                        stuff = stuff - alpha * log_ratio[s]
                with np.errstate(divide="ignore"):
                    stuff = stuff + alpha * np.log2(ref_full[t])
                prefix_t = prefix[(slice(None),) * t + (0,) * (T - t)]
                m_block = float(np.sum(prefix_t[mask]))
                if m_block <= 0:
                    continue
                with np.errstate(invalid="ignore"):
                    coef = np.array([
                        float(np.sum(np.where(in_block & onehot[v] & (w > 0), w * stuff, 0.0)))
                        for v in range(k)
                    ])
                logits = coef / (alpha * m_block)
                logits = logits - np.max(logits)
                p = np.exp2(logits)
                p /= p.sum()
            else:
                w = prefix * ref_full[t] * later
                coef = np.array([
                    float(np.sum(np.where(in_block & onehot[v], w, 0.0))) for v in range(k)
                ])
                if coef.sum() <= 0:
                    continue
                p = coef / coef.sum()
            sel = mask.reshape(mask.shape + (1,))
            tables[t] = np.where(np.broadcast_to(sel, tables[t].shape), p, tables[t])
        cur = objective()
        if abs(cur - prev) < tol:
            prev = cur
            break
        prev = cur
    return prev, tables


# -- soft control / dynamic programming --------------------------------------

def _histories(A, O, t):
    return itertools.product(*(range(n) for n in (A, O) * t))


def brute_force_values(problem):
    """Recursive expectimax over explicit histories (no array tables).

    Returns ``{history: (value, set_of_optimal_actions)}`` for every action
    node.  Action values within 1e-12 of the max count as ties.
    """
    A, O, T = problem.n_actions, problem.n_obs, problem.horizon
    out = {}

    def node(h):
        t = len(h) // 2
        if t == T:
            return 0.0
        qs = []
        for a in range(A):
            if problem.reference[t][h + (a,)] <= 0:
                qs.append(-np.inf)
                continue
            val = float(problem.reward_action[t][h + (a,)])
            for o in range(O):
                p = float(problem.environment[t][h + (a, o)])
                val += p * (float(problem.reward_observation[t][h + (a, o)]) + node(h + (a, o)))
            qs.append(val)
        best = max(qs)
        out[h] = (best, {a for a, q in enumerate(qs) if q >= best - 1e-12}, qs)
        return best

    node(())
    return out


def enumerate_deterministic_policies(problem):
    """Expected total reward of every deterministic policy over all histories.

    Returns ``(best_value, values)`` where ``values`` maps each policy (a
    tuple of actions, one per history in canonical order) to its value.
    """
    A, O, T = problem.n_actions, problem.n_obs, problem.horizon
    hist = [h for t in range(T) for h in _histories(A, O, t)]
    values = {}
    for choice in itertools.product(range(A), repeat=len(hist)):
        pol = dict(zip(hist, choice))

        def run(h, mass):
            t = len(h) // 2
            if t == T or mass == 0:
                return 0.0
            a = pol[h]
            total = float(problem.reward_action[t][h + (a,)])
            for o in range(O):
                p = float(problem.environment[t][h + (a, o)])
                total += p * (float(problem.reward_observation[t][h + (a, o)]) + run(h + (a, o), p))
            return total

        values[choice] = run((), 1.0)
    return max(values.values()), values


def random_control_problem(rng, horizon, n_actions=2, n_obs=2, alpha=1.0, min_gap=0.0,
                           max_tries=1000):
    """Random control problem whose optimal action is unique by ``min_gap``."""
    from .solvers.control import ControlProblem

    for _ in range(max_tries):
        env, ref, ra, ro = [], [], [], []
        for t in range(horizon):
            shape = (n_actions, n_obs) * t
            env.append(random_rows(rng, shape + (n_actions,), n_obs, 0.05))
            ref.append(random_rows(rng, shape, n_actions, 0.1))
            ra.append(rng.uniform(-1, 1, size=shape + (n_actions,)))
            ro.append(rng.uniform(-1, 1, size=shape + (n_actions, n_obs)))
        prob = ControlProblem(horizon, n_actions, n_obs, tuple(env), tuple(ref), tuple(ra), tuple(ro), alpha)
        if min_gap <= 0:
            return prob
        gaps = []
        for _, (best, _, qs) in brute_force_values(prob).items():
            qs = sorted(qs, reverse=True)
            gaps.append(qs[0] - qs[1] if len(qs) > 1 else np.inf)
        if min(gaps) >= min_gap:
            return prob
    raise RuntimeError("could not draw a problem with the requested reward gap")
