import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freeutility import oracles
from freeutility.errors import ValidationError
from freeutility.gvp import (
    GvpProblem,
    UtilityTable,
    build_auxiliary,
    gvp_objective,
    gvp_objective_terms,
    gvp_solve,
    observation_measurable,
)
from freeutility.prob import (
    Alphabet,
    CausalModel,
    IOType,
    VariableSpec,
    VPMode,
)
from freeutility.solvers import estimation
from freeutility.transform import TransformProblem, control_solution, free_utility_difference

from conftest import binary

C, E = VPMode.CONTROLLED, VPMode.ESTIMATED


def single(mode, ref, cand=None, u=(0.0, 0.0), alpha=1.0):
    v = binary("x", IOType.OUTPUT if mode is C else IOType.DISCLOSED_INPUT, mode)
    ref_m = CausalModel.from_arrays([v], [ref])
    cand_m = None if cand is None else CausalModel.from_arrays([v], [cand])
    return GvpProblem(ref_m, UtilityTable((v,), (np.asarray(u, float),)), alpha, cand_m)


def seeds():
    return st.integers(0, 2**32 - 1)


class TestAuxiliary:
    def test_branches(self, rng):
        p = oracles.random_gvp_problem(rng, 2)
        for mode in (C, E):
            vs = tuple(VariableSpec(v.name, v.alphabet, IOType.DISCLOSED_INPUT if mode is E else IOType.OUTPUT, mode)
                       for v in p.variables)
            ref = CausalModel(vs, tuple(t.__class__(v, t.probs) for v, t in zip(vs, p.reference.conditionals)))
            cand = oracles.random_causal_model(rng, 2, io_types=[v.io_type for v in vs], vp_modes=[mode] * 2)
            g, r = build_auxiliary(GvpProblem(ref, UtilityTable.zeros(vs), 1.0, cand))
            first, second = (cand, ref) if mode is C else (ref, cand)
            np.testing.assert_array_equal(g.joint_array(), first.joint_array())
            np.testing.assert_array_equal(r.joint_array(), second.joint_array())

    def test_same_candidate(self, rng):
        p = oracles.random_gvp_problem(rng, 3)
        g, r = build_auxiliary(p.with_candidate(p.reference))
        np.testing.assert_array_equal(g.joint_array(), r.joint_array())
        assert gvp_objective(GvpProblem(p.reference, UtilityTable.zeros(p.variables), 1.0, p.reference)) == 0.0

    def test_mismatch(self, rng):
        p = oracles.random_gvp_problem(rng, 2)
        other = oracles.random_causal_model(rng, 3)
        with pytest.raises(ValidationError):
            p.with_candidate(other)


class TestReductions:
    @given(seeds(), st.floats(0.1, 5))
    def test_controlled_is_transform(self, seed, alpha):
        rng = np.random.default_rng(seed)
        ref, cand, u = rng.dirichlet([1, 1]), rng.dirichlet([1, 1]), rng.normal(size=2)
        p = single(C, ref, cand, u, alpha)
        assert gvp_objective(p) == pytest.approx(free_utility_difference(ref, cand, u, alpha), abs=1e-12)
        sol = gvp_solve(p).conditionals[0].probs
        assert np.max(np.abs(sol - control_solution(TransformProblem(ref, u, alpha)))) < 1e-9

    @given(seeds(), st.floats(0.1, 5))
    def test_estimated_is_negative_kl(self, seed, alpha):
        rng = np.random.default_rng(seed)
        ref, cand = rng.dirichlet([1, 1]), rng.dirichlet([1, 1])
        kl = float(np.sum(ref * np.log2(ref / cand)))
        assert gvp_objective(single(E, ref, cand, alpha=alpha)) == pytest.approx(-alpha * kl, abs=1e-12)
        assert np.max(np.abs(gvp_solve(single(E, ref, alpha=alpha)).conditionals[0].probs - ref)) < 1e-12

    def test_all_estimated_visible_returns_reference(self, rng):
        ref = oracles.random_causal_model(rng, 3, vp_modes=[E] * 3)
        sol = gvp_solve(GvpProblem(ref, UtilityTable.zeros(ref.variables), 2.0))
        np.testing.assert_allclose(sol.joint_array(), ref.joint_array(), atol=1e-12)

    def test_estimation_protocol_gives_predictive(self, rng):
        prior = rng.dirichlet(np.ones(3))
        probs = rng.dirichlet(np.ones(2), size=3)
        ep = estimation.EstimationProblem.iid(prior, probs, 4)
        sol = gvp_solve(estimation.as_gvp_problem(ep))
        for n in range(1, 5):
            for hist in np.ndindex(*((2,) * (n - 1))):
                _, pred = estimation.predictive_update(ep, hist)
                for theta in range(3):
                    np.testing.assert_allclose(sol.conditional(n, (theta,) + hist), pred, atol=1e-12)

    def test_undisclosed_controlled_rejected(self):
        v = VariableSpec("h", Alphabet.of_size(2), IOType.UNDISCLOSED_INPUT, C)
        ref = CausalModel.from_arrays([v], [[0.5, 0.5]])
        with pytest.raises(ValidationError):
            gvp_solve(GvpProblem(ref, UtilityTable.zeros((v,)), 1.0))

    def test_utility_on_undisclosed_rejected(self):
        v = VariableSpec("h", Alphabet.of_size(2), IOType.UNDISCLOSED_INPUT, E)
        ref = CausalModel.from_arrays([v], [[0.5, 0.5]])
        with pytest.raises(ValidationError):
            GvpProblem(ref, UtilityTable((v,), (np.array([1.0, 0.0]),)), 1.0)


class TestOracle:
    @settings(max_examples=15)
    @given(seeds(), st.integers(1, 3))
    def test_beats_random_and_ascent(self, seed, T):
        rng = np.random.default_rng(seed)
        p = oracles.random_gvp_problem(rng, T)
        sol = gvp_solve(p)
        assert observation_measurable(sol)
        value = gvp_objective(p.with_candidate(sol))
        assert value >= oracles.gvp_random_search(p, 2000, rng) - 1e-6
        assert value >= oracles.gvp_coordinate_ascent(p, rng)[0] - 1e-6

    @given(seeds(), st.integers(1, 3))
    def test_decomposition(self, seed, T):
        rng = np.random.default_rng(seed)
        p = oracles.random_gvp_problem(rng, T)
        if rng.random() < 0.5:
            cand = oracles.tables_to_model(p, [t[0] for t in oracles.random_measurable_tables(rng, p, 1)])
        else:
            cand = gvp_solve(p)
        q = p.with_candidate(cand)
        terms = gvp_objective_terms(q)
        total = sum(t.expected_utility - p.alpha * t.kl for t in terms)
        assert total == pytest.approx(gvp_objective(q), abs=1e-9)
