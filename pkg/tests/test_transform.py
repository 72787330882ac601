import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from freeutility import oracles
from freeutility.errors import DegenerateError
from freeutility.transform import (
    TransformProblem,
    control_solution,
    estimation_solution,
    free_utility_difference,
    log_partition_value,
)

from conftest import simplex


def tv(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


class TestExamples:
    def test_no_change(self):
        assert free_utility_difference([0.3, 0.7], [0.3, 0.7], [0, 0], 1) == 0.0

    def test_delta_costs_one_bit(self):
        assert free_utility_difference([0.5, 0.5], [1, 0], [0, 0], 1) == pytest.approx(-1.0)

    def test_optimum_value(self):
        val = free_utility_difference([0.5, 0.5], [2 / 3, 1 / 3], [1, 0], 1)
        assert val == pytest.approx(np.log2(3) - 1, abs=1e-12)

    def test_control(self):
        sol = control_solution(TransformProblem([0.5, 0.5], [1, 0], 1))
        np.testing.assert_allclose(sol, [2 / 3, 1 / 3])

    def test_cold_and_hot(self):
        p_i, u = [0.25, 0.25, 0.5], [1.0, 3.0, 0.0]
        assert tv(control_solution(TransformProblem(p_i, u, 1e-6)), [0, 1, 0]) < 1e-3
        assert tv(control_solution(TransformProblem(p_i, u, 1e6)), p_i) < 1e-3

    def test_estimation(self):
        np.testing.assert_allclose(estimation_solution([0.3, 0.7]), [0.3, 0.7])
        np.testing.assert_allclose(estimation_solution([0, 1]), [0, 1])
        np.testing.assert_allclose(estimation_solution([0.5, 0.5]), [0.5, 0.5])

    def test_not_absolutely_continuous(self):
        assert free_utility_difference([1.0, 0.0], [0.5, 0.5], [0, 0], 1) == -np.inf

    def test_disjoint_support(self):
        with pytest.raises(DegenerateError):
            control_solution(TransformProblem([1.0, 0.0], [-np.inf, 0.0], 1))


class TestProperties:
    @given(simplex(max_size=6), st.floats(0.1, 5), st.integers(0, 2**32 - 1))
    def test_beats_perturbations(self, p_i, alpha, seed):
        rng = np.random.default_rng(seed)
        u = rng.normal(0, 2, size=p_i.size)
        sol = control_solution(TransformProblem(p_i, u, alpha))
        best = free_utility_difference(p_i, sol, u, alpha)
        assert best == pytest.approx(log_partition_value(p_i, u, alpha), abs=1e-9)
        for q in oracles.perturb_simplex(rng, sol, 200):
            assert free_utility_difference(p_i, q, u, alpha) <= best + 1e-9

    @given(simplex(min_size=3, max_size=6), st.integers(0, 2**32 - 1))
    def test_support_preserved(self, p_i, seed):
        rng = np.random.default_rng(seed)
        p_i = p_i.copy()
        p_i[rng.integers(p_i.size)] = 0.0
        p_i /= p_i.sum()
        sol = control_solution(TransformProblem(p_i, rng.normal(size=p_i.size), 0.5))
        assert np.all(sol[p_i == 0] == 0)

    @given(simplex(max_size=6), st.floats(-50, 50), st.floats(0.1, 5))
    def test_shift_invariance(self, p_i, c, alpha):
        u = np.linspace(-1, 1, p_i.size)
        a = control_solution(TransformProblem(p_i, u, alpha))
        b = control_solution(TransformProblem(p_i, u + c, alpha))
        assert np.max(np.abs(a - b)) < 1e-12
