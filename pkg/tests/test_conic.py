import numpy as np
import pytest

from hostcap.conic import (
    ConicModelError,
    ConicProblem,
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
)


class TestLinear:
    def test_bound_attained(self):
        prob = ConicProblem("max-x")
        prob.add_variable("x", 1)
        prob.add_ineq(prob.variable("x"), 2.0)
        prob.set_linear_objective("x", np.array([1.0]))
        sol = prob.solve()
        assert sol.status == STATUS_OPTIMAL
        assert sol.primal["x"][0] == pytest.approx(2.0, abs=1e-7)
        assert sol.max_violation <= 1e-7

    def test_infeasible_reported(self):
        prob = ConicProblem()
        x = prob.add_variable("x", 1)
        prob.add_ineq(x, -1.0)
        prob.add_ineq(-x, -2.0)  # x >= 2 and x <= -1
        prob.set_linear_objective("x", np.array([1.0]))
        assert prob.solve().status == STATUS_INFEASIBLE


class TestLog:
    def test_symmetric_split(self):
        prob = ConicProblem("log")
        xy = prob.add_variable("xy", 2)
        prob.add_ineq(xy[0] + xy[1], 2.0)
        prob.set_log_objective("xy", np.ones(2))
        sol = prob.solve()
        assert sol.status == STATUS_OPTIMAL
        assert sol.primal["xy"] == pytest.approx([1.0, 1.0], abs=1e-5)

    def test_log_requires_nonnegative_weights(self):
        prob = ConicProblem()
        prob.add_variable("x", 2)
        with pytest.raises(ConicModelError):
            prob.set_log_objective("x", np.array([1.0, -1.0]))


class TestSoc:
    def test_unit_disk_kkt_point(self):
        # max x+y over the unit disk: optimum at (sqrt2/2, sqrt2/2)
        prob = ConicProblem()
        xy = prob.add_variable("xy", 2)
        prob.add_soc(xy, 1.0)
        prob.set_linear_objective("xy", np.ones(2))
        sol = prob.solve()
        assert sol.status == STATUS_OPTIMAL
        assert sol.primal["xy"] == pytest.approx([np.sqrt(2) / 2] * 2, abs=1e-7)

    def test_boundary_point_feasible(self):
        prob = ConicProblem()
        prob.add_variable("x", 1)
        prob.add_soc(np.array([0.0, 0.0]), 0.0)
        prob.set_linear_objective("x", np.array([1.0]))
        prob.add_ineq(prob.variable("x"), 1.0)
        assert prob.solve().status == STATUS_OPTIMAL

    def test_three_four_five(self):
        # ||(3,4)|| = 5 exactly: feasible with equality, t fixed at 5
        prob = ConicProblem()
        x = prob.add_variable("x", 2)
        prob.add_eq(x, np.array([3.0, 4.0]))
        prob.add_soc(x, 5.0)
        prob.set_linear_objective("x", np.ones(2))
        sol = prob.solve()
        assert sol.status == STATUS_OPTIMAL
        assert sol.max_violation <= 1e-7

    def test_impossible_cone(self):
        prob = ConicProblem()
        x = prob.add_variable("x", 1)
        prob.add_eq(x, np.array([1.0]))
        prob.add_soc(x, 0.0)
        prob.set_linear_objective("x", np.ones(1))
        assert prob.solve().status == STATUS_INFEASIBLE

    def test_vectorized_cone_count(self):
        prob = ConicProblem()
        u = prob.add_variable("u", 3)
        t = prob.add_variable("t", 3)
        import cvxpy as cp
        prob.add_soc(cp.vstack([u, u]), t)
        assert prob.soc_cone_count == 3

    def test_dimension_mismatch(self):
        prob = ConicProblem()
        u = prob.add_variable("u", 3)
        t = prob.add_variable("t", 2)
        import cvxpy as cp
        with pytest.raises(ConicModelError):
            prob.add_soc(cp.vstack([u, u]), t)


class TestContract:
    def test_unregistered_variable_rejected(self):
        import cvxpy as cp
        prob = ConicProblem()
        prob.add_variable("x", 1)
        rogue = cp.Variable(1, name="rogue")
        with pytest.raises(ConicModelError, match="unregistered"):
            prob.add_ineq(rogue, 1.0)

    def test_redundant_constraint_stable(self):
        def solve(with_redundant):
            prob = ConicProblem()
            xy = prob.add_variable("xy", 2)
            prob.add_soc(xy, 1.0)
            if with_redundant:
                prob.add_ineq(xy[0] + xy[1], 10.0)  # slack at the optimum
            prob.set_linear_objective("xy", np.ones(2))
            return prob.solve().objective

        assert solve(True) == pytest.approx(solve(False), abs=1e-8)

    def test_independent_recheck_flags_bad_point(self):
        prob = ConicProblem()
        prob.add_variable("x", 1)
        prob.add_ineq(prob.variable("x"), 2.0)
        prob.set_linear_objective("x", np.ones(1))
        assert prob.check_point({"x": np.array([5.0])}) == pytest.approx(3.0)
        assert prob.check_point({"x": np.array([1.0])}) == 0.0

    def test_dump_mentions_rows(self):
        prob = ConicProblem("dumpme")
        prob.add_variable("x", 2)
        prob.add_soc(prob.variable("x"), 1.0, label="ball")
        prob.set_linear_objective("x", np.ones(2))
        text = prob.dump()
        assert "dumpme" in text and "ball" in text and "x[2]" in text

    def test_solution_statistics_present(self):
        prob = ConicProblem()
        prob.add_variable("x", 1)
        prob.add_ineq(prob.variable("x"), 2.0)
        prob.set_linear_objective("x", np.ones(1))
        sol = prob.solve()
        assert sol.iterations is not None and sol.iterations > 0
