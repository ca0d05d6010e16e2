"""Conic problem container: linear rows, second-order cones, log objectives.

The container owns a registry of named vector variables and the full list of
constraints, so a solved point can be re-checked numerically against every
stored row without trusting the solver. Modeling and solving are delegated
to cvxpy; logarithmic objective terms go through the exponential cone, which
the default CLARABEL backend supports natively. The backend is selectable
per solve for anyone who wants to swap it.
"""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass

import cvxpy as cp
import numpy as np

DEFAULT_SOLVER = "CLARABEL"
DEFAULT_TOL = 1e-8
# Variables appearing inside log terms are floored away from zero so the
# objective stays finite; allocations of interest sit far above this.
LOG_FLOOR = 1e-9

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_NUMERICAL_FAILURE = "numerical_failure"


class ConicModelError(ValueError):
    """Raised for malformed problems (unknown variables, bad dimensions)."""


@dataclass
class ConicSolution:
    status: str
    primal: dict                     # variable name -> np.ndarray
    objective: float | None
    iterations: int | None
    solve_time: float | None
    max_violation: float | None      # from the independent feasibility recheck

    @property
    def is_optimal(self) -> bool:
        return self.status == STATUS_OPTIMAL


class ConicProblem:
    """Maximization problem over named vector variables.

    Supported structure: linear objective plus weighted log terms, linear
    equalities/inequalities, second-order cones ||u||_2 <= t, and variable
    bounds. Constraint-adding methods return ids usable for inspection.
    """

    def __init__(self, name: str = ""):
        self.name = name
        self._vars: dict[str, cp.Variable] = {}
        self._constraints: list = []
        self._labels: list[str] = []
        self._soc_cones = 0
        self._lin_obj = None
        self._log_obj = None

    # -- variables ---------------------------------------------------------

    def add_variable(self, name: str, dim: int, nonneg: bool = False,
                     nonpos: bool = False) -> cp.Variable:
        if name in self._vars:
            raise ConicModelError(f"variable {name!r} already registered")
        v = cp.Variable(dim, name=name, nonneg=nonneg, nonpos=nonpos)
        self._vars[name] = v
        return v

    def variable(self, name: str) -> cp.Variable:
        try:
            return self._vars[name]
        except KeyError:
            raise ConicModelError(f"unknown variable {name!r}") from None

    @property
    def variable_names(self) -> tuple:
        return tuple(self._vars)

    # -- objective ---------------------------------------------------------

    def set_linear_objective(self, var_name: str, coeffs: np.ndarray) -> None:
        """Maximize coeffs @ var (replaces any previous linear objective)."""
        v = self.variable(var_name)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != v.shape:
            raise ConicModelError("objective coefficient length mismatch")
        self._lin_obj = coeffs @ v

    def set_log_objective(self, var_name: str, weights: np.ndarray) -> None:
        """Maximize sum_i weights_i * log(var_i); floors the variable > 0."""
        v = self.variable(var_name)
        weights = np.asarray(weights, dtype=float)
        if weights.shape != v.shape:
            raise ConicModelError("log weight length mismatch")
        if np.any(weights < 0):
            raise ConicModelError("log weights must be nonnegative")
        self.add_ineq(LOG_FLOOR - v, label=f"log_floor[{var_name}]")
        self._log_obj = cp.sum(cp.multiply(weights, cp.log(v)))

    # -- constraints -------------------------------------------------------

    def _register(self, constraint, label: str) -> int:
        for v in constraint.variables():
            if v.name() not in self._vars:
                raise ConicModelError(
                    f"constraint {label!r} references unregistered variable {v.name()!r}"
                )
        self._constraints.append(constraint)
        self._labels.append(label)
        return len(self._constraints) - 1

    def add_eq(self, lhs, rhs=0.0, label: str = "eq") -> int:
        """Affine equality lhs == rhs."""
        return self._register(lhs == rhs, label)

    def add_ineq(self, lhs, rhs=0.0, label: str = "ineq") -> int:
        """Affine inequality lhs <= rhs."""
        return self._register(lhs <= rhs, label)

    def add_soc(self, u, t, label: str = "soc") -> int:
        """Second-order cone ||u||_2 <= t.

        ``u`` may be a vector expression (one cone) or a (d, k) matrix whose
        columns are k separate cones sharing the vector ``t`` of length k.
        """
        if not isinstance(u, cp.Expression):
            u = cp.Constant(np.atleast_1d(np.asarray(u, dtype=float)))
        if not isinstance(t, cp.Expression):
            t = cp.Constant(float(t) if np.isscalar(t) else np.asarray(t, dtype=float))
        if not (u.is_affine() and t.is_affine()):
            raise ConicModelError("SOC arguments must be affine")
        if u.ndim <= 1:
            if t.ndim != 0 and t.size != 1:
                raise ConicModelError("scalar t required for a single cone")
            cone = cp.SOC(cp.reshape(t, (), order="F"), u)
            self._soc_cones += 1
        else:
            if t.size != u.shape[1]:
                raise ConicModelError(
                    f"t has size {t.size}, expected {u.shape[1]} (one per cone)"
                )
            cone = cp.SOC(t, u, axis=0)
            self._soc_cones += u.shape[1]
        return self._register(cone, label)

    def add_box(self, var_name: str, lo=None, hi=None) -> None:
        v = self.variable(var_name)
        if lo is not None:
            lo = np.broadcast_to(np.asarray(lo, dtype=float), v.shape)
            if np.any(np.isfinite(lo)):
                mask = np.isfinite(lo)
                self.add_ineq(lo[mask] - v[np.where(mask)[0]], label=f"lb[{var_name}]")
        if hi is not None:
            hi = np.broadcast_to(np.asarray(hi, dtype=float), v.shape)
            if np.any(np.isfinite(hi)):
                mask = np.isfinite(hi)
                self.add_ineq(v[np.where(mask)[0]] - hi[mask], label=f"ub[{var_name}]")

    @property
    def soc_cone_count(self) -> int:
        return self._soc_cones

    @property
    def constraint_count(self) -> int:
        return len(self._constraints)

    # -- solving -----------------------------------------------------------

    def _objective(self):
        terms = [t for t in (self._lin_obj, self._log_obj) if t is not None]
        if not terms:
            raise ConicModelError("no objective set")
        return cp.Maximize(sum(terms))

    def solve(self, tol: float = DEFAULT_TOL, solver: str = DEFAULT_SOLVER,
              gap_tol: float | None = None) -> ConicSolution:
        """Solve and independently re-check the primal point.

        ``tol`` governs constraint satisfaction; the duality-gap target
        (``gap_tol``, default 10x ``tol``) gets headroom since interior-point
        endgames routinely stall a hair above the feasibility level. One
        deterministic retry with a 100x looser gap runs before an inaccurate
        solve is surfaced as ``numerical_failure`` (never conflated with
        infeasibility).
        """
        problem = cp.Problem(self._objective(), list(self._constraints))
        status_map = {
            cp.OPTIMAL: STATUS_OPTIMAL,
            cp.INFEASIBLE: STATUS_INFEASIBLE,
            cp.UNBOUNDED: STATUS_UNBOUNDED,
        }
        gap = 10.0 * tol if gap_tol is None else gap_tol
        status = STATUS_NUMERICAL_FAILURE
        for gap_factor in (1.0, 100.0):
            opts = {}
            if solver == "CLARABEL":
                opts = {"tol_feas": tol, "tol_gap_abs": gap_factor * gap,
                        "tol_gap_rel": gap_factor * gap}
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    problem.solve(solver=solver, **opts)
            except cp.error.SolverError:
                return ConicSolution(STATUS_NUMERICAL_FAILURE, {}, None, None, None, None)
            status = status_map.get(problem.status, STATUS_NUMERICAL_FAILURE)
            if status != STATUS_NUMERICAL_FAILURE:
                break

        primal = {}
        max_violation = None
        if status == STATUS_OPTIMAL:
            primal = {name: np.atleast_1d(np.asarray(v.value, dtype=float))
                      for name, v in self._vars.items()}
            max_violation = self.check_point(primal)
        stats = problem.solver_stats
        return ConicSolution(
            status=status,
            primal=primal,
            objective=float(problem.value) if status == STATUS_OPTIMAL else None,
            iterations=getattr(stats, "num_iters", None),
            solve_time=getattr(stats, "solve_time", None),
            max_violation=max_violation,
        )

    def check_point(self, primal: dict) -> float:
        """Worst constraint violation of a candidate point.

        Substitutes values into every stored row and evaluates numerically,
        independent of whatever the solver reported.
        """
        old = {name: v.value for name, v in self._vars.items()}
        try:
            for name, v in self._vars.items():
                if name not in primal:
                    raise ConicModelError(f"candidate point missing variable {name!r}")
                v.value = np.reshape(primal[name], v.shape)
            worst = 0.0
            with np.errstate(invalid="ignore", divide="ignore"):
                for con in self._constraints:
                    worst = max(worst, float(np.max(con.violation())))
            return worst
        finally:
            for name, v in self._vars.items():
                v.value = old[name]

    # -- debugging ---------------------------------------------------------

    def dump(self) -> str:
        """Human-readable listing of variables, rows, and cones."""
        out = io.StringIO()
        out.write(f"ConicProblem {self.name!r}\n")
        out.write("variables:\n")
        for name, v in self._vars.items():
            attrs = "".join(
                f" {a}" for a, on in (("nonneg", v.is_nonneg()), ("nonpos", v.is_nonpos())) if on
            )
            out.write(f"  {name}[{v.size}]{attrs}\n")
        out.write(f"objective: maximize {self._lin_obj} "
                  f"{'+ ' + str(self._log_obj) if self._log_obj is not None else ''}\n")
        out.write(f"constraints ({len(self._constraints)} rows, {self._soc_cones} cones):\n")
        for label, con in zip(self._labels, self._constraints):
            out.write(f"  [{label}] {con}\n")
        return out.getvalue()
