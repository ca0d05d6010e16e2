"""Convex inner approximation of the admissible injection set.

Builds the restriction around a nominal operating point: proxy variables
bracket every branch flow, squared voltage and squared current, a first-order
underestimator supplies the current lower bound, and the current upper bound
comes in two flavors:

  * ``conservative`` — the absolute-value/worst-corner bound (epigraph over
    two linear rows and the eight proxy-corner quadratic forms per branch),
  * ``soc`` — the tighter epigraph relaxation of l = (P^2 + Q^2)/v as four
    second-order cones per branch, one per signed proxy combination, with
    the lower voltage proxy in the denominator role.

Solving the restriction twice (injections >= 0, then <= 0) yields per-node
hosting-capacity intervals whose cross product is safe for independent DER
operation. The same bound formulas are also evaluated standalone (via a
monotone fixed point over the proxy definitions) to measure envelope
tightness against the exact load flow.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, time, timedelta

import cvxpy as cp
import numpy as np

from hostcap import fairness as fairness_mod
from hostcap.conic import ConicProblem, ConicSolution
from hostcap.loadflow import batch_loadflow, solve_loadflow
from hostcap.net_model import CompactMatrices, Network

VARIANT_SOC = "soc"
VARIANT_CONSERVATIVE = "conservative"
DIRECTION_UPPER = "upper"
DIRECTION_LOWER = "lower"

# The four signed (P, Q) proxy combinations entering each cone, and the
# eight proxy corners of the conservative quadratic forms.
SOC_COMBOS = tuple((sp, sq) for sp in "+-" for sq in "+-")
CORNER_COMBOS = tuple((sp, sq, sv) for sp in "+-" for sq in "+-" for sv in "+-")

RELINEARIZE_TOL = 1e-4          # pu; interval change that stops iterating
HESSIAN_PSD_TOL = -1e-9


class CiaError(RuntimeError):
    """Raised when the restriction cannot be built or solved."""


@dataclass(frozen=True)
class Linearization:
    """Expansion point and derivatives of the branch-current function.

    Arrays are per branch. ``V0`` is the squared voltage at each branch's
    downstream bus. The Jacobian is stored componentwise (jP, jQ, jV) with
    elementwise sign splits; ``He`` stacks the per-branch 3x3 Hessians and
    ``L_fac`` their 2x3 factors with He = L^T L, used to express the
    quadratic forms as norms.
    """

    P0: np.ndarray
    Q0: np.ndarray
    V0: np.ndarray
    l0: np.ndarray
    p_d: np.ndarray
    q_d: np.ndarray
    p_g: np.ndarray                  # injection at the expansion point (pu)
    jP: np.ndarray
    jQ: np.ndarray
    jV: np.ndarray
    He: np.ndarray                   # (N, 3, 3)
    L_fac: np.ndarray                # (N, 2, 3)

    @property
    def jP_pos(self):
        return np.maximum(self.jP, 0.0)

    @property
    def jP_neg(self):
        return np.minimum(self.jP, 0.0)

    @property
    def jQ_pos(self):
        return np.maximum(self.jQ, 0.0)

    @property
    def jQ_neg(self):
        return np.minimum(self.jQ, 0.0)

    @property
    def jV_pos(self):
        return np.maximum(self.jV, 0.0)

    @property
    def jV_neg(self):
        return np.minimum(self.jV, 0.0)


def linearize(
    net: Network,
    mats: CompactMatrices,
    p_d: np.ndarray | None = None,
    q_d: np.ndarray | None = None,
    p_g: np.ndarray | None = None,
) -> Linearization:
    """Run a load flow (at zero injection unless given) and differentiate.

    Raises `CiaError` if the load flow diverges or a branch Hessian fails
    the positive-semidefiniteness check.
    """
    p_d = net.p_demand if p_d is None else np.asarray(p_d, dtype=float)
    q_d = net.q_demand if q_d is None else np.asarray(q_d, dtype=float)
    p_g = np.zeros(net.n_branches) if p_g is None else np.asarray(p_g, dtype=float)
    op = solve_loadflow(net, mats, p_g=p_g, p_d=p_d, q_d=q_d)
    if not op.converged:
        raise CiaError(
            f"load flow diverged at the expansion point (residual {op.residual:.3e})"
        )
    P0, Q0, V0, l0 = op.P, op.Q, op.V, op.l
    jP = 2.0 * P0 / V0
    jQ = 2.0 * Q0 / V0
    jV = -(P0**2 + Q0**2) / V0**2

    n = net.n_branches
    He = np.zeros((n, 3, 3))
    L = np.zeros((n, 2, 3))
    He[:, 0, 0] = He[:, 1, 1] = 2.0 / V0
    He[:, 0, 2] = He[:, 2, 0] = -2.0 * P0 / V0**2
    He[:, 1, 2] = He[:, 2, 1] = -2.0 * Q0 / V0**2
    He[:, 2, 2] = 2.0 * (P0**2 + Q0**2) / V0**3
    s = np.sqrt(2.0 / V0)
    L[:, 0, 0] = s
    L[:, 1, 1] = s
    L[:, 0, 2] = -s * P0 / V0
    L[:, 1, 2] = -s * Q0 / V0

    eig_min = np.linalg.eigvalsh(He).min()
    if eig_min < HESSIAN_PSD_TOL:
        raise CiaError(f"branch Hessian not PSD (min eigenvalue {eig_min:.3e})")
    lin = Linearization(P0=P0, Q0=Q0, V0=V0, l0=l0, p_d=p_d, q_d=q_d, p_g=p_g,
                        jP=jP, jQ=jQ, jV=jV, He=He, L_fac=L)
    for arr in (P0, Q0, V0, l0, He, L):
        arr.setflags(write=False)
    return lin


# --------------------------------------------------------------------------
# Restriction problem
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ObjectiveSpec:
    """Objective of the restriction: linear or logarithmic, with weights
    over the generation nodes."""

    form: str                        # "linear" | "log"
    weights: np.ndarray              # per generation node, >= 0

    def __post_init__(self):
        if self.form not in ("linear", "log"):
            raise CiaError(f"unknown objective form {self.form!r}")


def build_p1(
    net: Network,
    mats: CompactMatrices,
    lin: Linearization,
    objective: ObjectiveSpec,
    bound_variant: str = VARIANT_SOC,
    fairness: "fairness_mod.FairnessSpec | None" = None,
    direction: str = DIRECTION_UPPER,
) -> ConicProblem:
    """Assemble the conic restriction for one solve direction.

    ``direction="upper"`` constrains injections nonnegative and is the solve
    that yields per-node upper limits; ``"lower"`` mirrors it with
    nonpositive injections. Reactive generation is fixed at zero (unity
    power factor), so the reactive injection is the constant -q_d.
    """
    if bound_variant not in (VARIANT_SOC, VARIANT_CONSERVATIVE):
        raise CiaError(f"unknown bound variant {bound_variant!r}")
    if direction not in (DIRECTION_UPPER, DIRECTION_LOWER):
        raise CiaError(f"unknown direction {direction!r}")

    n = net.n_branches
    gen = net.gen_nodes
    g = len(gen)
    if g == 0:
        raise CiaError("network has no generation nodes")
    if objective.weights.shape != (g,):
        raise CiaError("objective weights must have one entry per generation node")
    gen_map = net.gen_index_map()

    prob = ConicProblem(name=f"p1-{bound_variant}-{direction}")
    pg = prob.add_variable("pg", g)
    lm = prob.add_variable("l_minus", n)
    lp = prob.add_variable("l_plus", n)
    Pp = prob.add_variable("P_plus", n)
    Pm = prob.add_variable("P_minus", n)
    Qp = prob.add_variable("Q_plus", n)
    Qm = prob.add_variable("Q_minus", n)
    Vp = prob.add_variable("V_plus", n)
    Vm = prob.add_variable("V_minus", n)

    p = gen_map @ pg - lin.p_d
    q_const = -lin.q_d
    Cp = mats.C @ p
    Cq = mats.C @ q_const
    v_aff = net.v0_sq + mats.M_p @ p + mats.M_q @ q_const

    prob.add_eq(Pp - (Cp - mats.D_R @ lm), label="P_plus_def")
    prob.add_eq(Pm - (Cp - mats.D_R @ lp), label="P_minus_def")
    prob.add_eq(Qp - (Cq - mats.D_X_pos @ lm - mats.D_X_neg @ lp), label="Q_plus_def")
    prob.add_eq(Qm - (Cq - mats.D_X_pos @ lp - mats.D_X_neg @ lm), label="Q_minus_def")
    prob.add_eq(Vp - (v_aff - mats.H_pos @ lm - mats.H_neg @ lp), label="V_plus_def")
    prob.add_eq(Vm - (v_aff - mats.H_pos @ lp - mats.H_neg @ lm), label="V_minus_def")

    dPp, dQp, dVp = Pp - lin.P0, Qp - lin.Q0, Vp - lin.V0
    dPm, dQm, dVm = Pm - lin.P0, Qm - lin.Q0, Vm - lin.V0

    lower = (lin.l0
             + cp.multiply(lin.jP_pos, dPm) + cp.multiply(lin.jQ_pos, dQm)
             + cp.multiply(lin.jV_pos, dVm)
             + cp.multiply(lin.jP_neg, dPp) + cp.multiply(lin.jQ_neg, dQp)
             + cp.multiply(lin.jV_neg, dVp))
    prob.add_eq(lm - lower, label="l_minus_def")

    if bound_variant == VARIANT_SOC:
        for sp, sq in SOC_COMBOS:
            Pb = Pp if sp == "+" else Pm
            Qb = Qp if sq == "+" else Qm
            u = cp.vstack([2.0 * Pb, 2.0 * Qb, lp - Vm])
            prob.add_soc(u, lp + Vm, label=f"l_soc[{sp}{sq}]")
    else:
        lin_term = (cp.multiply(lin.jP_pos, dPp) + cp.multiply(lin.jQ_pos, dQp)
                    + cp.multiply(lin.jV_pos, dVp)
                    + cp.multiply(lin.jP_neg, dPm) + cp.multiply(lin.jQ_neg, dQm)
                    + cp.multiply(lin.jV_neg, dVm))
        prob.add_ineq(lin.l0 + 2.0 * lin_term - lp, label="l_cons_lin+")
        prob.add_ineq(lin.l0 - 2.0 * lin_term - lp, label="l_cons_lin-")
        s_margin = lp - lin.l0
        L = lin.L_fac
        for sp, sq, sv in CORNER_COMBOS:
            dP = dPp if sp == "+" else dPm
            dQ = dQp if sq == "+" else dQm
            dV = dVp if sv == "+" else dVm
            y1 = cp.multiply(L[:, 0, 0], dP) + cp.multiply(L[:, 0, 2], dV)
            y2 = cp.multiply(L[:, 1, 1], dQ) + cp.multiply(L[:, 1, 2], dV)
            u = cp.vstack([2.0 * y1, 2.0 * y2, s_margin - 1.0])
            prob.add_soc(u, s_margin + 1.0, label=f"l_cons_quad[{sp}{sq}{sv}]")

    prob.add_box("V_plus", hi=net.v_hi_sq)
    prob.add_box("V_minus", lo=net.v_lo_sq)
    prob.add_box("P_plus", hi=net.p_max)
    prob.add_box("P_minus", lo=-net.p_max)
    prob.add_box("Q_plus", hi=net.q_max)
    prob.add_box("Q_minus", lo=-net.q_max)
    prob.add_box("l_plus", hi=net.l_max)

    if direction == DIRECTION_UPPER:
        prob.add_box("pg", lo=0.0)
        if objective.form == "log":
            prob.set_log_objective("pg", objective.weights)
        else:
            prob.set_linear_objective("pg", objective.weights)
    else:
        # The lower solve minimizes the weighted sum of injections over
        # pg <= 0; logarithmic scenarios fall back to the same linear form
        # because their objective is undefined for nonpositive injections.
        prob.add_box("pg", hi=0.0)
        prob.set_linear_objective("pg", -objective.weights)

    if fairness is not None:
        fairness_mod.epsilon_constraint(prob, fairness, "pg")
    return prob


# --------------------------------------------------------------------------
# Hosting-capacity intervals
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Hyperrectangle:
    """Per-node injection intervals [lo, hi] in MW; the DHC at one step."""

    node_ids: tuple                  # external ids of the generation nodes
    lo_mw: np.ndarray
    hi_mw: np.ndarray
    scenario: str
    variant: str
    iterations: int
    meta: dict = field(default_factory=dict, repr=False, compare=False)
    upper_solution: ConicSolution | None = field(default=None, repr=False, compare=False)
    lower_solution: ConicSolution | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if np.any(self.lo_mw > 0) or np.any(self.hi_mw < 0):
            raise CiaError("hosting-capacity intervals must contain zero")

    @property
    def widths_mw(self) -> np.ndarray:
        return self.hi_mw - self.lo_mw

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths_mw))

    def aggregate_mw(self) -> tuple:
        """Network-level interval: sums of the per-node bounds."""
        return float(self.lo_mw.sum()), float(self.hi_mw.sum())

    def sample_mw(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform samples inside the box, shape (count, n_nodes), MW."""
        return rng.uniform(self.lo_mw, self.hi_mw, size=(count, len(self.node_ids)))

    def contains_mw(self, point: np.ndarray, slack: float = 0.0) -> bool:
        point = np.asarray(point, dtype=float)
        return bool(np.all(point >= self.lo_mw - slack) and np.all(point <= self.hi_mw + slack))


def resolve_scenario(scenario) -> "fairness_mod.ScenarioPreset":
    if isinstance(scenario, fairness_mod.ScenarioPreset):
        return scenario
    try:
        return fairness_mod.SCENARIOS[str(scenario)]
    except KeyError:
        known = ", ".join(sorted(fairness_mod.SCENARIOS))
        raise CiaError(f"unknown scenario {scenario!r} (known: {known})") from None


def solve_hc(
    net: Network,
    mats: CompactMatrices,
    p_d: np.ndarray | None = None,
    q_d: np.ndarray | None = None,
    scenario="s1",
    bound_variant: str = VARIANT_SOC,
    fairness: "fairness_mod.FairnessSpec | None" = None,
    iterations: int = 1,
    tol: float = 1e-8,
) -> Hyperrectangle:
    """Solve the restriction twice and extract the hosting-capacity box.

    The first pass linearizes at zero injection; further passes (when
    ``iterations`` allows) re-linearize at the load flow of the current
    interval midpoints and stop once no endpoint moves by more than
    ``RELINEARIZE_TOL`` pu. The fairness constraint, when present, applies
    to the upper solve only.
    """
    preset = resolve_scenario(scenario)
    p_d = net.p_demand if p_d is None else np.asarray(p_d, dtype=float)
    q_d = net.q_demand if q_d is None else np.asarray(q_d, dtype=float)
    weights = fairness_mod.scenario_weights(preset, net, p_d)
    if fairness is None:
        fairness = fairness_mod.scenario_fairness(preset, net, p_d)
    objective = ObjectiveSpec(form=preset.objective_form, weights=weights)

    gen = net.gen_nodes
    gen_map = net.gen_index_map()
    lo = np.zeros(len(gen))
    hi = np.zeros(len(gen))
    count = 0
    sol_up = sol_lo = None
    lin = None
    for it in range(max(1, iterations)):
        p_g_anchor = gen_map @ ((lo + hi) / 2.0) if it else None
        lin = linearize(net, mats, p_d, q_d, p_g=p_g_anchor)

        sol_up = _solve_direction(net, mats, lin, objective, bound_variant,
                                  fairness, DIRECTION_UPPER, tol)
        sol_lo = _solve_direction(net, mats, lin, objective, bound_variant,
                                  None, DIRECTION_LOWER, tol)
        hi_new = np.maximum(sol_up.primal["pg"], 0.0)
        lo_new = np.minimum(sol_lo.primal["pg"], 0.0)
        change = max(np.max(np.abs(hi_new - hi)), np.max(np.abs(lo_new - lo)))
        lo, hi = lo_new, hi_new
        count = it + 1
        if it and change < RELINEARIZE_TOL:
            break

    meta = {
        "upper_objective_pu": sol_up.objective,
        "lower_objective_pu": sol_lo.objective,
        "upper_iterations": sol_up.iterations,
        "lower_iterations": sol_lo.iterations,
        "max_violation": max(sol_up.max_violation or 0.0, sol_lo.max_violation or 0.0),
    }
    return Hyperrectangle(
        node_ids=tuple(net.bus_ids[k] for k in gen),
        lo_mw=net.mw(lo),
        hi_mw=net.mw(hi),
        scenario=preset.name,
        variant=bound_variant,
        iterations=count,
        meta=meta,
        upper_solution=sol_up,
        lower_solution=sol_lo,
    )


FAIRNESS_SOLVE_TOL = 1e-9


def _solve_direction(net, mats, lin, objective, bound_variant, fairness,
                     direction, tol) -> ConicSolution:
    prob = build_p1(net, mats, lin, objective, bound_variant, fairness, direction)
    if fairness is not None:
        # Fairness guarantees are checked against the returned point at
        # ~1e-9; the upper solve tolerates (and needs) tighter targets.
        sol = prob.solve(tol=min(tol, FAIRNESS_SOLVE_TOL), gap_tol=FAIRNESS_SOLVE_TOL)
    else:
        sol = prob.solve(tol=tol)
    if not sol.is_optimal:
        raise CiaError(
            f"restriction solve failed ({direction}, {bound_variant}): "
            f"status={sol.status}. The zero-injection point is feasible by "
            "construction, so this indicates solver trouble or corrupt inputs."
        )
    return sol


# --------------------------------------------------------------------------
# Standalone envelope evaluation (bound quality diagnostics)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProxyPoint:
    """Converged proxy values for one injection vector."""

    P_plus: np.ndarray
    P_minus: np.ndarray
    Q_plus: np.ndarray
    Q_minus: np.ndarray
    V_plus: np.ndarray
    V_minus: np.ndarray
    l_minus: np.ndarray
    l_plus: np.ndarray
    converged: bool


def lower_bound_value(lin: Linearization, d_minus: np.ndarray, d_plus: np.ndarray) -> np.ndarray:
    """First-order underestimator of the squared current (per branch).

    ``d_minus``/``d_plus`` stack the (dP, dQ, dV) deviations of the lower and
    upper proxies from the expansion point, shape (3, N).
    """
    jp = np.vstack([lin.jP_pos, lin.jQ_pos, lin.jV_pos])
    jn = np.vstack([lin.jP_neg, lin.jQ_neg, lin.jV_neg])
    return lin.l0 + np.sum(jp * d_minus + jn * d_plus, axis=0)


def soc_bound_value(lin: Linearization, Pp, Pm, Qp, Qm, Vm) -> np.ndarray:
    """Tight upper bound: worst signed-proxy corner of (P^2 + Q^2) / V-."""
    if np.any(Vm <= 0):
        raise CiaError("lower voltage proxy reached zero; bound undefined")
    P2 = np.maximum(Pp**2, Pm**2)
    Q2 = np.maximum(Qp**2, Qm**2)
    return (P2 + Q2) / Vm


def conservative_bound_value(lin: Linearization, d_minus: np.ndarray, d_plus: np.ndarray) -> np.ndarray:
    """Absolute-value bound: l0 + max(2|J+ d+ + J- d-|, worst corner form)."""
    jp = np.vstack([lin.jP_pos, lin.jQ_pos, lin.jV_pos])
    jn = np.vstack([lin.jP_neg, lin.jQ_neg, lin.jV_neg])
    lin_term = np.sum(jp * d_plus + jn * d_minus, axis=0)
    best = 2.0 * np.abs(lin_term)
    for sp, sq, sv in CORNER_COMBOS:
        d = np.vstack([
            d_plus[0] if sp == "+" else d_minus[0],
            d_plus[1] if sq == "+" else d_minus[1],
            d_plus[2] if sv == "+" else d_minus[2],
        ])
        y = np.einsum("nij,jn->in", lin.L_fac, d)
        best = np.maximum(best, np.sum(y**2, axis=0))
    return lin.l0 + best


def proxy_fixed_point(
    net: Network,
    mats: CompactMatrices,
    lin: Linearization,
    p: np.ndarray,
    q: np.ndarray,
    bound_variant: str,
    tol: float = 1e-12,
    max_iter: int = 500,
) -> ProxyPoint:
    """Settle the proxy system at a fixed injection.

    Starting from l- = l+ = l0 the bracket widens monotonically toward the
    least fixed point, which is where the restriction's constraints would
    place the proxies for this injection.
    """
    lm = lin.l0.copy()
    lp = lin.l0.copy()
    Cp_base = mats.C @ p
    Cq = mats.C @ q
    v_aff = net.v0_sq + mats.M_p @ p + mats.M_q @ q
    converged = False
    for _ in range(max_iter):
        Pp = Cp_base - mats.D_R @ lm
        Pm = Cp_base - mats.D_R @ lp
        Qp = Cq - mats.D_X_pos @ lm - mats.D_X_neg @ lp
        Qm = Cq - mats.D_X_pos @ lp - mats.D_X_neg @ lm
        Vp = v_aff - mats.H_pos @ lm - mats.H_neg @ lp
        Vm = v_aff - mats.H_pos @ lp - mats.H_neg @ lm
        d_plus = np.vstack([Pp - lin.P0, Qp - lin.Q0, Vp - lin.V0])
        d_minus = np.vstack([Pm - lin.P0, Qm - lin.Q0, Vm - lin.V0])
        lm_new = lower_bound_value(lin, d_minus, d_plus)
        if bound_variant == VARIANT_SOC:
            lp_new = soc_bound_value(lin, Pp, Pm, Qp, Qm, Vm)
        else:
            lp_new = conservative_bound_value(lin, d_minus, d_plus)
        step = max(np.max(np.abs(lm_new - lm)), np.max(np.abs(lp_new - lp)))
        lm, lp = lm_new, lp_new
        if not np.all(np.isfinite(lp)):
            break
        if step < tol:
            converged = True
            break
    return ProxyPoint(P_plus=Pp, P_minus=Pm, Q_plus=Qp, Q_minus=Qm,
                      V_plus=Vp, V_minus=Vm, l_minus=lm, l_plus=lp,
                      converged=converged)


@dataclass(frozen=True)
class MaeSweep:
    """Envelope-tightness sweep at one injection node."""

    node_id: object                  # external id
    pg_mw: np.ndarray
    mae_conservative: np.ndarray     # mean over branches of |l - l+|, pu
    mae_soc: np.ndarray
    l_actual: np.ndarray             # (points, N)
    l_plus_conservative: np.ndarray
    l_plus_soc: np.ndarray


def envelope_mae(
    net: Network,
    mats: CompactMatrices,
    lin: Linearization,
    node_id,
    pg_min_mw: float,
    pg_max_mw: float,
    points: int = 65,
) -> MaeSweep:
    """Compare both upper bounds against the exact current over a sweep.

    For each injection level the exact currents come from the nonlinear
    load flow and each bound is evaluated at its settled proxy point; the
    reported MAE averages |l - l+| over branches (one value per level).
    """
    k = net.index_of(node_id)
    if k not in net.gen_nodes:
        raise CiaError(f"sweep node {node_id!r} is not a generation node")
    grid = np.linspace(pg_min_mw, pg_max_mw, points) / net.s_base_mva
    n = net.n_branches
    mae = {VARIANT_CONSERVATIVE: np.zeros(points), VARIANT_SOC: np.zeros(points)}
    l_act = np.zeros((points, n))
    l_up = {VARIANT_CONSERVATIVE: np.zeros((points, n)), VARIANT_SOC: np.zeros((points, n))}
    for i, pg in enumerate(grid):
        p = -lin.p_d.copy()
        p[k - 1] += pg
        q = -lin.q_d
        _, _, _, l, ok, _, _ = batch_loadflow(net, mats, p, q)
        if not ok[0]:
            raise CiaError(
                f"load flow diverged at sweep injection {pg * net.s_base_mva:.3f} MW"
            )
        l_act[i] = l[:, 0]
        for variant in (VARIANT_CONSERVATIVE, VARIANT_SOC):
            prox = proxy_fixed_point(net, mats, lin, p, q, variant)
            if not prox.converged:
                raise CiaError(
                    f"proxy fixed point did not settle at {pg * net.s_base_mva:.3f} MW "
                    f"({variant})"
                )
            l_up[variant][i] = prox.l_plus
            mae[variant][i] = np.mean(np.abs(l_act[i] - prox.l_plus))
    return MaeSweep(
        node_id=node_id,
        pg_mw=grid * net.s_base_mva,
        mae_conservative=mae[VARIANT_CONSERVATIVE],
        mae_soc=mae[VARIANT_SOC],
        l_actual=l_act,
        l_plus_conservative=l_up[VARIANT_CONSERVATIVE],
        l_plus_soc=l_up[VARIANT_SOC],
    )


# --------------------------------------------------------------------------
# Time series
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DhcStep:
    timestamp: datetime
    rect: Hyperrectangle | None
    skipped: bool = False            # outside the daytime window
    error: str | None = None
    demand_gen_mw: np.ndarray | None = None


@dataclass(frozen=True)
class DhcSeries:
    """Dynamic hosting capacity: one hyperrectangle per daytime step."""

    steps: tuple
    dt: timedelta
    node_ids: tuple
    scenario: str
    variant: str

    def computed(self):
        return [s for s in self.steps if s.rect is not None]

    def hi_matrix_mw(self) -> np.ndarray:
        """(steps, nodes) upper limits over the computed steps."""
        return np.array([s.rect.hi_mw for s in self.computed()])

    def demand_matrix_mw(self) -> np.ndarray:
        return np.array([s.demand_gen_mw for s in self.computed()])


DAYTIME_DEFAULT = (time(6, 0), time(20, 0))


def _validate_uniform(timestamps) -> timedelta:
    if len(timestamps) < 1:
        raise CiaError("empty time series")
    if len(timestamps) == 1:
        return timedelta(minutes=5)
    dt = timestamps[1] - timestamps[0]
    if dt <= timedelta(0):
        raise CiaError("timestamps must be strictly increasing")
    for a, b in zip(timestamps, timestamps[1:]):
        if b - a != dt:
            raise CiaError(f"non-uniform time step between {a} and {b}")
    return dt


def dhc_timeseries(
    net: Network,
    mats: CompactMatrices,
    timestamps,
    p_d_series: np.ndarray,
    q_d_series: np.ndarray,
    scenario="s1",
    bound_variant: str = VARIANT_SOC,
    fairness: "fairness_mod.FairnessSpec | None" = None,
    iterations: int = 1,
    daytime: tuple = DAYTIME_DEFAULT,
) -> DhcSeries:
    """Hosting-capacity intervals per step of a uniform demand series.

    ``p_d_series``/``q_d_series`` have shape (T, N) in pu. Steps outside the
    daytime window are marked skipped; a step whose solve fails is recorded
    with its error and the series continues.
    """
    preset = resolve_scenario(scenario)
    dt = _validate_uniform(list(timestamps))
    p_d_series = np.asarray(p_d_series, dtype=float)
    q_d_series = np.asarray(q_d_series, dtype=float)
    if p_d_series.shape != q_d_series.shape or p_d_series.shape[0] != len(timestamps):
        raise CiaError("demand series shapes do not match the timestamps")
    start, end = daytime
    gen = net.gen_nodes

    steps = []
    for i, ts in enumerate(timestamps):
        demand_gen_mw = net.mw(p_d_series[i][gen - 1])
        if not (start <= ts.time() < end):
            steps.append(DhcStep(ts, None, skipped=True, demand_gen_mw=demand_gen_mw))
            continue
        try:
            rect = solve_hc(net, mats, p_d_series[i], q_d_series[i],
                            scenario=preset, bound_variant=bound_variant,
                            fairness=fairness, iterations=iterations)
            steps.append(DhcStep(ts, rect, demand_gen_mw=demand_gen_mw))
        except CiaError as exc:
            steps.append(DhcStep(ts, None, error=str(exc), demand_gen_mw=demand_gen_mw))
    return DhcSeries(
        steps=tuple(steps),
        dt=dt,
        node_ids=tuple(net.bus_ids[k] for k in gen),
        scenario=preset.name,
        variant=bound_variant,
    )
