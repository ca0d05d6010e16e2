"""Exact nonlinear branch-flow solution and the admissibility oracle.

The solver iterates the compact equations to their fixed point, which is the
matrix form of a backward/forward sweep on a radial feeder: the triangular
aggregation C plays the backward (summation) sweep, the voltage equation the
forward sweep, and the current update closes the loop. The core is
vectorized over columns so thousands of injection vectors can be solved at
once (Monte-Carlo audits, admissibility rasters).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hostcap.net_model import CompactMatrices, Network

CONVERGENCE_TOL = 1e-10
MAX_ITERATIONS = 100
# Squared voltage below which an iterate is declared collapsed rather than
# letting the current update blow up.
V_COLLAPSE = 1e-6


@dataclass(frozen=True)
class OperatingPoint:
    """A converged (or failed) branch-flow state, all per-unit.

    ``P[k]``/``Q[k]`` flow from bus k+1 toward its parent, evaluated at the
    downstream end; ``V`` holds squared voltages of buses 1..N, ``l`` squared
    branch currents.
    """

    P: np.ndarray
    Q: np.ndarray
    V: np.ndarray
    l: np.ndarray
    p: np.ndarray
    q: np.ndarray
    converged: bool
    residual: float
    iterations: int


@dataclass(frozen=True)
class AdmissibilityReport:
    admissible: bool
    voltage_violations: tuple        # (internal bus index, v_sq, bound) triples
    current_violations: tuple        # (internal branch bus index, l, l_max)
    worst_violation: float


def batch_loadflow(
    net: Network,
    mats: CompactMatrices,
    p: np.ndarray,
    q: np.ndarray,
    tol: float = CONVERGENCE_TOL,
    max_iter: int = MAX_ITERATIONS,
):
    """Solve the branch-flow fixed point for one or many injection columns.

    ``p``/``q`` are net injections, shape (N,) or (N, M). Returns
    (P, Q, V, l, converged_mask, residuals, iterations) with matching shape;
    non-converged columns keep their last iterate.
    """
    p = np.atleast_2d(np.asarray(p, dtype=float).T).T  # (N, M)
    q = np.atleast_2d(np.asarray(q, dtype=float).T).T
    n, m = p.shape
    if n != net.n_branches:
        raise ValueError(f"injection vectors must have length {net.n_branches}")

    Cp = mats.C @ p
    Cq = mats.C @ q
    v_base = net.v0_sq + mats.M_p @ p + mats.M_q @ q

    l = np.zeros((n, m))
    active = np.ones(m, dtype=bool)
    collapsed = np.zeros(m, dtype=bool)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        P = Cp - mats.D_R @ l
        Q = Cq - mats.D_X @ l
        V = v_base - mats.H @ l
        bad = active & np.any(V <= V_COLLAPSE, axis=0)
        collapsed |= bad
        active &= ~bad
        if not active.any():
            break
        V_safe = np.where(V > V_COLLAPSE, V, 1.0)
        l_new = (P**2 + Q**2) / V_safe
        delta = np.max(np.abs(l_new - l), axis=0)
        l = np.where(active, l_new, l)
        active &= delta >= tol
        if not active.any():
            break

    # Re-evaluate the linear equations at the final l so the returned point
    # satisfies them exactly; the residual then measures the remaining gap
    # in the current equation, i.e. the worst of all four.
    P = Cp - mats.D_R @ l
    Q = Cq - mats.D_X @ l
    V = v_base - mats.H @ l
    V_safe = np.where(V > V_COLLAPSE, V, 1.0)
    residuals = np.max(np.abs(l - (P**2 + Q**2) / V_safe), axis=0)
    converged = (residuals < tol) & ~collapsed & np.all(V > V_COLLAPSE, axis=0)
    return P, Q, V, l, converged, residuals, iterations


def solve_loadflow(
    net: Network,
    mats: CompactMatrices,
    p_g: np.ndarray | None = None,
    q_g: np.ndarray | None = None,
    p_d: np.ndarray | None = None,
    q_d: np.ndarray | None = None,
    tol: float = CONVERGENCE_TOL,
    max_iter: int = MAX_ITERATIONS,
) -> OperatingPoint:
    """Solve one operating point; demands default to the network base demand.

    A non-converged sweep (divergence or voltage collapse) is reported via
    ``converged=False`` rather than an exception, so callers can classify it.
    """
    n = net.n_branches
    p_d = net.p_demand if p_d is None else np.asarray(p_d, dtype=float)
    q_d = net.q_demand if q_d is None else np.asarray(q_d, dtype=float)
    p_g = np.zeros(n) if p_g is None else np.asarray(p_g, dtype=float)
    q_g = np.zeros(n) if q_g is None else np.asarray(q_g, dtype=float)
    p = p_g - p_d
    q = q_g - q_d
    P, Q, V, l, ok, res, iters = batch_loadflow(net, mats, p, q, tol, max_iter)
    return OperatingPoint(
        P=P[:, 0], Q=Q[:, 0], V=V[:, 0], l=l[:, 0], p=p, q=q,
        converged=bool(ok[0]), residual=float(res[0]), iterations=iters,
    )


def check_admissible(
    net: Network, op: OperatingPoint, slack: float = 0.0
) -> AdmissibilityReport:
    """Flag every voltage outside [v_lo, v_hi] and every overloaded branch."""
    if not op.converged:
        raise ValueError("cannot assess admissibility of a non-converged operating point")
    v_viol = []
    worst = 0.0
    for k, v in enumerate(op.V):
        if v < net.v_lo_sq - slack:
            v_viol.append((k + 1, float(v), net.v_lo_sq))
            worst = max(worst, net.v_lo_sq - v)
        elif v > net.v_hi_sq + slack:
            v_viol.append((k + 1, float(v), net.v_hi_sq))
            worst = max(worst, v - net.v_hi_sq)
    l_viol = []
    for k, (lv, lmax) in enumerate(zip(op.l, net.l_max)):
        if lv > lmax + slack:
            l_viol.append((k + 1, float(lv), float(lmax)))
            worst = max(worst, lv - lmax)
    return AdmissibilityReport(
        admissible=not v_viol and not l_viol,
        voltage_violations=tuple(v_viol),
        current_violations=tuple(l_viol),
        worst_violation=float(worst),
    )


def batch_admissible(net: Network, V: np.ndarray, l: np.ndarray, slack: float = 0.0) -> np.ndarray:
    """Vectorized admissibility of (N, M) voltage/current columns."""
    ok_v = np.all((V >= net.v_lo_sq - slack) & (V <= net.v_hi_sq + slack), axis=0)
    ok_l = np.all(l <= net.l_max[:, None] + slack, axis=0)
    return ok_v & ok_l


CELL_ADMISSIBLE = "admissible"
CELL_VIOLATION = "violation"
CELL_NONCONVERGED = "nonconverged"


@dataclass(frozen=True)
class SweepRaster:
    """2-D admissibility raster over injections at two generation nodes."""

    node_a: int                      # internal bus indices
    node_b: int
    pg_a_mw: np.ndarray              # grid values along axis a
    pg_b_mw: np.ndarray
    classes: np.ndarray              # (len(a), len(b)) array of cell labels

    def rows(self):
        """Row-major (pg_a_mw, pg_b_mw, class) records for CSV export."""
        for i, a in enumerate(self.pg_a_mw):
            for j, b in enumerate(self.pg_b_mw):
                yield float(a), float(b), str(self.classes[i, j])


def sweep_admissible_set(
    net: Network,
    mats: CompactMatrices,
    nodes: tuple,
    pg_min_mw: float,
    pg_max_mw: float,
    resolution: int,
    p_d: np.ndarray | None = None,
    q_d: np.ndarray | None = None,
) -> SweepRaster:
    """Classify every cell of a 2-D injection grid at two generation nodes.

    ``nodes`` are external bus ids. Cells where the sweep fails to converge
    are reported as their own class, distinct from limit violations.
    """
    if len(nodes) != 2:
        raise ValueError("exactly two sweep nodes are required")
    if resolution < 2:
        raise ValueError("grid resolution must be at least 2 per axis")
    ia, ib = (net.index_of(b) for b in nodes)
    if ia not in net.gen_nodes or ib not in net.gen_nodes:
        raise ValueError("sweep nodes must belong to the generation-node set")

    p_d = net.p_demand if p_d is None else np.asarray(p_d, dtype=float)
    q_d = net.q_demand if q_d is None else np.asarray(q_d, dtype=float)
    grid = np.linspace(pg_min_mw, pg_max_mw, resolution) / net.s_base_mva
    n = net.n_branches

    # One column per cell, row-major in (a, b).
    m = resolution * resolution
    p = np.tile(-p_d[:, None], (1, m))
    q = np.tile(-q_d[:, None], (1, m))
    aa, bb = np.meshgrid(grid, grid, indexing="ij")
    p[ia - 1, :] += aa.ravel()
    p[ib - 1, :] += bb.ravel()

    _, _, V, l, ok, _, _ = batch_loadflow(net, mats, p, q)
    adm = batch_admissible(net, V, l)
    classes = np.where(~ok, CELL_NONCONVERGED, np.where(adm, CELL_ADMISSIBLE, CELL_VIOLATION))
    return SweepRaster(
        node_a=ia,
        node_b=ib,
        pg_a_mw=grid * net.s_base_mva,
        pg_b_mw=grid * net.s_base_mva,
        classes=classes.reshape(resolution, resolution),
    )
