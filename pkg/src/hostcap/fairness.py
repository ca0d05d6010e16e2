"""Fairness constraints and metrics for hosting-capacity allocations.

The constraint side interpolates between "anything goes" and "perfectly
even" using the L1-L2 norm inequality: for w >= 0, ||w||_2 <= sum(w) always
holds, while sum(w) <= sqrt(G) ||w||_2 holds with equality only when every
entry is equal. Scaling the left side by (1 - eps + eps*sqrt(G)) therefore
enforces a tunable minimum evenness, either of the raw allocation or of the
allocation relative to demand shares.

The metric side is the Jain index ||w||_1^2 / (G ||w||_2^2), applied to
capacity-to-demand ratios across nodes (spatial) and across time (temporal).
"""

from __future__ import annotations

from dataclasses import dataclass

import cvxpy as cp
import numpy as np

from hostcap.conic import ConicProblem

MODE_UNIFORM = "uniform"
MODE_PROPORTIONAL = "proportional"


class FairnessError(ValueError):
    pass


@dataclass(frozen=True)
class FairnessSpec:
    """Minimum-evenness constraint: epsilon in [0, 1] plus a mode.

    Proportional mode needs positive demand shares ``weights`` (one per
    generation node); uniform mode ignores them.
    """

    epsilon: float
    mode: str = MODE_UNIFORM
    weights: np.ndarray | None = None

    def __post_init__(self):
        if not (0.0 <= self.epsilon <= 1.0):
            raise FairnessError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.mode not in (MODE_UNIFORM, MODE_PROPORTIONAL):
            raise FairnessError(f"unknown fairness mode {self.mode!r}")
        if self.mode == MODE_PROPORTIONAL:
            if self.weights is None:
                raise FairnessError("proportional mode requires demand-share weights")
            if np.any(np.asarray(self.weights) <= 0):
                raise FairnessError(
                    "proportional fairness requires positive demand at every "
                    "generation node"
                )


def epsilon_constraint(problem: ConicProblem, spec: FairnessSpec, var_name: str = "pg") -> int:
    """Add (1 - eps + eps*sqrt(G)) ||w||_2 <= sum(w) to a problem.

    w is the allocation itself (uniform) or the allocation divided
    elementwise by the demand shares (proportional). Assumes the allocation
    variable is constrained nonnegative, which makes sum(w) its L1 norm.
    """
    v = problem.variable(var_name)
    g = v.size
    if spec.mode == MODE_PROPORTIONAL:
        w = cp.multiply(1.0 / np.asarray(spec.weights, dtype=float), v)
    else:
        w = v
    coef = 1.0 - spec.epsilon + spec.epsilon * np.sqrt(g)
    cid = problem.add_soc(coef * w, cp.sum(w), label=f"eps_fair[{spec.mode}]")
    if spec.epsilon == 1.0 and g > 1:
        # At eps = 1 the cone resolves to exact equality of all entries
        # (the equality case of the norm inequality for nonnegative w).
        # Stating that linearly removes the degenerate cone geometry that
        # otherwise leaves interior-point solutions ~1e-4 away from equal.
        problem.add_eq(w[1:] - w[:-1], label=f"eps_fair_equal[{spec.mode}]")
    return cid


def jfi(values) -> float:
    """Jain fairness index of a nonnegative vector; 0 for the zero vector."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise FairnessError("jfi expects a nonempty 1-D vector")
    if np.any(v < 0):
        raise FairnessError("jfi is defined for nonnegative values only")
    peak = v.max()
    if peak == 0.0:
        return 0.0
    w = v / peak                     # scale-invariant; avoids under/overflow
    return float(w.sum() ** 2 / (w.size * np.dot(w, w)))


def jfi_lower_bound(epsilon: float, n: int) -> float:
    """Smallest Jain index compatible with an epsilon-fair allocation."""
    if not (0.0 <= epsilon <= 1.0):
        raise FairnessError(f"epsilon must be in [0, 1], got {epsilon}")
    if n < 1:
        raise FairnessError("need at least one agent")
    return (1.0 - epsilon + epsilon * np.sqrt(n)) ** 2 / n


# --------------------------------------------------------------------------
# Scenario presets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioPreset:
    """Named combination of objective form, weighting, and fairness mode."""

    name: str
    objective_form: str              # "linear" | "log"
    weight_mode: str                 # "uniform" | "demand"
    fairness_mode: str | None = None
    default_epsilon: float = 0.85


SCENARIOS = {
    "s1": ScenarioPreset("s1", "linear", "uniform"),
    "s2": ScenarioPreset("s2", "linear", "demand"),
    "s3": ScenarioPreset("s3", "log", "uniform"),
    "s4": ScenarioPreset("s4", "log", "demand"),
    "s1f1": ScenarioPreset("s1f1", "linear", "uniform", fairness_mode=MODE_UNIFORM),
    "s1f2": ScenarioPreset("s1f2", "linear", "uniform", fairness_mode=MODE_PROPORTIONAL),
}


def _shares(d: np.ndarray, what: str) -> np.ndarray:
    """d_i / sum(d): well-defined (nonnegative) whenever the demands share a
    sign, which covers feeders whose published base "demand" is a net
    injection (negative real part)."""
    total = d.sum()
    if total == 0:
        raise FairnessError(f"{what} undefined: demands at generation nodes sum to zero")
    shares = d / total
    if np.any(shares < 0):
        raise FairnessError(f"{what} undefined: mixed-sign demands at generation nodes")
    return shares


def demand_shares(net, p_d: np.ndarray) -> np.ndarray:
    """Demand shares over the generation nodes (normalized to sum 1)."""
    d = np.asarray(p_d, dtype=float)[net.gen_nodes - 1]
    return _shares(d, "demand shares")


def scenario_weights(preset: ScenarioPreset, net, p_d: np.ndarray) -> np.ndarray:
    """Objective weights for a preset. Zero-demand nodes get zero weight in
    demand mode (allowed in the objective, rejected in proportional
    fairness)."""
    g = len(net.gen_nodes)
    if preset.weight_mode == "uniform":
        return np.ones(g)
    if preset.weight_mode == "demand":
        d = np.asarray(p_d, dtype=float)[net.gen_nodes - 1]
        return _shares(d, "demand weighting")
    raise FairnessError(f"unknown weight mode {preset.weight_mode!r}")


def scenario_fairness(preset: ScenarioPreset, net, p_d: np.ndarray,
                      epsilon: float | None = None) -> FairnessSpec | None:
    """FairnessSpec implied by a preset (None when it has no fairness mode)."""
    if preset.fairness_mode is None:
        return None
    eps = preset.default_epsilon if epsilon is None else epsilon
    weights = demand_shares(net, p_d) if preset.fairness_mode == MODE_PROPORTIONAL else None
    return FairnessSpec(epsilon=eps, mode=preset.fairness_mode, weights=weights)


# --------------------------------------------------------------------------
# Fairness quantification over a DHC series
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FairnessReport:
    """Jain-index fairness of capacity-to-demand ratios, over time and space."""

    node_ids: tuple
    timestamps: tuple
    rho: np.ndarray                  # (steps, nodes) capacity/demand ratios
    temporal_jfi: np.ndarray         # per node
    spatial_jfi: np.ndarray          # per step
    excluded_nodes: tuple            # node ids dropped for zero demand
    scenario: str


def fairness_report(dhc, demand_mw: np.ndarray | None = None) -> FairnessReport:
    """Quantify temporal and spatial fairness of a DHC series.

    ``demand_mw`` (steps x nodes) overrides the demand snapshots stored on
    the series. Nodes with zero demand at any computed step are excluded
    from the ratios and reported.
    """
    steps = dhc.computed()
    if not steps:
        raise FairnessError("series has no computed steps")
    hi = np.array([s.rect.hi_mw for s in steps])
    if demand_mw is None:
        demand_mw = np.array([s.demand_gen_mw for s in steps])
    else:
        demand_mw = np.asarray(demand_mw, dtype=float)
        if demand_mw.shape != hi.shape:
            raise FairnessError(
                f"demand shape {demand_mw.shape} does not align with the "
                f"series shape {hi.shape}"
            )

    ok = np.all(demand_mw > 0, axis=0)
    excluded = tuple(nid for nid, keep in zip(dhc.node_ids, ok) if not keep)
    kept_ids = tuple(nid for nid, keep in zip(dhc.node_ids, ok) if keep)
    rho = hi[:, ok] / demand_mw[:, ok]

    temporal = np.array([jfi(rho[:, j]) for j in range(rho.shape[1])])
    spatial = np.array([jfi(rho[i, :]) for i in range(rho.shape[0])])
    return FairnessReport(
        node_ids=kept_ids,
        timestamps=tuple(s.timestamp for s in steps),
        rho=rho,
        temporal_jfi=temporal,
        spatial_jfi=spatial,
        excluded_nodes=excluded,
        scenario=dhc.scenario,
    )
