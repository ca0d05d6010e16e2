"""Curtailment, carbon and net-profit consequences of exceeding static limits.

The static (base-case) limit per node is the minimum of its dynamic hosting
capacity over the horizon, so a PV array sized at that limit never needs
curtailment. Raising capacity by a relative factor trades growing curtailed
energy against additional delivered energy, which saturates at a per-node
ceiling; pricing curtailment ($/kWh) against avoided emissions (MOER minus
the PV lifecycle intensity, valued at a carbon price) yields a net-profit
curve over capacity increase with an interior maximum.

Energies are MWh, powers MW; emission intensities g/kWh (1 MWh at
1 g/kWh = 1e-3 tCO2); prices are $/kWh and $/tCO2.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

PV_LIFECYCLE_G_PER_KWH = 40.0
LBS_PER_MWH_TO_G_PER_KWH = 0.4536


class EconomicsError(ValueError):
    pass


@dataclass(frozen=True)
class PvScenario:
    """Pricing and emission context for a capacity-increase study."""

    lambda_curt: float               # $/kWh of curtailed energy
    lambda_co2: float                # $/tCO2 avoided
    moer_g_per_kwh: np.ndarray       # marginal grid intensity per step
    m_pv_g_per_kwh: float = PV_LIFECYCLE_G_PER_KWH

    def __post_init__(self):
        if self.lambda_curt < 0 or self.lambda_co2 < 0:
            raise EconomicsError("prices must be nonnegative")


@dataclass(frozen=True)
class StaticLimits:
    node_ids: tuple
    l_pv_mw: np.ndarray              # per-node static limit
    zero_nodes: tuple                # ids whose limit is zero (no base PV)


@dataclass(frozen=True)
class BaseProfile:
    """Base-case PV production sized to the static limits (zero curtailment)."""

    node_ids: tuple
    timestamps: tuple
    dt_hours: float
    l_pv_mw: np.ndarray
    p_base_mw: np.ndarray            # (steps, nodes)
    e_base_mwh: np.ndarray           # per node
    shape_norm: np.ndarray           # shared PV shape, peak 1.0


@dataclass(frozen=True)
class CurtailmentCurves:
    """Energy bookkeeping across a grid of relative capacity increases."""

    node_ids: tuple
    dc_grid: np.ndarray
    e_base_mwh: np.ndarray           # (nodes,)
    e_new_mwh: np.ndarray            # (dc, nodes)
    e_curt_mwh: np.ndarray           # (dc, nodes)
    e_add_mwh: np.ndarray            # (dc, nodes), own-base subtrahend
    e_add_limit_mwh: np.ndarray      # per-node asymptote
    common_base_mwh: float | None    # cross-scenario aggregate subtrahend
    base: BaseProfile = field(repr=False)
    hi_mw: np.ndarray = field(repr=False)   # (steps, nodes) dynamic limits

    def aggregate_add_mwh(self, common: bool = False) -> np.ndarray:
        """Aggregate added energy per dc; optionally against the common base."""
        own = self.e_add_mwh.sum(axis=1)
        if not common:
            return own
        if self.common_base_mwh is None:
            raise EconomicsError("no common base energy recorded")
        return own + (self.e_base_mwh.sum() - self.common_base_mwh)

    def add_pct(self, common: bool = False) -> np.ndarray:
        return 100.0 * self.aggregate_add_mwh(common) / self.e_base_mwh.sum()

    def curt_pct(self) -> np.ndarray:
        return 100.0 * self.e_curt_mwh.sum(axis=1) / self.e_base_mwh.sum()


@dataclass(frozen=True)
class EconomicsReport:
    """Carbon and net-profit curves over the capacity-increase grid."""

    node_ids: tuple
    dc_grid: np.ndarray
    a_co2_t: np.ndarray              # (dc, nodes) avoided tCO2
    c_rev: np.ndarray                # (dc,) $
    c_curt: np.ndarray               # (dc,) $
    net_profit: np.ndarray           # (dc,) $
    argmax_dc: float
    excluded_steps: tuple            # timestamps dropped for MOER gaps
    curves: CurtailmentCurves = field(repr=False)

    def summary(self) -> dict:
        return {
            "dc_grid": self.dc_grid.tolist(),
            "e_add_pct": self.curves.add_pct().tolist(),
            "e_curt_pct": self.curves.curt_pct().tolist(),
            "avoided_co2_t": self.a_co2_t.sum(axis=1).tolist(),
            "c_rev_usd": self.c_rev.tolist(),
            "c_curt_usd": self.c_curt.tolist(),
            "net_profit_usd": self.net_profit.tolist(),
            "argmax_dc": self.argmax_dc,
            "excluded_steps": [str(t) for t in self.excluded_steps],
        }


def static_limits(dhc) -> StaticLimits:
    """Per-node static limit: the minimum dynamic upper limit over the
    computed (daytime) steps. Nodes hitting zero are flagged; they cannot
    host any base-case PV."""
    steps = dhc.computed()
    if not steps:
        raise EconomicsError("series has no computed steps")
    hi = np.array([s.rect.hi_mw for s in steps])
    l_pv = hi.min(axis=0)
    zero = tuple(nid for nid, v in zip(dhc.node_ids, l_pv) if v <= 0.0)
    return StaticLimits(node_ids=tuple(dhc.node_ids), l_pv_mw=l_pv, zero_nodes=zero)


def base_profile(dhc, limits: StaticLimits, pv_shape_kw: np.ndarray) -> BaseProfile:
    """Scale the shared PV shape to each node's static limit.

    ``pv_shape_kw`` is the reference-panel output aligned with the computed
    steps of the series; its peak maps to the static limit, so the base
    system never exceeds the dynamic limits.
    """
    steps = dhc.computed()
    shape = np.asarray(pv_shape_kw, dtype=float)
    if shape.shape != (len(steps),):
        raise EconomicsError(
            f"PV shape has {shape.shape} values, expected {(len(steps),)} "
            "(one per computed step)"
        )
    peak = shape.max()
    if peak <= 0:
        raise EconomicsError("PV shape is identically zero")
    norm = shape / peak
    dt_hours = dhc.dt.total_seconds() / 3600.0
    p_base = np.outer(norm, limits.l_pv_mw)
    return BaseProfile(
        node_ids=limits.node_ids,
        timestamps=tuple(s.timestamp for s in steps),
        dt_hours=dt_hours,
        l_pv_mw=limits.l_pv_mw,
        p_base_mw=p_base,
        e_base_mwh=dt_hours * p_base.sum(axis=0),
        shape_norm=norm,
    )


def curtailment_curves(
    dhc,
    base: BaseProfile,
    dc_grid,
    common_base_mwh: float | None = None,
) -> CurtailmentCurves:
    """Evaluate new/curtailed/added energy on a sorted capacity grid.

    Added energy follows E_add = E_new - E_curt - E_base against the node's
    own base energy; when comparing scenarios, pass the minimum aggregate
    base energy across them as ``common_base_mwh`` and use the common-base
    accessors for comparable aggregates.
    """
    dc_grid = np.asarray(dc_grid, dtype=float)
    if np.any(dc_grid < 0) or np.any(np.diff(dc_grid) < 0):
        raise EconomicsError("capacity-increase grid must be nonnegative and sorted")
    steps = dhc.computed()
    hi = np.array([s.rect.hi_mw for s in steps])
    if hi.shape != base.p_base_mw.shape:
        raise EconomicsError("series and base profile are misaligned")

    dt = base.dt_hours
    e_new = np.empty((len(dc_grid), len(base.node_ids)))
    e_curt = np.empty_like(e_new)
    for i, dc in enumerate(dc_grid):
        p_new = (1.0 + dc) * base.p_base_mw
        p_curt = np.maximum(0.0, p_new - hi)
        e_new[i] = dt * p_new.sum(axis=0)
        e_curt[i] = dt * p_curt.sum(axis=0)
    e_add = e_new - e_curt - base.e_base_mwh
    limit = dt * (hi - base.p_base_mw).sum(axis=0)
    return CurtailmentCurves(
        node_ids=base.node_ids,
        dc_grid=dc_grid,
        e_base_mwh=base.e_base_mwh,
        e_new_mwh=e_new,
        e_curt_mwh=e_curt,
        e_add_mwh=e_add,
        e_add_limit_mwh=limit,
        common_base_mwh=common_base_mwh,
        base=base,
        hi_mw=hi,
    )


def carbon_and_profit(curves: CurtailmentCurves, scen: PvScenario) -> EconomicsReport:
    """Avoided-CO2 revenue minus curtailment cost over the capacity grid.

    Steps whose MOER value is missing (NaN) are excluded from the carbon
    integral with a warning; curtailment costs keep the full horizon.
    """
    base = curves.base
    moer = np.asarray(scen.moer_g_per_kwh, dtype=float)
    if moer.shape != (len(base.timestamps),):
        raise EconomicsError(
            f"MOER series has {moer.shape} values, expected {(len(base.timestamps),)}"
        )
    valid = np.isfinite(moer)
    excluded = tuple(t for t, keep in zip(base.timestamps, valid) if not keep)
    if excluded:
        logger.warning("MOER gaps: excluding %d of %d steps from the carbon integral",
                       len(excluded), len(base.timestamps))
    delta_m = np.where(valid, moer - scen.m_pv_g_per_kwh, 0.0)

    dt = base.dt_hours
    a_co2 = np.empty((len(curves.dc_grid), len(base.node_ids)))
    for i, dc in enumerate(curves.dc_grid):
        # P_add = min(dc * P_base, limit headroom); equals new - curt - base.
        p_add = np.minimum(dc * base.p_base_mw, curves.hi_mw - base.p_base_mw)
        a_co2[i] = dt * (delta_m[:, None] * p_add).sum(axis=0) * 1e-3

    c_rev = scen.lambda_co2 * a_co2.sum(axis=1)
    c_curt = scen.lambda_curt * 1000.0 * curves.e_curt_mwh.sum(axis=1)
    net = c_rev - c_curt
    return EconomicsReport(
        node_ids=curves.node_ids,
        dc_grid=curves.dc_grid,
        a_co2_t=a_co2,
        c_rev=c_rev,
        c_curt=c_curt,
        net_profit=net,
        argmax_dc=float(curves.dc_grid[int(np.argmax(net))]),
        excluded_steps=excluded,
        curves=curves,
    )


def moer_from_lbs_per_mwh(values) -> np.ndarray:
    """Convert MOER given in lbs CO2/MWh to g CO2/kWh."""
    return np.asarray(values, dtype=float) * LBS_PER_MWH_TO_G_PER_KWH
