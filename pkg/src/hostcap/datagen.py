"""Deterministic generators for the bundled fixtures and demo data.

The 36-bus feeder is a single-phase reduction of the IEEE 37-bus test
feeder: exact topology (35 branches), positive-sequence impedances from the
four standard underground cable configurations, loads at the 25 standard
spot-load buses, and DER candidates at the 14 leaf buses. The published
three-phase quantities do not pin such a reduction down uniquely, so demands
are synthetic (seeded) values in a realistic residential band and the
impedances carry a single global scale chosen so the feeder hosts a few MW
of PV before voltage limits bind.

Time series (demand shapes, a reference PV panel, marginal grid emission
rates) are smooth seeded daily patterns at 5-minute resolution. Everything
here is reproducible: same seed, same bytes.

Regenerate the bundled fixtures with ``python -m hostcap.datagen``.
"""

from __future__ import annotations

import json
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

SEED = 20240601
FEET_PER_MILE = 5280.0

# Positive-sequence impedance, ohm/mile, of the standard underground
# configurations (1,000,000 / 500,000 / 2/0 / #2 AA).
CONFIG_OHM_PER_MILE = {
    721: complex(0.2926, 0.1973),
    722: complex(0.4751, 0.2973),
    723: complex(1.2936, 0.6713),
    724: complex(2.0952, 0.7758),
}

# (from, to, length_ft, config); the 799-701 regulator span is treated as a
# config-721 line.
IEEE37_LINES = [
    (799, 701, 1850, 721), (701, 702, 960, 722), (702, 705, 400, 724),
    (702, 713, 360, 723), (702, 703, 1320, 722), (703, 727, 240, 724),
    (703, 730, 600, 723), (704, 714, 80, 724), (704, 720, 800, 723),
    (705, 742, 320, 724), (705, 712, 240, 724), (706, 725, 280, 724),
    (707, 724, 760, 724), (707, 722, 120, 724), (708, 733, 320, 723),
    (708, 732, 320, 724), (709, 731, 600, 723), (709, 708, 320, 723),
    (710, 735, 200, 724), (710, 736, 1280, 724), (711, 741, 400, 723),
    (711, 740, 200, 724), (713, 704, 520, 723), (714, 718, 520, 724),
    (720, 707, 920, 724), (720, 706, 600, 723), (727, 744, 280, 723),
    (730, 709, 200, 723), (733, 734, 560, 723), (734, 737, 640, 723),
    (734, 710, 520, 724), (737, 738, 400, 723), (738, 711, 400, 723),
    (744, 728, 200, 724), (744, 729, 280, 724),
]

SPOT_LOAD_BUSES = [
    701, 712, 713, 714, 718, 720, 722, 724, 725, 727, 728, 729, 730, 731,
    732, 733, 734, 735, 736, 737, 738, 740, 741, 742, 744,
]

SOURCE_BUS = 799
S_BASE_MVA = 10.0
V_BASE_KV = 4.8
# Single calibration knob: scales every branch impedance so the feeder's
# aggregate hosting capacity lands in the low-MW band of a real 4.8 kV
# feeder of this size.
IMPEDANCE_SCALE = 0.9
LOAD_PF = 0.90                      # lagging power factor of every load
TOTAL_BASE_DEMAND_KW = 1020.0
DEMAND_MIN_KW, DEMAND_MAX_KW = 7.0, 63.8


def _dfs_numbering() -> list:
    """Bus ids 0..35 by depth-first preorder (descending neighbor order)."""
    adj: dict = {}
    for a, b, _, _ in IEEE37_LINES:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    order = []
    stack = [(SOURCE_BUS, None)]
    while stack:
        bus, parent = stack.pop()
        order.append(bus)
        for nb in sorted(adj[bus]):
            if nb != parent:
                stack.append((nb, bus))
    return order


def leaf_buses() -> list:
    degree: dict = {}
    for a, b, _, _ in IEEE37_LINES:
        degree[a] = degree.get(a, 0) + 1
        degree[b] = degree.get(b, 0) + 1
    return sorted(b for b, d in degree.items() if d == 1 and b != SOURCE_BUS)


def ieee37_spec(seed: int = SEED, impedance_scale: float = IMPEDANCE_SCALE) -> dict:
    """Feeder description of the 36-bus fixture (JSON-serializable)."""
    rng = np.random.default_rng(seed)
    order = _dfs_numbering()
    new_id = {bus: i for i, bus in enumerate(order)}
    leaves = set(leaf_buses())

    raw = rng.uniform(12.0, 55.0, size=len(SPOT_LOAD_BUSES))
    demands = np.clip(raw * (TOTAL_BASE_DEMAND_KW / raw.sum()), DEMAND_MIN_KW, DEMAND_MAX_KW)
    demand_kw = dict(zip(SPOT_LOAD_BUSES, demands))
    q_over_p = np.tan(np.arccos(LOAD_PF))

    z_base = V_BASE_KV**2 / S_BASE_MVA
    buses = []
    for bus in order:
        entry: dict = {"id": new_id[bus], "source_bus": bus}
        if bus in demand_kw:
            entry["p_demand_kw"] = round(float(demand_kw[bus]), 3)
            entry["q_demand_kvar"] = round(float(demand_kw[bus] * q_over_p), 3)
        if bus in leaves:
            entry["is_generator"] = True
        buses.append(entry)

    branches = []
    for a, b, length_ft, cfg in IEEE37_LINES:
        z = CONFIG_OHM_PER_MILE[cfg] * (length_ft / FEET_PER_MILE) * impedance_scale / z_base
        # orient from the bus closer to the source
        fa, fb = (a, b) if new_id[a] < new_id[b] else (b, a)
        branches.append({
            "from": new_id[fa],
            "to": new_id[fb],
            "r_pu": round(z.real, 8),
            "x_pu": round(z.imag, 8),
        })
    branches.sort(key=lambda br: br["to"])
    return {
        "s_base_mva": S_BASE_MVA,
        "v_base_kv": V_BASE_KV,
        "v0_pu": 1.0,
        "buses": buses,
        "branches": branches,
        "limits": {"v_lo_pu": 0.95, "v_hi_pu": 1.05},
    }


# --------------------------------------------------------------------------
# Time series
# --------------------------------------------------------------------------

START = datetime(2024, 6, 1, tzinfo=timezone.utc)
STEP = timedelta(minutes=5)
STEPS_PER_DAY = 288
# daily sky conditions cycled over the horizon
DAY_KINDS = ["sunny", "sunny", "partly", "cloudy", "sunny", "partly", "sunny"]


def timestamps(days: int, start: datetime = START) -> list:
    return [start + i * STEP for i in range(days * STEPS_PER_DAY)]


def _hours(n_steps: int) -> np.ndarray:
    return (np.arange(n_steps) % STEPS_PER_DAY) * (24.0 / STEPS_PER_DAY)


def _smooth_noise(rng, n, scale, win=12):
    raw = rng.normal(0.0, scale, n + win)
    kernel = np.ones(win) / win
    return np.convolve(raw, kernel, mode="same")[:n]


# day-to-day demand level, cycled; the cross-day spread separates the static
# limit (a minimum over the horizon) from typical-day dynamic limits
DAY_DEMAND_FACTORS = [1.00, 1.12, 0.90, 0.80, 1.18, 0.86, 1.06]


def demand_profile(days: int, n_nodes: int, seed: int = SEED) -> np.ndarray:
    """(steps, nodes) multiplicative demand shapes around 1.0.

    Aggregate shape has a modest morning bump and a strong evening peak;
    days differ in overall level and nodes deviate from the aggregate with
    their own phase and smooth noise, enough to move the binding
    constraints around during the day.
    """
    rng = np.random.default_rng(seed + 1)
    n = days * STEPS_PER_DAY
    h = _hours(n)
    agg = (0.82
           + 0.18 * np.exp(-((h - 7.5) / 2.0) ** 2)
           + 0.42 * np.exp(-((h - 19.0) / 2.6) ** 2)
           - 0.12 * np.exp(-((h - 3.0) / 2.2) ** 2))
    day_level = np.repeat(
        [DAY_DEMAND_FACTORS[d % len(DAY_DEMAND_FACTORS)] for d in range(days)],
        STEPS_PER_DAY,
    )
    agg = agg * day_level
    shapes = np.empty((n, n_nodes))
    for j in range(n_nodes):
        phase = rng.uniform(0, 2 * np.pi)
        wiggle = 0.10 * np.sin(2 * np.pi * h / 24.0 + phase) \
            + 0.06 * np.sin(4 * np.pi * h / 24.0 + 2.1 * phase)
        shapes[:, j] = agg * (1.0 + wiggle) + _smooth_noise(rng, n, 0.015)
    return np.clip(shapes, 0.25, None)


def pv_profile(days: int, seed: int = SEED, peak_kw: float = 0.33) -> np.ndarray:
    """Reference-panel output (kW) at 5-minute resolution.

    Clear-sky bell between sunrise and sunset, scaled per day by the sky
    condition; cloudy/partly days get smooth dips so cloudy-day headroom
    behaves like the real data.
    """
    rng = np.random.default_rng(seed + 2)
    n = days * STEPS_PER_DAY
    h = _hours(n)
    sunrise, sunset = 5.9, 19.9
    arg = np.clip((h - sunrise) / (sunset - sunrise), 0.0, 1.0)
    bell = np.sin(np.pi * arg) ** 2
    out = np.empty(n)
    for d in range(days):
        kind = DAY_KINDS[d % len(DAY_KINDS)]
        sl = slice(d * STEPS_PER_DAY, (d + 1) * STEPS_PER_DAY)
        base = bell[sl].copy()
        if kind == "sunny":
            factor = rng.uniform(0.92, 1.0) * np.ones(STEPS_PER_DAY)
        elif kind == "partly":
            factor = rng.uniform(0.65, 0.85) + _smooth_noise(rng, STEPS_PER_DAY, 0.22, win=8)
        else:
            factor = rng.uniform(0.18, 0.30) + _smooth_noise(rng, STEPS_PER_DAY, 0.08, win=8)
        out[sl] = base * np.clip(factor, 0.03, 1.0)
    return peak_kw * np.clip(out, 0.0, None)


def moer_profile(days: int, seed: int = SEED) -> np.ndarray:
    """Marginal grid emission rate, g CO2/kWh, 5-minute resolution.

    Gas-heavy mornings/evenings, cleaner midday; always well above the PV
    lifecycle intensity.
    """
    rng = np.random.default_rng(seed + 3)
    n = days * STEPS_PER_DAY
    h = _hours(n)
    base = (520.0
            + 180.0 * np.exp(-((h - 19.5) / 2.8) ** 2)
            + 90.0 * np.exp(-((h - 7.0) / 2.2) ** 2)
            - 170.0 * np.exp(-((h - 13.0) / 3.2) ** 2))
    return np.clip(base + _smooth_noise(rng, n, 18.0), 220.0, 950.0)


# --------------------------------------------------------------------------
# Fixture files
# --------------------------------------------------------------------------

def write_fixtures(out_dir: Path, days: int = 7, seed: int = SEED) -> list:
    """Write every bundled fixture; returns the paths written."""
    from hostcap import data as data_io
    from hostcap.net_model import build_network

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    fourbus = {
        "comment": "4-bus motivating feeder; base demands are the published "
                   "values used verbatim (negative real part = baseline "
                   "injection), see README",
        "s_base_mva": 100.0,
        "v_base_kv": 4.16,
        "v0_pu": 1.0,
        "buses": [
            {"id": 1},
            {"id": 2},
            {"id": 3, "p_demand_kw": -2000.0, "q_demand_kvar": 500.0, "is_generator": True},
            {"id": 4, "p_demand_kw": -1500.0, "q_demand_kvar": 1000.0, "is_generator": True},
        ],
        "branches": [
            {"from": 1, "to": 2, "r_pu": 0.55, "x_pu": 1.33},
            {"from": 2, "to": 3, "r_pu": 0.55, "x_pu": 1.33},
            {"from": 2, "to": 4, "r_pu": 0.55, "x_pu": 1.33},
        ],
        "limits": {"v_lo_pu": 0.95, "v_hi_pu": 1.05},
    }
    p = out_dir / "fourbus.json"
    p.write_text(json.dumps(fourbus, indent=2) + "\n")
    written.append(p)

    spec = ieee37_spec(seed)
    p = out_dir / "ieee37_mod.json"
    p.write_text(json.dumps(spec, indent=2) + "\n")
    written.append(p)

    net = build_network(spec)
    ts = timestamps(days)
    load_ids = [net.bus_ids[k] for k in range(1, net.n_buses)
                if net.p_demand[k - 1] > 0]
    base_kw = np.array([net.p_demand[net.index_of(i) - 1] for i in load_ids]) \
        * net.s_base_mva * 1000.0
    shapes = demand_profile(days, len(load_ids), seed)
    demand_kw = shapes * base_kw

    p = out_dir / "demand_week.csv"
    data_io.write_demand_csv(p, ts, load_ids, demand_kw)
    written.append(p)

    p = out_dir / "pv_week.csv"
    data_io.write_pv_csv(p, ts, pv_profile(days, seed))
    written.append(p)

    p = out_dir / "moer_week.csv"
    moer_lbs = moer_profile(days, seed) / data_io.LBS_TO_G_PER_KWH
    data_io.write_moer_csv(p, ts, moer_lbs)
    written.append(p)
    return written


if __name__ == "__main__":
    paths = write_fixtures(Path(__file__).parent / "fixtures")
    for path in paths:
        print(f"wrote {path}")
