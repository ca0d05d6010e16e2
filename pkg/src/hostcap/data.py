"""CSV/JSON ingestion and emission for every file the package exchanges.

Every CSV starts with a ``# schema=...`` comment line and a header row.
Timestamps are RFC 3339. Floats are written with shortest-round-trip repr,
so identical inputs produce byte-identical files and every emitted file
re-parses into the values that produced it.
"""

from __future__ import annotations

import csv
from datetime import datetime

import numpy as np

LBS_TO_G_PER_KWH = 0.4536

SCHEMAS = {
    "demand": "hostcap-demand-v1",
    "pv": "hostcap-pv-v1",
    "moer": "hostcap-moer-v1",
    "dhc": "hostcap-dhc-v1",
    "raster": "hostcap-raster-v1",
    "mae": "hostcap-mae-v1",
    "jfi_temporal": "hostcap-jfi-temporal-v1",
    "jfi_spatial": "hostcap-jfi-spatial-v1",
    "economics": "hostcap-economics-v1",
    "hc": "hostcap-hc-v1",
}


class DataError(ValueError):
    """Raised on malformed input files, with file/line context."""


def _fmt(x) -> str:
    return repr(float(x))


def parse_timestamp(text: str, where: str = "") -> datetime:
    try:
        return datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise DataError(f"{where}: bad timestamp {text!r}") from None


def _parse_node_id(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def _read_rows(path, expected_header):
    """Yield (line_number, row) after validating schema/header lines."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header_seen = False
        for lineno, row in enumerate(reader, start=1):
            if not row or row[0].startswith("#"):
                continue
            if not header_seen:
                if [c.strip() for c in row] != expected_header:
                    raise DataError(
                        f"{path}:{lineno}: expected header {','.join(expected_header)}, "
                        f"got {','.join(row)}"
                    )
                header_seen = True
                continue
            if len(row) != len(expected_header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(expected_header)} columns, got {len(row)}"
                )
            yield lineno, row
        if not header_seen:
            raise DataError(f"{path}: empty file (no header row)")


def _float(path, lineno, col, text) -> float:
    try:
        return float(text)
    except ValueError:
        raise DataError(f"{path}:{lineno}: column {col}: bad number {text!r}") from None


def _open_out(path, schema_key):
    fh = open(path, "w", newline="")
    fh.write(f"# schema={SCHEMAS[schema_key]}\n")
    return fh


# --------------------------------------------------------------------------
# Input series
# --------------------------------------------------------------------------

def read_demand_csv(path):
    """Long-format demand: returns (timestamps, node_ids, kw[T, nodes]).

    Requires a complete rectangle: every node present at every timestamp.
    """
    cells: dict = {}
    ts_order: list = []
    node_order: list = []
    for lineno, row in _read_rows(path, ["timestamp", "node_id", "kw"]):
        ts = parse_timestamp(row[0], f"{path}:{lineno}")
        node = _parse_node_id(row[1])
        kw = _float(path, lineno, "kw", row[2])
        if ts not in cells:
            cells[ts] = {}
            ts_order.append(ts)
        if node in cells[ts]:
            raise DataError(f"{path}:{lineno}: duplicate entry for {node} at {row[0]}")
        if node not in node_order:
            node_order.append(node)
        cells[ts][node] = kw
    if not ts_order:
        raise DataError(f"{path}: no data rows")
    matrix = np.empty((len(ts_order), len(node_order)))
    for i, ts in enumerate(ts_order):
        for j, node in enumerate(node_order):
            if node not in cells[ts]:
                raise DataError(f"{path}: node {node} missing at {ts.isoformat()}")
            matrix[i, j] = cells[ts][node]
    return ts_order, node_order, matrix


def _read_scalar_csv(path, value_col):
    ts_list, values = [], []
    for lineno, row in _read_rows(path, ["timestamp", value_col]):
        ts_list.append(parse_timestamp(row[0], f"{path}:{lineno}"))
        values.append(_float(path, lineno, value_col, row[1]))
    if not ts_list:
        raise DataError(f"{path}: no data rows")
    return ts_list, np.array(values)


def read_pv_csv(path):
    """Reference-panel output: returns (timestamps, kw)."""
    return _read_scalar_csv(path, "kw")


def read_moer_csv(path):
    """Marginal emission rate: returns (timestamps, g_per_kwh).

    Source files carry lbs CO2/MWh; converted here (1 lb/MWh = 0.4536 g/kWh).
    """
    ts, lbs = _read_scalar_csv(path, "lbs_co2_per_mwh")
    return ts, lbs * LBS_TO_G_PER_KWH


def write_demand_csv(path, timestamps, node_ids, kw) -> None:
    kw = np.asarray(kw)
    with _open_out(path, "demand") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "node_id", "kw"])
        for i, ts in enumerate(timestamps):
            for j, node in enumerate(node_ids):
                w.writerow([ts.isoformat(), node, _fmt(kw[i, j])])


def write_pv_csv(path, timestamps, kw) -> None:
    with _open_out(path, "pv") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "kw"])
        for ts, v in zip(timestamps, kw):
            w.writerow([ts.isoformat(), _fmt(v)])


def write_moer_csv(path, timestamps, lbs_per_mwh) -> None:
    with _open_out(path, "moer") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "lbs_co2_per_mwh"])
        for ts, v in zip(timestamps, lbs_per_mwh):
            w.writerow([ts.isoformat(), _fmt(v)])


def demand_to_pu(net, node_ids, kw):
    """Map a demand table onto the network: (T, N) p_d and q_d in pu.

    Buses absent from the table get zero demand; reactive demand follows
    each bus's base power-factor ratio (zero where the base is zero).
    """
    kw = np.asarray(kw, dtype=float)
    t = kw.shape[0]
    p_d = np.zeros((t, net.n_branches))
    for j, node in enumerate(node_ids):
        k = net.index_of(node)
        if k == 0:
            raise DataError("demand assigned to the substation bus")
        p_d[:, k - 1] = kw[:, j] / (1000.0 * net.s_base_mva)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(net.p_demand != 0.0, net.q_demand / net.p_demand, 0.0)
    return p_d, p_d * ratio


def align_to(reference_ts, other_ts, values, name: str):
    """Select ``values`` at the reference timestamps; error on gaps."""
    index = {ts: i for i, ts in enumerate(other_ts)}
    out = np.empty(len(reference_ts))
    for i, ts in enumerate(reference_ts):
        if ts not in index:
            raise DataError(f"{name} series is missing {ts.isoformat()}")
        out[i] = values[index[ts]]
    return out


# --------------------------------------------------------------------------
# Result files
# --------------------------------------------------------------------------

def write_raster_csv(path, raster) -> None:
    with _open_out(path, "raster") as fh:
        w = csv.writer(fh)
        w.writerow(["pg_node_a_mw", "pg_node_b_mw", "class"])
        for a, b, cls in raster.rows():
            w.writerow([_fmt(a), _fmt(b), cls])


def read_raster_csv(path):
    rows = []
    for lineno, row in _read_rows(path, ["pg_node_a_mw", "pg_node_b_mw", "class"]):
        rows.append((
            _float(path, lineno, "pg_node_a_mw", row[0]),
            _float(path, lineno, "pg_node_b_mw", row[1]),
            row[2],
        ))
    return rows


def write_hc_csv(path, rects) -> None:
    """One or more single-snapshot hyperrectangles, one row per node."""
    with _open_out(path, "hc") as fh:
        w = csv.writer(fh)
        w.writerow(["scenario", "variant", "node_id", "pg_minus_mw", "pg_plus_mw"])
        for rect in rects:
            for node, lo, hi in zip(rect.node_ids, rect.lo_mw, rect.hi_mw):
                w.writerow([rect.scenario, rect.variant, node, _fmt(lo), _fmt(hi)])


def read_hc_csv(path):
    rows = []
    header = ["scenario", "variant", "node_id", "pg_minus_mw", "pg_plus_mw"]
    for lineno, row in _read_rows(path, header):
        rows.append((row[0], row[1], _parse_node_id(row[2]),
                     _float(path, lineno, "pg_minus_mw", row[3]),
                     _float(path, lineno, "pg_plus_mw", row[4])))
    return rows


def write_dhc_csv(path, series) -> None:
    """Computed steps of a DHC series, one row per (step, node)."""
    with _open_out(path, "dhc") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "node_id", "pg_minus_mw", "pg_plus_mw",
                    "scenario", "variant"])
        for step in series.steps:
            if step.rect is None:
                continue
            for node, lo, hi in zip(series.node_ids, step.rect.lo_mw, step.rect.hi_mw):
                w.writerow([step.timestamp.isoformat(), node, _fmt(lo), _fmt(hi),
                            series.scenario, series.variant])


def read_dhc_csv(path):
    """Parse a DHC CSV back into (timestamps, node_ids, lo[T,G], hi[T,G],
    scenario, variant)."""
    header = ["timestamp", "node_id", "pg_minus_mw", "pg_plus_mw", "scenario", "variant"]
    ts_order: list = []
    node_order: list = []
    lo_cells: dict = {}
    hi_cells: dict = {}
    scenario = variant = None
    for lineno, row in _read_rows(path, header):
        ts = parse_timestamp(row[0], f"{path}:{lineno}")
        node = _parse_node_id(row[1])
        if ts not in lo_cells:
            ts_order.append(ts)
            lo_cells[ts] = {}
            hi_cells[ts] = {}
        if node not in node_order:
            node_order.append(node)
        lo_cells[ts][node] = _float(path, lineno, "pg_minus_mw", row[2])
        hi_cells[ts][node] = _float(path, lineno, "pg_plus_mw", row[3])
        scenario, variant = row[4], row[5]
    if not ts_order:
        raise DataError(f"{path}: no data rows")
    lo = np.array([[lo_cells[t][n] for n in node_order] for t in ts_order])
    hi = np.array([[hi_cells[t][n] for n in node_order] for t in ts_order])
    return ts_order, node_order, lo, hi, scenario, variant


def write_mae_csv(path, sweep) -> None:
    with _open_out(path, "mae") as fh:
        w = csv.writer(fh)
        w.writerow(["pg_mw", "mae_conservative_pu", "mae_soc_pu"])
        for pg, mc, ms in zip(sweep.pg_mw, sweep.mae_conservative, sweep.mae_soc):
            w.writerow([_fmt(pg), _fmt(mc), _fmt(ms)])


def read_mae_csv(path):
    rows = []
    for lineno, row in _read_rows(path, ["pg_mw", "mae_conservative_pu", "mae_soc_pu"]):
        rows.append(tuple(_float(path, lineno, c, v)
                          for c, v in zip(("pg_mw", "mae_conservative_pu", "mae_soc_pu"), row)))
    return rows


def write_fairness_csvs(temporal_path, spatial_path, report) -> None:
    with _open_out(temporal_path, "jfi_temporal") as fh:
        w = csv.writer(fh)
        w.writerow(["node_id", "temporal_jfi"])
        for node, value in zip(report.node_ids, report.temporal_jfi):
            w.writerow([node, _fmt(value)])
    with _open_out(spatial_path, "jfi_spatial") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "spatial_jfi"])
        for ts, value in zip(report.timestamps, report.spatial_jfi):
            w.writerow([ts.isoformat(), _fmt(value)])


def read_fairness_csvs(temporal_path, spatial_path):
    temporal = [( _parse_node_id(row[0]), _float(temporal_path, lineno, "temporal_jfi", row[1]))
                for lineno, row in _read_rows(temporal_path, ["node_id", "temporal_jfi"])]
    spatial = [(parse_timestamp(row[0], f"{spatial_path}:{lineno}"),
                _float(spatial_path, lineno, "spatial_jfi", row[1]))
               for lineno, row in _read_rows(spatial_path, ["timestamp", "spatial_jfi"])]
    return temporal, spatial


def write_economics_csv(path, report) -> None:
    header = ["dc", "e_add_pct", "e_curt_pct", "avoided_co2_t",
              "c_rev_usd", "c_curt_usd", "net_profit_usd"]
    add_pct = report.curves.add_pct()
    curt_pct = report.curves.curt_pct()
    co2 = report.a_co2_t.sum(axis=1)
    with _open_out(path, "economics") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, dc in enumerate(report.dc_grid):
            w.writerow([_fmt(dc), _fmt(add_pct[i]), _fmt(curt_pct[i]), _fmt(co2[i]),
                        _fmt(report.c_rev[i]), _fmt(report.c_curt[i]),
                        _fmt(report.net_profit[i])])


def read_economics_csv(path):
    header = ["dc", "e_add_pct", "e_curt_pct", "avoided_co2_t",
              "c_rev_usd", "c_curt_usd", "net_profit_usd"]
    rows = []
    for lineno, row in _read_rows(path, header):
        rows.append(tuple(_float(path, lineno, c, v) for c, v in zip(header, row)))
    return rows
