"""Command-line front end tying the library into reproducible runs.

Subcommands: ``matrices``, ``sweep``, ``hc``, ``dhc``, ``fairness``,
``economics``, ``validate``. Options can come from a JSON config file
(``--config``), with command-line flags taking precedence. All file outputs
land in ``--out`` (created on demand); given the same inputs and seed the
CSV/JSON outputs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from datetime import time
from pathlib import Path

import numpy as np

from hostcap import cia, data, economics as econ, fairness as fair
from hostcap.cia import CiaError, dhc_timeseries, solve_hc
from hostcap.conic import ConicModelError
from hostcap.economics import EconomicsError, PvScenario
from hostcap.fairness import FairnessError, fairness_report
from hostcap.loadflow import batch_admissible, batch_loadflow, sweep_admissible_set
from hostcap.net_model import (
    NetworkError,
    compact_matrices,
    dump_matrices,
    load_network,
)

USER_ERRORS = (NetworkError, data.DataError, CiaError, FairnessError,
               EconomicsError, ConicModelError, ValueError)


@dataclass
class RunConfig:
    """Everything a run needs, after merging config file and flags."""

    network: str | None = None
    demand: str | None = None
    pv: str | None = None
    moer: str | None = None
    scenario: str = "s1"
    variant: str = "soc"
    epsilon: float | None = None
    iterations: int = 1
    dc_grid: str = "0:1.0:21"
    lambda_curt: float = 0.20
    lambda_co2: float = 100.0
    daytime: str = "06:00-20:00"
    seed: int = 0
    out: str = "out"
    nodes: str | None = None
    range: str | None = None
    resolution: int = 40
    samples: int = 10000
    days: int | None = None
    plot: bool = False


def _parse_daytime(text: str) -> tuple:
    try:
        lo, hi = text.split("-")
        h1, m1 = (int(v) for v in lo.split(":"))
        h2, m2 = (int(v) for v in hi.split(":"))
        return time(h1, m1), time(h2, m2)
    except Exception:
        raise ValueError(f"bad daytime window {text!r}, expected HH:MM-HH:MM") from None


def _parse_grid(text: str) -> np.ndarray:
    """Either 'start:stop:count' or a comma-separated list."""
    if ":" in text:
        start, stop, count = text.split(":")
        return np.linspace(float(start), float(stop), int(count))
    return np.array([float(v) for v in text.split(",")])


def _parse_range(text: str) -> tuple:
    lo, hi = (float(v) for v in text.split(":"))
    return lo, hi


def _parse_nodes(text: str) -> tuple:
    out = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        out.append(int(chunk) if chunk.lstrip("-").isdigit() else chunk)
    return tuple(out)


def _require(cfg: RunConfig, *names):
    for name in names:
        if getattr(cfg, name) is None:
            raise ValueError(f"--{name} is required for this subcommand")


def _load_inputs(cfg: RunConfig):
    net = load_network(cfg.network)
    mats = compact_matrices(net)
    return net, mats


def _demand_series(cfg: RunConfig, net):
    ts, node_ids, kw = data.read_demand_csv(cfg.demand)
    if cfg.days is not None:
        ts_keep = [t for t in ts if (t - ts[0]).days < cfg.days]
        kw = kw[: len(ts_keep)]
        ts = ts_keep
    p_d, q_d = data.demand_to_pu(net, node_ids, kw)
    return ts, p_d, q_d


def _scenario_fairness(cfg: RunConfig, net, p_d):
    preset = cia.resolve_scenario(cfg.scenario)
    if preset.fairness_mode is None:
        return None
    return fair.scenario_fairness(preset, net, p_d, epsilon=cfg.epsilon)


def _compute_dhc(cfg: RunConfig, net, mats):
    ts, p_d, q_d = _demand_series(cfg, net)
    fairness = _scenario_fairness(cfg, net, p_d[0])
    return dhc_timeseries(
        net, mats, ts, p_d, q_d,
        scenario=cfg.scenario, bound_variant=cfg.variant, fairness=fairness,
        iterations=cfg.iterations, daytime=_parse_daytime(cfg.daytime),
    )


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_matrices(cfg: RunConfig, out: Path) -> int:
    net, mats = _load_inputs(cfg)
    payload = {
        "s_base_mva": net.s_base_mva,
        "bus_ids": list(net.bus_ids),
        "matrices": dump_matrices(mats),
    }
    path = out / "matrices.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")
    return 0


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    _require(cfg, "network", "nodes", "range")
    net, mats = _load_inputs(cfg)
    lo, hi = _parse_range(cfg.range)
    raster = sweep_admissible_set(net, mats, _parse_nodes(cfg.nodes), lo, hi, cfg.resolution)
    path = out / "sweep.csv"
    data.write_raster_csv(path, raster)
    print(f"wrote {path}")
    if cfg.plot:
        from hostcap import plots
        plots.save_raster_svg(out / "sweep.svg", raster)
        print(f"wrote {out / 'sweep.svg'}")
    return 0


def cmd_hc(cfg: RunConfig, out: Path) -> int:
    """Single-snapshot hosting capacity, both bound variants side by side."""
    _require(cfg, "network")
    net, mats = _load_inputs(cfg)
    fairness = _scenario_fairness(cfg, net, net.p_demand)
    rects = []
    for variant in (cia.VARIANT_CONSERVATIVE, cia.VARIANT_SOC):
        rects.append(solve_hc(net, mats, scenario=cfg.scenario, bound_variant=variant,
                              fairness=fairness, iterations=cfg.iterations))
    path = out / "hc.csv"
    data.write_hc_csv(path, rects)

    print(f"HC limits, scenario {cfg.scenario}, after {rects[0].iterations} iteration(s)")
    print(f"{'variant':>14s}  aggregate interval (MW)")
    for rect in rects:
        lo, hi = rect.aggregate_mw()
        print(f"{rect.variant:>14s}  [{lo:8.2f}, {hi:8.2f}]")
    print()
    print(f"{'node':>6s} " + "".join(f"{r.variant:>22s}" for r in rects))
    for j, node in enumerate(rects[0].node_ids):
        cells = "".join(
            f"  [{r.lo_mw[j]:8.3f}, {r.hi_mw[j]:8.3f}]" for r in rects
        )
        print(f"{node!s:>6s}{cells}")
    print(f"wrote {path}")
    return 0


def cmd_dhc(cfg: RunConfig, out: Path) -> int:
    _require(cfg, "network", "demand")
    net, mats = _load_inputs(cfg)
    series = _compute_dhc(cfg, net, mats)
    errors = [s for s in series.steps if s.error]
    path = out / "dhc.csv"
    data.write_dhc_csv(path, series)
    print(f"wrote {path} ({len(series.computed())} computed steps, "
          f"{len(errors)} failed, {sum(1 for s in series.steps if s.skipped)} skipped)")
    for s in errors[:5]:
        print(f"  step {s.timestamp.isoformat()} failed: {s.error}", file=sys.stderr)
    if cfg.plot:
        from hostcap import plots
        plots.save_dhc_svg(out / "dhc.svg", series)
        print(f"wrote {out / 'dhc.svg'}")
    return 0 if not errors else 1


def cmd_fairness(cfg: RunConfig, out: Path) -> int:
    _require(cfg, "network", "demand")
    net, mats = _load_inputs(cfg)
    series = _compute_dhc(cfg, net, mats)
    report = fairness_report(series)
    t_path = out / "jfi_temporal.csv"
    s_path = out / "jfi_spatial.csv"
    data.write_fairness_csvs(t_path, s_path, report)
    if report.excluded_nodes:
        print(f"excluded zero-demand nodes: {report.excluded_nodes}", file=sys.stderr)
    print(f"wrote {t_path} and {s_path}")
    print(f"temporal JFI: min {report.temporal_jfi.min():.4f} "
          f"mean {report.temporal_jfi.mean():.4f}")
    print(f"spatial JFI:  min {report.spatial_jfi.min():.4f} "
          f"mean {report.spatial_jfi.mean():.4f}")
    return 0


def cmd_economics(cfg: RunConfig, out: Path) -> int:
    _require(cfg, "network", "demand", "pv", "moer")
    net, mats = _load_inputs(cfg)
    series = _compute_dhc(cfg, net, mats)
    steps_ts = [s.timestamp for s in series.computed()]

    pv_ts, pv_kw = data.read_pv_csv(cfg.pv)
    moer_ts, moer_g = data.read_moer_csv(cfg.moer)
    pv_aligned = data.align_to(steps_ts, pv_ts, pv_kw, "pv")
    moer_aligned = data.align_to(steps_ts, moer_ts, moer_g, "moer")

    limits = econ.static_limits(series)
    base = econ.base_profile(series, limits, pv_aligned)
    curves = econ.curtailment_curves(series, base, _parse_grid(cfg.dc_grid))
    report = econ.carbon_and_profit(curves, PvScenario(
        lambda_curt=cfg.lambda_curt, lambda_co2=cfg.lambda_co2,
        moer_g_per_kwh=moer_aligned,
    ))
    csv_path = out / "economics.csv"
    data.write_economics_csv(csv_path, report)
    json_path = out / "economics_summary.json"
    json_path.write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {csv_path} and {json_path}")
    print(f"net profit peaks at dc = {100 * report.argmax_dc:.0f}% "
          f"({report.net_profit.max():,.0f} $)")
    if cfg.plot:
        from hostcap import plots
        plots.save_economics_svg(out / "economics.svg", report)
        print(f"wrote {out / 'economics.svg'}")
    return 0


def cmd_validate(cfg: RunConfig, out: Path) -> int:
    """Monte-Carlo audit: samples inside the box must all be admissible."""
    _require(cfg, "network")
    net, mats = _load_inputs(cfg)
    fairness = _scenario_fairness(cfg, net, net.p_demand)
    rect = solve_hc(net, mats, scenario=cfg.scenario, bound_variant=cfg.variant,
                    fairness=fairness, iterations=cfg.iterations)
    rng = np.random.default_rng(cfg.seed)
    pg_mw = rect.sample_mw(cfg.samples, rng)
    gen_map = net.gen_index_map()
    p = gen_map @ (pg_mw / net.s_base_mva).T - net.p_demand[:, None]
    q = np.tile(-net.q_demand[:, None], (1, cfg.samples))
    _, _, V, l, ok, _, _ = batch_loadflow(net, mats, p, q)
    admissible = batch_admissible(net, V, l, slack=1e-6) & ok
    violations = int(np.sum(~admissible))
    payload = {
        "scenario": rect.scenario,
        "variant": rect.variant,
        "samples": cfg.samples,
        "seed": cfg.seed,
        "violations": violations,
        "nonconverged": int(np.sum(~ok)),
        "aggregate_mw": list(rect.aggregate_mw()),
    }
    path = out / "validate.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")
    print(f"{cfg.samples} samples, {violations} violations")
    return 0 if violations == 0 else 1


COMMANDS = {
    "matrices": cmd_matrices,
    "sweep": cmd_sweep,
    "hc": cmd_hc,
    "dhc": cmd_dhc,
    "fairness": cmd_fairness,
    "economics": cmd_economics,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hostcap",
        description="Dynamic solar hosting capacity for radial feeders",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON file with the same keys as the flags")
    parser.add_argument("--network", help="feeder JSON file")
    parser.add_argument("--demand", help="demand CSV (timestamp, node_id, kw)")
    parser.add_argument("--pv", help="reference-panel PV CSV (timestamp, kw)")
    parser.add_argument("--moer", help="MOER CSV (timestamp, lbs_co2_per_mwh)")
    parser.add_argument("--scenario", help="s1 s2 s3 s4 s1f1 s1f2 (default s1)")
    parser.add_argument("--variant", choices=["soc", "conservative"],
                        help="current upper-bound variant (default soc)")
    parser.add_argument("--epsilon", type=float, help="fairness epsilon override")
    parser.add_argument("--iterations", type=int, help="re-linearization passes (default 1)")
    parser.add_argument("--dc-grid", dest="dc_grid",
                        help="capacity increases: start:stop:count or comma list")
    parser.add_argument("--lambda-curt", dest="lambda_curt", type=float,
                        help="curtailment price $/kWh (default 0.20)")
    parser.add_argument("--lambda-co2", dest="lambda_co2", type=float,
                        help="carbon price $/tCO2 (default 100)")
    parser.add_argument("--daytime", help="daytime window HH:MM-HH:MM (default 06:00-20:00)")
    parser.add_argument("--seed", type=int, help="RNG seed for sampling (default 0)")
    parser.add_argument("--out", help="output directory (default ./out)")
    parser.add_argument("--nodes", help="sweep: two generator bus ids, comma separated")
    parser.add_argument("--range", help="sweep: injection range MIN:MAX in MW")
    parser.add_argument("--resolution", type=int, help="sweep: grid points per axis")
    parser.add_argument("--samples", type=int, help="validate: Monte-Carlo sample count")
    parser.add_argument("--days", type=int, help="restrict the demand series to its first N days")
    parser.add_argument("--plot", action="store_true", default=None,
                        help="also write SVG plots (needs matplotlib)")
    return parser


def merge_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    file_values = {}
    if args.config:
        try:
            with open(args.config) as fh:
                file_values = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{args.config}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        unknown = set(file_values) - set(vars(cfg))
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for name in vars(cfg):
        flag = getattr(args, name, None)
        if flag is not None:
            setattr(cfg, name, flag)
        elif name in file_values:
            setattr(cfg, name, file_values[name])
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = merge_config(args)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
