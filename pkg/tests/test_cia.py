from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from hostcap import build_network, compact_matrices, solve_loadflow
from hostcap.cia import (
    CiaError,
    ObjectiveSpec,
    build_p1,
    dhc_timeseries,
    envelope_mae,
    linearize,
    proxy_fixed_point,
    solve_hc,
)
from hostcap.loadflow import batch_admissible, batch_loadflow

from conftest import fourbus_spec


def no_load_net():
    spec = fourbus_spec()
    for bus in spec["buses"]:
        bus.pop("p_demand_kw", None)
        bus.pop("q_demand_kvar", None)
    return build_network(spec)


class TestLinearize:
    def test_no_load_feeder(self):
        net = no_load_net()
        mats = compact_matrices(net)
        lin = linearize(net, mats)
        assert lin.l0 == pytest.approx(np.zeros(3))
        assert lin.jP == pytest.approx(np.zeros(3))
        assert lin.jQ == pytest.approx(np.zeros(3))
        assert lin.jV == pytest.approx(np.zeros(3))
        for b in range(3):
            assert lin.He[b, 0, 0] == pytest.approx(2.0 / net.v0_sq)
            assert lin.He[b, 1, 1] == pytest.approx(2.0 / net.v0_sq)

    def test_hessian_psd_on_fourbus(self, fourbus, fourbus_mats):
        lin = linearize(fourbus, fourbus_mats)
        eigs = np.linalg.eigvalsh(lin.He)
        assert eigs.min() >= -1e-9

    def test_hessian_factor_reconstructs(self, fourbus, fourbus_mats):
        lin = linearize(fourbus, fourbus_mats)
        for b in range(fourbus.n_branches):
            He = lin.L_fac[b].T @ lin.L_fac[b]
            assert He == pytest.approx(lin.He[b], abs=1e-12)

    def test_nominal_point_consistency(self, fourbus, fourbus_mats):
        lin = linearize(fourbus, fourbus_mats)
        assert lin.l0 * lin.V0 == pytest.approx(lin.P0**2 + lin.Q0**2, abs=1e-9)

    def test_divergent_demand_raises(self, fourbus, fourbus_mats):
        with pytest.raises(CiaError, match="diverged"):
            linearize(fourbus, fourbus_mats, p_d=np.full(3, 5.0), q_d=np.full(3, 2.0))


class TestBuildP1:
    def test_soc_cone_count(self, fourbus, fourbus_mats):
        lin = linearize(fourbus, fourbus_mats)
        obj = ObjectiveSpec("linear", np.ones(2))
        prob = build_p1(fourbus, fourbus_mats, lin, obj, "soc", None, "upper")
        # four signed combinations per branch, three branches
        assert prob.soc_cone_count == 12

    def test_conservative_cone_count(self, fourbus, fourbus_mats):
        lin = linearize(fourbus, fourbus_mats)
        obj = ObjectiveSpec("linear", np.ones(2))
        prob = build_p1(fourbus, fourbus_mats, lin, obj, "conservative", None, "upper")
        # eight proxy corners per branch
        assert prob.soc_cone_count == 8 * 3

    def test_origin_feasible_zero_demand(self):
        net = no_load_net()
        mats = compact_matrices(net)
        lin = linearize(net, mats)
        obj = ObjectiveSpec("linear", np.ones(2))
        prob = build_p1(net, mats, lin, obj, "soc", None, "upper")
        v0 = net.v0_sq * np.ones(3)
        zeros = np.zeros(3)
        origin = {
            "pg": np.zeros(2),
            "P_plus": zeros, "P_minus": zeros, "Q_plus": zeros, "Q_minus": zeros,
            "V_plus": v0, "V_minus": v0, "l_minus": zeros, "l_plus": zeros,
        }
        assert prob.check_point(origin) <= 1e-12

    def test_lower_bound_rows_at_expansion_point(self, fourbus, fourbus_mats):
        # the first-order underestimator returns l0 exactly at delta = 0
        lin = linearize(fourbus, fourbus_mats)
        prox = proxy_fixed_point(fourbus, fourbus_mats, lin,
                                 -lin.p_d, -lin.q_d, "soc")
        assert prox.converged
        assert prox.l_minus == pytest.approx(lin.l0, abs=1e-9)
        assert prox.l_plus == pytest.approx(lin.l0, abs=1e-9)

    def test_unknown_variant_rejected(self, fourbus, fourbus_mats):
        lin = linearize(fourbus, fourbus_mats)
        obj = ObjectiveSpec("linear", np.ones(2))
        with pytest.raises(CiaError, match="variant"):
            build_p1(fourbus, fourbus_mats, lin, obj, "tight", None, "upper")
        with pytest.raises(CiaError, match="direction"):
            build_p1(fourbus, fourbus_mats, lin, obj, "soc", None, "sideways")


class TestSolveHc:
    def test_intervals_anchored_at_zero(self, fourbus, fourbus_mats):
        rect = solve_hc(fourbus, fourbus_mats, scenario="s1")
        assert np.all(rect.lo_mw <= 0) and np.all(rect.hi_mw >= 0)
        assert rect.iterations == 1
        assert rect.volume > 0

    def test_unknown_scenario(self, fourbus, fourbus_mats):
        with pytest.raises(CiaError, match="unknown scenario"):
            solve_hc(fourbus, fourbus_mats, scenario="s9")

    def test_envelope_ordering_at_solution(self, fourbus, fourbus_mats):
        rect = solve_hc(fourbus, fourbus_mats, scenario="s1", bound_variant="soc")
        primal = rect.upper_solution.primal
        pg = primal["pg"]
        op = solve_loadflow(fourbus, fourbus_mats,
                            p_g=fourbus.gen_index_map() @ pg)
        assert op.converged
        slack = 1e-7
        assert np.all(primal["l_minus"] <= op.l + slack)
        assert np.all(op.l <= primal["l_plus"] + slack)
        assert np.all(primal["V_minus"] <= op.V + slack)
        assert np.all(op.V <= primal["V_plus"] + slack)

    def test_soc_contains_conservative(self, fourbus, fourbus_mats):
        soc = solve_hc(fourbus, fourbus_mats, scenario="s1", bound_variant="soc")
        cons = solve_hc(fourbus, fourbus_mats, scenario="s1", bound_variant="conservative")
        assert np.all(soc.lo_mw <= cons.lo_mw + 1e-6)
        assert np.all(soc.hi_mw >= cons.hi_mw - 1e-6)
        assert soc.volume >= cons.volume

    def test_all_scenarios_feasible(self, fourbus, fourbus_mats):
        # objective changes never make the restriction infeasible
        for scen in ("s1", "s2", "s3", "s4", "s1f1", "s1f2"):
            rect = solve_hc(fourbus, fourbus_mats, scenario=scen)
            assert rect.volume >= 0

    def test_iteration_loop_grows_or_holds(self, fourbus, fourbus_mats):
        one = solve_hc(fourbus, fourbus_mats, scenario="s1", iterations=1)
        three = solve_hc(fourbus, fourbus_mats, scenario="s1", iterations=3)
        assert 1 <= three.iterations <= 3
        # re-linearized boxes must stay sound; sample and audit
        rng = np.random.default_rng(11)
        pg = rng.uniform(three.lo_mw, three.hi_mw, size=(2000, 2)) / fourbus.s_base_mva
        p = fourbus.gen_index_map() @ pg.T - fourbus.p_demand[:, None]
        q = np.tile(-fourbus.q_demand[:, None], (1, 2000))
        _, _, V, l, ok, _, _ = batch_loadflow(fourbus, fourbus_mats, p, q)
        assert np.all(ok)
        assert np.all(batch_admissible(fourbus, V, l, slack=1e-6))
        assert three.volume >= 0.5 * one.volume

    def test_per_node_and_aggregate_recorded(self, fourbus, fourbus_mats):
        rect = solve_hc(fourbus, fourbus_mats, scenario="s1")
        lo, hi = rect.aggregate_mw()
        assert lo == pytest.approx(rect.lo_mw.sum())
        assert hi == pytest.approx(rect.hi_mw.sum())
        assert rect.node_ids == (3, 4)


class TestEnvelopeMae:
    def test_nominal_point_only(self, fourbus, fourbus_mats):
        lin = linearize(fourbus, fourbus_mats)
        sweep = envelope_mae(fourbus, fourbus_mats, lin, 3, 0.0, 0.0, points=3)
        assert sweep.mae_soc == pytest.approx(np.zeros(3), abs=1e-9)
        assert sweep.mae_conservative == pytest.approx(np.zeros(3), abs=1e-9)

    def test_soc_tighter_than_conservative(self, fourbus, fourbus_mats):
        lin = linearize(fourbus, fourbus_mats)
        sweep = envelope_mae(fourbus, fourbus_mats, lin, 3, -1.0, 2.0, points=13)
        assert np.all(sweep.mae_soc <= sweep.mae_conservative + 1e-12)
        assert np.all(sweep.l_plus_soc >= sweep.l_actual - 1e-9)
        assert np.all(sweep.l_plus_conservative >= sweep.l_actual - 1e-9)

    def test_non_generator_node_rejected(self, fourbus, fourbus_mats):
        lin = linearize(fourbus, fourbus_mats)
        with pytest.raises(CiaError, match="generation"):
            envelope_mae(fourbus, fourbus_mats, lin, 2, 0.0, 1.0)


class TestDhcTimeseries:
    def _times(self, count, start_hour=10):
        t0 = datetime(2024, 6, 1, start_hour, 0, tzinfo=timezone.utc)
        return [t0 + i * timedelta(minutes=5) for i in range(count)]

    def test_constant_demand_identical_rects(self, fourbus, fourbus_mats):
        ts = self._times(3)
        p_d = np.tile(fourbus.p_demand, (3, 1))
        q_d = np.tile(fourbus.q_demand, (3, 1))
        series = dhc_timeseries(fourbus, fourbus_mats, ts, p_d, q_d, scenario="s1")
        rects = [s.rect for s in series.steps]
        assert all(r is not None for r in rects)
        for r in rects[1:]:
            assert np.array_equal(r.lo_mw, rects[0].lo_mw)
            assert np.array_equal(r.hi_mw, rects[0].hi_mw)

    def test_night_steps_skipped(self, fourbus, fourbus_mats):
        ts = self._times(4, start_hour=19)  # 19:00..19:15 with window ending 19:10
        p_d = np.tile(fourbus.p_demand, (4, 1))
        q_d = np.tile(fourbus.q_demand, (4, 1))
        from datetime import time
        series = dhc_timeseries(fourbus, fourbus_mats, ts, p_d, q_d,
                                scenario="s1", daytime=(time(6, 0), time(19, 10)))
        skipped = [s.skipped for s in series.steps]
        assert skipped == [False, False, True, True]
        assert all(s.demand_gen_mw is not None for s in series.steps)

    def test_bad_step_recorded_not_fatal(self, fourbus, fourbus_mats):
        ts = self._times(3)
        p_d = np.tile(fourbus.p_demand, (3, 1))
        q_d = np.tile(fourbus.q_demand, (3, 1))
        p_d[1] = 5.0  # load flow diverges at this step
        series = dhc_timeseries(fourbus, fourbus_mats, ts, p_d, q_d, scenario="s1")
        assert series.steps[0].rect is not None
        assert series.steps[1].rect is None and series.steps[1].error
        assert series.steps[2].rect is not None

    def test_nonuniform_timestamps_rejected(self, fourbus, fourbus_mats):
        ts = self._times(3)
        ts[2] = ts[2] + timedelta(minutes=1)
        p_d = np.tile(fourbus.p_demand, (3, 1))
        with pytest.raises(CiaError, match="non-uniform"):
            dhc_timeseries(fourbus, fourbus_mats, ts, p_d, p_d, scenario="s1")
