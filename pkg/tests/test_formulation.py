import numpy as np
import pytest

from conftest import mk_inst, mk_tiny, with_params
from oracles import (commitment_cost, dispatch_lp, enumerate_optimum,
                     fixed_cost, startup_cost, valid_sequences)
from ucopt.errors import ShapeMismatch
from ucopt.formulation import (ONE_BIN, THREE_BIN, DispatchEvaluator,
                               build_mip, canonical_switches,
                               evaluate_commitment, extract_commitment)
from ucopt.instance import UcpInstance, derive_constants
from ucopt.mip import BINARY, CONTINUOUS, EQ, solve_lp, solve_mip


def test_variable_counts_and_order_2x3():
    inst = mk_tiny(31, 2, 4)
    probe = UcpInstance(inst.name, 3, inst.units,
                        inst.demand[:3], inst.reserve[:3])
    m1 = build_mip(probe, ONE_BIN)
    assert m1.n_vars == 18
    m3 = build_mip(probe, THREE_BIN)
    assert m3.n_vars == 30
    # row-major unit blocks, u then P then S (then s, d)
    tags = [m3.var_tags[c][0] for c in range(m3.n_vars)]
    assert tags == ["u"] * 6 + ["P"] * 6 + ["S"] * 6 + ["s"] * 6 + ["d"] * 6
    assert m3.var_tags[1] == ("u", 0, 1)
    assert m3.var_tags[6 + 4] == ("P", 1, 1)


def test_types_and_bounds():
    inst = mk_tiny(31, 2, 4)
    for form in (ONE_BIN, THREE_BIN):
        m = build_mip(inst, form)
        for c in range(m.n_vars):
            kind = m.var_tags[c][0]
            if kind in ("u", "s", "d"):
                assert m.var_kinds[c] == BINARY
                assert (m.lb[c], m.ub[c]) == (0.0, 1.0)
            else:
                assert m.var_kinds[c] == CONTINUOUS
        for c, tag in enumerate(m.var_tags):
            if tag[0] == "P":
                assert m.ub[c] == inst.units[tag[1]].p_max
            if tag[0] == "S":
                assert m.ub[c] == np.inf and m.obj[c] == 1.0


def test_objective_coefficients():
    inst = mk_tiny(33, 2, 5)
    m = build_mip(inst, ONE_BIN)
    for c, tag in enumerate(m.var_tags):
        if tag[0] == "u":
            assert m.obj[c] == inst.units[tag[1]].alpha
        elif tag[0] == "P":
            assert m.obj[c] == inst.units[tag[1]].beta


def test_initial_lock_rows():
    # committed 1 of 3 minimum-up periods: u fixed on for the first 2
    inst = mk_inst(35, n=2, T=8)
    units = [with_params(inst.units[0], u0=1, t0=1, t_on=3),
             inst.units[1]]
    probe = UcpInstance(inst.name, 8, tuple(units),
                        inst.demand, inst.reserve)
    m = build_mip(probe, ONE_BIN)
    locks = [(m.row_tags[r], m.rhs[r]) for r in range(m.n_rows)
             if m.row_tags[r][0] == "C5"]
    dc = derive_constants(probe)
    assert dc.u_lock[0] == 2
    mine = [(tag, rhs) for tag, rhs in locks if tag[1] == 0]
    assert [t for (_, _, t), _ in mine] == [0, 1]
    assert all(rhs == 1.0 for _, rhs in mine)
    assert all(m.senses[r] == EQ for r in range(m.n_rows)
               if m.row_tags[r][0] == "C5")


def test_all_off_infeasible_names_balance():
    inst = mk_tiny(37, 2, 4)
    res = evaluate_commitment(inst, ONE_BIN, np.zeros((2, 4), dtype=int))
    assert not res.feasible and res.objective == np.inf
    assert ("C4", 0) in res.violations


def test_feasible_commitment_priced_exactly():
    inst = mk_tiny(39, 2, 5)
    u = np.ones((2, 5), dtype=int)
    for g, unit in enumerate(inst.units):
        if unit.u0 == 0:
            dc = derive_constants(inst)
            u[g, :dc.l_lock[g]] = 0
    res = evaluate_commitment(inst, ONE_BIN, u)
    ref = commitment_cost(inst, u)
    if ref is None:
        assert not res.feasible
    else:
        assert res.feasible
        assert res.objective == pytest.approx(ref, rel=1e-9)


def test_optimal_commitment_matches_enumeration():
    inst = mk_tiny(41, 2, 4)
    opt, u_opt = enumerate_optimum(inst)
    assert opt is not None
    for form in (ONE_BIN, THREE_BIN):
        res = evaluate_commitment(inst, form, u_opt)
        assert res.feasible
        assert res.objective == pytest.approx(opt, rel=1e-9)


def test_min_up_violation_reported():
    inst = mk_tiny(43, 2, 6)
    units = [with_params(inst.units[0], u0=0, t0=-5, t_on=3, t_off=1),
             with_params(inst.units[1], u0=1, t0=5, t_on=1, t_off=1)]
    probe = UcpInstance(inst.name, 6, tuple(units),
                        inst.demand, inst.reserve)
    u = np.array([[0, 1, 1, 0, 0, 0],    # on-run of 2 < t_on=3
                  [1, 1, 1, 1, 1, 1]])
    res = evaluate_commitment(probe, ONE_BIN, u)
    assert not res.feasible
    assert any(v[0] == "C6" and v[1] == 0 for v in res.violations)


def test_fractional_commitment_rejected():
    inst = mk_tiny(43, 2, 4)
    u = np.full((2, 4), 0.5)
    res = evaluate_commitment(inst, ONE_BIN, u)
    assert not res.feasible
    assert res.violations and res.violations[0][0] == "u"


def test_shape_mismatch_raises():
    inst = mk_tiny(43, 2, 4)
    with pytest.raises(ShapeMismatch):
        evaluate_commitment(inst, ONE_BIN, np.ones((3, 4), dtype=int))


def test_forms_agree_at_integer_optimum():
    for seed in (45, 46, 47):
        inst = mk_tiny(seed, 2, 5)
        objs = []
        for form in (ONE_BIN, THREE_BIN):
            sol = solve_mip(build_mip(inst, form), limits={"gap": 1e-9})
            assert sol.status == "Optimal"
            objs.append(sol.objective)
        assert objs[0] == pytest.approx(objs[1], rel=1e-7)


def test_three_bin_relaxation_at_least_as_tight():
    for seed in (48, 49, 50, 51):
        inst = mk_tiny(seed, 3, 5)
        lp1 = solve_lp(build_mip(inst, ONE_BIN)).objective
        lp3 = solve_lp(build_mip(inst, THREE_BIN)).objective
        assert lp3 >= lp1 - 1e-6


def _boundary_units():
    inst = mk_tiny(52, 2, 4)
    anchor = with_params(inst.units[0], u0=1, t0=5, t_on=1, t_off=1,
                         t_cold=0, alpha=10.0, beta=1.0, c_hot=50.0,
                         c_cold=60.0, p_min=10.0, p_max=100.0, ramp_up=100.0,
                         ramp_down=100.0, ramp_start=100.0, ramp_shut=100.0)
    late = with_params(inst.units[1], u0=0, t0=-3, t_off=3, t_cold=2,
                       t_on=1, alpha=10.0, beta=0.0, c_hot=100.0,
                       c_cold=900.0, p_min=150.0, p_max=200.0, ramp_up=200.0,
                       ramp_down=200.0, ramp_start=200.0, ramp_shut=200.0)
    return anchor, late


def test_deep_history_cold_start_billed():
    # t_off=3, t_cold=2 gives a 5-period hot window; 3 periods of history
    # downtime plus 3 idle horizon periods put the t=4 start past it, so
    # the staircase must reach deeper than the 4-period horizon
    anchor, late = _boundary_units()
    probe = UcpInstance("deepcold", 4, (anchor, late),
                        (80.0, 80.0, 80.0, 180.0), (0.0,) * 4)
    want = 1180.0   # 240 energy + 40 commitments + 900 cold start
    for form in (ONE_BIN, THREE_BIN):
        m = build_mip(probe, form)
        sol = solve_mip(m, limits={"gap": 1e-9})
        assert sol.status == "Optimal"
        assert sol.objective == pytest.approx(want, abs=1e-6)
        u = extract_commitment(m, sol.values)
        assert u[1].tolist() == [0, 0, 0, 1]
    opt, _ = enumerate_optimum(probe)
    assert opt == pytest.approx(want, abs=1e-6)


def test_downtime_equal_to_window_still_hot():
    # same unit started one period earlier: downtime exactly equals the
    # window, which is the last hot start
    anchor, late = _boundary_units()
    probe = UcpInstance("deephot", 4, (anchor, late),
                        (80.0, 80.0, 240.0, 180.0), (0.0,) * 4)
    want = 350.0    # 200 energy + 50 commitments + 100 hot start
    for form in (ONE_BIN, THREE_BIN):
        m = build_mip(probe, form)
        sol = solve_mip(m, limits={"gap": 1e-9})
        assert sol.status == "Optimal"
        assert sol.objective == pytest.approx(want, abs=1e-6)
        assert extract_commitment(m, sol.values)[1].tolist() == [0, 0, 1, 1]
    opt, _ = enumerate_optimum(probe)
    assert opt == pytest.approx(want, abs=1e-6)


def test_canonical_switches_match_transitions():
    r = np.random.default_rng(5)
    inst = mk_inst(53, n=3, T=8)
    for _ in range(10):
        u = (r.random((3, 8)) < 0.6).astype(np.int64)
        s, d = canonical_switches(inst, u)
        for g, unit in enumerate(inst.units):
            prev = unit.u0
            for t in range(8):
                assert s[g, t] - d[g, t] == u[g, t] - prev
                assert s[g, t] in (0, 1) and d[g, t] in (0, 1)
                prev = u[g, t]


def test_extract_commitment_round_trip():
    inst = mk_tiny(55, 2, 5)
    m = build_mip(inst, THREE_BIN)
    sol = solve_mip(m, limits={"gap": 1e-9})
    u = extract_commitment(m, sol.values)
    res = evaluate_commitment(inst, THREE_BIN, u)
    assert res.feasible
    assert res.objective == pytest.approx(sol.objective, rel=1e-9)


def test_dispatch_respects_ramps():
    inst = mk_tiny(57, 2, 6)
    ev = DispatchEvaluator(inst, ONE_BIN)
    opt, u_opt = enumerate_optimum(inst)
    vals = ev.dispatch_values(u_opt)
    assert vals is not None
    m = ev.problem
    idx = m.tag_index()
    for g, unit in enumerate(inst.units):
        for t in range(1, 6):
            if u_opt[g, t - 1] and u_opt[g, t]:
                step = vals[idx[("P", g, t)]] - vals[idx[("P", g, t - 1)]]
                assert step <= unit.ramp_up + 1e-6
                assert -step <= unit.ramp_down + 1e-6
            if u_opt[g, t] and not u_opt[g, t - 1]:
                assert vals[idx[("P", g, t)]] <= unit.ramp_start + 1e-6
            if u_opt[g, t - 1] and not u_opt[g, t]:
                assert vals[idx[("P", g, t - 1)]] <= unit.ramp_shut + 1e-6


def test_evaluator_reuse_is_consistent():
    inst = mk_tiny(59, 2, 5)
    ev = DispatchEvaluator(inst, ONE_BIN)
    seqs = [np.array(p) for p in
            zip(valid_sequences(inst.units[0], 5)[:6],
                valid_sequences(inst.units[1], 5)[:6])]
    for u in seqs:
        got = ev.evaluate(u)
        ref = commitment_cost(inst, u)
        if ref is None:
            assert not got.feasible
        else:
            assert got.feasible
            assert got.objective == pytest.approx(ref, rel=1e-9)


def test_oracle_helpers_self_consistent():
    inst = mk_tiny(61, 2, 5)
    opt, u_opt = enumerate_optimum(inst)
    parts = fixed_cost(inst, u_opt) + dispatch_lp(inst, u_opt)
    assert parts == pytest.approx(opt, rel=1e-12)
    for g, unit in enumerate(inst.units):
        assert startup_cost(unit, tuple(u_opt[g])) >= 0.0
