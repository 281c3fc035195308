import json
import math

import numpy as np
import pytest

from conftest import mk_inst, mk_tiny, with_params
from ucopt.errors import MalformedInput
from ucopt.instance import (UcpInstance, UnitParams, derive_constants,
                            history_state, instance_from_dict,
                            instance_to_dict, load_instance,
                            packaged_instance_path, save_instance,
                            validate_instance)


def test_valid_instance_passes():
    inst = mk_inst(3, n=2, T=6)
    assert validate_instance(inst) == []


def test_pmin_above_pmax_flagged():
    inst = mk_inst(3, n=2, T=6)
    units = list(inst.units)
    bigger = units[1].p_max + 5.0
    units[1] = with_params(units[1], p_min=bigger,
                           ramp_start=bigger, ramp_shut=bigger)
    bad = UcpInstance(inst.name, inst.horizon, tuple(units),
                      inst.demand, inst.reserve)
    report = validate_instance(bad)
    assert len(report) == 1
    assert "unit 1" in report[0] and "p_min" in report[0]


def test_demand_above_capacity_names_period():
    inst = mk_inst(3, n=2, T=6)
    cap = sum(u.p_max for u in inst.units)
    demand = list(inst.demand)
    demand[2] = cap * 1.5  # t=3 in 1-based speak
    bad = UcpInstance(inst.name, inst.horizon, inst.units,
                      tuple(demand), inst.reserve)
    report = validate_instance(bad)
    assert any("capacity" in r and "t=3" in r for r in report)


@pytest.mark.parametrize("field,value,frag", [
    ("t_on", 0, "t_on"),
    ("t_cold", -1, "t_cold"),
    ("alpha", -1.0, "costs"),
    ("ramp_up", -0.5, "ramp rates"),
    ("u0", 2, "u0"),
])
def test_unit_invariants(field, value, frag):
    inst = mk_inst(5, n=2, T=6)
    units = list(inst.units)
    units[0] = with_params(units[0], **{field: value})
    bad = UcpInstance(inst.name, inst.horizon, tuple(units),
                      inst.demand, inst.reserve)
    assert any(frag in r for r in validate_instance(bad))


def test_history_sign_convention():
    inst = mk_inst(5, n=2, T=6)
    on = with_params(inst.units[0], u0=1, t0=-2)
    off = with_params(inst.units[0], u0=0, t0=3)
    for u in (on, off):
        bad = UcpInstance(inst.name, inst.horizon, (u, inst.units[1]),
                          inst.demand, inst.reserve)
        assert any("t0" in r for r in validate_instance(bad))


def test_ramp_start_below_pmin_flagged():
    inst = mk_inst(7, n=2, T=6)
    units = list(inst.units)
    units[0] = with_params(units[0], ramp_start=units[0].p_min * 0.5)
    bad = UcpInstance(inst.name, inst.horizon, tuple(units),
                      inst.demand, inst.reserve)
    assert any("ramp_start" in r for r in validate_instance(bad))


def test_length_mismatch_reported_not_raised():
    inst = mk_inst(9, n=2, T=6)
    bad = UcpInstance(inst.name, inst.horizon, inst.units,
                      inst.demand[:-1], inst.reserve)
    report = validate_instance(bad)
    assert any("length" in r for r in report)


def test_validator_collects_multiple_violations():
    inst = mk_inst(11, n=3, T=6)
    units = list(inst.units)
    units[0] = with_params(units[0], t_on=0)
    units[2] = with_params(units[2], alpha=-3.0)
    demand = list(inst.demand)
    demand[0] = -1.0
    bad = UcpInstance(inst.name, inst.horizon, tuple(units),
                      tuple(demand), inst.reserve)
    assert len(validate_instance(bad)) >= 3


def test_initial_on_lock_length():
    # committed for 1 period of a 3-period minimum: stay on for 2 more
    inst = mk_inst(13, n=2, T=8)
    units = [with_params(inst.units[0], u0=1, t0=1, t_on=3),
             with_params(inst.units[1], u0=0, t0=-1)]
    probe = UcpInstance(inst.name, inst.horizon, tuple(units),
                        inst.demand, inst.reserve)
    dc = derive_constants(probe)
    assert dc.u_lock[0] == 2 and dc.l_lock[0] == 0
    assert dc.u_lock[1] == 0


def test_initial_off_lock_length():
    inst = mk_inst(13, n=2, T=8)
    units = [inst.units[0],
             with_params(inst.units[1], u0=0, t0=-1, t_off=3)]
    probe = UcpInstance(inst.name, inst.horizon, tuple(units),
                        inst.demand, inst.reserve)
    dc = derive_constants(probe)
    assert dc.l_lock[1] == 2 and dc.u_lock[1] == 0


def test_locks_capped_at_horizon():
    inst = mk_inst(13, n=2, T=2)
    units = [with_params(inst.units[0], u0=1, t0=1, t_on=9),
             inst.units[1]]
    probe = UcpInstance(inst.name, 2, tuple(units),
                        inst.demand[:2], inst.reserve[:2])
    assert derive_constants(probe).u_lock[0] == 2


def test_staircase_depth_and_steps():
    inst = mk_inst(17, n=2, T=4)
    units = [with_params(inst.units[0], t_off=3, t_cold=2),
             inst.units[1]]
    probe = UcpInstance(inst.name, inst.horizon, tuple(units),
                        inst.demand, inst.reserve)
    dc = derive_constants(probe)
    # one step deeper than the hot window, regardless of the horizon
    assert dc.n_d[0] == 6
    u = probe.units[0]
    assert dc.k_step[0][:5] == (u.c_hot,) * 5
    assert dc.k_step[0][5] == u.c_cold


def test_history_cold_flags():
    inst = mk_inst(17, n=2, T=6)

    def flags(t0):
        units = [with_params(inst.units[0], u0=0, t0=t0, t_off=2, t_cold=1),
                 inst.units[1]]
        probe = UcpInstance(inst.name, inst.horizon, tuple(units),
                            inst.demand, inst.reserve)
        return list(derive_constants(probe).f_init[0])

    # one period of history downtime: a start in the first window periods
    # might still be hot, so the cold row stays relaxed there
    assert flags(-1) == [1, 1, 1, 0, 0, 0]
    # downtime already past the 3-period window: every start is cold
    assert flags(-4) == [0, 0, 0, 0, 0, 0]
    # exactly at the window edge: only the very first start can be hot
    assert flags(-3) == [1, 0, 0, 0, 0, 0]


def test_history_state_probes():
    u_on = UnitParams(alpha=1, beta=1, c_hot=1, c_cold=2, t_on=2, t_off=2,
                      t_cold=1, p_max=10, p_min=2, ramp_up=8, ramp_down=8,
                      ramp_start=5, ramp_shut=5, u0=1, t0=3)
    assert history_state(u_on, 0) == 1
    assert history_state(u_on, -2) == 1
    assert history_state(u_on, -3) == 0
    u_off = with_params(u_on, u0=0, t0=-2)
    assert history_state(u_off, 0) == 0
    assert history_state(u_off, -1) == 0
    assert history_state(u_off, -2) == 1
    with pytest.raises(ValueError):
        history_state(u_on, 1)


def test_json_round_trip_exact(tmp_path):
    inst = mk_tiny(21, 3, 6)
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    back = load_instance(path)
    assert back == inst
    assert back.demand == inst.demand  # float-exact, not approximate


def test_dict_round_trip():
    inst = mk_inst(23, n=3, T=8)
    assert instance_from_dict(instance_to_dict(inst)) == inst


def test_loader_rejects_unknown_fields():
    doc = instance_to_dict(mk_tiny(25, 2, 4))
    doc["frequency"] = 60
    with pytest.raises(MalformedInput):
        instance_from_dict(doc)
    doc.pop("frequency")
    doc["units"][0]["p_peak"] = 1.0
    with pytest.raises(MalformedInput):
        instance_from_dict(doc)


def test_loader_rejects_missing_unit_fields():
    doc = instance_to_dict(mk_tiny(25, 2, 4))
    doc["units"][1].pop("p_max")
    with pytest.raises(MalformedInput):
        instance_from_dict(doc)


def test_load_rejects_garbage_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(MalformedInput):
        load_instance(p)


def test_packaged_instance_loads():
    inst = load_instance(packaged_instance_path("unit8"))
    assert inst.n_units == 8 and inst.horizon == 24
    assert validate_instance(inst) == []


def test_unit_array_matches_fields():
    inst = mk_inst(27, n=3, T=6)
    arr = inst.unit_array("p_max")
    assert isinstance(arr, np.ndarray)
    assert arr.tolist() == [u.p_max for u in inst.units]


def test_random_instances_always_validate():
    for seed in range(40, 52):
        assert validate_instance(mk_inst(seed)) == []
        assert validate_instance(mk_tiny(seed, 2 + seed % 2, 4 + seed % 3)) == []


def test_derived_shapes_consistent():
    for seed in (60, 61, 62):
        inst = mk_inst(seed, n=3, T=10)
        dc = derive_constants(inst)
        assert len(dc.u_lock) == len(dc.l_lock) == 3
        for g, u in enumerate(inst.units):
            assert dc.n_d[g] == u.t_off + u.t_cold + 1
            assert len(dc.k_step[g]) == dc.n_d[g]
            assert len(dc.f_init[g]) == inst.horizon
            # locks never overlap and stay inside the horizon
            assert not (dc.u_lock[g] and dc.l_lock[g])
            assert 0 <= dc.u_lock[g] <= inst.horizon
            hot = sum(1 for k in dc.k_step[g] if k == u.c_hot)
            assert hot == min(u.t_off + u.t_cold, dc.n_d[g])
