"""End-to-end runs of every subcommand through cli.main."""
import json
import os

import numpy as np
import pytest

from conftest import mk_inst, mk_tiny
from oracles import enumerate_optimum
from ucopt import cli
from ucopt.formulation import ONE_BIN, evaluate_commitment
from ucopt.instance import load_instance, save_instance


@pytest.fixture(scope="module")
def inst_file(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli_inst")
    inst = mk_tiny(7, 2, 5)
    path = d / "tiny7.json"
    save_instance(inst, path)
    return inst, str(path)


def run(argv, capsys):
    rc = cli.main(argv)
    cap = capsys.readouterr()
    return rc, cap.out, cap.err


def test_gen_system(inst_file, tmp_path, capsys):
    _, path = inst_file
    rc, out, _ = run(["gen-system", path, "--copies", "3",
                      "--out", str(tmp_path)], capsys)
    assert rc == 0
    grown = load_instance(tmp_path / "tiny7_x3.json")
    assert grown.n_units == 6
    assert "tiny7_x3" in out


def test_ingest_loads(inst_file, tmp_path, capsys):
    inst, path = inst_file
    csv_path = tmp_path / "loads.csv"
    with open(csv_path, "w") as fh:
        for day in range(3):
            fh.write(",".join("%g" % (1.0 + 0.1 * ((day + t) % 3))
                              for t in range(inst.horizon)) + "\n")
    rc, out, _ = run(["ingest-loads", str(csv_path), path,
                      "--out", str(tmp_path)], capsys)
    assert rc == 0
    assert "3 days ingested" in out
    # day 3 is a validation day, days 1-2 train
    train = sorted(os.listdir(tmp_path / "train"))
    assert train == ["tiny7_day001.json", "tiny7_day002.json"]
    assert os.listdir(tmp_path / "validation") == ["tiny7_day003.json"]
    day1 = load_instance(tmp_path / "train" / "tiny7_day001.json")
    assert day1.horizon == inst.horizon


def test_build_writes_mps(inst_file, tmp_path, capsys):
    _, path = inst_file
    rc, out, _ = run(["build", path, "--form", "3bin",
                      "--out", str(tmp_path)], capsys)
    assert rc == 0
    text = (tmp_path / "tiny7_3bin.mps").read_text()
    assert text.startswith("NAME")
    assert "ENDATA" in text


def test_solve_reaches_oracle(inst_file, tmp_path, capsys):
    inst, path = inst_file
    rc, out, _ = run(["solve", path, "--out", str(tmp_path)], capsys)
    assert rc == 0
    doc = json.loads((tmp_path / "tiny7_solution.json").read_text())
    opt, u_star = enumerate_optimum(inst)
    assert doc["objective"] == pytest.approx(opt, rel=1e-6)
    assert np.array_equal(np.array(doc["u"]), u_star)
    assert doc["status"] == "Optimal"


def test_solve_first_feasible(inst_file, tmp_path, capsys):
    inst, path = inst_file
    rc, _, _ = run(["solve", path, "--first-feasible",
                    "--out", str(tmp_path)], capsys)
    assert rc == 0
    doc = json.loads((tmp_path / "tiny7_solution.json").read_text())
    u = np.array(doc["u"])
    assert evaluate_commitment(inst, ONE_BIN, u).feasible


def test_restore(inst_file, tmp_path, capsys):
    inst, path = inst_file
    rc, out, _ = run(["restore", path, "--out", str(tmp_path)], capsys)
    assert rc == 0
    doc = json.loads((tmp_path / "tiny7_restore.json").read_text())
    u = np.array(doc["u"])
    ev = evaluate_commitment(inst, ONE_BIN, u)
    assert ev.feasible
    assert doc["objective"] == pytest.approx(ev.objective, rel=1e-9)


def test_lns_improves_restore(inst_file, tmp_path, capsys):
    inst, path = inst_file
    rc, out, _ = run(["lns", path, "--max-step", "8", "--node-limit", "800",
                      "--out", str(tmp_path)], capsys)
    assert rc == 0
    doc = json.loads((tmp_path / "tiny7_lns.json").read_text())
    assert doc["objective"] <= doc["restored_objective"] + 1e-9
    u = np.array(doc["u"])
    assert evaluate_commitment(inst, ONE_BIN, u).feasible


def test_datagen(tmp_path, capsys):
    inst = mk_inst(4, n=3, T=6)
    path = tmp_path / "g4.json"
    save_instance(inst, path)
    rc, out, _ = run(["datagen", str(path), "--high-budget", "3000",
                      "--low-budget", "200", "--sample-budget", "300",
                      "--out", str(tmp_path)], capsys)
    assert rc == 0
    man = json.loads(
        (tmp_path / "g4_1bin_data" / "manifest.json").read_text())
    assert man["counts"]["initial"] >= 1
    assert "positive" in out


@pytest.fixture(scope="module")
def bench_out(inst_file, tmp_path_factory):
    _, path = inst_file
    d = tmp_path_factory.mktemp("bench_out")
    rc = cli.main(["bench", path, "--methods", "WS", "BnB",
                   "--node-limit", "300", "--max-step", "5",
                   "--out", str(d)])
    return rc, d


def test_bench_outputs(bench_out, capsys):
    rc, d = bench_out
    capsys.readouterr()
    assert rc == 0
    lines = (d / "records.jsonl").read_text().splitlines()
    assert len(lines) == 2
    methods = {json.loads(ln)["method"] for ln in lines}
    assert methods == {"WS", "BnB"}
    assert (d / "metrics.csv").exists()
    ref = json.loads((d / "reference.json").read_text())
    assert list(ref) == ["tiny7"]


def test_report_from_records(bench_out, tmp_path, capsys):
    _, d = bench_out
    capsys.readouterr()
    rc, out, _ = run(["report", str(d / "records.jsonl"),
                      "--reference", str(d / "reference.json"),
                      "--out", str(tmp_path)], capsys)
    assert rc == 0
    assert (tmp_path / "metrics.csv").exists()
    assert "mean_gap" in out


def test_config_supplies_defaults(inst_file, tmp_path, capsys):
    _, path = inst_file
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"form": "3bin", "out": str(tmp_path)}))
    rc, _, _ = run(["build", path, "--config", str(cfg)], capsys)
    assert rc == 0
    assert (tmp_path / "tiny7_3bin.mps").exists()


def test_flag_beats_config(inst_file, tmp_path, capsys):
    _, path = inst_file
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"form": "3bin", "out": "/nonexistent"}))
    rc, _, _ = run(["build", path, "--config", str(cfg),
                    "--form", "1bin", "--out", str(tmp_path)], capsys)
    assert rc == 0
    assert (tmp_path / "tiny7_1bin.mps").exists()
    assert not (tmp_path / "tiny7_3bin.mps").exists()


def test_missing_instance_is_error(tmp_path, capsys):
    rc, _, err = run(["solve", str(tmp_path / "nope.json")], capsys)
    assert rc == 1
    assert err.startswith("error:")


def test_bad_config_key_is_error(inst_file, tmp_path, capsys):
    _, path = inst_file
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"no_such_key": 1}))
    rc, _, err = run(["build", path, "--config", str(cfg)], capsys)
    assert rc == 1
    assert "no_such_key" in err


def test_config_not_json_is_error(inst_file, tmp_path, capsys):
    _, path = inst_file
    cfg = tmp_path / "cfg.json"
    cfg.write_text("{broken")
    rc, _, err = run(["build", path, "--config", str(cfg)], capsys)
    assert rc == 1
    assert err.startswith("error:")
