"""End-to-end command-line behavior: exit codes, files, and determinism."""
import json
import os

import pytest

from mixbound.cli import main

CHAIN = {
    "v": 1, "kind": "chain", "states": ["a", "b"], "n": 4,
    "initial": [0.5, 0.5], "kernels": [[0.9, 0.1], [0.2, 0.8]],
}
FAMILY = {
    "v": 1, "kind": "family", "states": ["a", "b"], "indices": ["g0", "g1"],
    "m0": 0.5, "xi": [0.5, 0.5],
    "residuals": {
        "g0": [[0.8, 0.2], [0.3, 0.7]],
        "g1": [[0.6, 0.4], [0.5, 0.5]],
    },
    "schedule": {
        "c": 4.0, "alpha": 2.0, "initial_gamma": "g0", "target_gamma": "g1",
    },
}
CONTINUOUS = {
    "v": 1, "kind": "continuous", "support": [-3.0, 3.0],
    "kernel": {"name": "gaussian_ar", "params": {"rho": 0.5, "sigma": 1.0}},
    "partitions": {"cells": [8, 16]}, "n": 4,
}


def write_spec(path, doc) -> str:
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def chain_file(tmp_path):
    return write_spec(tmp_path / "chain.json", CHAIN)


@pytest.fixture
def family_file(tmp_path):
    return write_spec(tmp_path / "family.json", FAMILY)


# --- happy paths ------------------------------------------------------------------

def test_mixing_exact_json(chain_file, tmp_path, capsys):
    out = tmp_path / "m.json"
    assert main(["mixing", "--in", chain_file, "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["kind"] == "mixing_matrix"
    assert doc["n"] == 4
    assert doc["matrix"][0][1] == pytest.approx(0.7)
    assert doc["norm"] == pytest.approx(1 + 0.7 + 0.49 + 0.343)


def test_mixing_stdout_when_no_out(chain_file, capsys):
    assert main(["mixing", "--in", chain_file]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["kind"] == "mixing_matrix"


def test_bound_from_m0(tmp_path):
    out = tmp_path / "b.json"
    rc = main([
        "bound", "--n", "4000", "--t", "0.2", "--epsilon", "0.02",
        "--m0", "0.3", "--out", str(out),
    ])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["bound"] == pytest.approx(0.001493171616753357, abs=1e-12)
    assert doc["source"] == "DeltaMinorization"
    assert doc["clipped"] is False


def test_bound_vacuous_theta_warns(tmp_path):
    out = tmp_path / "b.json"
    rc = main([
        "bound", "--n", "10", "--t", "0.5", "--m0", "0.0", "--out", str(out),
    ])
    assert rc == 0
    doc = json.loads(out.read_text())
    assert doc["delta_norm"] == 10.0
    assert "carries no information" in doc["warning"]


def test_sample_size_routes_agree(capsys):
    assert main(["sample-size", "--t", "0.1", "--delta", "0.05",
                 "--theta-cap", "0.0"]) == 0
    via_theta = json.loads(capsys.readouterr().out)
    assert via_theta["n"] == 738
    assert main(["sample-size", "--t", "0.1", "--delta", "0.05",
                 "--m0", "0.3"]) == 0
    via_m0 = json.loads(capsys.readouterr().out)
    assert main(["sample-size", "--t", "0.1", "--delta", "0.05",
                 "--theta-cap", "0.7"]) == 0
    again = json.loads(capsys.readouterr().out)
    assert via_m0["n"] == again["n"]


def test_simulate_csv_golden(family_file, tmp_path):
    out = tmp_path / "path.csv"
    rc = main([
        "simulate", "--in", family_file, "--n", "6", "--seed", "7",
        "--format", "csv", "--out", str(out),
    ])
    assert rc == 0
    assert out.read_text() == (
        "t,state,index\n"
        "1,b,g0\n2,a,g1\n3,a,g1\n4,a,g1\n5,a,g1\n6,b,g1\n"
    )


def test_verify_writes_report_and_deviations(family_file, tmp_path):
    report = tmp_path / "report.json"
    dev = tmp_path / "dev.csv"
    rc = main([
        "verify", "--in", family_file, "--set", "a", "--t", "0.15",
        "--epsilon", "0.02", "--n", "400", "--replicates", "300",
        "--seed", "3", "--out", str(report), "--deviations", str(dev),
    ])
    assert rc == 0
    doc = json.loads(report.read_text())
    assert doc["kind"] == "simulation_report"
    assert doc["verdict"] in ("pass", "fail")
    lines = dev.read_text().splitlines()
    assert lines[0] == "replicate,deviation"
    assert len(lines) == 301


def test_discretize_trace_and_chain_roundtrip(tmp_path):
    spec = write_spec(tmp_path / "cont.json", CONTINUOUS)
    trace = tmp_path / "trace.csv"
    emitted = tmp_path / "induced.json"
    rc = main([
        "discretize", "--in", spec, "--format", "csv", "--out", str(trace),
        "--emit-chain", str(emitted),
    ])
    assert rc == 0
    lines = trace.read_text().splitlines()
    assert lines[0] == "cells,theta,delta_norm,theta_diff,induced_m0"
    assert lines[1].startswith("8,")
    assert lines[2].startswith("16,")
    chain_doc = json.loads(emitted.read_text())
    assert chain_doc["kind"] == "chain"
    assert len(chain_doc["states"]) == 16
    # the emitted chain is itself a valid input (16 states: use the
    # contraction route, exact enumeration is capped)
    assert main(["mixing", "--in", str(emitted), "--method", "bound",
                 "--out", str(tmp_path / "m.json")]) == 0


def test_selftest_single_criterion(capsys):
    assert main(["selftest", "--criteria", "7"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("PASS")
    assert "sample-size round trip" in out


# --- exit codes ---------------------------------------------------------------------

def test_malformed_json_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"v": 1, "kind": "chain",,}')
    assert main(["mixing", "--in", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "line" in err and "column" in err


def test_missing_file_exits_2(tmp_path):
    assert main(["mixing", "--in", str(tmp_path / "nope.json")]) == 2


def test_unknown_kind_exits_2(tmp_path):
    bad = write_spec(tmp_path / "bad.json", {"v": 1, "kind": "mystery"})
    assert main(["mixing", "--in", bad]) == 2


def test_wrong_version_exits_2(tmp_path):
    bad = write_spec(tmp_path / "bad.json", dict(CHAIN, v=2))
    assert main(["mixing", "--in", bad]) == 2


def test_bound_route_selection_errors(chain_file):
    assert main(["bound", "--n", "10", "--t", "0.1"]) == 2
    assert main(["bound", "--n", "10", "--t", "0.1",
                 "--theta", "0.5", "--m0", "0.3"]) == 2


def test_family_mixing_requires_n(family_file):
    assert main(["mixing", "--in", family_file]) == 2


def test_enumeration_limit_exits_3(tmp_path):
    big = dict(CHAIN, n=25)
    spec = write_spec(tmp_path / "big.json", big)
    assert main(["mixing", "--in", spec]) == 3


def test_bad_mass_exits_4(tmp_path):
    bad = dict(CHAIN, initial=[0.6, 0.6])
    spec = write_spec(tmp_path / "bad.json", bad)
    assert main(["mixing", "--in", spec]) == 4


def test_bad_theta_exits_4():
    assert main(["bound", "--n", "10", "--t", "0.1", "--theta", "1.5"]) == 4


def test_verify_precondition_exits_5(family_file):
    rc = main([
        "verify", "--in", family_file, "--set", "a", "--t", "0.15",
        "--n", "4", "--replicates", "50", "--seed", "3",
    ])
    assert rc == 5


def test_argparse_errors_exit_2():
    assert main(["mixing"]) == 2
    assert main(["bound", "--n", "10"]) == 2
    assert main([]) == 2


# --- output discipline -----------------------------------------------------------------

def test_byte_identical_reruns(chain_file, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert main(["mixing", "--in", chain_file, "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_json_output_is_canonical(chain_file, tmp_path):
    out = tmp_path / "m.json"
    main(["mixing", "--in", chain_file, "--out", str(out)])
    text = out.read_text()
    assert text == json.dumps(json.loads(text), indent=2, sort_keys=True) + "\n"


def test_failed_run_leaves_no_output_file(tmp_path):
    big = write_spec(tmp_path / "big.json", dict(CHAIN, n=25))
    out = tmp_path / "never.json"
    assert main(["mixing", "--in", big, "--out", str(out)]) == 3
    assert not out.exists()
    assert not any(p.name.startswith("never") for p in tmp_path.iterdir()
                   if p.suffix != ".json" or p.name != "big.json")


def test_console_entrypoint_wiring():
    # mixbound.cli.main must be reachable the way the script invokes it
    import subprocess
    import sys

    proc = subprocess.run(
        [sys.executable, "-m", "mixbound.cli", "sample-size", "--t", "0.1",
         "--delta", "0.05", "--theta-cap", "0"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["n"] == 738
