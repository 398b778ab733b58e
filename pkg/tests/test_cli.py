"""End-to-end tests of the command-line surface.

Every invocation goes through ``cli.main`` in-process; outputs land in
tmp_path files so byte-level determinism and the config round-trip can
be asserted literally.
"""

import json
import math

import numpy as np
import pytest

from coordsim.cli import EXIT_INVALID, EXIT_IO, EXIT_OK, EXIT_RESOURCE, main, render_output
from coordsim.region import Decomposition, inner_bound, outer_bound, parse_gamma_rule
from coordsim.probability import ConditionalPmf, Pmf
from coordsim.serialize import read_table

CHAIN = {
    "p_u": [0.5, 0.5],
    "w_given_u": [[1.0, 0.0], [0.0, 1.0]],
    "v_given_w": [[1.0, 0.0], [0.0, 1.0]],
}

SKEWED = {
    "p_u": [0.55, 0.45],
    "w_given_u": [[0.5, 0.5, 0.0], [0.1, 0.2, 0.7]],
    "v_given_w": [[0.8, 0.2], [0.4, 0.6], [0.1, 0.9]],
}


@pytest.fixture
def chain_file(tmp_path):
    path = tmp_path / "chain.json"
    path.write_text(json.dumps(CHAIN))
    return str(path)


@pytest.fixture
def sim_file(tmp_path):
    path = tmp_path / "sim.json"
    path.write_text(json.dumps({
        "decomposition": SKEWED,
        "n": 2, "rate_r": 1.0, "rate_r0": 0.5, "rate_rtilde": 0.5,
        "seed": 7, "trials": 5,
    }))
    return str(path)


def run_to_file(tmp_path, name, argv):
    out = tmp_path / name
    code = main(argv + ["--output", str(out)])
    return code, (out.read_text() if out.exists() else None)


# =============================================================================
# region
# =============================================================================


def test_region_sweep_shape_and_values(tmp_path, chain_file):
    code, text = run_to_file(tmp_path, "r.csv",
                             ["region", "--input", chain_file, "--n", "8,16,32",
                              "--eps", "0.1"])
    assert code == EXIT_OK
    config, columns, rows = read_table(text)
    assert columns == ["n", "eps", "r_inner", "rr0_inner", "r_outer", "rr0_outer",
                       "eps_tot_bound", "valid"]
    assert len(rows) == 3
    assert [r[0] for r in rows] == ["8", "16", "32"]
    assert config["subcommand"] == "region" and config["ns"] == [8, 16, 32]

    # rows must match the library calls exactly
    d = Decomposition(
        p_u=Pmf(np.array(CHAIN["p_u"])),
        w_given_u=ConditionalPmf(np.array(CHAIN["w_given_u"])),
        v_given_w=ConditionalPmf(np.array(CHAIN["v_given_w"])),
    )
    for row in rows:
        n = int(row[0])
        ib = inner_bound(d, 0.1, 0.1, n, parse_gamma_rule("logn", n))
        ob = outer_bound(d, 0.1, n, 0.75)
        assert float(row[2]) == ib.r_min
        assert float(row[3]) == ib.r_plus_r0_min
        assert float(row[4]) == ob.r_min
        assert float(row[5]) == ob.r_plus_r0_min
        assert float(row[6]) == ib.eps_tot_bound
        assert row[7] == ("true" if ob.valid else "false")


def test_region_missing_file_is_io_error(tmp_path, capsys):
    code = main(["region", "--input", str(tmp_path / "nope.json"), "--n", "8"])
    assert code == EXIT_IO
    assert "nope.json" in capsys.readouterr().err


def test_region_bad_eps_is_invalid(chain_file):
    assert main(["region", "--input", chain_file, "--n", "8", "--eps", "1.5"]) == EXIT_INVALID


def test_unknown_flag_rejected(chain_file):
    assert main(["region", "--input", chain_file, "--n", "8", "--frobnicate"]) == EXIT_INVALID


def test_malformed_json_is_io_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["region", "--input", str(bad), "--n", "8"]) == EXIT_IO


# =============================================================================
# simulate
# =============================================================================


def test_simulate_seed_repeat_is_byte_identical(tmp_path, sim_file):
    code_a, text_a = run_to_file(tmp_path, "a.json",
                                 ["simulate", "--input", sim_file, "--format", "json"])
    code_b, text_b = run_to_file(tmp_path, "b.json",
                                 ["simulate", "--input", sim_file, "--format", "json"])
    assert code_a == code_b == EXIT_OK
    assert text_a == text_b
    code_c, text_c = run_to_file(tmp_path, "c.json",
                                 ["simulate", "--input", sim_file, "--format", "json",
                                  "--seed", "8"])
    assert code_c == EXIT_OK and text_c != text_a


def test_simulate_trace_matches_report(tmp_path, sim_file):
    _, trace = run_to_file(tmp_path, "t.csv",
                           ["simulate", "--input", sim_file, "--format", "csv"])
    _, report = run_to_file(tmp_path, "r.json",
                            ["simulate", "--input", sim_file, "--format", "json"])
    _, t_cols, t_rows = read_table(trace)
    _, r_cols, r_rows = read_table(report)
    assert t_cols[0] == "trial" and len(t_rows) == 5
    mean_l1 = math.fsum(float(r[1]) for r in t_rows) / len(t_rows)
    report_l1 = float(r_rows[0][r_cols.index("l1_uv")])
    assert mean_l1 == pytest.approx(report_l1, abs=1e-12)
    doc = json.loads(report)
    assert set(doc["extra"]["ci95_by_metric"]) == {
        "l1_uv", "l1_uv_given_f", "l1_index_fc", "select_f_distance",
        "decoder_error", "abort_rate",
    }


def test_simulate_zero_trials_invalid(sim_file):
    assert main(["simulate", "--input", sim_file, "--trials", "0"]) == EXIT_INVALID


def test_simulate_resource_cap(tmp_path, sim_file, monkeypatch):
    monkeypatch.setenv("COORDSIM_MEM_CAP", "64")
    code = main(["simulate", "--input", sim_file, "--n", "12",
                 "--output", str(tmp_path / "x.json")])
    assert code == EXIT_RESOURCE


def test_simulate_flag_overrides_file(tmp_path, sim_file):
    _, text = run_to_file(tmp_path, "o.json",
                          ["simulate", "--input", sim_file, "--format", "json",
                           "--trials", "2"])
    config, _, _ = read_table(text)
    assert config["trials"] == 2


# =============================================================================
# np / clt / tradeoff / optimize
# =============================================================================


def test_np_equal_laws_row(tmp_path):
    path = tmp_path / "np.json"
    path.write_text(json.dumps({"p": [0.5, 0.5], "q": [0.5, 0.5], "alpha": 0.3,
                                "gamma_grid": [0.5, 1.0, 2.0]}))
    code, text = run_to_file(tmp_path, "np.csv", ["np", "--input", str(path)])
    assert code == EXIT_OK
    _, columns, rows = read_table(text)
    row = dict(zip(columns, rows[0]))
    assert float(row["beta"]) == float(row["alpha"]) == 0.3
    assert row["sandwich_ok"] == "true"


def test_np_alpha_flag_override(tmp_path):
    path = tmp_path / "np.json"
    path.write_text(json.dumps({"p": [0.7, 0.3], "q": [0.5, 0.5]}))
    code, text = run_to_file(tmp_path, "np.csv",
                             ["np", "--input", str(path), "--eps", "0.3"])
    assert code == EXIT_OK
    _, columns, rows = read_table(text)
    row = dict(zip(columns, rows[0]))
    assert float(row["beta"]) == pytest.approx(3.0 / 14.0, abs=1e-15)
    assert row["worst_lower_slack"] == "" and row["sandwich_ok"] == ""
    # alpha must come from somewhere
    assert main(["np", "--input", str(path)]) == EXIT_INVALID


def test_clt_gap_below_bound(tmp_path):
    path = tmp_path / "chain.json"
    path.write_text(json.dumps(SKEWED))
    code, text = run_to_file(tmp_path, "clt.csv",
                             ["clt", "--input", str(path), "--n", "1,2,3,4,5,6"])
    assert code == EXIT_OK
    _, columns, rows = read_table(text)
    assert columns == ["n", "gap", "bound"]
    assert len(rows) == 6
    for row in rows:
        assert float(row[1]) <= float(row[2])


def test_tradeoff_default_grid(tmp_path):
    code, text = run_to_file(tmp_path, "t.csv", ["tradeoff", "--n", "1024"])
    assert code == EXIT_OK
    _, columns, rows = read_table(text)
    assert columns == ["x", "rate_penalty", "eps_bound"]
    assert len(rows) == 13
    assert float(rows[0][1]) == 0.0
    assert float(rows[0][2]) == pytest.approx(2.0 * (math.sqrt(2.0) + 5.0), abs=1e-12)


def test_optimize_smoke(tmp_path):
    path = tmp_path / "opt.json"
    path.write_text(json.dumps({
        "target_uv": [[0.25, 0.25], [0.25, 0.25]],
        "w_size": 1,
        "objective": "r_min",
        "restarts": 1,
    }))
    code, text = run_to_file(tmp_path, "opt.json.out",
                             ["optimize", "--input", str(path), "--format", "json",
                              "--n", "100"])
    assert code == EXIT_OK
    doc = json.loads(text)
    row = dict(zip(doc["columns"], doc["rows"][0]))
    assert row["w_size"] == 1
    # a single constant W synthesizes an independent target exactly
    assert row["i_wu"] == pytest.approx(0.0, abs=1e-9)
    dec = doc["extra"]["decomposition"]
    assert len(dec["p_u"]) == 2 and len(dec["w_given_u"][0]) == 1


# =============================================================================
# round-trip and stdout
# =============================================================================


def test_round_trip_reproduces_bytes(tmp_path, chain_file, sim_file):
    cases = [
        ("r.csv", ["region", "--input", chain_file, "--n", "4,8", "--eps", "0.2"]),
        ("r.json", ["region", "--input", chain_file, "--n", "4,8", "--format", "json"]),
        ("s.json", ["simulate", "--input", sim_file, "--format", "json"]),
        ("s.csv", ["simulate", "--input", sim_file, "--format", "csv"]),
        ("t.csv", ["tradeoff", "--n", "256"]),
    ]
    for name, argv in cases:
        code, text = run_to_file(tmp_path, name, argv)
        assert code == EXIT_OK, argv
        config, _, _ = read_table(text)
        assert render_output(config) == text, argv


def test_stdout_default(capsys, chain_file):
    assert main(["region", "--input", chain_file, "--n", "8"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("# config: ")


def test_missing_subcommand_invalid():
    assert main([]) == EXIT_INVALID
