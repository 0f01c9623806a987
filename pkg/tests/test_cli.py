import csv

import pytest

from hslab.cli import EXIT_CONFIG, EXIT_GATE, EXIT_NUMERIC, EXIT_OK, main

SMALL_SWEEP = ["sweep", "--model", "sphere", "--n", "4", "--s", "1", "--alphas", "4,16",
               "--nodes", "1000"]


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _manifest(path):
    out = {}
    for line in (path / "manifest.txt").read_text().splitlines():
        if " = " in line:
            k, v = line.split(" = ", 1)
            out[k] = v
    return out


def test_constants(tmp_path, capsys):
    assert main(["constants", "--n", "4", "--s", "1", "--out", str(tmp_path)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "2*(s) = 3.0" in text
    row = _rows(tmp_path / "results.csv")[0]
    assert float(row["critical_exponent"]) == 3.0
    assert float(row["K"]) * float(row["K_inv"]) == pytest.approx(1.0, rel=1e-15)


def test_bubble_check(tmp_path):
    assert main(["bubble-check", "--n", "3", "--s", "1", "--nodes", "2048",
                 "--out", str(tmp_path)]) == EXIT_OK
    names = [r["quantity"] for r in _rows(tmp_path / "results.csv")]
    assert names[:2] == ["mass", "energy"] and len(names) == 5
    assert (tmp_path / "bubble.png").exists()


def test_sweep_outputs_and_plots(tmp_path):
    assert main(SMALL_SWEEP + ["--out", str(tmp_path)]) == EXIT_OK
    rows = _rows(tmp_path / "results.csv")
    assert [float(r["alpha"]) for r in rows] == [4.0, 16.0]
    assert "sup_deviation" in rows[0] and rows[0]["status"] == "converged"
    for a in ("4.0", "16.0"):
        assert (tmp_path / f"profile_{a}.csv").exists()
    assert (tmp_path / "sweep.png").exists() and (tmp_path / "rescaled.png").exists()
    raw = (tmp_path / "results.csv").read_bytes()
    assert raw.count(b"\r\n") == 3


def test_no_plots(tmp_path):
    assert main(SMALL_SWEEP + ["--no-plots", "--out", str(tmp_path)]) == EXIT_OK
    assert not list(tmp_path.glob("*.png"))


def test_identical_runs_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(SMALL_SWEEP + ["--no-plots", "--out", str(a)]) == EXIT_OK
    assert main(SMALL_SWEEP + ["--no-plots", "--out", str(b)]) == EXIT_OK
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()
    assert (a / "profile_16.0.csv").read_bytes() == (b / "profile_16.0.csv").read_bytes()


def test_parallel_matches_serial(tmp_path):
    base = SMALL_SWEEP + ["--no-plots", "--no-warm-start"]
    assert main(base + ["--out", str(tmp_path / "s")]) == EXIT_OK
    assert main(base + ["--jobs", "2", "--out", str(tmp_path / "p")]) == EXIT_OK
    assert ((tmp_path / "s" / "results.csv").read_bytes()
            == (tmp_path / "p" / "results.csv").read_bytes())


def test_manifest_records_config_and_gates(tmp_path):
    assert main(SMALL_SWEEP + ["--no-plots", "--out", str(tmp_path)]) == EXIT_OK
    man = _manifest(tmp_path)
    text = (tmp_path / "manifest.txt").read_text()
    assert text.startswith("hslab ") and "numpy " in text and "scipy " in text
    assert man["alphas"] == "4,16" and man["nodes"] == "1000" and man["tol"] == "1e-08"
    assert man["mu_decreasing"].endswith("; < 0 ; pass")


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# constants only\nn = 5\ns = 0.5\n")
    out = tmp_path / "o"
    assert main(["constants", "--config", str(cfg), "--n", "6", "--out", str(out)]) == EXIT_OK
    row = _rows(out / "results.csv")[0]
    assert row["n"] == "6" and float(row["s"]) == 0.5


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("n = 4\nfrobnicate = 1\n")
    assert main(["constants", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "frobnicate" in err and "bad.cfg:2" in err


@pytest.mark.parametrize("argv, key", [
    (["constants", "--n", "2"], "n/s/alpha"),
    (["sweep", "--alphas", "4,1"], "alphas"),
    (["sweep", "--alphas", "1,x"], "alphas"),
    (["minimize", "--tol", "-1"], "solver options"),
    (["expansion", "--eps-ladder", "0.2,0.1,0.05,0.01"], "eps_ladder"),
])
def test_config_errors_name_the_key(tmp_path, capsys, argv, key):
    assert main(argv + ["--out", str(tmp_path)]) == EXIT_CONFIG
    assert key in capsys.readouterr().err


def test_unknown_flag_is_config_error():
    assert main(["constants", "--bogus"]) == EXIT_CONFIG


def test_gate_failure_exit(tmp_path):
    argv = ["minimize", "--model", "sphere", "--alpha", "4", "--nodes", "500",
            "--max-iterations", "2", "--no-plots", "--out", str(tmp_path)]
    assert main(argv) == EXIT_GATE
    assert _manifest(tmp_path)["converged"].endswith("; fail")


def test_numeric_failure_exit(tmp_path, capsys):
    # at alpha = 1 the profile is spread out: the blow-up window leaves the chart
    argv = ["blowup", "--alphas", "1", "--nodes", "500", "--no-plots", "--out", str(tmp_path)]
    assert main(argv) == EXIT_NUMERIC
    assert "numerical failure" in capsys.readouterr().err
    assert "numeric-failure" in (tmp_path / "manifest.txt").read_text()
