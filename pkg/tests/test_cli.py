"""Command-line front end: config schema, exit codes and output contracts."""

import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from acmask.cli import SWEEP_COLUMNS, ConfigError, format_value, load_config, main, snr_grid

HEADER = "source,detector,engine,M,N,K,omega,phase_noise,snr_db,ser,ci_low,ci_high,errors,trials,seed"

MINIMAL = """\
# minimal analytic point
M = 2
N = 1
K = 4
snr_start = 20
detectors = ac_heuristic
engines = approach2
max_terms = 1000
"""

COH_M2 = """\
[sweep]
M = 2
N = 1, 2, 4
K = 4
snr_start = 0
snr_stop = 20
snr_step = 5
detectors = coherent, ac_heuristic
trials = 20000
"""

PDF_M4 = """\
[pdf]
M = 4
N = 1
K = 10
snr_db = 27
zeta_stop = 3.5
zeta_points = 1001
zeta_spacing = quadratic
max_terms = 200
trials = 100000
"""


def write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# sweep ----------------------------------------------------------------------------

def test_minimal_sweep_one_row(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL)
    out = tmp_path / "res"
    code, stdout, _ = run(["sweep", "--config", cfg, "--out", str(out)], capsys)
    assert code == 0
    text = (tmp_path / "res.csv").read_text()
    assert text.splitlines()[0] == HEADER
    rows = read_csv(tmp_path / "res.csv")[1:]
    assert len(rows) == 1
    r = dict(zip(SWEEP_COLUMNS, rows[0]))
    assert (r["source"], r["detector"], r["engine"]) == ("analytic", "ac_heuristic", "approach2")
    assert all(r[k] == "" for k in ("ci_low", "ci_high", "errors", "trials", "seed"))
    assert 0 < float(r["ser"]) < 1 and r["ser"] == format(float(r["ser"]), ".17g")
    assert (tmp_path / "res.json").exists()


def test_coherent_sweep_rows_order_and_determinism(tmp_path, capsys):
    cfg = write(tmp_path, COH_M2)
    a, b, c = (tmp_path / x for x in ("a", "b", "c"))
    assert run(["sweep", "--config", cfg, "--out", str(a), "--format", "csv"], capsys)[0] == 0
    assert run(["sweep", "--config", cfg, "--out", str(b), "--format", "csv"], capsys)[0] == 0
    assert run(["sweep", "--config", cfg, "--out", str(c), "--format", "csv", "--workers", "2"],
               capsys)[0] == 0
    ta = (tmp_path / "a.csv").read_bytes()
    assert ta == (tmp_path / "b.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()
    assert not (tmp_path / "a.json").exists()
    rows = read_csv(tmp_path / "a.csv")[1:]
    assert len(rows) == 3 * 2 * 5
    keys = [(r[0], r[1], r[2], int(r[3]), int(r[4]), float(r[5]), float(r[6]), float(r[7]),
             float(r[8])) for r in rows]
    assert keys == sorted(keys)
    for r in rows:
        d = dict(zip(SWEEP_COLUMNS, r))
        assert d["source"] == "mc" and d["seed"] == "0"
        assert float(d["ci_low"]) <= float(d["ser"]) <= float(d["ci_high"])
        assert float(d["ser"]) == int(d["errors"]) / int(d["trials"])


def test_seed_and_trials_flags_override(tmp_path, capsys):
    cfg = write(tmp_path, COH_M2.replace("N = 1, 2, 4", "N = 1"))
    run(["sweep", "--config", cfg, "--out", str(tmp_path / "s"), "--format", "csv",
         "--seed", "17", "--trials", "5000"], capsys)
    rows = read_csv(tmp_path / "s.csv")[1:]
    assert {r[-1] for r in rows} == {"17"} and {r[-2] for r in rows} == {"5000"}


def test_json_round_trips_csv(tmp_path, capsys):
    cfg = write(tmp_path, COH_M2.replace("N = 1, 2, 4", "N = 1, 2") + "engines = mc, approach2\n"
                "max_terms = 1000\n")
    assert run(["sweep", "--config", cfg, "--out", str(tmp_path / "j")], capsys)[0] == 0
    doc = json.loads((tmp_path / "j.json").read_text())
    meta = doc["metadata"]
    assert {"artifact_version", "config_hash", "wall_clock_seconds"} <= set(meta)
    assert len(meta["config_hash"]) == 64
    assert doc["columns"] == HEADER.split(",")
    csv_rows = read_csv(tmp_path / "j.csv")[1:]
    assert len(csv_rows) == len(doc["rows"]) == 2 * 5 * 3
    for jr, cr in zip(doc["rows"], csv_rows):
        assert [format_value(v) for v in jr] == cr
        for v, text in zip(jr, cr):
            if isinstance(v, float):
                assert float(text) == v


def test_analytic_rows_repeat_per_phase_noise_level(tmp_path, capsys):
    cfg = write(tmp_path, MINIMAL + "phase_noise = 0, 5\n")
    assert run(["sweep", "--config", cfg, "--out", str(tmp_path / "p"), "--format", "csv"],
               capsys)[0] == 0
    rows = read_csv(tmp_path / "p.csv")[1:]
    assert [r[7] for r in rows] == ["0", "5"] and rows[0][9] == rows[1][9]


# exit codes -------------------------------------------------------------------------

@pytest.mark.parametrize("text,key", [
    (MINIMAL.replace("detectors", "detctors"), "detctors"),
    (MINIMAL.replace("K = 4\n", ""), "K"),
    (MINIMAL.replace("M = 2", "M = two"), "M"),
    (MINIMAL.replace("M = 2", "M = 1"), "M"),
    (MINIMAL + "snr_step = 0\n", "snr_step"),
    (MINIMAL.replace("engines = approach2", "engines = exact"), "engines"),
    (MINIMAL.replace("detectors = ac_heuristic", "detectors = coherent"), "engines"),
    (MINIMAL + "M = 4\n", "M"),
    ("[pdf]\n" + MINIMAL, "[pdf]"),
    (MINIMAL + "trials = 10\n", "trials"),
])
def test_schema_errors_exit_2_naming_key(tmp_path, capsys, text, key):
    code, _, err = run(["sweep", "--config", write(tmp_path, text)], capsys)
    assert code == 2
    assert key in err


def test_load_config_raises_config_error():
    with pytest.raises(ConfigError) as exc:
        load_config("M = 2\nN = 1\nK = 4\nsnr_start = 1\nbogus = 3\n", "sweep")
    assert exc.value.key == "bogus"
    cfg = load_config("M=2\nN=1\nK=4\nsnr_start=0\nsnr_stop=10\nsnr_step=2.5 ; step\n", "sweep")
    assert snr_grid(cfg) == [0.0, 2.5, 5.0, 7.5, 10.0]


def test_io_errors_exit_1(tmp_path, capsys):
    code, _, err = run(["sweep", "--config", str(tmp_path / "missing.ini")], capsys)
    assert code == 1 and "cannot read config" in err
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = run(["sweep", "--config", write(tmp_path, MINIMAL), "--out",
                        str(blocker / "res")], capsys)
    assert code == 1 and "cannot write output" in err


def test_convergence_failure_exit_3(tmp_path, capsys):
    text = MINIMAL.replace("max_terms = 1000", "fallback = false")
    code, _, err = run(["sweep", "--config", write(tmp_path, text),
                        "--out", str(tmp_path / "x")], capsys)
    assert code == 3 and "engine failure" in err
    # with fallback the same config succeeds via the numeric engine
    code, _, _ = run(["sweep", "--config", write(tmp_path, MINIMAL.replace("max_terms = 1000", "")),
                      "--out", str(tmp_path / "y")], capsys)
    assert code == 0


def test_bad_worker_env_is_config_error(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("AC_MASK_WORKERS", "none")
    code, _, err = run(["sweep", "--config", write(tmp_path, MINIMAL),
                        "--out", str(tmp_path / "w")], capsys)
    assert code == 2 and "AC_MASK_WORKERS" in err


# pdf ---------------------------------------------------------------------------------

def test_pdf_density_traces(tmp_path, capsys):
    cfg = write(tmp_path, PDF_M4)
    assert run(["pdf", "--config", cfg, "--out", str(tmp_path / "pd"), "--format", "csv"],
               capsys)[0] == 0
    lines = (tmp_path / "pd.csv").read_text().splitlines()
    assert lines[0] == "m,zeta,pdf_analytic,pdf_mc_histogram"
    data = np.loadtxt(io.StringIO("\n".join(lines[1:])), delimiter=",")
    assert sorted(set(data[:, 0].astype(int))) == [0, 1, 2, 3]
    for m in range(4):
        d = data[data[:, 0] == m]
        z, f, h = d[:, 1], d[:, 2], d[:, 3]
        assert abs(np.sum(np.diff(z) * 0.5 * (f[1:] + f[:-1])) - 1) <= 1e-3, m
        # the simulated histogram carries the same unit mass
        assert abs(np.sum(np.diff(z) * 0.5 * (h[1:] + h[:-1])) - 1) <= 0.02, m
    d0 = data[data[:, 0] == 0]
    assert np.argmax(d0[:, 2]) == 0 and d0[0, 1] == 0.0


def test_pdf_is_deterministic(tmp_path, capsys):
    cfg = write(tmp_path, PDF_M4.replace("zeta_points = 1001", "zeta_points = 51")
                + "m = 1, 2\n")
    for name in ("a", "b"):
        assert run(["pdf", "--config", cfg, "--out", str(tmp_path / name), "--format", "csv",
                    "--trials", "20000"], capsys)[0] == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_pdf_schema_error(tmp_path, capsys):
    code, _, err = run(["pdf", "--config", write(tmp_path, PDF_M4 + "m = 4\n")], capsys)
    assert code == 2 and "'m'" in err


# validate ---------------------------------------------------------------------------

def test_validate_filter_specfun(capsys):
    code, out, _ = run(["validate", "--filter", "specfun"], capsys)
    assert code == 0
    lines = [l for l in out.splitlines() if l.startswith(("PASS", "FAIL"))]
    assert lines and all(l.split()[1].startswith("specfun.") for l in lines)


def test_validate_unknown_filter(capsys):
    code, _, err = run(["validate", "--filter", "plotting"], capsys)
    assert code == 2 and "plotting" in err


def test_validate_fault_injection(capsys, monkeypatch):
    monkeypatch.setenv("AC_MASK_FAULT", "threshold")
    code, out, err = run(["validate", "--filter", "detectors"], capsys)
    assert code == 4
    assert "threshold_equivalence" in err


def test_validate_full_battery(capsys):
    code, out, _ = run(["validate"], capsys)
    assert code == 0, out
    modules = {l.split()[1].split(".")[0] for l in out.splitlines() if l.startswith("PASS")}
    assert modules == {"specfun", "channel", "detectors", "analytic_ser", "mc_engine"}


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    proc = subprocess.run([sys.executable, "-m", "acmask", "sweep", "--config", cfg,
                           "--out", str(tmp_path / "e"), "--format", "csv"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == HEADER
    proc = subprocess.run([sys.executable, "-m", "acmask", "--version"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("acmask ")


def test_demo_recipes_parse():
    from pathlib import Path

    recipes = sorted((Path(__file__).parent.parent / "demos" / "configs").glob("*.ini"))
    assert len(recipes) == 9
    for p in recipes:
        load_config(p.read_text(), "pdf" if p.stem.startswith("zeta_pdf") else "sweep")
