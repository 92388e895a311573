import json
import subprocess
import sys

import numpy as np
import pytest

from pulsechi import __version__
from pulsechi import cli


def run(tmp_path, *args, env=None):
    out = tmp_path / "out"
    argv = list(args)
    if "-o" not in argv and env is None:
        argv += ["-o", str(out)]
    return cli.main(argv), out


def rows(path):
    meta, data = cli.read_csv(path)
    return meta, data


def max_zeta(path, family="equidistant"):
    _, data = rows(path)
    out = {}
    for r in data:
        if r["family"] == family:
            n = int(r["N"])
            out[n] = max(out.get(n, 0.0), abs(complex(float(r["re_zeta"]), float(r["im_zeta"]))))
    return out


EQ = ["--set", 'sweep.families=["equidistant"]', "--set", "sweep.tau_points=200"]


def test_points_anchor_and_damping(tmp_path):
    code, out = run(tmp_path, "points", *EQ, "--set", "oscillator.gamma=0")
    assert code == 0
    free = max_zeta(out / "points.csv")
    assert abs(free[20] - 6.0) < 1e-6
    code, out2 = run(tmp_path / "b", "points", *EQ, "--set", "oscillator.gamma=1e-2")
    damped = max_zeta(out2 / "points.csv")
    assert all(damped[n] < free[n] for n in free)
    manifest = json.loads((out / "points.json").read_text())
    assert manifest["version"] == __version__


def test_csv_header_and_format(tmp_path):
    code, out = run(tmp_path, "points", *EQ, "--set", "sweep.n_max=2", "--seed", "5")
    meta, data = rows(out / "points.csv")
    assert meta["version"] == __version__ and meta["config"]["seed"] == 5
    assert meta["config"]["sweep"]["n_values"] == [1, 2]
    assert list(data[0]) == ["family", "N", "tau0_or_seed", "re_zeta", "im_zeta", "flags"]
    # 17 significant digits round-trip exactly
    for r in data[:20]:
        x = float(r["re_zeta"])
        assert cli.fmt(x) == r["re_zeta"]


def test_byte_identical_reruns_and_jobs(tmp_path):
    args = ["measure", "--set", "sweep.n_max=3", "--set", "sweep.tau_points=7", "--set", "sweep.draws=7"]
    run(tmp_path / "a", *args)
    run(tmp_path / "b", *args, "--jobs", "2")
    a = (tmp_path / "a" / "out" / "samples.csv").read_text().splitlines()
    b = (tmp_path / "b" / "out" / "samples.csv").read_text().splitlines()
    assert a[1:] == b[1:]
    run(tmp_path / "c", *args)
    c = (tmp_path / "c" / "out" / "samples.csv").read_text().splitlines()
    # only the embedded output path in the header differs
    assert c[1:] == a[1:]
    assert json.loads(c[0][2:])["config"]["sweep"] == json.loads(a[0][2:])["config"]["sweep"]


def test_measure_without_coupling(tmp_path):
    code, out = run(tmp_path, "measure", "--set", "oscillator.g=0", *EQ)
    assert code == 0
    _, data = rows(out / "samples.csv")
    assert len(data) == 1
    r = data[0]
    assert (float(r["re_beta"]), float(r["im_beta"]), float(r["re_chi"]), float(r["im_chi"])) == (0, 0, 1, 0)


def test_oracle_and_analytic_files_agree(tmp_path):
    args = ["measure", "--set", "sweep.n_max=3", "--set", "sweep.tau_points=3", "--set", 'sweep.families=["equidistant"]',
            "--set", "oscillator.gamma=1e-2", "--set", 'state={kind="fock_pair"}', "--set", "oracle.dim=30"]
    run(tmp_path / "a", *args)
    run(tmp_path / "o", *args, "--mode", "oracle")
    _, ana = rows(tmp_path / "a" / "out" / "samples.csv")
    _, orc = rows(tmp_path / "o" / "out" / "samples.csv")
    assert len(ana) == len(orc) == 18
    for x, y in zip(ana, orc):
        assert float(x["re_beta"]) == pytest.approx(float(y["re_beta"]), abs=1e-12)
        assert abs(complex(float(x["re_chi"]), float(x["im_chi"])) - complex(float(y["re_chi"]), float(y["im_chi"]))) < 1e-4
        assert y["source"] == "oracle"


@pytest.mark.parametrize("args, text", [
    (["--set", "sweep.bogus=1"], "sweep.bogus"),
    (["--set", "sweep.families=[]"], "empty"),
    (["--set", "oscillator.gamma=-1"], "gamma"),
    (["--set", 'mode="fast"'], "mode"),
    (["--set", "probe.psi_plus=1", "--set", "probe.psi_minus=0"], "coherence"),
])
def test_config_errors(tmp_path, capsys, args, text):
    code, _ = run(tmp_path, "points", *args)
    assert code == cli.EXIT_CONFIG
    assert text in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('seed = 3\n[oscillator]\ngamma = 0.0\n[sweep]\nfamilies = ["equidistant"]\nn_max = 2\ntau_points = 4\n')
    code, out = run(tmp_path, "points", "-c", str(cfg), "--set", "oscillator.gamma=1e-3")
    meta, _ = rows(out / "points.csv")
    assert meta["config"]["oscillator"]["gamma"] == 1e-3 and meta["config"]["seed"] == 3
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = 1\n[oscillator\n")
    assert cli.main(["points", "-c", str(bad)]) == cli.EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err
    assert cli.main(["points", "-c", str(tmp_path / "missing.toml")]) == cli.EXIT_CONFIG


def test_env_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.ENV_OUTPUT, str(tmp_path / "envout"))
    monkeypatch.setenv(cli.ENV_JOBS, "2")
    assert cli.main(["points", *EQ, "--set", "sweep.n_max=2"]) == 0
    meta, _ = rows(tmp_path / "envout" / "points.csv")
    assert meta["config"]["jobs"] == 2
    # flags beat the environment
    assert cli.main(["points", *EQ, "--set", "sweep.n_max=2", "-o", str(tmp_path / "flag"), "-j", "1"]) == 0
    assert rows(tmp_path / "flag" / "points.csv")[0]["config"]["jobs"] == 1
    monkeypatch.setenv(cli.ENV_JOBS, "many")
    assert cli.main(["points"]) == cli.EXIT_CONFIG


def test_plotscript(tmp_path):
    code, out = run(tmp_path, "points", *EQ, "--set", "sweep.n_max=1", "--emit-plotscript")
    script = (out / "points.gp").read_text()
    assert "points.csv" in script and "plot" in script


def test_reconstruct_small(tmp_path):
    code, out = run(tmp_path, "reconstruct", "--set", "sweep.n_max=6", "--set", "sweep.n_caps=[6, 3]",
                    "--set", "sweep.gammas=[1e-4, 1e-1]", "--set", "sweep.tau_points=100", "--set", "sweep.draws=100",
                    "--set", "grid.dim=15", "--set", "grid.spacing=0.1")
    assert code == 0
    _, data = rows(out / "fidelity.csv")
    assert len(data) == 3 * 2 * 2
    fids = {(r["family"], int(r["n_max"]), float(r["gamma"])): float(r["fidelity"]) for r in data}
    for kind in ("equidistant", "linear"):
        assert fids[(kind, 6, 1e-4)] > fids[(kind, 6, 1e-1)]
    dumps = sorted(p.name for p in out.glob("rho_*.npz"))
    assert len(dumps) == 3
    arrays = np.load(out / dumps[0])
    assert arrays["rho_tilde"].shape == (15, 15)


def test_reconstruct_coverage_failure(tmp_path, capsys):
    code, _ = run(tmp_path, "reconstruct", "--set", "oscillator.g=0", *EQ, "--set", "sweep.n_max=2",
                  "--set", "sweep.gammas=[1e-4]")
    assert code == cli.EXIT_COVERAGE
    assert "coverage" in capsys.readouterr().err


def test_verify_flags_low_truncation(tmp_path, capsys):
    code, _ = run(tmp_path, "verify", "--set", "verify.dims=[12]", "--set", 'verify.keys=["eq35", "appA"]')
    assert code == cli.EXIT_CONVERGENCE
    text = capsys.readouterr().out
    assert "FAIL eq35" in text and "PASS appA" in text


def test_verify_trivial_params(tmp_path):
    code, out = run(tmp_path, "verify", "--set", "oscillator.gamma=0", "--set", "oscillator.g=0",
                    "--set", "verify.dims=[20, 30]", "--set", 'verify.keys=["eq13", "eq16", "eq29", "eq35", "eq37"]')
    assert code == 0
    report = json.loads((out / "verify.json").read_text())["identities"]
    assert max(max(r["residuals"]) for r in report.values()) < 1e-12


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "pulsechi", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
