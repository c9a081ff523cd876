import json
import subprocess
import sys

import pytest

from dirichlet_lab import cli

X0 = 100.0


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def call(tmp_path, cmd, cfg, out="out", *extra):
    o = tmp_path / out
    code = cli.run([cmd, "--config", write(tmp_path, cfg, f"{out}.json"), "--out", str(o), "--quiet", *extra])
    return code, o


GRID = {"horizon": 1.0, "n_steps": 256}
BM = {"kind": "brownian", "x0": 0.0, "sigma": 1.0}


def problem(lo=0.1, hi=0.2, n=64, payoff=None, mu=None):
    return {
        "sigma_lo": lo,
        "sigma_hi": hi,
        "x0": X0,
        "x_scale": X0,
        "n_steps": n,
        "mu": mu or {"density": 0.0, "atoms": [{"index": n, "mass": 1.0}]},
        "payoff": payoff or {"kind": "call_on_avg", "K": X0},
    }


def test_check_ito_markovian(tmp_path, capsys):
    cfg = {"grid": GRID, "model": BM, "functional": {"kind": "square"}, "n_paths": 5}
    o = tmp_path / "o"
    code = cli.run(["check-ito", "--config", write(tmp_path, cfg), "--out", str(o)])
    s = json.loads(capsys.readouterr().out)
    assert code == 0 and s["E_eps_max"] == 0.0 and s["verdict"] == "PASS"
    assert (o / "E_eps.csv").exists() and (o / "gamma.csv").exists()


def test_check_ito_fail_exit_code(tmp_path):
    eps = [0.125, 0.0625, 0.03125, 0.015625]
    cfg = {"grid": GRID, "model": BM, "functional": {"kind": "lagged", "steps": 1}, "n_paths": 5, "epsilons": eps}
    code, o = call(tmp_path, "check-ito", cfg)
    assert code == 2
    assert json.loads((o / "summary.json").read_text())["verdict"] == "FAIL"


def test_uvm_solve_degenerate_linear(tmp_path):
    mu = {"density": 0.5, "atoms": [{"index": 64, "mass": 0.25}]}
    cfg = {"problem": problem(0.2, 0.2, payoff={"kind": "linear"}, mu=mu), "discrete_n": [4, 16]}
    code, o = call(tmp_path, "uvm-solve", cfg)
    s = json.loads((o / "summary.json").read_text())
    assert code == 0
    assert abs(s["price"] - X0 * 0.75) <= 1e-9 * X0
    assert (o / "layers" / "layer_000000.csv").exists() and (o / "vn.csv").exists()


def test_hedge_out_of_band_adversary(tmp_path, capsys):
    cfg = {
        "problem": problem(),
        "n_paths": 10,
        "adversaries": [{"kind": "constant", "sigma": 0.15}, {"kind": "constant", "sigma": 0.5}],
    }
    o = tmp_path / "o"
    code = cli.run(["hedge", "--config", write(tmp_path, cfg), "--out", str(o), "--quiet"])
    err = capsys.readouterr().err
    assert code == 1 and "index: 1" in err and "adversary 1" in err


def test_unknown_key(tmp_path, capsys):
    cfg = {"grid": {"n_steps": 8, "bogus": 1}, "model": BM}
    o = tmp_path / "o"
    assert cli.run(["simulate", "--config", write(tmp_path, cfg), "--out", str(o)]) == 1
    assert "grid.bogus" in capsys.readouterr().err
    assert not (o / "manifest.json").exists()


def test_bad_inputs(tmp_path, capsys):
    assert cli.run(["simulate", "--out", str(tmp_path)]) == 1
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.run(["simulate", "--config", str(p), "--out", str(tmp_path)]) == 1
    assert cli.run(["nosuch"]) == 1
    cfg = {"problem": problem(), "mode": "replication"}
    assert call(tmp_path, "hedge", cfg)[0] == 1
    assert "error:" in capsys.readouterr().err


def test_manifest(tmp_path):
    code, o = call(tmp_path, "simulate", {"grid": {"n_steps": 16}, "model": BM, "n_paths": 3}, "out", "--seed", "9")
    m = json.loads((o / "manifest.json").read_text())
    assert code == 0
    for k in ("subcommand", "config", "config_sha256", "seed", "versions", "threads", "wall_time_s", "outputs", "summary"):
        assert k in m
    assert m["seed"] == 9 and m["outputs"] == ["paths.csv"] and len(m["config_sha256"]) == 64
    assert len((o / "paths.csv").read_text().splitlines()) == 1 + 3 * 17


def _csv_bytes(o):
    return {p.relative_to(o).as_posix(): p.read_bytes() for p in sorted(o.rglob("*.csv"))}


@pytest.mark.parametrize(
    "cmd,cfg",
    [
        ("simulate", {"grid": GRID, "model": {"kind": "regime_switching", "x0": 1.0, "sigma_lo": 0.1, "sigma_hi": 0.3}, "n_paths": 4}),
        ("derivative", {"grid": {"n_steps": 32}, "model": BM, "functional": {"kind": "running_max"}, "n_paths": 3}),
        ("check-ito", {"grid": GRID, "model": BM, "functional": {"kind": "running_integral", "measure": {"density": 1.0}}, "n_paths": 6}),
        ("hedge", {"problem": problem(), "n_paths": 300, "delta": 1.0}),
    ],
)
def test_byte_identical_across_threads(tmp_path, monkeypatch, cmd, cfg):
    outs = []
    for i, th in enumerate(("1", "4", "4")):
        monkeypatch.setenv("DIRICHLET_LAB_THREADS", th)
        code, o = call(tmp_path, cmd, cfg, f"run{i}")
        assert code in (0, 2)
        outs.append(_csv_bytes(o))
    assert outs[0] and outs[0] == outs[1] == outs[2]


def test_bad_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("DIRICHLET_LAB_THREADS", "-2")
    assert call(tmp_path, "simulate", {"grid": {"n_steps": 4}, "model": BM})[0] == 1


def test_report_aggregates(tmp_path):
    (tmp_path / "runs").mkdir()
    call(tmp_path / "runs", "simulate", {"grid": {"n_steps": 4}, "model": BM}, "a")
    eps = [0.125, 0.0625, 0.03125, 0.015625]
    cfg = {"grid": GRID, "model": BM, "functional": {"kind": "lagged"}, "n_paths": 3, "epsilons": eps}
    assert call(tmp_path / "runs", "check-ito", cfg, "b")[0] == 2
    code = cli.run(["report", "--out", str(tmp_path / "runs"), "--quiet"])
    rows = (tmp_path / "runs" / "report.csv").read_text().splitlines()
    assert code == 2 and len(rows) == 3
    entries = json.loads((tmp_path / "runs" / "report.json").read_text())
    assert [e["subcommand"] for e in entries] == ["simulate", "check-ito"]


def test_console_script(tmp_path):
    cfg = write(tmp_path, {"grid": {"n_steps": 4}, "model": BM})
    r = subprocess.run([sys.executable, "-m", "dirichlet_lab.cli", "simulate", "--config", cfg, "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert r.returncode == 0 and "mean_X_T" in json.loads(r.stdout)
