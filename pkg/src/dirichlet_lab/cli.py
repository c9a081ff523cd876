"""Command-line front end: ``dirichlet-lab <subcommand> --config cfg.json``.

Every run validates its JSON config before computing, writes CSV artifacts and
a ``manifest.json`` into ``--out`` and prints a JSON summary.  Exit status is
0 on success, 2 when a diagnostic fails and 1 on any error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from dirichlet_lab import __version__
from dirichlet_lab.errors import DirichletLabError
from dirichlet_lab.functionals import (
    WeightMeasure,
    horizontal_derivative,
    identity,
    lagged,
    running_integral,
    running_max,
    square,
    terminal_payoff_of_integral,
    vertical_derivative,
)
from dirichlet_lab.hedge import default_adversaries, dt_ladder, price_gap_probe, replication_backtest, superhedge_backtest
from dirichlet_lab.ito import FAIL, PASS, condition_E_eps, decompose, default_martingales, orthogonality_test, summarize_E_eps
from dirichlet_lab.paths import TimeGrid
from dirichlet_lab.regularize import default_ladder
from dirichlet_lab.simulate import ModelSpec, SeedPlan, sample, worst_case_policy
from dirichlet_lab.uvm import UvmProblem, bsb_solve, discrete_value_vn, payoff_from_dict, regularity_audit

log = logging.getLogger("dirichlet_lab")

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
SUBCOMMANDS = ("simulate", "derivative", "check-ito", "uvm-solve", "hedge", "report")

# ---------------------------------------------------------------------------
# schemas

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_posint = {"type": "integer", "minimum": 1}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


GRID = _obj({"horizon": _pos, "n_steps": _posint}, ["n_steps"])
MEASURE = _obj(
    {
        "density": {"oneOf": [_nonneg, {"type": "array", "items": _nonneg}]},
        "atoms": {"type": "array", "items": _obj({"index": {"type": "integer", "minimum": 0}, "mass": _pos}, ["index", "mass"])},
    },
    ["density"],
)
PAYOFF = _obj(
    {
        "kind": {"enum": ["call_on_avg", "put_on_avg", "linear", "custom_table"]},
        "K": _num,
        "smoothing": _nonneg,
        "cap": {"type": ["number", "null"]},
        "scale": _num,
        "shift": _num,
        "y": {"type": "array", "items": _num},
        "g": {"type": "array", "items": _num},
    },
    ["kind"],
)
MODEL = _obj(
    {
        "kind": {"enum": ["brownian", "constant", "regime_switching", "weak_dirichlet_demo", "worst_case"]},
        "x0": _num,
        "sigma": _nonneg,
        "sigma_lo": _nonneg,
        "sigma_hi": _nonneg,
        "x_scale": _pos,
        "switch_prob": {"type": "number", "minimum": 0, "maximum": 1},
        "demo_a": _num,
        "demo_b": {"type": "integer"},
        "demo_terms": {"type": "integer", "minimum": 0},
        "demo_amplitude": _num,
        "name": {"type": "string"},
    },
    ["kind"],
)
FUNCTIONAL = _obj(
    {
        "kind": {"enum": ["identity", "square", "running_max", "running_integral", "lagged", "terminal_payoff_of_integral"]},
        "measure": MEASURE,
        "steps": _posint,
        "payoff": PAYOFF,
    },
    ["kind"],
)
PROBLEM = _obj(
    {
        "sigma_lo": _nonneg,
        "sigma_hi": _nonneg,
        "x0": _num,
        "horizon": _pos,
        "n_steps": _posint,
        "mu": MEASURE,
        "payoff": PAYOFF,
        "x_scale": _pos,
        "y_grid": _obj(
            {
                "n": {"type": "integer", "minimum": 3},
                "width": _pos,
                "bounds": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
            }
        ),
        "cfl": _pos,
    },
    ["sigma_lo", "sigma_hi", "x0", "n_steps", "mu", "payoff"],
)
_seed = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}
_eps = {"type": "array", "items": _pos, "minItems": 3}

SCHEMAS = {
    "simulate": _obj({"seed": _seed, "grid": GRID, "model": MODEL, "n_paths": _posint}, ["grid", "model"]),
    "derivative": _obj(
        {"seed": _seed, "grid": GRID, "model": MODEL, "functional": FUNCTIONAL, "n_paths": _posint, "h": {"type": ["number", "null"]}},
        ["grid", "model", "functional"],
    ),
    "check-ito": _obj(
        {
            "seed": _seed,
            "grid": GRID,
            "model": MODEL,
            "functional": FUNCTIONAL,
            "n_paths": _posint,
            "epsilons": _eps,
            "tol": _pos,
            "orthogonality": _obj({"tol": _pos, "epsilons": _eps}),
        },
        ["grid", "model", "functional"],
    ),
    "uvm-solve": _obj(
        {
            "seed": _seed,
            "problem": PROBLEM,
            "layers_every": _posint,
            "discrete_n": {"type": "array", "items": _posint},
            "audit": _obj({"n_probes": _posint, "n_paths": _posint}),
        },
        ["problem"],
    ),
    "hedge": _obj(
        {
            "seed": _seed,
            "problem": PROBLEM,
            "mode": {"enum": ["replication", "superhedge"]},
            "model": MODEL,
            "adversaries": {"type": "array", "items": MODEL, "minItems": 1},
            "n_paths": _posint,
            "delta": _nonneg,
            "ladder": _obj(
                {"levels": {"type": "array", "items": _posint, "minItems": 3}, "fit_levels": {"type": "array", "items": _posint, "minItems": 1}}
            ),
        },
        ["problem"],
    ),
    "report": _obj({"seed": _seed, "runs": {"type": "array", "items": {"type": "string"}}}),
}


class ConfigError(DirichletLabError):
    """Invalid configuration; ``key`` is a dotted pointer to the offending entry."""

    def __init__(self, message: str, key: str = ""):
        super().__init__(message)
        self.key = key


def _pointer(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        parts += extra[:1]
    elif err.validator == "required":
        parts.append(err.message.split("'")[1] if "'" in err.message else "")
    return ".".join(p for p in parts if p) or "<root>"


def validate(cmd: str, cfg) -> None:
    v = jsonschema.Draft202012Validator(SCHEMAS[cmd])
    errs = sorted(v.iter_errors(cfg), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errs:
        e = jsonschema.exceptions.best_match(errs)
        key = _pointer(e)
        raise ConfigError(f"invalid config at '{key}': {e.message}", key=key)


# ---------------------------------------------------------------------------
# builders


def _grid(d) -> TimeGrid:
    return TimeGrid(float(d.get("horizon", 1.0)), int(d["n_steps"]))


def _measure(d, grid: TimeGrid) -> WeightMeasure:
    dens = d["density"]
    if isinstance(dens, (int, float)):
        dens = np.full(grid.n_steps, float(dens))
    elif len(dens) != grid.n_steps:
        raise ConfigError(f"density has {len(dens)} cells, grid has {grid.n_steps}", key="measure.density")
    atoms = [(a["index"], a["mass"]) for a in d.get("atoms", [])]
    return WeightMeasure(np.asarray(dens, dtype=float), tuple(atoms), grid.horizon)


def _functional(d, grid: TimeGrid):
    kind = d["kind"]
    if kind in ("running_integral", "terminal_payoff_of_integral") and "measure" not in d:
        raise ConfigError(f"functional {kind} needs a measure", key="functional.measure")
    if kind == "identity":
        return identity()
    if kind == "square":
        return square()
    if kind == "running_max":
        return running_max()
    if kind == "lagged":
        return lagged(d.get("steps", 1))
    mu = _measure(d["measure"], grid)
    if kind == "running_integral":
        return running_integral(mu)
    if "payoff" not in d:
        raise ConfigError("terminal_payoff_of_integral needs a payoff", key="functional.payoff")
    p = payoff_from_dict(d["payoff"])
    return terminal_payoff_of_integral(p.g, mu, p.dg)


def _model(d, mu=None, field=None, band=None) -> ModelSpec:
    d = dict(d)
    kind = d.pop("kind")
    name = d.pop("name", "") or kind
    if kind == "constant":
        sig = d.get("sigma", 1.0)
        return ModelSpec.constant(sig, x0=d.get("x0", 0.0), x_scale=d.get("x_scale", 1.0), band=band, mu=mu, name=name)
    if kind == "worst_case":
        if field is None:
            raise ConfigError("worst_case adversaries need a solved field", key="model.kind")
        return ModelSpec(
            kind="uvm_policy",
            x0=d.get("x0", 0.0),
            sigma_lo=field.sigma_lo,
            sigma_hi=field.sigma_hi,
            policy=worst_case_policy(field),
            x_scale=field.x_scale,
            mu=mu,
            name=name,
        )
    if kind == "regime_switching":
        d.setdefault("sigma_lo", 0.0)
        d.setdefault("sigma_hi", 1.0)
    return ModelSpec(kind=kind, mu=mu if kind == "regime_switching" else None, name=name, **d)


def _problem(d) -> UvmProblem:
    grid = TimeGrid(float(d.get("horizon", 1.0)), int(d["n_steps"]))
    kw = {k: d[k] for k in ("x_scale", "cfl") if k in d}
    yg = d.get("y_grid", {})
    if "n" in yg:
        kw["ny"] = yg["n"]
    if "width" in yg:
        kw["y_width"] = yg["width"]
    if "bounds" in yg:
        kw["y_bounds"] = tuple(yg["bounds"])
    try:
        mu = _measure(d["mu"], grid)
    except ConfigError as exc:
        raise ConfigError(str(exc), key="problem.mu." + exc.key.split(".")[-1]) from exc
    return UvmProblem(d["sigma_lo"], d["sigma_hi"], d["x0"], mu, payoff_from_dict(d["payoff"]), **kw)


# ---------------------------------------------------------------------------
# output helpers


def threads() -> int:
    raw = os.environ.get("DIRICHLET_LAB_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"DIRICHLET_LAB_THREADS must be an integer, got {raw!r}", key="DIRICHLET_LAB_THREADS")
    if n < 0:
        raise ConfigError("DIRICHLET_LAB_THREADS must be >= 0", key="DIRICHLET_LAB_THREADS")
    return n or (os.cpu_count() or 1)


def pmap(fn, items) -> list:
    """Ordered map over a thread pool capped by ``DIRICHLET_LAB_THREADS``."""
    items = list(items)
    n = min(threads(), max(1, len(items)))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, header, rows) -> str:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path.name


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if math.isfinite(f) else str(f)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    return o


# ---------------------------------------------------------------------------
# subcommands; each returns (summary, files, failed)


def cmd_simulate(cfg, seed, out: Path):
    grid = _grid(cfg["grid"])
    model = _model(cfg["model"])
    n = cfg.get("n_paths", 1)
    b = sample(model, grid, SeedPlan(seed), n)
    t = grid.knots
    rows = ((i, t[k], b.X[i, k]) for i in range(n) for k in range(grid.n_steps + 1))
    files = [write_csv(out / "paths.csv", ["path_id", "t", "x"], rows)]
    XT = b.X[:, -1]
    return {"n_paths": n, "n_steps": grid.n_steps, "mean_X_T": float(np.mean(XT)), "std_X_T": float(np.std(XT))}, files, False


def cmd_derivative(cfg, seed, out: Path):
    grid = _grid(cfg["grid"])
    F = _functional(cfg["functional"], grid)
    b = sample(_model(cfg["model"]), grid, SeedPlan(seed), cfg.get("n_paths", 1))
    h = cfg.get("h")
    knots = grid.knots

    def one(i):
        p = b.path(i)
        Fv = F.trajectory(p)
        rows = []
        for k in range(grid.n_steps + 1):
            dv = float(np.ravel(vertical_derivative(F, knots[k], p, h))[0])
            dh = horizontal_derivative(F, knots[k], p) if k < grid.n_steps else float("nan")
            rows.append((i, knots[k], Fv[k], dv, dh))
        return rows

    per = pmap(one, range(len(b)))
    rows = [r for chunk in per for r in chunk]
    files = [write_csv(out / "derivative.csv", ["path_id", "t", "F", "vertical", "horizontal"], rows)]
    vert = np.array([r[3] for r in rows])
    return {"functional": F.name, "n_paths": len(b), "max_abs_vertical": float(np.max(np.abs(vert)))}, files, False


def cmd_check_ito(cfg, seed, out: Path):
    grid = _grid(cfg["grid"])
    F = _functional(cfg["functional"], grid)
    b = sample(_model(cfg["model"]), grid, SeedPlan(seed), cfg.get("n_paths", 20))
    paths = b.paths()
    eps = cfg.get("epsilons") or default_ladder(grid)
    vals = pmap(lambda p: [condition_E_eps(F, p, e) for e in eps], paths)
    sw = summarize_E_eps(np.array(vals), eps, cfg.get("tol", 1e-2))
    files = [
        write_csv(out / "E_eps.csv", ["eps", "median", "q10", "q90"], zip(sw.epsilons, sw.median, sw.q10, sw.q90)),
    ]
    dec = decompose(F, paths[0])
    files.append(write_csv(out / "gamma.csv", ["t", "F", "integral", "gamma"], zip(grid.knots, dec.F_path, dec.integral_path, dec.gamma)))
    E_max = float(np.max(sw.values)) if sw.values.size else 0.0
    summary = {"E_eps_max": E_max, "E_eps_verdict": sw.verdict, "E_eps_median": sw.median.tolist(), "epsilons": sw.epsilons}
    ok = sw.verdict == "DECAYING"
    if "orthogonality" in cfg:
        o = cfg["orthogonality"]
        mart = default_martingales(paths[0], b.brownian(0), seed)
        rep = orthogonality_test(dec.gamma_path(), mart, o.get("epsilons"), o.get("tol", 0.05))
        summary["orthogonality"] = rep.verdict
        summary["orthogonality_limits"] = rep.limits
        ok = ok and rep.verdict == PASS
    summary["verdict"] = PASS if ok else FAIL
    return summary, files, not ok


def cmd_uvm_solve(cfg, seed, out: Path):
    prob = _problem(cfg["problem"])
    t0 = time.perf_counter()
    field = bsb_solve(prob)
    solve_s = time.perf_counter() - t0
    price = float(field.value(0, prob.x0, 0.0))
    every = cfg.get("layers_every", max(1, prob.grid.n_steps // 16))
    files = [str(Path("layers") / f) for f in field.write_layers(out / "layers", every)]
    files.append("layers/field.json")
    summary = {"price": price, "y0": prob.y0, "total_mass": prob.mu.total_mass, "max_substeps": int(field.substeps.max()), "solve_seconds": solve_s}
    failed = False
    if "discrete_n" in cfg:
        vn = [(n, discrete_value_vn(prob, n)) for n in cfg["discrete_n"]]
        files.append(write_csv(out / "vn.csv", ["n", "value", "abs_error"], [(n, v, abs(v - price)) for n, v in vn]))
        errs = [abs(v - price) for _, v in vn]
        summary["vn"] = {str(n): v for n, v in vn}
        summary["vn_non_increasing"] = bool(all(b <= a for a, b in zip(errs, errs[1:])))
    if "audit" in cfg:
        a = cfg["audit"]
        rep = regularity_audit(field, prob, a.get("n_probes", 1000), seed, a.get("n_paths", 64))
        summary["audit"] = rep.as_dict()
        failed = not rep.passed
    summary["verdict"] = FAIL if failed else PASS
    return summary, files, failed


def cmd_hedge(cfg, seed, out: Path):
    prob = _problem(cfg["problem"])
    mode = cfg.get("mode", "superhedge")
    n_paths = cfg.get("n_paths", 1000)
    mu = prob.mu
    field = bsb_solve(prob)
    files = []
    summary = {"mode": mode, "price": float(field.value(0, prob.x0, 0.0))}
    failed = False
    if mode == "replication":
        md = dict(cfg.get("model", {"kind": "constant", "sigma": prob.sigma_hi}))
        md.setdefault("x0", prob.x0)
        md.setdefault("x_scale", prob.x_scale)
        rep = replication_backtest(field, _model(md, mu=mu), n_paths, seed)
        rep.to_csv(out / "pnl.csv")
        files.append("pnl.csv")
        summary["replication"] = rep.summary()
        return summary, files, failed
    if "adversaries" in cfg:
        advs = []
        for i, d in enumerate(cfg["adversaries"]):
            d = dict(d)
            d.setdefault("x0", prob.x0)
            d.setdefault("x_scale", prob.x_scale)
            d.setdefault("name", f"{i}_{d['kind']}")
            try:
                advs.append(_model(d, mu=mu, field=field, band=None))
            except DirichletLabError as exc:
                raise ConfigError(f"adversary {i}: {exc}", key=f"adversaries.{i}") from exc
    else:
        advs = default_adversaries(field, prob.x0, mu=mu)
    reps = superhedge_backtest(field, advs, n_paths, seed)
    summary["adversaries"] = {}
    for name, r in reps.items():
        fn = f"pnl_{name}.csv"
        r.to_csv(out / fn)
        files.append(fn)
        summary["adversaries"][name] = r.summary()
    if "delta" in cfg:
        worst = [a for a in advs if a.kind == "uvm_policy" and hasattr(a.policy, "extrapolated")]
        target = worst[0] if worst else advs[-1]
        probe = price_gap_probe(field, cfg["delta"], target, n_paths, seed)
        summary["price_gap"] = {k: v for k, v in probe.items() if k != "report"}
    if "ladder" in cfg:
        lad = cfg["ladder"]
        levels = tuple(lad.get("levels", (8, 9, 10, 11)))
        fit = tuple(lad.get("fit_levels", levels[:2]))
        base = cfg["problem"]

        def mu_for(n):
            return _measure(base["mu"], TimeGrid(float(base.get("horizon", 1.0)), n))

        def solve(n):
            d = copy.deepcopy(base)
            d["n_steps"] = n
            return bsb_solve(_problem(d))

        res = dt_ladder(solve, prob.x0, mu_for, levels, fit, n_paths, seed)
        summary["ladder"] = res.as_dict()
        rows = []
        for name, vals in res.shortfall_q999.items():
            rows += [(L, dt, name, v) for L, dt, v in zip(res.levels, res.dts, vals)]
        files.append(write_csv(out / "ladder.csv", ["level", "dt", "adversary", "shortfall_q999"], rows))
        failed = not (res.superhedge_ok and res.shortfall_decreasing and res.duality_ok)
        summary["verdict"] = FAIL if failed else PASS
    return summary, files, failed


def cmd_report(cfg, seed, out: Path):
    runs = cfg.get("runs")
    if runs is None:
        dirs = sorted(p.parent for p in out.glob("*/manifest.json"))
    else:
        dirs = [Path(r) for r in runs]
    rows, entries = [], []
    for d in dirs:
        mf = d / "manifest.json"
        if not mf.exists():
            raise ConfigError(f"no manifest.json in {d}", key="runs")
        m = json.loads(mf.read_text())
        s = m.get("summary", {})
        entries.append({"run": str(d), "subcommand": m["subcommand"], "config_sha256": m["config_sha256"], "summary": s})
        rows.append((str(d), m["subcommand"], m["seed"], s.get("verdict", ""), m["config_sha256"]))
    files = [write_csv(out / "report.csv", ["run", "subcommand", "seed", "verdict", "config_sha256"], rows)]
    (out / "report.json").write_text(json.dumps(_jsonable(entries), indent=1, sort_keys=True) + "\n")
    files.append("report.json")
    n_fail = sum(1 for r in rows if r[3] == FAIL)
    return {"n_runs": len(rows), "n_fail": n_fail, "verdict": FAIL if n_fail else PASS}, files, n_fail > 0


COMMANDS = {
    "simulate": cmd_simulate,
    "derivative": cmd_derivative,
    "check-ito": cmd_check_ito,
    "uvm-solve": cmd_uvm_solve,
    "hedge": cmd_hedge,
    "report": cmd_report,
}


# ---------------------------------------------------------------------------
# entry point


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dirichlet-lab", description="Functional Ito calculus and uncertain volatility experiments.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="JSON config file (optional for report)")
    ap.add_argument("--seed", type=int, help="master seed; overrides the config's seed")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--quiet", action="store_true", help="silence log messages and the stdout summary")
    return ap


def _versions() -> dict:
    return {
        "dirichlet_lab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "jsonschema": _dist_version("jsonschema"),
    }


def _dist_version(name):
    from importlib.metadata import version

    return version(name)


def run(argv=None) -> int:
    try:
        args = parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    t0 = time.perf_counter()
    try:
        if args.config is None:
            if args.subcommand != "report":
                raise ConfigError("--config is required", key="--config")
            raw = b"{}"
        else:
            raw = Path(args.config).read_bytes()
        try:
            cfg = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}", key="<root>") from exc
        validate(args.subcommand, cfg)
        seed = args.seed if args.seed is not None else cfg.get("seed", 0)
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must fit in 64 unsigned bits", key="--seed")
        n_threads = threads()
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        summary, files, failed = COMMANDS[args.subcommand](cfg, seed, out)
    except ConfigError as exc:
        print(f"error: {exc} [key: {exc.key}]", file=sys.stderr)
        return EXIT_ERROR
    except DirichletLabError as exc:
        key = getattr(exc, "key", None)
        idx = getattr(exc, "index", None)
        extra = "".join([f" [key: {key}]" if key else "", f" [index: {idx}]" if idx is not None else ""])
        print(f"error: {exc}{extra}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    summary = _jsonable(summary)
    manifest = {
        "subcommand": args.subcommand,
        "config": cfg,
        "config_sha256": hashlib.sha256(raw).hexdigest(),
        "seed": seed,
        "versions": _versions(),
        "threads": n_threads,
        "wall_time_s": time.perf_counter() - t0,
        "outputs": files,
        "summary": summary,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    if not args.quiet:
        print(json.dumps(summary, sort_keys=True))
    return EXIT_FAIL if failed else EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
