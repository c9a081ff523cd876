"""Hedging backtests against a solved value field.

Terminal P&L per path is ``capital + sum_k H_k (X_{k+1} - X_k) - g(X)`` with
``H_k`` read from the field at knot ``k`` only.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from dirichlet_lab.errors import ConfigurationError, DomainError
from dirichlet_lab.simulate import ModelSpec, SeedPlan, sample, worst_case_policy
from dirichlet_lab.uvm import ValueField, along_paths

QUANTILES = (0.001, 0.01, 0.5, 0.99, 0.999)
BAND_TOL = 1e-12


@dataclass
class HedgeReport:
    pnl: np.ndarray
    capital: float
    model: str
    n_steps: int
    seed: int
    sup_H: float
    extrapolated: int = 0
    positions: Optional[np.ndarray] = None
    increments: Optional[np.ndarray] = None
    payoffs: Optional[np.ndarray] = None

    @property
    def shortfall(self) -> np.ndarray:
        return np.maximum(0.0, -self.pnl)

    def summary(self) -> dict:
        p = self.pnl
        n = p.size
        sf = self.shortfall
        return {
            "model": self.model,
            "n_paths": int(n),
            "n_steps": self.n_steps,
            "seed": self.seed,
            "capital": self.capital,
            "mean": float(np.mean(p)),
            "std": float(np.std(p, ddof=1)) if n > 1 else 0.0,
            "stderr": float(np.std(p, ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
            "min": float(np.min(p)),
            "max": float(np.max(p)),
            "rmse": float(np.sqrt(np.mean(p * p))),
            "quantiles": {str(q): float(np.quantile(p, q)) for q in QUANTILES},
            "shortfall_q999": float(np.quantile(sf, 0.999)),
            "shortfall_fraction": float(np.mean(p < 0)),
            "sup_H": self.sup_H,
            "extrapolated": self.extrapolated,
        }

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path_id", "pnl", "shortfall"])
        for i, (p, s) in enumerate(zip(self.pnl, self.shortfall)):
            w.writerow([i, format(float(p), ".17g"), format(float(s), ".17g")])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def positions_csv(self, path=None) -> str:
        """Per-step positions and increments, ``path_id,k,H,dX``, plus payoffs as ``k=-1``."""
        if self.positions is None:
            raise DomainError("positions were not kept; rerun with keep_positions=True")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path_id", "k", "H", "dX"])
        for i in range(self.positions.shape[0]):
            w.writerow([i, -1, format(float(self.payoffs[i]), ".17g"), "0"])
            for k in range(self.positions.shape[1]):
                w.writerow([i, k, format(float(self.positions[i, k]), ".17g"), format(float(self.increments[i, k]), ".17g")])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def pnl_from_positions_csv(text: str, capital: float) -> np.ndarray:
    """Recompute terminal P&L from :meth:`HedgeReport.positions_csv` output."""
    rows = list(csv.reader(io.StringIO(text)))[1:]
    payoff, gains = {}, {}
    for pid, k, H, dX in rows:
        pid, k = int(pid), int(k)
        if k < 0:
            payoff[pid] = float(H)
            gains[pid] = []
        else:
            gains[pid].append(float(H) * float(dX))
    return np.array([capital + math.fsum(gains[i]) - payoff[i] for i in sorted(payoff)])


def _gains(H: np.ndarray, dX: np.ndarray) -> np.ndarray:
    return np.array([math.fsum(row) for row in H * dX])


def run_backtest(
    field: ValueField,
    model: ModelSpec,
    n_paths: int,
    seed: int = 0,
    capital: Optional[float] = None,
    chunk: int = 1000,
    keep_positions: bool = False,
    x0: Optional[float] = None,
) -> HedgeReport:
    """Hedge ``n_paths`` paths of ``model`` with the field's positions.

    Paths are generated and evaluated in chunks; each path uses its own seeded
    substream so results do not depend on ``chunk``.
    """
    grid = field.grid
    x0 = model.x0 if x0 is None else x0
    V0 = float(field.value(0, x0, 0.0))
    cap = V0 if capital is None else float(capital)
    pnl = np.empty(n_paths)
    sup_H = 0.0
    outside = 0
    keep = [] if keep_positions else None
    plan = SeedPlan(seed)
    counter = getattr(model.policy, "extrapolated", None)
    c0 = counter[0] if counter is not None else 0
    for start in range(0, n_paths, chunk):
        m = min(chunk, n_paths - start)
        batch = sample(model, grid, plan, m, start=start)
        V, H, o = along_paths(field, batch.X)
        outside += o
        dX = np.diff(batch.X, axis=1)
        pnl[start : start + m] = cap + _gains(H, dX) - V[:, -1]
        sup_H = max(sup_H, float(np.max(np.abs(H))))
        if keep is not None:
            keep.append((H, dX, V[:, -1].copy()))
    if counter is not None:
        outside += counter[0] - c0
    rep = HedgeReport(pnl, cap, model.name or model.kind, grid.n_steps, seed, sup_H, outside)
    if keep is not None:
        rep.positions = np.concatenate([k[0] for k in keep])
        rep.increments = np.concatenate([k[1] for k in keep])
        rep.payoffs = np.concatenate([k[2] for k in keep])
    return rep


def replication_backtest(field: ValueField, model: ModelSpec, n_paths: int, seed: int = 0, **kw) -> HedgeReport:
    """Backtest in the matched case: constant model volatility equal to the field's degenerate band."""
    if not math.isclose(field.sigma_lo, field.sigma_hi, rel_tol=0, abs_tol=BAND_TOL):
        raise ConfigurationError("replication needs a field solved with sigma_lo == sigma_hi", key="field")
    sig = field.sigma_hi
    ok = (
        model.kind == "uvm_policy"
        and abs(model.sigma_lo - sig) <= BAND_TOL
        and abs(model.sigma_hi - sig) <= BAND_TOL
    ) or (model.kind == "brownian" and abs(model.sigma - sig) <= BAND_TOL)
    if not ok:
        raise ConfigurationError(f"model volatility does not match the field's sigma = {sig}", key="model")
    if not math.isclose(model.x_scale, field.x_scale):
        raise ConfigurationError("model and field use different x_scale", key="model.x_scale")
    return run_backtest(field, model, n_paths, seed, **kw)


def default_adversaries(field: ValueField, x0: float, mu=None, switch_prob: float = 0.02) -> list:
    """Constant low, constant high, regime-switching and worst-case adversaries."""
    lo, hi, xs = field.sigma_lo, field.sigma_hi, field.x_scale
    band = (lo, hi)
    return [
        ModelSpec.constant(lo, x0=x0, x_scale=xs, band=band, mu=mu, name="constant_lo"),
        ModelSpec.constant(hi, x0=x0, x_scale=xs, band=band, mu=mu, name="constant_hi"),
        ModelSpec(kind="regime_switching", x0=x0, sigma_lo=lo, sigma_hi=hi, x_scale=xs, mu=mu, switch_prob=switch_prob, name="regime_switching"),
        ModelSpec(kind="uvm_policy", x0=x0, sigma_lo=lo, sigma_hi=hi, policy=worst_case_policy(field), x_scale=xs, mu=mu, name="worst_case"),
    ]


def _validate_adversaries(field: ValueField, adversaries: Sequence[ModelSpec]):
    for i, m in enumerate(adversaries):
        if m.kind in ("uvm_policy", "regime_switching"):
            lo, hi = m.sigma_lo, m.sigma_hi
        elif m.kind == "brownian":
            lo = hi = m.sigma
        else:
            raise ConfigurationError(f"adversary {i} of kind {m.kind!r} is not a controlled martingale", key="adversaries", index=i)
        if lo < field.sigma_lo - BAND_TOL or hi > field.sigma_hi + BAND_TOL:
            raise ConfigurationError(
                f"adversary {i} ({m.name or m.kind}) has volatility band [{lo}, {hi}] outside [{field.sigma_lo}, {field.sigma_hi}]",
                key="adversaries",
                index=i,
            )


def superhedge_backtest(field: ValueField, adversaries: Sequence[ModelSpec], n_paths: int, seed: int = 0, **kw) -> dict:
    """Run the hedge against every adversary; returns ``name -> HedgeReport``."""
    _validate_adversaries(field, adversaries)
    out = {}
    for i, m in enumerate(adversaries):
        try:
            rep = run_backtest(field, m, n_paths, seed, **kw)
        except ConfigurationError as exc:
            raise ConfigurationError(f"adversary {i}: {exc}", key="adversaries", index=i) from exc
        out[m.name or f"adversary_{i}"] = rep
    return out


def price_gap_probe(field: ValueField, delta: float, adversary: ModelSpec, n_paths: int, seed: int = 0) -> dict:
    """Hedge from capital ``V(0) - delta`` and report how often the payoff is missed."""
    if not delta >= 0:
        raise DomainError(f"delta must be non-negative, got {delta}")
    _validate_adversaries(field, [adversary])
    V0 = float(field.value(0, adversary.x0, 0.0))
    rep = run_backtest(field, adversary, n_paths, seed, capital=V0 - delta)
    s = rep.summary()
    return {"delta": delta, "capital": V0 - delta, "shortfall_fraction": s["shortfall_fraction"], "report": s}


@dataclass
class LadderResult:
    levels: list
    dts: list
    shortfall_q999: dict
    worst_mean: list
    worst_stderr: list
    c_fit: float
    C_fit: float
    superhedge_ok: bool
    shortfall_decreasing: bool
    duality_ok: bool
    reports: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "levels": self.levels,
            "dts": self.dts,
            "shortfall_q999": self.shortfall_q999,
            "worst_mean": self.worst_mean,
            "worst_stderr": self.worst_stderr,
            "c_fit": self.c_fit,
            "C_fit": self.C_fit,
            "superhedge_ok": self.superhedge_ok,
            "shortfall_decreasing": self.shortfall_decreasing,
            "duality_ok": self.duality_ok,
        }


def dt_ladder(solve, x0: float, mu_for, levels=(8, 9, 10, 11), fit_levels=(8, 9), n_paths: int = 10_000, seed: int = 0) -> LadderResult:
    """Superhedging along a refinement ladder ``dt = T / 2^L``.

    ``solve(n_steps)`` returns a field and ``mu_for(n_steps)`` the measure on
    that grid.  The constants ``c`` (shortfall) and ``C`` (duality gap) are
    fitted on ``fit_levels`` as ``max(value / sqrt(dt))`` and then checked on
    the remaining levels.
    """
    sf = {}
    wm, ws, dts = [], [], []
    reports = {}
    for L in levels:
        n = 2**L
        fld = solve(n)
        dt = fld.grid.dt
        dts.append(dt)
        advs = default_adversaries(fld, x0, mu=mu_for(n))
        reps = superhedge_backtest(fld, advs, n_paths, seed)
        reports[L] = {k: r.summary() for k, r in reps.items()}
        for name, r in reps.items():
            sf.setdefault(name, []).append(float(np.quantile(r.shortfall, 0.999)))
        s = reps["worst_case"].summary()
        wm.append(s["mean"])
        ws.append(s["stderr"])
    idx_fit = [levels.index(L) for L in fit_levels]
    idx_chk = [i for i in range(len(levels)) if levels[i] not in fit_levels]
    worst_sf = np.max(np.array(list(sf.values())), axis=0)
    c = max(worst_sf[i] / math.sqrt(dts[i]) for i in idx_fit)
    excess = [max(abs(wm[i]) - 3 * ws[i], 0.0) / math.sqrt(dts[i]) for i in idx_fit]
    C = max(excess)
    sh_ok = all(worst_sf[i] <= c * math.sqrt(dts[i]) for i in idx_chk)
    dec = bool(np.all(np.diff(worst_sf) < 0))
    du_ok = all(abs(wm[i]) <= 3 * ws[i] + C * math.sqrt(dts[i]) for i in idx_chk)
    return LadderResult(list(levels), dts, sf, wm, ws, float(c), float(C), sh_ok, dec, du_ok, reports)
