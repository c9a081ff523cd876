"""Uncertain volatility pricing of payoffs ``g(int x dmu)``.

The value ``v(t_k, x, a)`` with accrued integral ``a = int_[0,t_k) x dmu``
depends on ``(x, a)`` only through ``y = a + x R_k`` where
``R_k = mu([t_k, T])``: on the cell ``[t_k, t_{k+1})`` the state moves as
``y_{k+1} = y_k + R_{k+1} (X_{k+1} - X_k)``.  The Black-Scholes-Barenblatt
equation is therefore solved on a one-dimensional ``y`` grid with effective
volatility ``sigma R_{k+1}`` per cell, using an explicit monotone scheme.
Atoms of ``mu`` enter through ``R`` and need no separate jump step.

A literal solver on the ``(x, a)`` tensor grid is kept as a cross-check.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from dirichlet_lab.errors import ConfigurationError, DomainError
from dirichlet_lab.functionals import PathFunctional, WeightMeasure
from dirichlet_lab.paths import DiscretePath, TimeGrid

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# payoffs


@dataclass
class Payoff:
    """Scalar payoff ``g`` applied to ``y = int x dmu``.

    ``alpha`` is the Hoelder exponent of ``g'``; ``audited`` is False for user
    tables, whose admissibility is not checked.
    """

    kind: str
    g: Callable
    dg: Optional[Callable] = None
    alpha: float = 1.0
    audited: bool = True
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigurationError(f"alpha must lie in (0, 1], got {self.alpha}", key="payoff.alpha")

    def __call__(self, y):
        return self.g(np.asarray(y, dtype=float))


def _expit(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def call_on_avg(K: float, smoothing: float = 0.0, cap: Optional[float] = None) -> Payoff:
    """``(y - K)^+``, optionally softened to ``s log(1 + e^{(y-K)/s})`` and capped."""
    s = float(smoothing)
    if s > 0:
        g0 = lambda y: s * np.logaddexp(0.0, (y - K) / s)
        dg0 = lambda y: _expit((y - K) / s)
    else:
        g0 = lambda y: np.maximum(y - K, 0.0)
        dg0 = lambda y: (y > K).astype(float)
    if cap is not None:
        g = lambda y: np.minimum(g0(y), cap)
        dg = lambda y: np.where(g0(y) < cap, dg0(y), 0.0)
    else:
        g, dg = g0, dg0
    return Payoff("call_on_avg", g, dg, alpha=1.0, params={"K": K, "smoothing": s, "cap": cap})


def put_on_avg(K: float, smoothing: float = 0.0, cap: Optional[float] = None) -> Payoff:
    """``(K - y)^+`` with the same options as :func:`call_on_avg`."""
    c = call_on_avg(-K, smoothing, cap)
    return Payoff(
        "put_on_avg",
        lambda y: c.g(-y),
        lambda y: -c.dg(-y),
        alpha=1.0,
        params={"K": K, "smoothing": float(smoothing), "cap": cap},
    )


def linear(scale: float = 1.0, shift: float = 0.0) -> Payoff:
    return Payoff(
        "linear",
        lambda y: scale * y + shift,
        lambda y: scale + 0.0 * y,
        params={"scale": scale, "shift": shift},
    )


def custom_table(ys, gs) -> Payoff:
    """Piecewise-linear payoff through ``(ys, gs)``, flat outside."""
    ys = np.asarray(ys, dtype=float)
    gs = np.asarray(gs, dtype=float)
    if ys.ndim != 1 or ys.size < 2 or ys.shape != gs.shape or np.any(np.diff(ys) <= 0):
        raise ConfigurationError("custom table needs strictly increasing abscissae", key="payoff.y")
    slopes = np.diff(gs) / np.diff(ys)

    def dg(y):
        i = np.clip(np.searchsorted(ys, y, side="right") - 1, 0, slopes.size - 1)
        inside = (y >= ys[0]) & (y <= ys[-1])
        return np.where(inside, slopes[i], 0.0)

    return Payoff("custom_table", lambda y: np.interp(y, ys, gs), dg, alpha=1.0, audited=False, params={"y": ys.tolist(), "g": gs.tolist()})


def payoff_from_dict(d: dict) -> Payoff:
    kind = d.get("kind")
    if kind == "call_on_avg":
        return call_on_avg(d["K"], d.get("smoothing", 0.0), d.get("cap"))
    if kind == "put_on_avg":
        return put_on_avg(d["K"], d.get("smoothing", 0.0), d.get("cap"))
    if kind == "linear":
        return linear(d.get("scale", 1.0), d.get("shift", 0.0))
    if kind == "custom_table":
        return custom_table(d["y"], d["g"])
    raise ConfigurationError(f"unknown payoff kind {kind!r}", key="payoff.kind")


# ---------------------------------------------------------------------------
# problem and field


@dataclass
class UvmProblem:
    """Uncertain volatility problem.

    Parameters
    ----------
    sigma_lo, sigma_hi : float
        Volatility band; absolute volatility is ``sigma * x_scale``.
    x0 : float
    mu : WeightMeasure
        Its grid is the time grid of the solver.
    payoff : Payoff
    x_scale : float
    ny : int
        Nodes of the collapsed state grid.
    y_width : float
        Half-width of the state grid in units of ``sigma_hi sqrt(T) x_scale R_0``.
    y_bounds : (float, float), optional
        Explicit state grid bounds, overriding ``y_width``.
    cfl : float
        Bound on ``sigma^2 dtau / dy^2`` enforced by sub-stepping.
    """

    sigma_lo: float
    sigma_hi: float
    x0: float
    mu: WeightMeasure
    payoff: Payoff
    x_scale: float = 1.0
    ny: int = 400
    y_width: float = 5.0
    y_bounds: Optional[tuple] = None
    cfl: float = 0.5

    def __post_init__(self):
        if not 0 <= self.sigma_lo <= self.sigma_hi or not math.isfinite(self.sigma_hi):
            raise ConfigurationError("volatility band needs 0 <= sigma_lo <= sigma_hi", key="sigma_lo")
        if not math.isfinite(self.x0):
            raise ConfigurationError("x0 must be finite", key="x0")
        if self.ny < 3:
            raise ConfigurationError("need at least 3 grid nodes", key="y_grid.n")
        if not 0 < self.cfl <= 0.5:
            raise ConfigurationError("cfl must lie in (0, 1/2]", key="cfl")

    @property
    def grid(self) -> TimeGrid:
        return self.mu.grid

    @property
    def y0(self) -> float:
        return self.x0 * self.mu.total_mass

    def cone(self) -> float:
        return self.sigma_hi * math.sqrt(self.grid.horizon) * self.x_scale * self.mu.total_mass

    def state_grid(self) -> np.ndarray:
        cone = self.cone()
        if self.y_bounds is not None:
            lo, hi = map(float, self.y_bounds)
        else:
            half = self.y_width * cone
            if half == 0.0:
                half = max(1.0, abs(self.y0))
            lo, hi = self.y0 - half, self.y0 + half
        if not (hi > lo and lo <= self.y0 - 3 * cone and hi >= self.y0 + 3 * cone):
            raise ConfigurationError(
                f"state grid [{lo}, {hi}] does not contain the 3-sigma cone around {self.y0}", key="y_grid"
            )
        return np.linspace(lo, hi, self.ny)

    def with_band(self, lo: float, hi: float) -> "UvmProblem":
        return _replace(self, sigma_lo=lo, sigma_hi=hi)


def _replace(p: UvmProblem, **kw) -> UvmProblem:
    d = {k: getattr(p, k) for k in p.__dataclass_fields__}
    d.update(kw)
    return UvmProblem(**d)


def _lin_interp(yq, y0: float, dy: float, v: np.ndarray):
    """Linear interpolation on a uniform grid, extrapolating linearly outside."""
    yq = np.asarray(yq, dtype=float)
    pos = (yq - y0) / dy
    i = np.clip(np.floor(pos).astype(int), 0, v.size - 2)
    w = pos - i
    out = v[i] + w * (v[i + 1] - v[i])
    outside = (pos < 0) | (pos > v.size - 1)
    return out, outside


def _second_diff(v: np.ndarray, dy: float) -> np.ndarray:
    gam = np.zeros_like(v)
    gam[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / (dy * dy)
    return gam


@dataclass
class ValueField:
    """Solved value layers ``u[k, j] = v(t_k, y_j)`` on the collapsed state grid."""

    grid: TimeGrid
    y: np.ndarray
    u: np.ndarray
    R: np.ndarray
    cells: np.ndarray
    sigma_lo: float
    sigma_hi: float
    x_scale: float
    payoff: Payoff
    substeps: np.ndarray
    atom_knots: tuple = ()

    @property
    def dy(self) -> float:
        return float(self.y[1] - self.y[0])

    @property
    def n(self) -> int:
        return self.grid.n_steps

    def layer(self, k: int, yq):
        return _lin_interp(yq, self.y[0], self.dy, self.u[k])

    def slope(self, k: int, yq):
        """Central difference ``d u / d y`` of the interpolated layer at spacing ``dy``."""
        yq = np.asarray(yq, dtype=float)
        up, o1 = self.layer(k, yq + self.dy)
        dn, o2 = self.layer(k, yq - self.dy)
        return (up - dn) / (2.0 * self.dy), o1 | o2

    def state(self, k: int, x, a):
        return np.asarray(a, dtype=float) + np.asarray(x, dtype=float) * self.R[k]

    def value(self, k: int, x, a):
        return self.layer(k, self.state(k, x, a))[0]

    def control_curvature(self, k: int, x, a):
        """Sign-relevant curvature driving the cell ``[t_k, t_{k+1})``.

        The scheme on that cell evaluates the Barenblatt operator on layer
        ``k + 1`` at the unchanged state ``y_k``.
        """
        j = min(k + 1, self.n)
        yq = self.state(k, x, a)
        v = self.u[j]
        gam = _second_diff(v, self.dy)
        # values within rounding of the second difference carry no sign
        noise = np.zeros_like(v)
        noise[1:-1] = 8 * np.finfo(float).eps * (np.abs(v[2:]) + 2 * np.abs(v[1:-1]) + np.abs(v[:-2])) / self.dy**2
        gam = np.where(np.abs(gam) <= noise, 0.0, gam)
        val, outside = _lin_interp(yq, self.y[0], self.dy, gam)
        return val, outside

    def tensor_layer(self, k: int, xg, ag) -> np.ndarray:
        """Values on an ``(x, a)`` tensor grid, shape ``(len(xg), len(ag))``."""
        xg = np.asarray(xg, dtype=float)[:, None]
        ag = np.asarray(ag, dtype=float)[None, :]
        return self.value(k, xg, ag)

    def sup_slope(self) -> float:
        return float(np.max(np.abs(np.diff(self.u, axis=1))) / self.dy)

    def write_layers(self, out_dir, every: int = 1) -> list:
        """One CSV per time layer (``y,u``) plus ``field.json``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = []
        for k in range(0, self.n + 1, every):
            name = f"layer_{k:06d}.csv"
            rows = ["y,u"] + [f"{format(a, '.17g')},{format(b, '.17g')}" for a, b in zip(self.y, self.u[k])]
            (out / name).write_text("\n".join(rows) + "\n")
            files.append(name)
        meta = {
            "horizon": self.grid.horizon,
            "n_steps": self.n,
            "times": [k * self.grid.dt for k in range(0, self.n + 1, every)],
            "layers": files,
            "state": "y = a + x * R_k",
            "R": [float(r) for r in self.R],
            "sigma_lo": self.sigma_lo,
            "sigma_hi": self.sigma_hi,
            "x_scale": self.x_scale,
            "interpolation": "linear in y",
            "atom_knots": list(self.atom_knots),
        }
        (out / "field.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
        return files


def bsb_solve(problem: UvmProblem, cfl_sigma: Optional[float] = None) -> ValueField:
    """Backward explicit monotone sweep for ``u_t + F(u_yy) = 0``.

    ``F(gamma) = 1/2 s_hi^2 gamma^+ - 1/2 s_lo^2 gamma^-`` with
    ``s = sigma x_scale R_{k+1}`` on cell ``k``; each cell is split into
    sub-steps so that ``s_hi^2 dtau / dy^2 <= cfl``.  The second difference is
    zero at the two boundary nodes.

    Parameters
    ----------
    cfl_sigma : float, optional
        Volatility used to size the sub-steps instead of ``sigma_hi`` (must not
        be smaller).  Two bands solved with the same value share one discrete
        scheme, which makes them exactly comparable.
    """
    mu = problem.mu
    grid = problem.grid
    n, dt = grid.n_steps, grid.dt
    y = problem.state_grid()
    dy = float(y[1] - y[0])
    cells = mu.cell_masses()
    R = mu.tail_mass()
    u = np.empty((n + 1, y.size))
    u[n] = problem.payoff(y)
    subs = np.zeros(n, dtype=int)
    sig_cfl = problem.sigma_hi if cfl_sigma is None else float(cfl_sigma)
    if sig_cfl < problem.sigma_hi:
        raise DomainError(f"cfl_sigma {sig_cfl} is below sigma_hi {problem.sigma_hi}")
    for k in range(n - 1, -1, -1):
        s_hi = problem.sigma_hi * problem.x_scale * R[k + 1]
        s_lo = problem.sigma_lo * problem.x_scale * R[k + 1]
        s_cfl = sig_cfl * problem.x_scale * R[k + 1]
        m = max(1, math.ceil(s_cfl * s_cfl * dt / (problem.cfl * dy * dy) - 1e-12))
        subs[k] = m
        dtau = dt / m
        a_hi = 0.5 * s_hi * s_hi * dtau
        a_lo = 0.5 * s_lo * s_lo * dtau
        v = u[k + 1].copy()
        for _ in range(m):
            gam = _second_diff(v, dy)
            v = v + (a_hi * np.maximum(gam, 0.0) - a_lo * np.maximum(-gam, 0.0))
        u[k] = v
    if subs.max() > 1:
        log.info("CFL sub-stepping: up to %d sub-steps per cell", int(subs.max()))
    atoms = tuple(k for k, _ in mu.atoms)
    return ValueField(grid, y, u, R, cells, problem.sigma_lo, problem.sigma_hi, problem.x_scale, problem.payoff, subs, atoms)


def linear_solve(problem: UvmProblem, sigma: float) -> ValueField:
    """Same scheme with a single volatility: ``u_t + 1/2 s^2 u_yy = 0``."""
    mu = problem.mu
    grid = problem.grid
    n, dt = grid.n_steps, grid.dt
    y = problem.with_band(sigma, max(sigma, problem.sigma_hi)).state_grid()
    dy = float(y[1] - y[0])
    R = mu.tail_mass()
    u = np.empty((n + 1, y.size))
    u[n] = problem.payoff(y)
    subs = np.zeros(n, dtype=int)
    hi = max(sigma, problem.sigma_hi)
    for k in range(n - 1, -1, -1):
        s_hi = hi * problem.x_scale * R[k + 1]
        s = sigma * problem.x_scale * R[k + 1]
        m = max(1, math.ceil(s_hi * s_hi * dt / (problem.cfl * dy * dy) - 1e-12))
        subs[k] = m
        a = 0.5 * s * s * (dt / m)
        v = u[k + 1].copy()
        for _ in range(m):
            v = v + a * _second_diff(v, dy)
        u[k] = v
    return ValueField(grid, y, u, R, mu.cell_masses(), sigma, sigma, problem.x_scale, problem.payoff, subs)


# ---------------------------------------------------------------------------
# evaluation along paths


@dataclass
class ValueDelta:
    V: float
    H: float
    vertical: float
    extrapolated: bool


def accrued(field: ValueField, x: np.ndarray) -> np.ndarray:
    """``a_k = sum_{i<k} c_i x_i`` for every knot (last axis)."""
    x = np.asarray(x, dtype=float)
    inc = field.cells[:-1] * x[..., :-1]
    z = np.zeros(x.shape[:-1] + (1,))
    return np.concatenate([z, np.cumsum(inc, axis=-1)], axis=-1)


def value_and_delta(field: ValueField, t: float, path: DiscretePath) -> ValueDelta:
    """Value and hedge ratio at ``t`` along ``path``.

    ``H`` is the position held over ``[t_k, t_{k+1})``: the exposure of the
    value to the next increment, ``R_{k+1} du/dy``.  ``vertical`` is the Dupire
    derivative on the grid, ``R_k du/dy``; both agree up to the mass of the
    current cell.  At ``T`` the value is the payoff itself and ``H = 0``.
    """
    if path.grid != field.grid:
        raise DomainError("path and field live on different grids")
    k = field.grid.index(t)
    x = path.x
    a = float(accrued(field, x)[k])
    y = a + x[k] * field.R[k]
    if k == field.n:
        V = float(field.payoff(y))
        s = float(field.payoff.dg(y)) if field.payoff.dg is not None else float(field.slope(k, y)[0])
        out = bool(y < field.y[0] or y > field.y[-1])
        return ValueDelta(V, 0.0, s * field.R[k], out)
    V, o1 = field.layer(k, y)
    s, o2 = field.slope(k, y)
    return ValueDelta(float(V), float(s * field.R[k + 1]), float(s * field.R[k]), bool(o1 | o2))


def along_paths(field: ValueField, X: np.ndarray):
    """Values ``V`` (shape ``(p, n+1)``), positions ``H`` (``(p, n)``), and an out-of-grid count."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = field.n
    Y = accrued(field, X) + X * field.R
    V = np.empty_like(X)
    H = np.empty((X.shape[0], n))
    outside = 0
    for k in range(n):
        V[:, k], o = field.layer(k, Y[:, k])
        s, o2 = field.slope(k, Y[:, k])
        H[:, k] = s * field.R[k + 1]
        outside += int(np.sum(o | o2))
    V[:, n] = field.payoff(Y[:, n])
    return V, H, outside


def value_functional(field: ValueField) -> PathFunctional:
    """``(t, x) -> V(t, x)`` as a path functional with its vertical derivative."""

    def fn(k, values, grid):
        x = values[0]
        a = float(np.dot(field.cells[:k], x[:k]))
        y = a + x[k] * field.R[k]
        if k == field.n:
            return float(field.payoff(y))
        return float(field.layer(k, y)[0])

    def vertical(k, values, grid):
        x = values[0]
        y = float(np.dot(field.cells[:k], x[:k])) + x[k] * field.R[k]
        return float(field.slope(k, y)[0] * field.R[k])

    def along(values, grid):
        return along_paths(field, values[0][None, :])[0][0]

    def vertical_along(values, grid):
        x = values[0][None, :]
        Y = accrued(field, x)[0] + x[0] * field.R
        return np.array([field.slope(k, Y[k])[0] * field.R[k] for k in range(field.n + 1)], dtype=float)

    return PathFunctional(fn, vertical=vertical, name="uvm_value", along=along, vertical_along=vertical_along)


# ---------------------------------------------------------------------------
# projected problems


def aggregate_measure(mu: WeightMeasure, n: int) -> WeightMeasure:
    """Push the mass of ``mu`` onto the left knots of a coarse uniform partition.

    Cells ``[t_i, t_{i+1})`` go to the coarse knot at or before ``t_i``; atoms
    must already sit on coarse knots, and an atom at ``T`` stays at ``T``.
    """
    N = mu.n_steps
    if n < 1 or N % n:
        raise ConfigurationError(f"coarse count {n} must divide {N}", key="n")
    q = N // n
    for k, _ in mu.atoms:
        if k % q:
            raise ConfigurationError(f"atom at knot {k} is not on the coarse partition of {n} cells", key="mu.atoms")
    c = mu.cell_masses()
    agg = np.add.reduceat(c[:N], np.arange(0, N, q))
    atoms = [(j * q, float(m)) for j, m in enumerate(agg) if m > 0]
    if c[N] > 0:
        atoms.append((N, float(c[N])))
    return WeightMeasure(np.zeros(N), tuple(atoms), mu.horizon)


def discrete_value_vn(problem: UvmProblem, n: int) -> float:
    """``V^n(0, x0)`` for the payoff evaluated on the piecewise-constant projection.

    The solver keeps its fine time grid; only the measure is aggregated, so
    ``n = n_steps`` reproduces the fine solve exactly.
    """
    if n < 2:
        raise ConfigurationError("n must be at least 2", key="n")
    field = bsb_solve(_replace(problem, mu=aggregate_measure(problem.mu, n)))
    return float(field.value(0, problem.x0, 0.0))


# ---------------------------------------------------------------------------
# regularity audit


@dataclass
class AuditCheck:
    name: str
    max_excess: float
    slack: float
    passed: bool
    exponent: Optional[float] = None
    required: Optional[float] = None
    n_probes: int = 0

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class AuditReport:
    checks: dict
    sup_delta: float
    passed: bool

    def as_dict(self):
        return {"checks": {k: v.as_dict() for k, v in self.checks.items()}, "sup_delta": self.sup_delta, "passed": self.passed}


def _fit_exponent(scale: np.ndarray, env: np.ndarray) -> Optional[float]:
    ok = (scale > 0) & (env > 0)
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(scale[ok]), np.log(env[ok]), 1)[0])


def _holder_exponent(scale: np.ndarray, env: np.ndarray) -> Optional[float]:
    """Larger of the full log-log fit and the slope across the two finest scales.

    A Hoelder bound only constrains small increments; an envelope that
    saturates at coarse scales flattens the full fit without contradicting it.
    """
    ok = (scale > 0) & (env > 0)
    full = _fit_exponent(scale, env)
    if ok.sum() < 2:
        return full
    order = np.argsort(scale[ok])[:2]
    fine = _fit_exponent(scale[ok][order], env[ok][order])
    return max(full, fine)


def regularity_audit(field: ValueField, problem: UvmProblem, n_probes: int = 1000, seed: int = 0, n_paths: int = 64) -> AuditReport:
    """Probe the time-shift, path-Lipschitz and delta Hoelder bounds on simulated paths.

    (a) ``|V(t+h, x_{t^}) - V(t, x)| <= sigma_hi x_scale sqrt(h) mu([t, T])``;
    (b) ``|V(t, x') - V(t, x)| <= int |x'_{t^} - x_{t^}| dmu``, the stopped
        path carrying ``x_t`` on ``[t, T]``;
    (c) exponent of the delta's envelope against the path distance, required
        ``>= 0.8 alpha`` (see :func:`_holder_exponent`);
    (d) exponent of the delta's envelope against ``h`` along stopped paths,
        required ``>= 0.8 alpha / (2 + 2 alpha)``; windows touching an atom
        (within one step) are excluded.

    (a) and (b) pass when the excess stays below ``2 dy sup|du/dy|``.
    """
    from dirichlet_lab.simulate import ModelSpec, sample

    grid = field.grid
    n, dt = grid.n_steps, grid.dt
    rng = np.random.default_rng(seed)
    model = ModelSpec(
        kind="regime_switching",
        x0=problem.x0,
        sigma_lo=problem.sigma_lo,
        sigma_hi=problem.sigma_hi,
        x_scale=problem.x_scale,
        mu=problem.mu,
    )
    X = sample(model, grid, seed, n_paths).X
    Aacc = accrued(field, X)
    Y = Aacc + X * field.R
    slack = 2.0 * field.dy * field.sup_slope()
    alpha = problem.payoff.alpha
    atoms = np.array(field.atom_knots or (), dtype=int)

    def vert(k, y):
        return field.slope(k, y)[0] * field.R[k]

    # (a) time shift
    p = rng.integers(0, n_paths, n_probes)
    k = rng.integers(0, n, n_probes)
    j = np.maximum(1, np.floor((n - k) ** rng.uniform(0, 1, n_probes)).astype(int))
    j = np.minimum(j, n - k)
    y = Y[p, k]
    lhs = np.array([abs(field.layer(kk + jj, yy)[0] - field.layer(kk, yy)[0]) for kk, jj, yy in zip(k, j, y)])
    bound = problem.sigma_hi * problem.x_scale * np.sqrt(j * dt) * field.R[k]
    ex_a = float(np.max(lhs - bound))
    checks = {"time_shift": AuditCheck("time_shift", ex_a, slack, ex_a <= slack, n_probes=n_probes)}

    # (b) and (c): perturbed paths
    levels = field.dy * 2.0 ** np.arange(1, 6)
    p = rng.integers(0, n_paths, n_probes)
    k = rng.integers(0, n, n_probes)
    lev = rng.integers(0, levels.size, n_probes)
    excess_b = np.empty(n_probes)
    dist = np.empty(n_probes)
    dH = np.empty(n_probes)
    for i in range(n_probes):
        kk = k[i]
        shape = np.cumsum(rng.standard_normal(kk + 1))
        shape = shape / max(np.max(np.abs(shape)), 1e-300)
        delta = levels[lev[i]] / max(field.R[0], 1e-300) * shape
        x = X[p[i], : kk + 1]
        xp = x + delta
        yb = float(np.dot(field.cells[:kk], x[:kk]) + x[kk] * field.R[kk])
        yp = float(np.dot(field.cells[:kk], xp[:kk]) + xp[kk] * field.R[kk])
        lhs = abs(field.layer(kk, yp)[0] - field.layer(kk, yb)[0])
        d = float(np.dot(field.cells[:kk], np.abs(delta[:kk])) + abs(delta[kk]) * field.R[kk])
        excess_b[i] = lhs - d
        dist[i] = d
        dH[i] = abs(vert(kk, yp) - vert(kk, yb))
    ex_b = float(np.max(excess_b))
    checks["path_lipschitz"] = AuditCheck("path_lipschitz", ex_b, slack, ex_b <= slack, n_probes=n_probes)
    scale = np.array([np.median(dist[lev == i]) if np.any(lev == i) else 0.0 for i in range(levels.size)])
    env = np.array([np.max(dH[lev == i]) if np.any(lev == i) else 0.0 for i in range(levels.size)])
    e_c = _holder_exponent(scale, env)
    req_c = 0.8 * alpha
    checks["delta_path_holder"] = AuditCheck(
        "delta_path_holder", 0.0, 0.0, e_c is None or e_c >= req_c, exponent=e_c, required=req_c, n_probes=n_probes
    )

    # (d) delta along stopped paths in time
    hs = sorted({2**i for i in range(0, int(math.log2(max(n // 4, 1))) + 1)})
    p = rng.integers(0, n_paths, n_probes)
    k = rng.integers(1, max(n - 1, 2), n_probes)
    jj = np.array(hs)[rng.integers(0, len(hs), n_probes)]
    keep = k + jj < n
    if atoms.size:
        near = np.array([np.any((atoms >= kk - 1) & (atoms <= kk + j + 1)) for kk, j in zip(k, jj)])
        keep &= ~near
    dHt = np.full(n_probes, np.nan)
    for i in np.flatnonzero(keep):
        yy = Y[p[i], k[i]]
        dHt[i] = abs(vert(k[i] + jj[i], yy) - vert(k[i], yy))
    env_t = np.array([np.nanmax(dHt[(jj == h) & keep]) if np.any((jj == h) & keep) else 0.0 for h in hs])
    e_d = _holder_exponent(np.array(hs, dtype=float) * dt, env_t)
    req_d = 0.8 * alpha / (2.0 + 2.0 * alpha)
    checks["delta_time_holder"] = AuditCheck(
        "delta_time_holder", 0.0, 0.0, e_d is None or e_d >= req_d, exponent=e_d, required=req_d, n_probes=int(keep.sum())
    )
    sup_delta = float(np.max(np.abs(np.diff(field.u, axis=1)) / field.dy * field.R[:, None]))
    return AuditReport(checks, sup_delta, all(c.passed for c in checks.values()))


# ---------------------------------------------------------------------------
# literal (x, a) solver


@dataclass
class TensorField:
    grid: TimeGrid
    x: np.ndarray
    a: np.ndarray
    v: np.ndarray  # (n+1, nx, na)

    def value(self, k: int, x: float, a: float) -> float:
        i = np.clip(np.searchsorted(self.x, x) - 1, 0, self.x.size - 2)
        j = np.clip(np.searchsorted(self.a, a) - 1, 0, self.a.size - 2)
        wx = (x - self.x[i]) / (self.x[i + 1] - self.x[i])
        wa = (a - self.a[j]) / (self.a[j + 1] - self.a[j])
        V = self.v[k]
        return float(
            (1 - wx) * (1 - wa) * V[i, j] + wx * (1 - wa) * V[i + 1, j] + (1 - wx) * wa * V[i, j + 1] + wx * wa * V[i + 1, j + 1]
        )


def bsb_solve_xa(problem: UvmProblem, nx: int = 101, na: int = 801) -> TensorField:
    """Barenblatt sweep on the ``(x, a)`` tensor grid.

    Each cell diffuses in ``x`` with the explicit monotone scheme, then
    accrues ``a -> a + c_k x`` by linear interpolation in ``a`` (an exact shift
    for atoms, a semi-Lagrangian upwind step for density mass).  The
    interpolation adds roughly ``n_steps * da^2 / 8`` of spurious variance in
    ``a``, so this is a cross-check for coarse time grids, not a production
    solver.
    """
    mu = problem.mu
    grid = problem.grid
    n, dt = grid.n_steps, grid.dt
    half = problem.y_width * problem.sigma_hi * math.sqrt(grid.horizon) * problem.x_scale or max(1.0, abs(problem.x0))
    x = np.linspace(problem.x0 - half, problem.x0 + half, nx)
    M = mu.total_mass
    a = np.linspace(min(0.0, M * x[0]), max(0.0, M * x[-1]), na)
    dx = x[1] - x[0]
    c = mu.cell_masses()
    V = np.empty((n + 1, nx, na))
    V[n] = problem.payoff(a[None, :] + c[n] * x[:, None])
    s_hi = problem.sigma_hi * problem.x_scale
    s_lo = problem.sigma_lo * problem.x_scale
    m = max(1, math.ceil(s_hi * s_hi * dt / (problem.cfl * dx * dx) - 1e-12))
    for k in range(n - 1, -1, -1):
        w = V[k + 1].copy()
        for _ in range(m):
            gam = np.zeros_like(w)
            gam[1:-1] = (w[2:] - 2 * w[1:-1] + w[:-2]) / (dx * dx)
            w = w + (dt / m) * 0.5 * (s_hi**2 * np.maximum(gam, 0) - s_lo**2 * np.maximum(-gam, 0))
        shifted = a[None, :] + c[k] * x[:, None]
        out = np.empty_like(w)
        for i in range(nx):
            out[i] = _lin_interp(shifted[i], a[0], a[1] - a[0], w[i])[0]
        V[k] = out
    return TensorField(grid, x, a, V)
