"""Non-anticipative path functionals and their Dupire derivatives.

A functional is evaluated at grid knots only.  The underlying callable receives
``(k, values, grid)`` where ``values`` has shape ``(d, n_steps + 1)`` and must
only read columns ``0..k``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from dirichlet_lab.errors import DomainError, EvaluationError, GridMismatchError
from dirichlet_lab.paths import DiscretePath, TimeGrid, stop_values

EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# weight measures


@dataclass(frozen=True)
class WeightMeasure:
    """Finite positive measure on ``[0, T]``: piecewise-constant density plus atoms.

    Parameters
    ----------
    density : array_like
        Density per unit time on each cell ``[t_i, t_{i+1})``; its length fixes
        the number of grid steps.
    atoms : sequence of (index, mass)
        Point masses at knot indices ``0..n``.  An atom at ``n`` sits at ``T``.
    horizon : float
    """

    density: np.ndarray
    atoms: tuple = ()
    horizon: float = 1.0

    def __post_init__(self):
        w = np.array(self.density, dtype=float).reshape(-1)
        if w.size < 1 or not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DomainError("density weights must be finite and non-negative")
        atoms = tuple(sorted((int(k), float(m)) for k, m in self.atoms))
        idx = [k for k, _ in atoms]
        if len(set(idx)) != len(idx):
            raise DomainError("atom knots must be distinct")
        for k, m in atoms:
            if not 0 <= k <= w.size:
                raise DomainError(f"atom index {k} outside [0, {w.size}]")
            if not (math.isfinite(m) and m > 0):
                raise DomainError(f"atom mass must be positive, got {m}")
        w.setflags(write=False)
        object.__setattr__(self, "density", w)
        object.__setattr__(self, "atoms", atoms)
        if not self.total_mass > 0:
            raise DomainError("measure must have positive total mass")

    @property
    def n_steps(self) -> int:
        return self.density.size

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.horizon, self.n_steps)

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def atom_masses(self) -> np.ndarray:
        out = np.zeros(self.n_steps + 1)
        for k, m in self.atoms:
            out[k] = m
        return out

    def cell_masses(self) -> np.ndarray:
        """Mass attached to each knot: ``w_i dt`` for the cell starting there plus any atom."""
        c = self.atom_masses()
        c[:-1] += self.density * self.dt
        return c

    @property
    def total_mass(self) -> float:
        return float(self.cell_masses().sum())

    def tail_mass(self) -> np.ndarray:
        """``R_k = mu([t_k, T])`` for every knot."""
        c = self.cell_masses()
        return np.cumsum(c[::-1])[::-1].copy()

    def check_grid(self, grid: TimeGrid):
        if grid.n_steps != self.n_steps or not math.isclose(grid.horizon, self.horizon, rel_tol=1e-12):
            raise GridMismatchError(f"measure on {self.n_steps} steps / T={self.horizon} used with {grid}")

    def scaled(self, factor: float) -> "WeightMeasure":
        return WeightMeasure(self.density * factor, tuple((k, m * factor) for k, m in self.atoms), self.horizon)

    @classmethod
    def uniform(cls, grid: TimeGrid, total: float = 1.0) -> "WeightMeasure":
        return cls(np.full(grid.n_steps, total / grid.horizon), (), grid.horizon)

    @classmethod
    def atom_at_horizon(cls, grid: TimeGrid, mass: float = 1.0) -> "WeightMeasure":
        return cls(np.zeros(grid.n_steps), ((grid.n_steps, mass),), grid.horizon)

    def to_dict(self) -> dict:
        return {
            "density": [float(w) for w in self.density],
            "atoms": [{"index": k, "mass": m} for k, m in self.atoms],
            "horizon": self.horizon,
        }

    @classmethod
    def from_dict(cls, d: dict, horizon: Optional[float] = None) -> "WeightMeasure":
        atoms = tuple((a["index"], a["mass"]) for a in d.get("atoms", []))
        T = d.get("horizon", 1.0 if horizon is None else horizon)
        return cls(np.asarray(d["density"], dtype=float), atoms, float(T))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# ---------------------------------------------------------------------------
# functionals


def _scalar(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else float(v.reshape(-1)[0]) if v.size == 1 else v


@dataclass
class PathFunctional:
    """A non-anticipative map ``(t_k, path) -> real``.

    Parameters
    ----------
    fn : callable
        ``fn(k, values, grid)``; reads ``values[:, :k+1]`` only.
    vertical, second_vertical, horizontal : callable, optional
        Analytic derivatives with the same signature as ``fn``.
    along : callable, optional
        ``along(values, grid)`` returning ``F(t_k, X)`` for every knot at once.
    vertical_along : callable, optional
        Same for the vertical derivative.
    gap : callable, optional
        ``gap(values, grid, m)`` returning, for ``s = 0..n-m``, the mismatch
        ``F_{s+m}(X) - F_{s+m}(Y^s)`` where ``Y^s`` freezes ``X`` at ``X_s`` on
        ``(s, s+m)`` and jumps back to ``X_{s+m}``.
    """

    fn: Callable
    vertical: Optional[Callable] = None
    second_vertical: Optional[Callable] = None
    horizontal: Optional[Callable] = None
    markovian: bool = False
    frechet: bool = False
    name: str = "custom"
    along: Optional[Callable] = None
    vertical_along: Optional[Callable] = None
    gap: Optional[Callable] = None
    params: dict = field(default_factory=dict)

    def value_at(self, k: int, values: np.ndarray, grid: TimeGrid):
        return self.fn(k, values, grid)

    def __call__(self, t: float, path: DiscretePath) -> float:
        return self.fn(path.grid.index(t), path.values, path.grid)

    def trajectory(self, path: DiscretePath) -> np.ndarray:
        """``F(t_k, X)`` at every knot."""
        if self.along is not None:
            return np.asarray(self.along(path.values, path.grid), dtype=float)
        return np.array([self.fn(k, path.values, path.grid) for k in range(path.grid.n_steps + 1)], dtype=float)

    def vertical_trajectory(self, path: DiscretePath, h: Optional[float] = None) -> np.ndarray:
        """``grad_x F(t_k, X)`` at every knot, shape ``(n+1,)`` or ``(n+1, d)``."""
        if self.vertical_along is not None and h is None:
            return np.asarray(self.vertical_along(path.values, path.grid), dtype=float)
        out = []
        for k in range(path.grid.n_steps + 1):
            try:
                out.append(_vertical_at(self, k, path.values, path.grid, h))
            except EvaluationError as exc:
                raise EvaluationError(str(exc), t=exc.t, h=exc.h, index=k) from exc
        return np.array(out, dtype=float)


def _bumped(values: np.ndarray, k: int, y: np.ndarray) -> np.ndarray:
    out = stop_values(values, k)
    out[:, k:] += y[:, None]
    return out


def _checked(F: PathFunctional, k, values, grid, h):
    v = F.fn(k, values, grid)
    if not np.all(np.isfinite(v)):
        raise EvaluationError(f"non-finite value of {F.name} at t={k * grid.dt}, h={h}", t=k * grid.dt, h=h, index=k)
    return float(v)


def default_step(x_t: float, order: int = 1) -> float:
    """Central-difference step: ``eps^(1/2)`` for first and ``eps^(1/4)`` for second derivatives."""
    base = math.sqrt(EPS) if order == 1 else EPS**0.25
    return base * max(1.0, abs(float(x_t)))


def _vertical_at(F: PathFunctional, k: int, values: np.ndarray, grid: TimeGrid, h=None):
    if F.vertical is not None and h is None:
        return _scalar(F.vertical(k, values, grid))
    d = values.shape[0]
    grad = np.empty(d)
    for j in range(d):
        hj = default_step(values[j, k]) if h is None else float(h)
        if not hj > 0:
            raise DomainError(f"bump size must be positive, got {hj}")
        e = np.zeros(d)
        e[j] = hj
        up = _checked(F, k, _bumped(values, k, e), grid, hj)
        dn = _checked(F, k, _bumped(values, k, -e), grid, hj)
        grad[j] = (up - dn) / (2.0 * hj)
    return float(grad[0]) if d == 1 else grad


def vertical_derivative(F: PathFunctional, t: float, x: DiscretePath, h: Optional[float] = None):
    """Dupire vertical derivative at ``t``.

    The analytic derivative is used when ``F`` carries one and no explicit ``h``
    is given; otherwise a central difference of ``y -> F(t, x_{t^} (+)_t y)``.
    Returns a float for scalar paths and a gradient vector otherwise.
    """
    return _vertical_at(F, x.grid.index(t), x.values, x.grid, h)


def second_vertical_derivative(F: PathFunctional, t: float, x: DiscretePath, h: Optional[float] = None):
    """Central second difference in the vertical direction (diagonal for d > 1)."""
    k = x.grid.index(t)
    if F.second_vertical is not None and h is None:
        return _scalar(F.second_vertical(k, x.values, x.grid))
    d = x.d
    out = np.empty(d)
    mid = _checked(F, k, stop_values(x.values, k), x.grid, h)
    for j in range(d):
        hj = default_step(x.values[j, k], order=2) if h is None else float(h)
        if not hj > 0:
            raise DomainError(f"bump size must be positive, got {hj}")
        e = np.zeros(d)
        e[j] = hj
        up = _checked(F, k, _bumped(x.values, k, e), x.grid, hj)
        dn = _checked(F, k, _bumped(x.values, k, -e), x.grid, hj)
        out[j] = (up - 2.0 * mid + dn) / (hj * hj)
    return float(out[0]) if d == 1 else out


def horizontal_derivative(F: PathFunctional, t: float, x: DiscretePath, h: Optional[float] = None) -> float:
    """One-sided time derivative along the path stopped at ``t``.

    ``h`` defaults to one grid step and is snapped to a whole number of steps.
    """
    grid = x.grid
    k = grid.index(t)
    j = 1 if h is None else grid.steps(h)
    if F.horizontal is not None and h is None:
        return _scalar(F.horizontal(k, x.values, grid))
    if j < 1:
        raise DomainError(f"horizontal step {h} is below one grid step {grid.dt}")
    if k + j > grid.n_steps:
        raise DomainError(f"t + h = {(k + j) * grid.dt} beyond horizon {grid.horizon}")
    xs = stop_values(x.values, k)
    return (_checked(F, k + j, xs, grid, h) - _checked(F, k, xs, grid, h)) / (j * grid.dt)


# ---------------------------------------------------------------------------
# modulus probe


@dataclass
class ModulusTable:
    edges: np.ndarray
    maxima: np.ndarray
    counts: np.ndarray
    verdict: str

    def as_dict(self):
        return {
            "edges": self.edges.tolist(),
            "maxima": self.maxima.tolist(),
            "counts": self.counts.tolist(),
            "verdict": self.verdict,
        }


def modulus_probe(
    F: PathFunctional,
    K: float,
    n_samples: int = 2000,
    seed: int = 0,
    grid: Optional[TimeGrid] = None,
    n_bins: int = 8,
    noise: float = 0.1,
) -> ModulusTable:
    """Empirical local modulus of continuity on the ball of radius ``K``.

    For random ``(t, h, y, x)`` with ``|x| <= K`` and ``|y| <= K`` records
    ``|F(t,x) - F(t+h, x_{t^})| + |F(t,x) - F(t, x (+)_t y)|`` against ``h + |y|``
    and keeps the maximum per bin.  The verdict is ``consistent with modulus``
    when the bin maxima are non-decreasing in the bin width up to ``noise``
    (relative to the largest maximum) and the narrowest bin is at most half of
    the widest.
    """
    if not K > 0:
        raise DomainError(f"K must be positive, got {K}")
    grid = grid or TimeGrid(1.0, 128)
    rng = np.random.default_rng(seed)
    n = grid.n_steps
    widths = np.empty(n_samples)
    vals = np.empty(n_samples)
    for i in range(n_samples):
        w = np.concatenate([[0.0], np.cumsum(rng.standard_normal(n))])
        scale = np.max(np.abs(w))
        x = (K * rng.uniform() * w / scale if scale > 0 else w)[None, :]
        k = int(rng.integers(0, n))
        j = int(rng.integers(0, n - k + 1))
        y = K * rng.uniform(-1.0, 1.0)
        base = F.fn(k, x, grid)
        xs = stop_values(x, k)
        a = abs(base - F.fn(k + j, xs, grid))
        b = abs(base - F.fn(k, _bumped(x, k, np.array([y])), grid))
        widths[i] = j * grid.dt + abs(y)
        vals[i] = a + b
    edges = np.linspace(0.0, grid.horizon + K, n_bins + 1)
    idx = np.clip(np.searchsorted(edges, widths, side="right") - 1, 0, n_bins - 1)
    maxima = np.zeros(n_bins)
    counts = np.bincount(idx, minlength=n_bins)
    np.maximum.at(maxima, idx, vals)
    top = maxima.max()
    if top == 0.0:
        verdict = "consistent with modulus"
    else:
        filled = maxima[counts > 0]
        drops = np.maximum.accumulate(filled) - filled
        ok = np.all(drops <= noise * top) and filled[0] <= 0.5 * filled[-1]
        verdict = "consistent with modulus" if ok else "inconclusive"
    return ModulusTable(edges, maxima, counts, verdict)


# ---------------------------------------------------------------------------
# catalog


def markovian(f: Callable, vectorized: bool = False, df: Optional[Callable] = None, d2f: Optional[Callable] = None, name="markovian") -> PathFunctional:
    """``F(t, x) = f(t, x_t)``.

    ``f`` receives a float state for scalar paths and a length-``d`` vector
    otherwise.  With ``vectorized=True`` it must also accept arrays of times
    and states (scalar paths only), which speeds up trajectories.
    """

    def state(values, k):
        return float(values[0, k]) if values.shape[0] == 1 else values[:, k].copy()

    def fn(k, values, grid):
        return f(k * grid.dt, state(values, k))

    along = None
    vert_along = None
    if vectorized:

        def along(values, grid):
            return np.asarray(f(grid.knots, values[0]), dtype=float) * np.ones(grid.n_steps + 1)

        if df is not None:

            def vert_along(values, grid):
                return np.asarray(df(grid.knots, values[0]), dtype=float) * np.ones(grid.n_steps + 1)

    vertical = (lambda k, values, grid: df(k * grid.dt, state(values, k))) if df is not None else None
    second = (lambda k, values, grid: d2f(k * grid.dt, state(values, k))) if d2f is not None else None

    def gap(values, grid, m):
        return np.zeros(grid.n_steps - m + 1)

    return PathFunctional(
        fn,
        vertical=vertical,
        second_vertical=second,
        markovian=True,
        frechet=True,
        name=name,
        along=along,
        vertical_along=vert_along,
        gap=gap,
    )


def square() -> PathFunctional:
    """``F(t, x) = x_t^2``."""
    return markovian(
        lambda t, x: x * x, vectorized=True, df=lambda t, x: 2.0 * x, d2f=lambda t, x: 2.0 + 0.0 * x, name="square"
    )


def identity() -> PathFunctional:
    """``F(t, x) = x_t``."""
    return markovian(
        lambda t, x: x + 0.0 * t, vectorized=True, df=lambda t, x: 1.0 + 0.0 * x, d2f=lambda t, x: 0.0 * x, name="identity"
    )


def _window_sums(c: np.ndarray, x: np.ndarray, m: int):
    """For s = 0..n-m: sums over i in (s, s+m) of c_i and c_i x_i."""
    C = np.concatenate([[0.0], np.cumsum(c)])
    CX = np.concatenate([[0.0], np.cumsum(c * x)])
    s = np.arange(x.size - m)
    lo, hi = s + 1, s + m
    return C[hi] - C[lo], CX[hi] - CX[lo]


def running_integral(mu: WeightMeasure) -> PathFunctional:
    """``F(t_k, x) = sum_{i<k} x_i w_i dt + sum_{atoms a <= k} x_a m_a``.

    The density part is a left-point rule over ``[0, t)``; atoms count from the
    knot they sit on, so the vertical derivative at ``t`` is ``mu({t})``.
    """
    dens = np.concatenate([mu.density * mu.dt, [0.0]])
    atoms = mu.atom_masses()
    cells = dens + atoms

    def fn(k, values, grid):
        mu.check_grid(grid)
        x = values[0]
        return float(np.dot(dens[:k], x[:k]) + np.dot(atoms[: k + 1], x[: k + 1]))

    def along(values, grid):
        mu.check_grid(grid)
        x = values[0]
        dpart = np.concatenate([[0.0], np.cumsum(dens[:-1] * x[:-1])])
        return dpart + np.cumsum(atoms * x)

    def vertical(k, values, grid):
        return float(atoms[k])

    def vertical_along(values, grid):
        return atoms.copy()

    def horizontal(k, values, grid):
        return float(values[0, k] * (dens[k] / grid.dt + (atoms[k + 1] / grid.dt if k < grid.n_steps else 0.0)))

    def gap(values, grid, m):
        mu.check_grid(grid)
        x = values[0]
        csum, cxsum = _window_sums(cells, x, m)
        n = grid.n_steps
        return cxsum - x[: n - m + 1] * csum

    return PathFunctional(
        fn,
        vertical=vertical,
        second_vertical=lambda k, v, g: 0.0,
        horizontal=None if mu.atoms else horizontal,
        frechet=True,
        name="running_integral",
        along=along,
        vertical_along=vertical_along,
        gap=gap,
        params={"mu": mu},
    )


def terminal_payoff_of_integral(g: Callable, mu: WeightMeasure, dg: Optional[Callable] = None) -> PathFunctional:
    """``F(t, x) = g(integral of the stopped path x_{t^} against mu)``.

    At ``T`` this is the payoff ``g(int x dmu)``.  On the stopped path the
    integral reads ``a_k + x_k mu([t_k, T])`` with ``a_k = int_[0,t_k) x dmu``.
    """
    cells = mu.cell_masses()
    R = mu.tail_mass()

    def y_of(k, x):
        return float(np.dot(cells[:k], x[:k]) + x[k] * R[k])

    def fn(k, values, grid):
        mu.check_grid(grid)
        return float(g(y_of(k, values[0])))

    def along(values, grid):
        mu.check_grid(grid)
        x = values[0]
        a = np.concatenate([[0.0], np.cumsum(cells[:-1] * x[:-1])])
        return np.array([g(v) for v in a + x * R], dtype=float)

    vertical = None
    vertical_along = None
    if dg is not None:

        def vertical(k, values, grid):
            return float(dg(y_of(k, values[0])) * R[k])

        def vertical_along(values, grid):
            x = values[0]
            a = np.concatenate([[0.0], np.cumsum(cells[:-1] * x[:-1])])
            return np.array([dg(v) for v in a + x * R], dtype=float) * R

    def gap(values, grid, m):
        x = values[0]
        n = grid.n_steps
        a = np.concatenate([[0.0], np.cumsum(cells[:-1] * x[:-1])])
        s = np.arange(n - m + 1)
        ys = a[s + m] + x[s + m] * R[s + m]
        csum, cxsum = _window_sums(cells, x, m)
        yfrozen = ys - cxsum + x[s] * csum
        return np.array([g(u) for u in ys]) - np.array([g(u) for u in yfrozen])

    return PathFunctional(
        fn,
        vertical=vertical,
        frechet=True,
        name="terminal_payoff_of_integral",
        along=along,
        vertical_along=vertical_along,
        gap=gap,
        params={"mu": mu},
    )


def running_max() -> PathFunctional:
    """``F(t, x) = max_{s <= t} x_s`` (first component)."""

    def fn(k, values, grid):
        return float(np.max(values[0, : k + 1]))

    def along(values, grid):
        return np.maximum.accumulate(values[0])

    def gap(values, grid, m):
        x = values[0]
        n = grid.n_steps
        pre = np.maximum.accumulate(x)
        s = np.arange(n - m + 1)
        return pre[s + m] - np.maximum(pre[s], x[s + m])

    return PathFunctional(fn, name="running_max", along=along, gap=gap)


def lagged(steps: int = 1) -> PathFunctional:
    """``F(t_k, x) = x_{t_{k - steps}}``, clamped at the origin.

    Its vertical derivative vanishes, yet the value never settles under the
    frozen-path reconstruction, which makes it a useful negative control.
    """

    def fn(k, values, grid):
        return float(values[0, max(k - steps, 0)])

    def along(values, grid):
        x = values[0]
        return x[np.maximum(np.arange(x.size) - steps, 0)]

    def gap(values, grid, m):
        x = values[0]
        s = np.arange(grid.n_steps - m + 1)
        if steps <= 0 or steps >= m:
            return np.zeros(s.size)
        return x[s + m - steps] - x[s]

    return PathFunctional(
        fn,
        vertical=lambda k, v, g: 0.0,
        name=f"lagged_{steps}",
        along=along,
        vertical_along=lambda v, g: np.zeros(v.shape[1]),
        gap=gap,
    )


CATALOG = {
    "identity": identity,
    "square": square,
    "running_max": running_max,
}
