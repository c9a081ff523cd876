"""Empirical checks of the functional Ito decomposition for C^{0,1} functionals.

``F(t, X) = F(0, X) + int grad_x F dM + Gamma_t`` is built along sampled paths,
``Gamma`` is tested for orthogonality against a family of martingales, and the
frozen-path mismatch ``E^eps`` together with its dominating bounds is
evaluated on the ``(s, eps)`` lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from dirichlet_lab.errors import DomainError, GridMismatchError
from dirichlet_lab.functionals import PathFunctional, WeightMeasure
from dirichlet_lab.paths import DiscretePath, TimeGrid
from dirichlet_lab.regularize import (
    CONVERGENT,
    coquadratic_arrays,
    coquadratic_curve_arrays,
    default_ladder,
    eps_steps,
    ucp_diagnostic,
    ucp_diagnostic_mc,
)
from dirichlet_lab.simulate import ModelSpec, SeedPlan, sample

PASS, FAIL = "PASS", "FAIL"
DECAYING, STALLED = "DECAYING", "STALLED"
ROUND = 1e-12


@dataclass
class DecompositionResult:
    grid: TimeGrid
    F_path: np.ndarray
    grad: np.ndarray
    integral_path: np.ndarray
    gamma: np.ndarray
    orthogonality: dict = field(default_factory=dict)

    @property
    def max_grad_jump(self) -> float:
        """Largest knot-to-knot change of the vertical derivative (right-limit probe)."""
        g = self.grad.reshape(self.grad.shape[0], -1)
        return float(np.max(np.abs(np.diff(g, axis=0)))) if g.shape[0] > 1 else 0.0

    def gamma_path(self) -> DiscretePath:
        return DiscretePath(self.grid, self.gamma)


def decompose(F: PathFunctional, X: DiscretePath, M: Optional[DiscretePath] = None, h: Optional[float] = None) -> DecompositionResult:
    """Split ``F(., X)`` into its value at 0, a left-point integral against ``M`` and ``Gamma``.

    ``M`` defaults to ``X`` itself.  A failing derivative evaluation is re-raised
    with the offending knot index.
    """
    M = X if M is None else M
    if M.grid != X.grid or M.d != X.d:
        raise GridMismatchError("X and M must share grid and dimension")
    Fp = F.trajectory(X)
    grad = F.vertical_trajectory(X, h)
    dM = np.diff(M.values, axis=1)
    g = grad.reshape(grad.shape[0], -1)
    incr = np.sum(g[:-1].T * dM, axis=0)
    integral = np.concatenate([[0.0], np.cumsum(incr)])
    gamma = (Fp - Fp[0]) - integral
    return DecompositionResult(X.grid, Fp, grad, integral, gamma)


def default_martingales(X: DiscretePath, W: DiscretePath, seed: int = 0) -> dict:
    """Test family: driving ``W``, an independent ``W'``, ``W^2 - t``, ``int X dW`` and ``X``."""
    grid = W.grid
    w = W.x
    w2 = SeedPlan(seed).generator(0, stream=7).standard_normal(grid.n_steps) * math.sqrt(grid.dt)
    wind = np.concatenate([[0.0], np.cumsum(w2)])
    xdw = np.concatenate([[0.0], np.cumsum(X.x[:-1] * np.diff(w))])
    return {
        "W": W,
        "W_indep": DiscretePath(grid, wind),
        "W2_minus_t": DiscretePath(grid, w * w - grid.knots),
        "int_X_dW": DiscretePath(grid, xdw),
        "X": X,
    }


@dataclass
class OrthogonalityReport:
    verdict: str
    per_martingale: dict
    limits: dict

    def as_dict(self):
        return {
            "verdict": self.verdict,
            "per_martingale": {k: v.as_dict() for k, v in self.per_martingale.items()},
            "limits": self.limits,
        }


def orthogonality_test(gamma, martingales: dict, epsilons: Optional[Sequence[float]] = None, tol: float = 0.05) -> OrthogonalityReport:
    """Cauchy check that ``[Gamma, N]^eps -> 0`` for every ``N`` in the family.

    Curves are normalized by ``sqrt([N, N]^eps_T) * sup|Gamma - Gamma_0| / sqrt(T)``
    (finest epsilon), the Cauchy-Schwarz scale of the bracket, so that ``tol``
    is dimensionless.  ``limits`` holds the raw terminal bracket at the finest
    epsilon.
    """
    if not martingales:
        raise DomainError("martingale family is empty")
    gp = gamma if isinstance(gamma, DiscretePath) else None
    if gp is None:
        raise TypeError("gamma must be a DiscretePath")
    grid = gp.grid
    g = gp.x
    eps = default_ladder(grid) if epsilons is None else list(epsilons)
    ms = [eps_steps(grid, e) for e in eps]
    gscale = float(np.max(np.abs(g - g[0]))) / math.sqrt(grid.horizon)
    per, limits = {}, {}
    for name, N in martingales.items():
        if N.grid != grid:
            raise GridMismatchError(f"martingale {name} is on another grid")
        nx = N.x
        curves = {e: coquadratic_curve_arrays(g, nx, m) for e, m in zip(eps, ms)}
        nn = coquadratic_arrays(nx, nx, ms[-1], grid.n_steps)
        scale = math.sqrt(max(nn, 0.0)) * gscale
        norm = {e: (c / scale if scale > 0 else np.zeros_like(c)) for e, c in curves.items()}
        per[name] = ucp_diagnostic(norm, tol=tol, reference=0.0)
        limits[name] = float(curves[eps[-1]][-1])
    ok = all(v.verdict == CONVERGENT for v in per.values())
    return OrthogonalityReport(PASS if ok else FAIL, per, limits)


def frozen_gaps(F: PathFunctional, X: DiscretePath, m: int) -> np.ndarray:
    """``F_{s+m}(X) - F_{s+m}(Y^s)`` for ``s = 0..n-m``.

    ``Y^s`` equals ``X`` up to ``s``, stays at ``X_s`` strictly inside
    ``(s, s+m)`` and is ``X_{s+m}`` from ``s+m`` on.
    """
    n = X.grid.n_steps
    if not 1 <= m <= n:
        raise DomainError(f"window of {m} steps does not fit in {n}")
    if F.gap is not None:
        return np.asarray(F.gap(X.values, X.grid, m), dtype=float)
    v = X.values
    out = np.empty(n - m + 1)
    for s in range(n - m + 1):
        y = np.array(v, copy=True)
        y[:, s + 1 : s + m] = v[:, s : s + 1]
        y[:, s + m :] = v[:, s + m : s + m + 1]
        out[s] = F.fn(s + m, v, X.grid) - F.fn(s + m, y, X.grid)
    return out


def condition_E_eps(F: PathFunctional, X: DiscretePath, eps: float) -> float:
    """``(1/eps) int (F_{s+eps}(X) - F_{s+eps}(frozen path))^2 ds`` on the grid.

    The ``ds`` integral runs over the knots with ``s + eps <= T``.
    """
    m = eps_steps(X.grid, eps)
    gaps = frozen_gaps(F, X, m)
    return float(np.sum(gaps * gaps) / m)


def cns_term(F: PathFunctional, X: DiscretePath, N: DiscretePath, eps: float) -> float:
    """Cross term ``(1/eps) int gap_s (N_{s+eps} - N_s) ds`` controlled by ``E^eps``."""
    m = eps_steps(X.grid, eps)
    gaps = frozen_gaps(F, X, m)
    n = X.grid.n_steps
    dn = N.x[m:] - N.x[: n - m + 1]
    return float(np.sum(gaps * dn) / m)


@dataclass
class EepsSweep:
    epsilons: list
    values: np.ndarray  # (n_paths, n_eps)
    median: np.ndarray
    q10: np.ndarray
    q90: np.ndarray
    verdict: str
    tol: float

    def as_dict(self):
        return {
            "epsilons": self.epsilons,
            "median": self.median.tolist(),
            "q10": self.q10.tolist(),
            "q90": self.q90.tolist(),
            "verdict": self.verdict,
            "tol": self.tol,
            "E_eps_max": float(np.max(self.values)) if self.values.size else 0.0,
        }


def E_eps_sweep(F: PathFunctional, paths: Sequence[DiscretePath], epsilons: Optional[Sequence[float]] = None, tol: float = 1e-2) -> EepsSweep:
    """``E^eps`` over a ladder and a set of sampled paths.

    ``DECAYING`` when the across-path median strictly decreases as epsilon
    shrinks (or is identically zero) and its last value is below ``tol``;
    ``STALLED`` otherwise.
    """
    grid = paths[0].grid
    eps = default_ladder(grid) if epsilons is None else list(epsilons)
    vals = np.array([[condition_E_eps(F, p, e) for e in eps] for p in paths])
    return summarize_E_eps(vals, eps, tol)


def summarize_E_eps(vals: np.ndarray, eps: Sequence[float], tol: float = 1e-2) -> EepsSweep:
    """Build an :class:`EepsSweep` from a ``(n_paths, n_eps)`` table of values."""
    vals = np.atleast_2d(np.asarray(vals, dtype=float))
    eps = list(eps)
    med = np.median(vals, axis=0)
    zero = bool(np.all(vals == 0.0))
    ok = zero or (bool(np.all(np.diff(med) < 0)) and med[-1] < tol)
    return EepsSweep(eps, vals, med, np.quantile(vals, 0.1, axis=0), np.quantile(vals, 0.9, axis=0), DECAYING if ok else STALLED, tol)


@dataclass
class BoundReport:
    n_checks: int
    n_violations: int
    max_violation: float
    implied_E: dict
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "n_checks": self.n_checks,
            "n_violations": self.n_violations,
            "max_violation": self.max_violation,
            "implied_E": {str(k): v for k, v in self.implied_E.items()},
            **self.extra,
        }


def _steps_list(grid: TimeGrid, steps):
    return list(range(1, grid.n_steps + 1)) if steps is None else [int(m) for m in steps]


def _db(b, grid: TimeGrid, x_values) -> np.ndarray:
    """Increment of the non-decreasing ``b`` attributed to each knot."""
    if isinstance(b, WeightMeasure):
        b.check_grid(grid)
        return b.cell_masses()
    B = np.asarray(b(x_values) if callable(b) else b, dtype=float)
    if B.shape != (grid.n_steps + 1,):
        raise GridMismatchError("cumulative b must have one value per knot")
    if np.any(np.diff(B) < 0):
        raise DomainError("b must be non-decreasing")
    return np.diff(np.concatenate([[0.0], B]))


def _compare(gaps_by_m: dict, bounds_by_m: dict) -> tuple:
    n_checks, n_viol, worst = 0, 0, -np.inf
    for m, gap in gaps_by_m.items():
        bound = bounds_by_m[m]
        slack = ROUND * (1.0 + np.abs(bound) + np.abs(gap))
        v = np.abs(gap) - bound
        n_checks += v.size
        n_viol += int(np.sum(v > slack))
        worst = max(worst, float(np.max(v)))
    return n_checks, n_viol, worst


def bound_check_domination(F: PathFunctional, paths: Sequence[DiscretePath], phi: Callable, b, steps=None) -> BoundReport:
    """Check ``|gap(s, eps)| <= int_(s, s+eps) phi(x, |x_u - x_s|) db_u`` on every path.

    Parameters
    ----------
    phi : callable
        ``phi(x_values, y)`` vectorized in ``y >= 0``.
    b : WeightMeasure, array or callable
        Measure whose cell masses give ``db``, or the cumulative non-decreasing
        path ``b`` (one value per knot), or ``b(x_values)`` returning it.
    steps : list of int, optional
        Window lengths in grid steps; all of ``1..n`` by default.
    """
    grid = paths[0].grid
    ms = _steps_list(grid, steps)
    n = grid.n_steps
    total_checks, total_viol, worst = 0, 0, -np.inf
    implied = {m * grid.dt: [] for m in ms}
    for X in paths:
        x = X.x
        db = _db(b, grid, X.values)
        gaps = {m: frozen_gaps(F, X, m) for m in ms}
        bounds = {m: np.empty(n - m + 1) for m in ms}
        for s in range(n):
            contrib = np.asarray(phi(X.values, np.abs(x[s + 1 :] - x[s])), dtype=float) * db[s + 1 :]
            cum = np.concatenate([[0.0], np.cumsum(contrib)])
            for m in ms:
                if s + m <= n:
                    bounds[m][s] = cum[m - 1]
        for m in ms:
            bounds[m][n - m + 1 :] = 0.0
            implied[m * grid.dt].append(float(np.sum(bounds[m] ** 2) / m))
        c, v, w = _compare(gaps, bounds)
        total_checks += c
        total_viol += v
        worst = max(worst, w)
    return BoundReport(total_checks, total_viol, worst, {e: float(np.median(v)) for e, v in implied.items()})


def bound_check_frechet(F: PathFunctional, paths: Sequence[DiscretePath], mu_hat: WeightMeasure, steps=None) -> BoundReport:
    """Domination by a finite measure: ``|gap| <= int_(s, s+eps) |x_u - x_s| dmu_hat``."""
    return bound_check_domination(F, paths, lambda x, y: y, mu_hat, steps)


def bound_check_modulus(F: PathFunctional, paths: Sequence[DiscretePath], phi2: Callable, steps=None) -> BoundReport:
    """Check ``|gap(s, eps)| <= phi2(x, ||x_{(s+eps)^} - x_{s^}||, eps)``.

    Also reports ``C_eps = sup_s phi2 / ||x_{(s+eps)^} - x_{s^}||`` per epsilon,
    which must shrink for the bound to be useful.
    """
    grid = paths[0].grid
    ms = _steps_list(grid, steps)
    n = grid.n_steps
    total_checks, total_viol, worst = 0, 0, -np.inf
    implied = {m * grid.dt: [] for m in ms}
    c_eps = {m * grid.dt: 0.0 for m in ms}
    for X in paths:
        x = X.x
        run = np.zeros(n + 1)
        osc = {}
        for j in range(1, max(ms) + 1):
            run = np.maximum(run[: n + 1 - j], np.abs(x[j:] - x[: n + 1 - j]))
            if j in ms:
                osc[j] = run.copy()
        gaps, bounds = {}, {}
        for m in ms:
            gaps[m] = frozen_gaps(F, X, m)
            bounds[m] = np.asarray(phi2(X.values, osc[m], m * grid.dt), dtype=float) * np.ones(n - m + 1)
            implied[m * grid.dt].append(float(np.sum(bounds[m] ** 2) / m))
            nz = osc[m] > 0
            if np.any(nz):
                c_eps[m * grid.dt] = max(c_eps[m * grid.dt], float(np.max(bounds[m][nz] / osc[m][nz])))
        c, v, w = _compare(gaps, bounds)
        total_checks += c
        total_viol += v
        worst = max(worst, w)
    return BoundReport(
        total_checks,
        total_viol,
        worst,
        {e: float(np.median(v)) for e, v in implied.items()},
        {"C_eps": {str(k): v for k, v in c_eps.items()}},
    )


@dataclass
class DoobMeyerResult:
    integral: np.ndarray
    A: np.ndarray
    up_q: float
    C_hat: float
    up_fraction: float
    A_T: float
    A_sup: float
    threshold: float

    def as_dict(self):
        return {
            "up_q": self.up_q,
            "C_hat": self.C_hat,
            "up_fraction": self.up_fraction,
            "A_T": self.A_T,
            "A_sup": self.A_sup,
            "threshold": self.threshold,
        }


# names used by the configuration and reporting layer
bound_check_prop211 = bound_check_domination
bound_check_prop213 = bound_check_modulus


def doob_meyer_extract(F: PathFunctional, X: DiscretePath, quantile: float = 0.99, threshold: Optional[float] = None) -> DoobMeyerResult:
    """Martingale part and remainder ``A`` of ``F(., X)`` along a martingale sample.

    Reports the ``quantile`` of the positive increments of ``A``, the constant
    ``C_hat = q / sqrt(dt)``, and the fraction of steps whose up-move exceeds
    ``threshold`` (default ``sqrt(dt) * C_hat``, i.e. the quantile itself).
    """
    res = decompose(F, X)
    A = res.gamma
    up = np.maximum(np.diff(A), 0.0)
    q = float(np.quantile(up, quantile)) if up.size else 0.0
    dt = X.grid.dt
    thr = q if threshold is None else float(threshold)
    frac = float(np.mean(up > thr)) if up.size else 0.0
    return DoobMeyerResult(res.integral_path, A, q, q / math.sqrt(dt), frac, float(A[-1]), float(np.max(np.abs(A))), thr)


@dataclass
class WeakDirichletReport:
    epsilons: list
    AA_T: np.ndarray
    AA_ratios: np.ndarray
    AM: object
    growth_ok: bool
    verdict: str

    def as_dict(self):
        return {
            "epsilons": self.epsilons,
            "AA_T": self.AA_T.tolist(),
            "AA_ratios": self.AA_ratios.tolist(),
            "AM": self.AM.as_dict(),
            "growth_ok": self.growth_ok,
            "verdict": self.verdict,
        }


def weak_dirichlet_diagnostic(
    model: ModelSpec,
    grid: TimeGrid,
    seeds: Sequence[int] = tuple(range(20)),
    epsilons: Optional[Sequence[float]] = None,
    tol: float = 0.02,
    min_ratio: float = 1.2,
) -> WeakDirichletReport:
    """Orthogonal but rough: ``[A, M]^eps -> 0`` while ``[A, A]^eps_T`` keeps growing.

    ``[A, M]^eps`` curves are divided by ``sqrt([A, A]^eps_T T)`` at the same
    epsilon and judged by :func:`ucp_diagnostic_mc` over ``seeds`` against the
    zero reference.  Growth asks every ratio ``[A, A]^{eps/2}_T / [A, A]^eps_T``
    along the ladder to reach ``min_ratio``.
    """
    if model.kind != "weak_dirichlet_demo":
        raise DomainError("model must be of kind weak_dirichlet_demo")
    eps = default_ladder(grid, 3, 11) if epsilons is None else list(epsilons)
    ms = [eps_steps(grid, e) for e in eps]
    n = grid.n_steps
    A = None
    sets = []
    for sd in seeds:
        b = sample(model, grid, SeedPlan(int(sd)), 1)
        if A is None:
            A = b.A[0]
            aa = np.array([coquadratic_arrays(A, A, m, n) for m in ms])
            scale = np.sqrt(aa * grid.horizon)
        M = b.M[0]
        sets.append({e: coquadratic_curve_arrays(A, M, m) / sc for e, m, sc in zip(eps, ms, scale)})
    ratios = aa[1:] / aa[:-1]
    growth = bool(np.all(ratios >= min_ratio))
    am = ucp_diagnostic_mc(sets, tol=tol, reference=0.0)
    ok = growth and am.verdict == CONVERGENT
    return WeakDirichletReport(eps, aa, ratios, am, growth, PASS if ok else FAIL)
