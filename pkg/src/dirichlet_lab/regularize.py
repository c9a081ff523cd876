"""Regularization calculus at finite epsilon.

Forward integrals and co-quadratic variations are computed with ``eps = m dt``
so every shifted time ``s + eps`` is a knot, and the ``ds`` integral uses the
left-point rule.  With ``m = 1`` the forward integral is exactly the left-point
Ito sum.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from dirichlet_lab.errors import DomainError, GridMismatchError
from dirichlet_lab.paths import DiscretePath, TimeGrid

CONVERGENT = "CONVERGENT"
INCONCLUSIVE = "INCONCLUSIVE"


def eps_steps(grid: TimeGrid, eps: float) -> int:
    """Snap ``eps`` to a whole number ``m >= 1`` of grid steps."""
    if not eps > 0:
        raise DomainError(f"epsilon must be positive, got {eps}")
    m = grid.steps(eps)
    if m < 1:
        raise DomainError(f"epsilon {eps} is below the grid step {grid.dt}")
    if m > grid.n_steps:
        raise DomainError(f"epsilon {eps} exceeds the horizon {grid.horizon}")
    return m


def _pair(X, Y=None):
    if isinstance(X, DiscretePath):
        if Y is not None and (X.grid != Y.grid):
            raise GridMismatchError(f"grid mismatch: {X.grid} vs {Y.grid}")
        return X.grid, X.x, (Y.x if Y is not None else None)
    raise TypeError("expected DiscretePath inputs")


def _t_index(grid: TimeGrid, t) -> int:
    return grid.n_steps if t is None else grid.index(t)


def forward_integral_eps(H: DiscretePath, X: DiscretePath, eps: float, t: Optional[float] = None) -> float:
    """``(1/eps) sum_{s<t} H_s (X_{(s+eps)^t} - X_s) dt``."""
    grid, h, x = _pair(H, X)
    m = eps_steps(grid, eps)
    k = _t_index(grid, t)
    s = np.arange(k)
    return float(np.sum(h[:k] * (x[np.minimum(s + m, k)] - x[:k])) / m)


def forward_integral_curve(H: DiscretePath, X: DiscretePath, eps: float) -> np.ndarray:
    """Forward integral at every knot, in O(n)."""
    grid, h, x = _pair(H, X)
    m = eps_steps(grid, eps)
    n = grid.n_steps
    P = np.concatenate([[0.0], np.cumsum(h[: n + 1 - m] * (x[m:] - x[: n + 1 - m]))])
    cH = np.concatenate([[0.0], np.cumsum(h)])
    cHX = np.concatenate([[0.0], np.cumsum(h * x)])
    t = np.arange(n + 1)
    full = np.maximum(t - m + 1, 0)
    lo = full
    win = x * (cH[t] - cH[lo]) - (cHX[t] - cHX[lo])
    return (P[np.minimum(full, P.size - 1)] + win) / m


def coquadratic_eps(X: DiscretePath, Y: DiscretePath, eps: float, t: Optional[float] = None) -> float:
    """``(1/eps) sum_{s<t} (X_{(s+eps)^t} - X_s)(Y_{(s+eps)^t} - Y_s) dt``."""
    grid, x, y = _pair(X, Y)
    return coquadratic_arrays(x, y, eps_steps(grid, eps), _t_index(grid, t))


def coquadratic_arrays(x: np.ndarray, y: np.ndarray, m: int, k: int) -> float:
    s = np.arange(k)
    j = np.minimum(s + m, k)
    return float(np.sum((x[j] - x[:k]) * (y[j] - y[:k])) / m)


def coquadratic_curve_arrays(x: np.ndarray, y: np.ndarray, m: int) -> np.ndarray:
    """Co-quadratic variation at every knot in O(n).

    Terms with ``s + m <= t`` come from a prefix sum; the ``m - 1`` most recent
    terms are truncated at ``t`` and expanded into window sums.  The expression
    is symmetric in ``x`` and ``y`` term by term.
    """
    n = x.size - 1
    P = np.concatenate([[0.0], np.cumsum((x[m:] - x[:-m]) * (y[m:] - y[:-m]))])
    cX = np.concatenate([[0.0], np.cumsum(x)])
    cY = np.concatenate([[0.0], np.cumsum(y)])
    cXY = np.concatenate([[0.0], np.cumsum(x * y)])
    t = np.arange(n + 1)
    lo = np.maximum(t - m + 1, 0)
    cnt = t - lo
    SX = cX[t] - cX[lo]
    SY = cY[t] - cY[lo]
    SXY = cXY[t] - cXY[lo]
    win = (cnt * x * y + SXY) - (x * SY + y * SX)
    return (P[np.minimum(lo, P.size - 1)] + win) / m


def coquadratic_curve(X: DiscretePath, Y: DiscretePath, eps: float) -> np.ndarray:
    grid, x, y = _pair(X, Y)
    return coquadratic_curve_arrays(x, y, eps_steps(grid, eps))


def default_ladder(grid: TimeGrid, k_min: int = 3, k_max: int = 10) -> list:
    """Dyadic ladder ``T / 2^k``, keeping only values of at least one grid step."""
    out = [grid.horizon / 2**k for k in range(k_min, k_max + 1)]
    return [e for e in out if grid.steps(e) >= 1]


@dataclass
class EpsSweep:
    """Curves indexed by grid time for a strictly decreasing epsilon ladder."""

    grid: TimeGrid
    epsilons: list
    curves: dict = field(default_factory=dict)

    def __post_init__(self):
        eps = [float(e) for e in self.epsilons]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise DomainError("epsilon ladder must be strictly decreasing")
        for e in eps:
            eps_steps(self.grid, e)
        self.epsilons = eps

    @property
    def steps(self) -> list:
        return [eps_steps(self.grid, e) for e in self.epsilons]

    def terminal(self) -> np.ndarray:
        return np.array([self.curves[e][-1] for e in self.epsilons])

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "eps", "value"])
        knots = self.grid.knots
        for e in self.epsilons:
            for t, v in zip(knots, self.curves[e]):
                w.writerow([format(float(t), ".17g"), format(e, ".17g"), format(float(v), ".17g")])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def sweep_coquadratic(X: DiscretePath, Y: DiscretePath, epsilons: Optional[Sequence[float]] = None) -> EpsSweep:
    grid, x, y = _pair(X, Y)
    epsilons = default_ladder(grid) if epsilons is None else list(epsilons)
    sw = EpsSweep(grid, epsilons)
    for e in sw.epsilons:
        sw.curves[e] = coquadratic_curve_arrays(x, y, eps_steps(grid, e))
    return sw


def quadratic_variation_curve(X: DiscretePath, sweep=None) -> EpsSweep:
    """``[X, X]^eps`` curves over a ladder (an :class:`EpsSweep` or list of epsilons)."""
    eps = sweep.epsilons if isinstance(sweep, EpsSweep) else sweep
    return sweep_coquadratic(X, X, eps)


@dataclass
class UcpVerdict:
    verdict: str
    epsilons: list
    diffs: np.ndarray
    rate: Optional[float]
    rate_flag: str
    monotone: bool
    final_diff: float
    reference_distance: Optional[float]
    tol: float

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "epsilons": list(self.epsilons),
            "diffs": [float(d) for d in self.diffs],
            "rate": self.rate,
            "rate_flag": self.rate_flag,
            "monotone": self.monotone,
            "final_diff": self.final_diff,
            "reference_distance": self.reference_distance,
            "tol": self.tol,
        }


def ucp_diagnostic(
    curves,
    tol: float = 1e-2,
    reference=None,
    noise: Optional[float] = None,
) -> UcpVerdict:
    """Cauchy-style check of a family of curves along a decreasing epsilon ladder.

    Parameters
    ----------
    curves : EpsSweep or mapping eps -> curve
    tol : float
        Bound for the last consecutive sup-difference, and for the distance of
        the finest curve to ``reference`` when one is given.
    reference : array_like or float, optional
        Expected limit.
    noise : float, optional
        Allowed increase between consecutive differences; defaults to ``tol``.
        Single samples are rarely strictly monotone, so the verdict also asks for
        a positive fitted decay rate.

    Returns
    -------
    UcpVerdict
        ``CONVERGENT`` or ``INCONCLUSIVE``; divergence is never claimed.
    """
    eps, cs = _unpack(curves)
    diffs = np.array([np.max(np.abs(a - b)) for a, b in zip(cs, cs[1:])])
    ref_dist = None
    if reference is not None:
        ref_dist = float(np.max(np.abs(cs[-1] - np.asarray(reference, dtype=float))))
    return _verdict(eps, diffs, ref_dist, tol, tol if noise is None else noise)


def ucp_diagnostic_mc(curve_sets: Sequence, tol: float = 1e-2, reference=None, noise: Optional[float] = None) -> UcpVerdict:
    """Seed-averaged variant of :func:`ucp_diagnostic`.

    Each element of ``curve_sets`` holds the ladder of curves of one sample.
    Consecutive sup-differences and the distance to ``reference`` are computed
    per sample and combined as root mean squares before the same verdict rule
    is applied.
    """
    if not curve_sets:
        raise DomainError("no samples supplied")
    per, refs, eps0 = [], [], None
    for cur in curve_sets:
        eps, cs = _unpack(cur)
        if eps0 is not None and eps != eps0:
            raise DomainError("all samples must share the epsilon ladder")
        eps0 = eps
        per.append([np.max(np.abs(a - b)) for a, b in zip(cs, cs[1:])])
        if reference is not None:
            refs.append(np.max(np.abs(cs[-1] - np.asarray(reference, dtype=float))))
    diffs = np.sqrt(np.mean(np.square(per), axis=0))
    ref_dist = float(np.sqrt(np.mean(np.square(refs)))) if refs else None
    return _verdict(eps0, diffs, ref_dist, tol, tol if noise is None else noise)


def _unpack(curves):
    if isinstance(curves, EpsSweep):
        eps = list(curves.epsilons)
        cs = [np.asarray(curves.curves[e], dtype=float) for e in eps]
    else:
        items = sorted(((float(e), np.asarray(c, dtype=float)) for e, c in dict(curves).items()), reverse=True)
        eps = [e for e, _ in items]
        cs = [c for _, c in items]
    if len(cs) < 3:
        raise DomainError(f"need at least 3 epsilon values, got {len(cs)}")
    return eps, cs


def _verdict(eps, diffs, ref_dist, tol, noise) -> UcpVerdict:
    monotone = bool(np.all(np.diff(diffs) < 0))
    pos = diffs > 0
    if pos.sum() >= 2:
        le = np.log(np.asarray(eps[:-1])[pos])
        rate = float(np.polyfit(le, np.log(diffs[pos]), 1)[0])
        flag = "fitted"
    else:
        rate = None
        flag = "undefined: differences vanish"
    final = float(diffs[-1])
    small = bool(np.all(diffs <= tol))
    trend_ok = (rate is not None and rate > 0) or small
    rises_ok = bool(np.all(np.diff(diffs) <= noise))
    ok = trend_ok and rises_ok and final < tol and (ref_dist is None or ref_dist < tol)
    return UcpVerdict(CONVERGENT if ok else INCONCLUSIVE, list(eps), diffs, rate, flag, monotone, final, ref_dist, tol)
