"""Discrete paths on a uniform time grid and the path surgery behind Dupire calculus.

All operations return fresh objects; inputs are never modified.  Values are
stored component-major with shape ``(d, n_steps + 1)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dirichlet_lab.errors import DomainError, GridMismatchError


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``0 = t_0 < ... < t_n = T``."""

    horizon: float = 1.0
    n_steps: int = 256

    def __post_init__(self):
        if not (isinstance(self.n_steps, (int, np.integer)) and self.n_steps >= 1):
            raise DomainError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise DomainError(f"horizon must be positive and finite, got {self.horizon!r}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def knots(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def index(self, t: float) -> int:
        """Snap ``t`` to the nearest knot index, ties rounding down."""
        t = float(t)
        dt = self.dt
        if not (-0.5 * dt <= t <= self.horizon + 0.5 * dt) or not math.isfinite(t):
            raise DomainError(f"time {t} outside [0, {self.horizon}]")
        k = math.ceil(t / dt - 0.5)
        return min(max(k, 0), self.n_steps)

    def steps(self, duration: float) -> int:
        """Number of whole steps closest to ``duration`` (ties down)."""
        if duration < 0:
            raise DomainError(f"negative duration {duration}")
        return math.ceil(duration / self.dt - 0.5)

    def time(self, k: int) -> float:
        if not 0 <= k <= self.n_steps:
            raise DomainError(f"knot index {k} outside [0, {self.n_steps}]")
        return k * self.dt


class DiscretePath:
    """Values of an R^d-valued path on the knots of a :class:`TimeGrid`.

    Parameters
    ----------
    grid : TimeGrid
    values : array_like
        Shape ``(n_steps + 1,)`` for a scalar path or ``(d, n_steps + 1)``.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: TimeGrid, values):
        arr = np.array(values, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != grid.n_steps + 1:
            raise GridMismatchError(
                f"values of shape {np.shape(values)} do not match a grid with {grid.n_steps + 1} knots"
            )
        if not np.all(np.isfinite(arr)):
            raise DomainError("path values must be finite")
        arr.setflags(write=False)
        self.grid = grid
        self.values = arr

    @classmethod
    def constant(cls, grid: TimeGrid, c, d: int = 1) -> "DiscretePath":
        c = np.broadcast_to(np.asarray(c, dtype=float).reshape(-1, 1), (d, grid.n_steps + 1))
        return cls(grid, c)

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def x(self) -> np.ndarray:
        """The single component of a scalar path."""
        if self.d != 1:
            raise DomainError("x is only defined for scalar (d=1) paths")
        return self.values[0]

    def at(self, k: int) -> np.ndarray:
        return self.values[:, k]

    def __len__(self):
        return self.values.shape[1]

    def __eq__(self, other):
        if not isinstance(other, DiscretePath):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"DiscretePath(grid={self.grid}, d={self.d})"

    def to_csv(self, path=None) -> str:
        """Serialize as ``t,x_1,...,x_d`` rows with 17 significant digits."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"x_{i + 1}" for i in range(self.d)])
        for k, t in enumerate(self.grid.knots):
            writer.writerow([_fmt(t)] + [_fmt(v) for v in self.values[:, k]])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "DiscretePath":
        text = source if "\n" in str(source) else Path(source).read_text()
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        if header[0] != "t" or len(body) < 2:
            raise DomainError("malformed path CSV")
        data = np.array(body, dtype=float)
        t = data[:, 0]
        grid = TimeGrid(horizon=float(t[-1]), n_steps=len(t) - 1)
        if not np.allclose(t, grid.knots, rtol=0, atol=1e-12 * max(1.0, grid.horizon)):
            raise DomainError("path CSV is not on a uniform grid")
        return cls(grid, data[:, 1:].T)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _check_same_grid(a: DiscretePath, b: DiscretePath):
    if a.grid != b.grid or a.d != b.d:
        raise GridMismatchError(f"grid mismatch: {a.grid}/d={a.d} vs {b.grid}/d={b.d}")


class StoppedView:
    """Lazy read-only view of ``base`` stopped at knot ``k``."""

    __slots__ = ("base", "k")

    def __init__(self, base: DiscretePath, k: int):
        if not 0 <= k <= base.grid.n_steps:
            raise DomainError(f"stop index {k} outside [0, {base.grid.n_steps}]")
        self.base = base
        self.k = k

    def __getitem__(self, j: int) -> np.ndarray:
        return self.base.values[:, min(j, self.k)]

    def materialize(self) -> DiscretePath:
        return DiscretePath(self.base.grid, stop_values(self.base.values, self.k))


def stop_values(values: np.ndarray, k: int) -> np.ndarray:
    out = np.array(values, dtype=float, copy=True)
    out[..., k + 1 :] = out[..., k : k + 1]
    return out


def stop(path: DiscretePath, t: float) -> DiscretePath:
    """The path stopped at ``t``: ``out_s = path_{min(s, t)}``."""
    return DiscretePath(path.grid, stop_values(path.values, path.grid.index(t)))


def vertical_bump(path: DiscretePath, t: float, y) -> DiscretePath:
    """Dupire bump: keep ``[0, t)`` and replace the tail by the constant ``x_t + y``.

    This is the operation used in vertical derivatives; on a path already
    stopped at ``t`` it coincides with :func:`tail_shift`.
    """
    k = path.grid.index(t)
    y = np.broadcast_to(np.asarray(y, dtype=float).reshape(-1), (path.d,))
    out = np.array(path.values, copy=True)
    out[:, k:] = (path.values[:, k] + y)[:, None]
    return DiscretePath(path.grid, out)


def tail_shift(path: DiscretePath, t: float, y) -> DiscretePath:
    """Add ``y`` to every value from ``t`` on, leaving the shape of the tail intact."""
    k = path.grid.index(t)
    y = np.broadcast_to(np.asarray(y, dtype=float).reshape(-1), (path.d,))
    out = np.array(path.values, copy=True)
    out[:, k:] += y[:, None]
    return DiscretePath(path.grid, out)


def sup_norm(path: DiscretePath) -> float:
    """``max_k |x_{t_k}|`` with the Euclidean norm across components."""
    return float(np.max(np.sqrt(np.sum(path.values**2, axis=0))))


def sup_distance(a: DiscretePath, b: DiscretePath) -> float:
    _check_same_grid(a, b)
    return float(np.max(np.sqrt(np.sum((a.values - b.values) ** 2, axis=0))))
