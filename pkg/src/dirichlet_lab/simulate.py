"""Seeded path generators.

Every path draws from its own counter-based substream keyed by
``(master seed, path index)``, so a path is the same whether it is generated
alone, in a batch, or on another thread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from dirichlet_lab.errors import ConfigurationError, DomainError
from dirichlet_lab.functionals import WeightMeasure
from dirichlet_lab.paths import DiscretePath, TimeGrid

KINDS = ("brownian", "uvm_policy", "diffusion", "weak_dirichlet_demo", "regime_switching")
BAND_TOL = 1e-12


@dataclass(frozen=True)
class SeedPlan:
    """Master seed plus the rule ``path index -> independent substream``."""

    master: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master) < 2**64:
            raise DomainError(f"seed must fit in 64 unsigned bits, got {self.master}")

    def generator(self, index: int, stream: int = 0) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.master), spawn_key=(int(index), int(stream)))
        return np.random.Generator(np.random.Philox(ss))

    def normals(self, index: int, n: int, stream: int = 0) -> np.ndarray:
        return self.generator(index, stream).standard_normal(n)


@dataclass
class ModelSpec:
    """Model family and its parameters.

    Parameters
    ----------
    kind : str
        ``brownian``, ``uvm_policy``, ``diffusion``, ``weak_dirichlet_demo`` or
        ``regime_switching``.
    x0 : float
    sigma : float
        Volatility of the Brownian kind and of the martingale part of the demo.
    sigma_lo, sigma_hi : float
        Volatility band for the controlled kinds.
    policy : callable, optional
        ``policy(t, x, a) -> sigma`` on arrays of current levels ``x`` and
        accrued integrals ``a``; must stay inside the band.
    mu : WeightMeasure, optional
        Measure defining the accrued integral ``a_t``.
    drift, vol : callable, optional
        ``drift(t, hist)``, ``vol(t, hist)`` with ``hist`` of shape
        ``(n_paths, k + 1)``; used by the diffusion kind.
    x_scale : float
        Absolute volatility is ``sigma * x_scale``.
    demo_a, demo_b, demo_terms, demo_period, demo_amplitude
        Weierstrass-type orthogonal component
        ``A(t) = amp * sum_{j<=J} a^j cos(b^j pi t / tau) - A(0)``.
    switch_prob : float
        Per-step switching probability of the regime-switching kind.
    """

    kind: str = "brownian"
    x0: float = 0.0
    sigma: float = 1.0
    sigma_lo: float = 0.0
    sigma_hi: float = 1.0
    policy: Optional[Callable] = None
    mu: Optional[WeightMeasure] = None
    drift: Optional[Callable] = None
    vol: Optional[Callable] = None
    x_scale: float = 1.0
    demo_a: float = 0.85
    demo_b: int = 9
    demo_terms: int = 5
    demo_period: Optional[float] = None
    demo_amplitude: float = 1.0
    switch_prob: float = 0.02
    name: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown model kind {self.kind!r}", key="kind")
        if not math.isfinite(self.x0):
            raise ConfigurationError("x0 must be finite", key="x0")
        if self.kind in ("uvm_policy", "regime_switching"):
            if not 0 <= self.sigma_lo <= self.sigma_hi:
                raise ConfigurationError("volatility band needs 0 <= sigma_lo <= sigma_hi", key="sigma_lo")
        if self.kind == "uvm_policy" and self.policy is None:
            raise ConfigurationError("uvm_policy models need a policy", key="policy")
        if self.kind == "diffusion" and (self.drift is None or self.vol is None):
            raise ConfigurationError("diffusion models need drift and vol", key="drift")
        if self.kind == "weak_dirichlet_demo":
            a, b = self.demo_a, self.demo_b
            if not 0 < a < 1:
                raise ConfigurationError("demo_a must lie in (0, 1)", key="demo_a")
            if int(b) != b or b % 2 == 0 or b < 3:
                raise ConfigurationError("demo_b must be an odd integer >= 3", key="demo_b")
            if not a * b > 1 + 1.5 * math.pi:
                raise ConfigurationError("demo needs a*b > 1 + 3 pi / 2", key="demo_a")
        if self.kind == "regime_switching" and not 0 <= self.switch_prob <= 1:
            raise ConfigurationError("switch_prob must lie in [0, 1]", key="switch_prob")

    @classmethod
    def constant(cls, sigma: float, x0: float = 0.0, x_scale: float = 1.0, band=None, mu=None, name="") -> "ModelSpec":
        lo, hi = band if band is not None else (sigma, sigma)
        return cls(
            kind="uvm_policy",
            x0=x0,
            sigma_lo=lo,
            sigma_hi=hi,
            policy=lambda t, x, a: np.full(np.shape(x), float(sigma)),
            x_scale=x_scale,
            mu=mu,
            name=name or f"constant {sigma}",
        )


def weierstrass_component(model: ModelSpec, grid: TimeGrid) -> np.ndarray:
    tau = model.demo_period or grid.horizon
    t = grid.knots
    A = np.zeros_like(t)
    for j in range(model.demo_terms + 1):
        A += model.demo_a**j * np.cos(model.demo_b**j * math.pi * t / tau)
    A *= model.demo_amplitude
    return A - A[0]


@dataclass
class SampleBatch:
    """Simulated paths as a ``(n_paths, n_steps + 1)`` array plus companions."""

    grid: TimeGrid
    X: np.ndarray
    W: np.ndarray
    start: int = 0
    M: Optional[np.ndarray] = None
    A: Optional[np.ndarray] = None
    sigma: Optional[np.ndarray] = None
    flags: dict = field(default_factory=dict)

    def __len__(self):
        return self.X.shape[0]

    def path(self, i: int) -> DiscretePath:
        return DiscretePath(self.grid, self.X[i])

    def paths(self) -> list:
        return [self.path(i) for i in range(len(self))]

    def brownian(self, i: int) -> DiscretePath:
        return DiscretePath(self.grid, self.W[i])


def _brownian_increments(plan: SeedPlan, grid: TimeGrid, n_paths: int, start: int) -> np.ndarray:
    sq = math.sqrt(grid.dt)
    return np.stack([plan.normals(start + i, grid.n_steps) for i in range(n_paths)]) * sq


def _cumulate(x0: float, inc: np.ndarray) -> np.ndarray:
    out = np.empty((inc.shape[0], inc.shape[1] + 1))
    out[:, 0] = x0
    out[:, 1:] = x0 + np.cumsum(inc, axis=1)
    return out


def _check_band(sig: np.ndarray, model: ModelSpec, k: int):
    bad = (sig < model.sigma_lo - BAND_TOL) | (sig > model.sigma_hi + BAND_TOL) | ~np.isfinite(sig)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise ConfigurationError(
            f"policy volatility {float(sig[i])} outside band [{model.sigma_lo}, {model.sigma_hi}] at step {k}",
            key="policy",
            index=i,
        )


def sample(model: ModelSpec, grid: TimeGrid, seed_plan, n_paths: int, start: int = 0) -> SampleBatch:
    """Euler-Maruyama paths ``start .. start + n_paths - 1`` of ``model``.

    ``seed_plan`` may be a :class:`SeedPlan` or an integer master seed.
    """
    if n_paths < 1:
        raise DomainError(f"n_paths must be >= 1, got {n_paths}")
    plan = seed_plan if isinstance(seed_plan, SeedPlan) else SeedPlan(int(seed_plan))
    dW = _brownian_increments(plan, grid, n_paths, start)
    W = _cumulate(0.0, dW)
    n, dt = grid.n_steps, grid.dt
    knots = grid.knots

    if model.kind == "brownian":
        X = _cumulate(model.x0, model.sigma * model.x_scale * dW)
        return SampleBatch(grid, X, W, start)

    if model.kind == "weak_dirichlet_demo":
        M = model.sigma * model.x_scale * W
        A = np.broadcast_to(weierstrass_component(model, grid), M.shape)
        X = model.x0 + M + A
        return SampleBatch(grid, X, W, start, M=M, A=np.array(A))

    if model.kind == "diffusion":
        X = np.empty((n_paths, n + 1))
        X[:, 0] = model.x0
        for k in range(n):
            hist = X[:, : k + 1]
            b = np.broadcast_to(np.asarray(model.drift(knots[k], hist), dtype=float), (n_paths,))
            s = np.broadcast_to(np.asarray(model.vol(knots[k], hist), dtype=float), (n_paths,))
            X[:, k + 1] = X[:, k] + b * dt + s * model.x_scale * dW[:, k]
        return SampleBatch(grid, X, W, start)

    cells = model.mu.cell_masses() if model.mu is not None else np.zeros(n + 1)
    if model.mu is not None:
        model.mu.check_grid(grid)
    X = np.empty((n_paths, n + 1))
    X[:, 0] = model.x0
    a = np.zeros(n_paths)
    sig = np.empty((n_paths, n))
    if model.kind == "regime_switching":
        U = np.stack([plan.generator(start + i, stream=1).uniform(size=n + 1) for i in range(n_paths)])
        high = U[:, 0] < 0.5
        for k in range(n):
            if k > 0:
                high = high ^ (U[:, k] < model.switch_prob)
            sig[:, k] = np.where(high, model.sigma_hi, model.sigma_lo)
    flags = {}
    for k in range(n):
        x = X[:, k]
        if model.kind == "uvm_policy":
            s = np.broadcast_to(np.asarray(model.policy(knots[k], x, a), dtype=float), (n_paths,))
            _check_band(s, model, k)
            sig[:, k] = s
        X[:, k + 1] = x + sig[:, k] * model.x_scale * dW[:, k]
        a = a + cells[k] * x
    extra = getattr(model.policy, "extrapolated", None)
    if extra is not None:
        flags["extrapolated"] = int(extra[0])
    return SampleBatch(grid, X, W, start, sigma=sig, flags=flags)


def worst_case_policy(field) -> Callable:
    """Barenblatt maximizer read from a solved value field.

    Returns ``policy(t, x, a)`` giving ``sigma_hi`` where the value is convex in
    the current level and ``sigma_lo`` where it is concave.  States outside the
    field's grid are counted in ``policy.extrapolated[0]``.
    """
    lo, hi = field.sigma_lo, field.sigma_hi
    counter = [0]

    def policy(t, x, a):
        k = field.grid.index(t)
        gamma, outside = field.control_curvature(k, np.asarray(x, dtype=float), np.asarray(a, dtype=float))
        counter[0] += int(np.sum(outside))
        return np.where(gamma >= 0.0, hi, lo)

    policy.extrapolated = counter
    return policy
