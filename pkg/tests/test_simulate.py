import math

import numpy as np
import pytest

from dirichlet_lab import TimeGrid
from dirichlet_lab.errors import ConfigurationError, DomainError
from dirichlet_lab.functionals import WeightMeasure
from dirichlet_lab.ito import PASS, weak_dirichlet_diagnostic
from dirichlet_lab.regularize import coquadratic_eps
from dirichlet_lab.simulate import ModelSpec, SeedPlan, sample, weierstrass_component, worst_case_policy
from dirichlet_lab.uvm import Payoff, UvmProblem, bsb_solve, call_on_avg

G = TimeGrid(1.0, 64)


def test_brownian_mean_clt():
    b = sample(ModelSpec(kind="brownian", sigma=1.0), G, SeedPlan(1), 10_000)
    assert abs(np.mean(b.X[:, -1])) <= 3 / 100


def test_constant_policy_quadratic_variation():
    g = TimeGrid(1.0, 2**12)
    m = ModelSpec.constant(0.2, x0=1.0)
    b = sample(m, g, SeedPlan(2), 20)
    qv = np.mean([coquadratic_eps(p, p, 8 * g.dt) for p in b.paths()])
    assert abs(qv - 0.04) <= 0.05 * 0.04


@pytest.mark.parametrize(
    "model",
    [
        ModelSpec(kind="regime_switching", x0=1.0, sigma_lo=0.1, sigma_hi=0.4, switch_prob=0.1),
        ModelSpec(kind="uvm_policy", x0=1.0, sigma_lo=0.1, sigma_hi=0.3, policy=lambda t, x, a: np.where(x > 1.0, 0.3, 0.1)),
    ],
)
def test_controlled_martingale(model):
    b = sample(model, G, SeedPlan(3), 10_000)
    xt = b.X[:, -1]
    se = np.std(xt, ddof=1) / math.sqrt(xt.size)
    assert abs(np.mean(xt) - 1.0) <= 3 * se
    assert np.all((b.sigma >= model.sigma_lo) & (b.sigma <= model.sigma_hi))


def test_determinism_across_batching():
    m = ModelSpec(kind="regime_switching", x0=0.0, sigma_lo=0.1, sigma_hi=0.2)
    full = sample(m, G, SeedPlan(9), 10)
    parts = np.vstack([sample(m, G, SeedPlan(9), 3, start=s).X for s in (0, 3, 6)] + [sample(m, G, SeedPlan(9), 1, start=9).X])
    assert np.array_equal(full.X, parts)
    assert np.array_equal(sample(m, G, 9, 10).X, full.X)
    one = sample(ModelSpec(), G, SeedPlan(9), 1, start=4).X[0]
    assert np.array_equal(one, sample(ModelSpec(), G, SeedPlan(9), 6).X[4])
    assert not np.array_equal(sample(ModelSpec(), G, SeedPlan(10), 1).X, sample(ModelSpec(), G, SeedPlan(9), 1).X)


def test_weak_dirichlet_demo_parts():
    m = ModelSpec(kind="weak_dirichlet_demo", x0=1.0, sigma=1.0, demo_terms=3)
    b = sample(m, G, SeedPlan(0), 2)
    assert np.allclose(b.X, 1.0 + b.M + b.A)
    assert np.array_equal(b.A[0], weierstrass_component(m, G))
    assert b.A[0, 0] == 0.0


def test_weak_dirichlet_demo_diagnostic():
    rep = weak_dirichlet_diagnostic(ModelSpec(kind="weak_dirichlet_demo", demo_terms=5), TimeGrid(1.0, 2**17), seeds=range(20))
    assert rep.growth_ok
    assert rep.AM.verdict == "CONVERGENT"
    assert rep.verdict == PASS


@pytest.mark.parametrize(
    "kw,key",
    [
        (dict(kind="nope"), "kind"),
        (dict(kind="uvm_policy", sigma_lo=0.3, sigma_hi=0.2, policy=lambda t, x, a: 0.2), "sigma_lo"),
        (dict(kind="uvm_policy"), "policy"),
        (dict(kind="diffusion"), "drift"),
        (dict(kind="weak_dirichlet_demo", demo_b=8), "demo_b"),
        (dict(kind="weak_dirichlet_demo", demo_a=0.5), "demo_a"),
        (dict(kind="weak_dirichlet_demo", demo_a=1.5), "demo_a"),
        (dict(x0=math.nan), "x0"),
    ],
)
def test_invalid_models(kw, key):
    with pytest.raises(ConfigurationError) as e:
        ModelSpec(**kw)
    assert e.value.key == key


def test_policy_out_of_band_names_path():
    pol = lambda t, x, a: np.where(np.arange(x.size) == 2, 0.5, 0.2)
    m = ModelSpec(kind="uvm_policy", sigma_lo=0.1, sigma_hi=0.3, policy=pol)
    with pytest.raises(ConfigurationError) as e:
        sample(m, G, SeedPlan(0), 4)
    assert e.value.index == 2 and e.value.key == "policy"


def test_sample_rejects_no_paths_and_bad_seed():
    with pytest.raises(DomainError):
        sample(ModelSpec(), G, SeedPlan(0), 0)
    with pytest.raises(DomainError):
        SeedPlan(-1)


def test_diffusion_kind_uses_history():
    drift = lambda t, h: -h[:, -1]
    vol = lambda t, h: 0.0 * h[:, -1]
    b = sample(ModelSpec(kind="diffusion", x0=1.0, drift=drift, vol=vol), G, SeedPlan(0), 2)
    assert np.allclose(b.X[0, -1], (1 - G.dt) ** G.n_steps)


def _field(payoff, lo=0.1, hi=0.2, n=64):
    g = TimeGrid(1.0, n)
    mu = WeightMeasure.atom_at_horizon(g)
    return bsb_solve(UvmProblem(lo, hi, 100.0, mu, payoff, x_scale=100.0)), mu


def test_worst_case_convex_is_sigma_hi():
    f, mu = _field(call_on_avg(100.0, smoothing=1.0))
    pol = worst_case_policy(f)
    m = ModelSpec(kind="uvm_policy", x0=100.0, sigma_lo=0.1, sigma_hi=0.2, policy=pol, x_scale=100.0, mu=mu)
    b = sample(m, f.grid, SeedPlan(0), 200)
    assert np.all(b.sigma == 0.2)


def test_worst_case_concave_is_sigma_lo():
    c = call_on_avg(100.0, smoothing=1.0)
    f, mu = _field(Payoff("short_call", lambda y: -c.g(y), lambda y: -c.dg(y)))
    pol = worst_case_policy(f)
    m = ModelSpec(kind="uvm_policy", x0=100.0, sigma_lo=0.1, sigma_hi=0.2, policy=pol, x_scale=100.0, mu=mu)
    b = sample(m, f.grid, SeedPlan(0), 200)
    assert np.all(b.sigma == 0.1)


def test_worst_case_degenerate_band_constant():
    f, mu = _field(call_on_avg(100.0), lo=0.15, hi=0.15)
    pol = worst_case_policy(f)
    x = np.linspace(50, 150, 11)
    assert np.all(pol(0.5, x, np.zeros_like(x)) == 0.15)


def test_worst_case_counts_extrapolation():
    f, mu = _field(call_on_avg(100.0, smoothing=1.0))
    pol = worst_case_policy(f)
    pol(0.0, np.array([1e6, 100.0]), np.zeros(2))
    assert pol.extrapolated[0] == 1
