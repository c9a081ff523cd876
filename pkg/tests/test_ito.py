import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirichlet_lab import DiscretePath, TimeGrid
from dirichlet_lab.errors import DomainError, EvaluationError
from dirichlet_lab.functionals import (
    PathFunctional,
    WeightMeasure,
    identity,
    lagged,
    markovian,
    running_integral,
    running_max,
    square,
    terminal_payoff_of_integral,
)
from dirichlet_lab.ito import (
    DECAYING,
    FAIL,
    PASS,
    STALLED,
    E_eps_sweep,
    bound_check_frechet,
    bound_check_domination,
    bound_check_modulus,
    cns_term,
    condition_E_eps,
    decompose,
    default_martingales,
    doob_meyer_extract,
    frozen_gaps,
    orthogonality_test,
)
from dirichlet_lab.regularize import coquadratic_eps, default_ladder
from dirichlet_lab.simulate import ModelSpec, SeedPlan, sample
from dirichlet_lab.uvm import UvmProblem, bsb_solve, call_on_avg, linear_solve, value_functional

G = TimeGrid(1.0, 256)


def batch(grid, n, seed=0, x0=0.0):
    return sample(ModelSpec(x0=x0), grid, SeedPlan(seed), n)


# --- decomposition ---


def test_identity_gamma_is_zero():
    X = batch(G, 1, 1, x0=0.7).path(0)
    r = decompose(identity(), X)
    assert np.max(np.abs(r.gamma)) <= 1e-12
    assert r.gamma[0] == 0.0


def test_running_integral_gamma_is_the_integral():
    mu = WeightMeasure.uniform(G, 1.0)
    F = running_integral(mu)
    X = batch(G, 1, 2).path(0)
    r = decompose(F, X)
    assert np.all(r.integral_path == 0.0)
    assert np.array_equal(r.gamma, F.trajectory(X) - F.trajectory(X)[0])


def test_square_gamma_is_time():
    g = TimeGrid(1.0, 2**14)
    b = batch(g, 20, 3)
    errs = [np.max(np.abs(decompose(square(), b.path(i)).gamma - g.knots)) for i in range(20)]
    assert np.mean(errs) <= 0.05


@given(st.integers(0, 2**31))
def test_decomposition_identity(seed):
    X = batch(TimeGrid(1.0, 32), 1, seed, 0.3).path(0)
    for F in (square(), running_max(), terminal_payoff_of_integral(np.tanh, WeightMeasure.uniform(X.grid), lambda y: 1 - np.tanh(y) ** 2)):
        r = decompose(F, X)
        assert r.gamma[0] == 0.0
        lhs = r.F_path - r.F_path[0]
        assert np.allclose(lhs, r.integral_path + r.gamma, rtol=0, atol=1e-12 * (1 + np.max(np.abs(lhs))))


def test_decompose_reports_knot_on_failure():
    F = markovian(lambda t, v: math.inf if t > 0.5 else v, name="bad")
    X = DiscretePath.constant(TimeGrid(1.0, 8), 1.0)
    with pytest.raises(EvaluationError) as e:
        decompose(F, X)
    assert e.value.index == 5


# --- orthogonality ---


def test_orthogonality_examples():
    g = TimeGrid(1.0, 2**14)
    b = batch(g, 1, 4)
    X, W = b.path(0), b.brownian(0)
    fam = default_martingales(X, W, 4)
    assert set(fam) == {"W", "W_indep", "W2_minus_t", "int_X_dW", "X"}
    smooth = DiscretePath(g, np.sin(3 * g.knots) + g.knots**2)
    assert orthogonality_test(smooth, fam).verdict == PASS
    assert orthogonality_test(DiscretePath.constant(g, 0.0), fam).verdict == PASS
    rep = orthogonality_test(W, {"W": W})
    assert rep.verdict == FAIL
    assert abs(rep.limits["W"] - 1.0) <= 0.1
    with pytest.raises(DomainError):
        orthogonality_test(smooth, {})


def test_square_gamma_orthogonal():
    g = TimeGrid(1.0, 2**14)
    b = batch(g, 1, 5)
    X = b.path(0)
    r = decompose(square(), X)
    assert orthogonality_test(r.gamma_path(), default_martingales(X, b.brownian(0), 5)).verdict == PASS


# --- E^eps ---


def test_markovian_E_eps_exactly_zero():
    b = batch(G, 5, 6, 1.0)
    for F in (square(), identity(), markovian(lambda t, v: math.exp(v) * t)):
        for X in b.paths():
            for e in default_ladder(G):
                assert condition_E_eps(F, X, e) == 0.0


def test_running_integral_E_eps_decays():
    g = TimeGrid(1.0, 1024)
    mu = WeightMeasure.uniform(g, 1.0)
    sw = E_eps_sweep(running_integral(mu), batch(g, 100, 7).paths(), tol=1e-2 * mu.total_mass**2 * g.horizon)
    assert sw.verdict == DECAYING
    assert np.all(np.diff(sw.median) < 0)
    assert sw.median[-1] < 1e-2


def test_lagged_stalls():
    g = TimeGrid(1.0, 1024)
    sw = E_eps_sweep(lagged(1), batch(g, 20, 8).paths())
    assert sw.verdict == STALLED


def test_generic_gap_loop_matches_hook():
    g = TimeGrid(1.0, 32)
    mu = WeightMeasure(np.linspace(0.2, 1.0, 32), ((10, 0.4),))
    F = running_integral(mu)
    bare = PathFunctional(F.fn)
    X = batch(g, 1, 9).path(0)
    for m in (1, 2, 5, 32):
        assert np.allclose(frozen_gaps(F, X, m), frozen_gaps(bare, X, m), rtol=0, atol=1e-13)
    with pytest.raises(DomainError):
        frozen_gaps(F, X, 0)


@given(st.integers(0, 2**31), st.integers(1, 64))
def test_cauchy_schwarz_chain(seed, m):
    g = TimeGrid(1.0, 64)
    b = batch(g, 1, seed)
    X, N = b.path(0), b.brownian(0)
    F = running_integral(WeightMeasure(np.linspace(0.1, 2, 64), ((20, 0.5),)))
    e = m * g.dt
    lhs = abs(cns_term(F, X, N, e))
    rhs = math.sqrt(condition_E_eps(F, X, e)) * math.sqrt(coquadratic_eps(N, N, e))
    assert lhs <= rhs * (1 + 1e-10) + 1e-15


# --- bound checks ---

GB = TimeGrid(1.0, 64)
MU = WeightMeasure(np.linspace(0.5, 1.5, 64))


def test_domination_identity_level():
    paths = batch(GB, 10, 10).paths()
    F = running_integral(MU)
    rep = bound_check_domination(F, paths, lambda x, y: y, MU)
    assert rep.n_violations == 0
    assert rep.n_checks == 10 * sum(64 - m + 1 for m in range(1, 65))
    cum = np.cumsum(MU.cell_masses())
    assert bound_check_domination(F, paths, lambda x, y: y, cum).n_violations == 0
    assert bound_check_frechet(F, paths, MU).n_violations == 0


def test_domination_markovian_any_phi():
    paths = batch(GB, 5, 11).paths()
    rep = bound_check_domination(square(), paths, lambda x, y: 0.0 * y, MU)
    assert rep.n_violations == 0


def test_domination_half_mass_negative_control():
    paths = batch(GB, 5, 12).paths()
    rep = bound_check_domination(running_integral(MU), paths, lambda x, y: y, MU.scaled(0.5))
    assert rep.n_violations > 0 and rep.max_violation > 0


def test_domination_rejects_decreasing_b():
    with pytest.raises(DomainError):
        bound_check_domination(square(), batch(GB, 1).paths(), lambda x, y: y, -np.arange(65.0))


def test_modulus_modulus_bound():
    paths = batch(GB, 5, 13).paths()
    cells = MU.cell_masses()
    win = {m: max(cells[s + 1 : s + m].sum() for s in range(65 - m)) for m in range(1, 65)}
    phi2 = lambda x, osc, eps: osc * win[int(round(eps / GB.dt))]
    rep = bound_check_modulus(running_integral(MU), paths, phi2)
    assert rep.n_violations == 0
    C = [rep.extra["C_eps"][str(m * GB.dt)] for m in (64, 16, 4, 1)]
    assert all(b <= a for a, b in zip(C, C[1:]))
    bad = bound_check_modulus(running_integral(MU), paths, lambda x, osc, eps: 0.1 * osc * win[int(round(eps / GB.dt))])
    assert bad.n_violations > 0


def test_implied_E_decays():
    paths = batch(TimeGrid(1.0, 128), 10, 14).paths()
    mu = WeightMeasure.uniform(paths[0].grid)
    rep = bound_check_domination(running_integral(mu), paths, lambda x, y: y, mu, steps=[64, 16, 4, 1])
    vals = [rep.implied_E[m * paths[0].grid.dt] for m in (64, 16, 4, 1)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


# --- Doob-Meyer ---


def test_doob_meyer_constant_is_zero():
    X = batch(G, 1, 15).path(0)
    r = doob_meyer_extract(PathFunctional(lambda k, v, g: 4.2), X)
    assert np.all(r.A == 0.0)


def _uvm(n, lo, hi):
    g = TimeGrid(1.0, n)
    mu = WeightMeasure.uniform(g, 1.0)
    return UvmProblem(lo, hi, 100.0, mu, call_on_avg(100.0, smoothing=1.0), x_scale=100.0), mu, g


def test_doob_meyer_uvm_supermartingale():
    pr, mu, g = _uvm(256, 0.1, 0.2)
    F = value_functional(bsb_solve(pr))
    thr = 0.25 * pr.sigma_hi * pr.x_scale * math.sqrt(g.dt)
    for sig in (0.1, 0.15, 0.2):
        b = sample(ModelSpec.constant(sig, x0=100.0, x_scale=100.0, mu=mu), g, SeedPlan(16), 10)
        for X in b.paths():
            r = doob_meyer_extract(F, X, threshold=thr)
            assert r.up_q <= thr
            assert r.up_fraction <= 0.01


def test_doob_meyer_martingale_case():
    sups = []
    for n in (256, 1024):
        pr, mu, g = _uvm(n, 0.15, 0.15)
        F = value_functional(linear_solve(pr, 0.15))
        b = sample(ModelSpec.constant(0.15, x0=100.0, x_scale=100.0, mu=mu), g, SeedPlan(17), 10)
        s = max(doob_meyer_extract(F, X).A_sup for X in b.paths())
        assert s <= 0.15 * 100.0 * math.sqrt(g.dt)
        sups.append(s)
    assert sups[1] < sups[0]
