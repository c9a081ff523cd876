import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dirichlet_lab import DiscretePath, TimeGrid, stop, sup_distance, sup_norm, tail_shift, vertical_bump
from dirichlet_lab.errors import DomainError, GridMismatchError
from dirichlet_lab.paths import StoppedView

G3 = TimeGrid(1.0, 3)


def test_grid_knots_uniform():
    g = TimeGrid(2.0, 8)
    k = g.knots
    assert k[0] == 0.0 and k[-1] == 2.0
    assert np.all(np.diff(k) > 0)
    assert np.allclose(np.diff(k), g.dt)


@pytest.mark.parametrize("bad", [dict(horizon=0.0, n_steps=4), dict(horizon=1.0, n_steps=0), dict(horizon=float("nan"), n_steps=2)])
def test_grid_rejects(bad):
    with pytest.raises(DomainError):
        TimeGrid(**bad)


def test_snapping_ties_round_down():
    g = TimeGrid(1.0, 4)
    assert g.index(0.125) == 0
    assert g.index(0.13) == 1
    assert g.index(0.375) == 1
    assert g.index(1.0) == 4
    with pytest.raises(DomainError):
        g.index(1.2)
    with pytest.raises(DomainError):
        g.index(-0.2)


def test_path_validation():
    with pytest.raises(GridMismatchError):
        DiscretePath(G3, [0, 1, 2])
    with pytest.raises(DomainError):
        DiscretePath(G3, [0, 1, np.inf, 2])
    p = DiscretePath(G3, [0, 1, 2, 3])
    with pytest.raises(ValueError):
        p.values[0, 0] = 5.0


def test_stop_examples():
    c = DiscretePath.constant(G3, 2.5)
    assert stop(c, 0.34) == c
    p = DiscretePath(G3, [0, 1, 2, 3])
    assert stop(p, 1.0) == p
    assert np.array_equal(stop(p, G3.time(1)).x, [0, 1, 1, 1])
    with pytest.raises(DomainError):
        stop(p, 1.5)


def test_bump_examples():
    g = TimeGrid(1.0, 2)
    p = DiscretePath(g, [0, 1, 2])
    assert np.array_equal(tail_shift(p, g.time(1), 5.0).x, [0, 6, 7])
    assert vertical_bump(p, 0.5, 0.0) == stop(p, 0.5)
    c = stop(DiscretePath.constant(G3, 1.0), G3.time(1))
    assert np.array_equal(vertical_bump(c, G3.time(1), 2.0).x, [1, 3, 3, 3])
    assert np.array_equal(vertical_bump(p, g.time(1), 5.0).x, [0, 6, 6])


def test_norms():
    z = DiscretePath.constant(G3, 0.0)
    assert sup_norm(z) == 0.0
    g = TimeGrid(1.0, 2)
    assert sup_norm(DiscretePath(g, [1, -3, 2])) == 3.0
    p = DiscretePath(G3, [0, 1, 2, 3])
    assert sup_distance(p, p) == 0.0
    with pytest.raises(GridMismatchError):
        sup_distance(p, DiscretePath(g, [1, 2, 3]))


def test_multidim_norm_is_euclidean():
    g = TimeGrid(1.0, 1)
    p = DiscretePath(g, [[3.0, 0.0], [4.0, 0.0]])
    assert p.d == 2
    assert sup_norm(p) == 5.0


def test_stopped_view_reads():
    p = DiscretePath(G3, [0, 1, 2, 3])
    v = StoppedView(p, 1)
    assert [float(v[j][0]) for j in range(4)] == [0, 1, 1, 1]
    assert v.materialize() == stop(p, G3.time(1))


def test_csv_roundtrip(tmp_path):
    g = TimeGrid(1.0, 5)
    p = DiscretePath(g, np.random.default_rng(1).normal(size=(2, 6)))
    text = p.to_csv(tmp_path / "p.csv")
    assert text.splitlines()[0] == "t,x_1,x_2"
    q = DiscretePath.from_csv(tmp_path / "p.csv")
    assert q == p


values = st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=9, max_size=9)
G8 = TimeGrid(1.0, 8)


@given(values, st.integers(0, 8))
def test_stop_idempotent(v, k):
    p = DiscretePath(G8, v)
    t = G8.time(k)
    assert stop(stop(p, t), t) == stop(p, t)


@given(values, st.integers(0, 8), st.integers(0, 8))
def test_stop_composition(v, k1, k2):
    p = DiscretePath(G8, v)
    t, tp = G8.time(max(k1, k2)), G8.time(min(k1, k2))
    assert stop(p, tp) == stop(stop(p, t), tp)


@given(values, st.integers(0, 8), st.floats(-1e3, 1e3, allow_nan=False))
def test_bump_inverse_on_stopped(v, k, y):
    t = G8.time(k)
    s = stop(DiscretePath(G8, v), t)
    back = vertical_bump(vertical_bump(s, t, y), t, -y)
    # x_t + y - y is exact when no rounding occurs; allow one ulp of the operands
    assert np.allclose(back.x, s.x, rtol=0, atol=4 * np.spacing(max(abs(s.x[k]) + abs(y), 1.0)))


@given(values, st.integers(0, 8), st.integers(-1000, 1000))
def test_bump_inverse_exact_integers(v, k, y):
    vi = [float(round(a)) for a in v]
    t = G8.time(k)
    s = stop(DiscretePath(G8, vi), t)
    assert vertical_bump(vertical_bump(s, t, float(y)), t, float(-y)) == s


@given(values, values, values)
def test_triangle_inequality(a, b, c):
    A, B, C = (DiscretePath(G8, v) for v in (a, b, c))
    assert sup_distance(A, C) <= sup_distance(A, B) + sup_distance(B, C) + 1e-9 * (1 + sup_distance(A, C))
