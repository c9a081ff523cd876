"""Independent closed forms and brute-force references used by the tests."""

import math

import numpy as np


def ncdf(z):
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def npdf(z):
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def bs_call(S, K, T, sigma):
    """Black-Scholes call with zero rates."""
    if sigma == 0 or T == 0:
        return max(S - K, 0.0)
    v = sigma * math.sqrt(T)
    d1 = (math.log(S / K) + 0.5 * v * v) / v
    return S * ncdf(d1) - K * ncdf(d1 - v)


def bs_delta(S, K, T, sigma):
    v = sigma * math.sqrt(T)
    return ncdf((math.log(S / K) + 0.5 * v * v) / v)


def bachelier_call(S, K, T, s_abs):
    """Call under ``dX = s_abs dW``."""
    v = s_abs * math.sqrt(T)
    d = (S - K) / v
    return (S - K) * ncdf(d) + v * npdf(d)


def bachelier_delta(S, K, T, s_abs):
    return ncdf((S - K) / (s_abs * math.sqrt(T)))


def coquadratic_brute(x, y, m, k):
    """Direct double loop over the definition with truncation at ``k``."""
    tot = 0.0
    for s in range(k):
        j = min(s + m, k)
        tot += (x[j] - x[s]) * (y[j] - y[s])
    return tot / m


def forward_brute(h, x, m, k):
    tot = 0.0
    for s in range(k):
        j = min(s + m, k)
        tot += h[s] * (x[j] - x[s])
    return tot / m


def frozen_path(v, s, m):
    """Path equal to ``v`` up to ``s``, frozen at ``v[s]`` on ``(s, s+m)``, then ``v`` from ``s+m``."""
    y = np.array(v, dtype=float, copy=True)
    y[s + 1 : s + m] = v[s]
    return y
