"""Functional Ito calculus on discretized paths, with uncertain-volatility
pricing and superhedging built on top of it."""

from dirichlet_lab.paths import DiscretePath, TimeGrid, stop, sup_distance, sup_norm, tail_shift, vertical_bump

__version__ = "0.1.0"

__all__ = [
    "DiscretePath",
    "TimeGrid",
    "stop",
    "sup_distance",
    "sup_norm",
    "tail_shift",
    "vertical_bump",
]
