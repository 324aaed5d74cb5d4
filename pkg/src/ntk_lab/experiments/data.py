"""Synthetic designs, regression truths and the 3-d parity labels."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ..errors import DimensionMismatch, DomainError, UnknownTruth
from ..kernels import as_points, ntk1_matrix
from ..ntk_flow import Dataset
from ..numerics import Rng

KERNEL_MIX_CENTERS = np.array([0.1, 0.3, 0.5, 0.7, 0.9])
KERNEL_MIX_WEIGHTS = np.array([0.2, -0.3, 0.25, -0.15, 0.1])
TRUTHS = ("kernel_mix", "sin_mix", "zero")
PARITY_CLASSES = 8


def gen_equispaced(n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """x_i = lo + (hi - lo)(i - 1)/(n - 1), i = 1..n."""
    if n < 2 or not lo < hi:
        raise DomainError("need n >= 2 and lo < hi")
    x = lo + (hi - lo) * (np.arange(n) / (n - 1))
    x[-1] = hi
    return x


def _kernel_mix(x) -> np.ndarray:
    pts = as_points(x)
    if pts.shape[1] != 1:
        raise DimensionMismatch("kernel_mix is defined on the real line")
    return ntk1_matrix(pts[:, 0], KERNEL_MIX_CENTERS) @ KERNEL_MIX_WEIGHTS


def _sin_mix(x) -> np.ndarray:
    pts = as_points(x)
    return np.sin(pts.sum(axis=1) / math.sqrt(pts.shape[1]))


def _zero(x) -> np.ndarray:
    return np.zeros(as_points(x).shape[0])


def f_star(truth_id: str) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorised regression truth; a 1-d array is read as points on the line."""
    table = {"kernel_mix": _kernel_mix, "sin_mix": _sin_mix, "zero": _zero}
    if truth_id not in table:
        raise UnknownTruth(f"unknown truth {truth_id!r}; expected one of {', '.join(TRUTHS)}")
    return table[truth_id]


def gen_regression(x, truth_id: str, sigma: float, rng: Rng) -> Dataset:
    """y_i = f*(x_i) + sigma * z_i with z_i standard normal."""
    f = f_star(truth_id)
    if sigma < 0:
        raise DomainError("sigma must be nonnegative")
    pts = as_points(x)
    y = f(pts)
    if sigma > 0:
        y = y + sigma * rng.normal(pts.shape[0])
    return Dataset(pts, y, sigma=float(sigma), f_star_id=truth_id)


def parity3_labels(x) -> np.ndarray:
    """floor(2 x_1) + 2 floor(2 x_2) + 4 floor(2 x_3), in {0, ..., 7}.

    A length-3 vector is read as a single point.
    """
    arr = np.asarray(x, dtype=float)
    pts = as_points(arr.reshape(1, 3) if arr.shape == (3,) else arr, 3)
    bits = np.minimum(np.floor(2.0 * pts), 1.0)
    return bits @ np.array([1.0, 2.0, 4.0])


def corrupt(clean: np.ndarray, p: float, coins: np.ndarray, draws: np.ndarray) -> np.ndarray:
    """Replace label i by ``draws[i]`` where ``coins[i] < p``.

    Reusing the same coins and draws across several p nests the corrupted sets.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError("p must lie in [0, 1]")
    return np.where(coins < p, draws, clean).astype(float)


def gen_parity3(n: int, rng: Rng, p: float) -> Dataset:
    """x ~ Unif(0, 1)^3 with parity labels, each replaced w.p. p by a uniform class."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise DomainError("p must lie in [0, 1]")
    x = rng.uniform(3 * n).reshape(n, 3)
    coins = rng.uniform(n)
    draws = rng.integers(n, PARITY_CLASSES).astype(float)
    return Dataset(x, corrupt(parity3_labels(x), p, coins, draws))
