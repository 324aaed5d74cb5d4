"""Gradient-flow kernel regression in closed form.

With zero initialisation the flow ``df/dt = -(1/n) K(x, X) (f(X) - y)`` is
solved by spectral filtering of the Gram matrix ``K = Q diag(lam) Q^T``:

    f_t(x) = K(x, X) Q diag(phi_t(lam)) Q^T y,
    phi_t(lam) = (1 - exp(-lam t / n)) / lam,

with ``phi_t(0) = t / n`` and ``phi_inf(lam) = 1 / lam`` (0 for lam = 0).
``t = math.inf`` gives the ridgeless interpolant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from .errors import DimensionMismatch, DomainError, LengthMismatch, MissingRng, NotPositiveDefinite, OutOfRange
from .kernels import KernelSpec, as_points, gram
from .numerics import EigenPair, Rng, sym_eigen

INF = math.inf
_CHUNK = 1 << 22  # kernel entries per block when predicting on many points


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    sigma: float = 0.0
    f_star_id: str | None = None

    def __post_init__(self):
        x = as_points(self.x)
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape[0] < 1:
            raise DomainError("dataset needs at least one point")
        if y.size != x.shape[0]:
            raise LengthMismatch(f"{x.shape[0]} points but {y.size} responses")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


def filter_weights(values: np.ndarray, t: float, n: int) -> np.ndarray:
    lam = np.maximum(values, 0.0)
    if t < 0:
        raise DomainError("time must be nonnegative")
    out = np.zeros_like(lam)
    pos = lam > 0
    if math.isinf(t):
        out[pos] = 1.0 / lam[pos]
        return out
    out[pos] = -np.expm1(-lam[pos] * t / n) / lam[pos]
    out[~pos] = t / n
    return out


@dataclass(frozen=True)
class NtkFlowModel:
    dataset: Dataset
    spec: KernelSpec
    eigen: EigenPair
    projected: np.ndarray
    gram_matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.dataset.n

    def with_targets(self, y) -> "NtkFlowModel":
        """Same design and decomposition, new responses."""
        data = replace(self.dataset, y=np.asarray(y, dtype=float))
        return replace(self, dataset=data, projected=self.eigen.vectors.T @ data.y)

    def spectral_weights(self, t: float) -> np.ndarray:
        """Weights v with f_t(x) = (K(x, X) Q) v; pairs with :meth:`basis`."""
        q = self.eigen.vectors
        phi = filter_weights(self.eigen.values, t, self.n)
        v = phi * self.projected
        if math.isinf(t):
            # one refinement sweep: the ridgeless system is ill-conditioned (lam_min ~ 1/n)
            r = self.dataset.y - self.gram_matrix @ (q @ v)
            v = v + phi * (q.T @ r)
        return v

    def coefficients(self, t: float) -> np.ndarray:
        """Dual weights c with f_t(x) = K(x, X) c."""
        return self.eigen.vectors @ self.spectral_weights(t)

    def basis(self, query) -> np.ndarray:
        """K(query, X) Q, reusable across responses sharing this design."""
        return self.spec.matrix(query, self.dataset.x) @ self.eigen.vectors


def fit(spec: KernelSpec, data: Dataset) -> NtkFlowModel:
    g = gram(spec, data.x)
    eig = sym_eigen(g.matrix)
    lam_max, lam_min = eig.values[0], eig.values[-1]
    if lam_min < -1e-6 * abs(lam_max):
        raise NotPositiveDefinite(f"Gram has eigenvalue {lam_min:.3e} (max {lam_max:.3e})")
    return NtkFlowModel(
        dataset=data,
        spec=spec,
        eigen=eig,
        projected=eig.vectors.T @ data.y,
        gram_matrix=g.matrix,
    )


def predict(model: NtkFlowModel, t: float, query) -> np.ndarray:
    q = as_points(query)
    if q.shape[1] != model.dataset.d:
        raise DimensionMismatch(f"query dimension {q.shape[1]}, data dimension {model.dataset.d}")
    c = model.coefficients(t)
    rows = max(1, _CHUNK // max(model.n, 1))
    out = np.empty(q.shape[0])
    for start in range(0, q.shape[0], rows):
        block = q[start : start + rows]
        out[start : start + rows] = model.spec.matrix(block, model.dataset.x) @ c
    return out


def residual_norm(model: NtkFlowModel, t: float) -> float:
    """||exp(-K t / n) y||_2, the training residual norm of the flow at time t."""
    if t < 0:
        raise DomainError("time must be nonnegative")
    lam = np.maximum(model.eigen.values, 0.0)
    if math.isinf(t):
        return float(np.linalg.norm(np.where(lam > 0, 0.0, model.projected)))
    return float(np.linalg.norm(np.exp(-lam * t / model.n) * model.projected))


def linear_interp(data: Dataset, x):
    """Piecewise-linear interpolant of 1-d data with increasing nodes."""
    if data.d != 1:
        raise DimensionMismatch("linear interpolation is one-dimensional")
    nodes = data.x[:, 0]
    if np.any(np.diff(nodes) <= 0):
        raise DomainError("nodes must be strictly increasing")
    xs = np.asarray(x, dtype=float)
    if np.any(xs < nodes[0]) or np.any(xs > nodes[-1]):
        raise OutOfRange(f"x outside [{nodes[0]}, {nodes[-1]}]")
    out = np.interp(xs, nodes, data.y)
    return float(out) if out.ndim == 0 else out


def _is_equispaced_unit(nodes: np.ndarray) -> bool:
    n = nodes.size
    if n < 2:
        return False
    return bool(np.allclose(nodes, np.arange(n) / (n - 1), rtol=0, atol=1e-12))


def sup_gap(model: NtkFlowModel, grid_n: int = 2048) -> float:
    """max |f_inf(x) - f_LI(x)| over a uniform grid of [0, 1] joined with the nodes.

    A grid maximum under-estimates the true supremum by at most the Lipschitz
    modulus of the difference times the grid spacing.
    """
    data = model.dataset
    if data.d != 1 or not _is_equispaced_unit(data.x[:, 0]):
        raise DomainError("sup_gap needs an equispaced design on [0, 1]")
    if grid_n < 4 * data.n:
        raise DomainError(f"grid_n must be >= 4n = {4 * data.n}")
    pts = np.union1d(np.linspace(0.0, 1.0, grid_n), data.x[:, 0])
    return float(np.max(np.abs(predict(model, INF, pts) - linear_interp(data, pts))))


def excess_risk(
    predictor: Callable[[np.ndarray], np.ndarray],
    f_star: Callable[[np.ndarray], np.ndarray],
    d: int = 1,
    quad_n: int = 4097,
    rng: Rng | None = None,
) -> float:
    """Integral of (predictor - f_star)^2 against the uniform measure on [0, 1]^d.

    Both callables are vectorised: they receive shape (quad_n,) for d = 1 and
    (quad_n, d) otherwise.  d = 1 uses the trapezoid rule on a uniform grid;
    d > 1 uses Monte Carlo with ``rng``.
    """
    if quad_n < 2:
        raise DomainError("quad_n must be >= 2")
    if d == 1:
        x = np.linspace(0.0, 1.0, quad_n)
        err = np.asarray(predictor(x), dtype=float) - np.asarray(f_star(x), dtype=float)
        return float(trapezoid(err * err, x))
    if rng is None:
        raise MissingRng("Monte Carlo risk for d > 1 needs an rng")
    x = rng.uniform(quad_n * d).reshape(quad_n, d)
    err = np.asarray(predictor(x), dtype=float) - np.asarray(f_star(x), dtype=float)
    return float(np.mean(err * err))


def t_star(n: int, c: float = 1.0) -> float:
    """Early-stopping time c * n^(2/3)."""
    if n < 1 or c <= 0:
        raise DomainError("need n >= 1 and c > 0")
    return c * n ** (2.0 / 3.0)


def li_risk_expansion(f_star_values, eps, n: int) -> float:
    """Noise-quadratic part of the linear-interpolation risk on an equispaced design.

    (1 / (3 (n - 1))) * sum_i (eps_i^2 + eps_{i+1}^2 + eps_i eps_{i+1}); its
    expectation over i.i.d. N(0, sigma^2) noise is (2/3) sigma^2.
    """
    f = np.asarray(f_star_values, dtype=float).ravel()
    e = np.asarray(eps, dtype=float).ravel()
    if f.size != n or e.size != n:
        raise LengthMismatch(f"expected length {n}, got {f.size} and {e.size}")
    if n < 2:
        raise DomainError("need n >= 2")
    a, b = e[:-1], e[1:]
    return float(np.sum(a * a + b * b + a * b) / (3.0 * (n - 1)))
