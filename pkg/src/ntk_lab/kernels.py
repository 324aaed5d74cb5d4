"""Two-layer ReLU NTK with biases, its d=1 form, and the auxiliary kernels.

All matrix routines take point sets as arrays of shape (n, d); a 1-d array of
length n is read as n points on the real line.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AtNode, DimensionMismatch, DomainError, DuplicatePoints, NonFinite

DUPLICATE_TOL = 1e-12


def as_points(x, d: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x[:, None]
    elif x.ndim != 2:
        raise DimensionMismatch(f"point set must be 1-d or 2-d, got ndim={x.ndim}")
    if d is not None and x.shape[1] != d:
        raise DimensionMismatch(f"points have dimension {x.shape[1]}, expected {d}")
    if not np.all(np.isfinite(x)):
        raise NonFinite("points must be finite")
    return x


def _as_point(x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise DimensionMismatch("a single point must be a scalar or a 1-d vector")
    return x


# ---------------------------------------------------------------------------
# scalar kernels


def psi(x, y) -> float:
    """Angle between (x, 1) and (y, 1), in [0, pi]."""
    x, y = _as_point(x), _as_point(y)
    if x.shape != y.shape:
        raise DimensionMismatch(f"dimensions differ: {x.size} vs {y.size}")
    return float(_angle_and_root(x[None, :], y[None, :])[0][0, 0])


def ntk_eval(d: int, x, y) -> float:
    if d < 1:
        raise DomainError("NTK needs d >= 1")
    x, y = _as_point(x), _as_point(y)
    if x.size != d or y.size != d:
        raise DimensionMismatch(f"expected points of dimension {d}, got {x.size} and {y.size}")
    return float(ntk_matrix(x[None, :], y[None, :])[0, 0])


def ntk1_eval(x: float, y: float) -> float:
    return float(ntk1_matrix(np.array([x]), np.array([y]))[0, 0])


def g_alpha_eval(alpha: float, x: float, y: float) -> float:
    return alpha - abs(x - y) / np.pi


def pi_kernels(x: float, y: float) -> tuple[float, float]:
    """(Pi_0(x, y), Pi_1(x, y)) for scalars."""
    p0, p1 = pi_matrices(np.array([x]), np.array([y]))
    return float(p0[0, 0]), float(p1[0, 0])


def ntk1_second_derivative(xi: float, nodes) -> np.ndarray:
    """Second x-derivative of K_1(x, node) at x = xi for every node.

    Only the 2*Pi_1 part contributes; G_1 is piecewise linear.  Valid away
    from the nodes, where |xi - node| is differentiable.
    """
    nodes = np.asarray(nodes, dtype=float).ravel()
    dist = np.abs(xi - nodes)
    if np.any(dist <= 1e-15):
        raise AtNode(f"xi={xi!r} coincides with a node")
    return 4.0 / np.pi * dist / (1.0 + xi * xi) ** 2


# ---------------------------------------------------------------------------
# matrix forms


_WEDGE_MAX_D = 16


def _sq_dist(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros((x.shape[0], y.shape[0]))
    for k in range(x.shape[1]):
        out += (x[:, k, None] - y[None, :, k]) ** 2
    return out


def _wedge(x: np.ndarray, y: np.ndarray, inner, nx, ny) -> np.ndarray:
    """||x||^2 ||y||^2 - <x,y>^2 as a sum of squared 2x2 minors (no cancellation)."""
    d = x.shape[1]
    if d > _WEDGE_MAX_D:
        return np.maximum(np.outer(nx, ny) - inner**2, 0.0)
    out = np.zeros((x.shape[0], y.shape[0]))
    for i in range(d):
        for j in range(i + 1, d):
            out += (x[:, i, None] * y[None, :, j] - x[:, j, None] * y[None, :, i]) ** 2
    return out


def _angle_and_root(x: np.ndarray, y: np.ndarray):
    """psi(x, y), <x, y> and the root term sqrt(||x-y||^2 + ||x||^2||y||^2 - <x,y>^2).

    The root term is the norm of the wedge of (x, 1) and (y, 1), so the angle
    comes from atan2 and stays accurate for nearly coincident points, where
    arccos of the cosine loses half the digits.
    """
    inner = x @ y.T
    nx = np.einsum("ij,ij->i", x, x)
    ny = np.einsum("ij,ij->i", y, y)
    root = np.sqrt(_sq_dist(x, y) + _wedge(x, y, inner, nx, ny))
    return np.arctan2(root, inner + 1.0), inner, root


def ntk_matrix(x, y) -> np.ndarray:
    x, y = as_points(x), as_points(y)
    if x.shape[1] != y.shape[1]:
        raise DimensionMismatch(f"dimensions differ: {x.shape[1]} vs {y.shape[1]}")
    angle, inner, root = _angle_and_root(x, y)
    return 2.0 / np.pi * (np.pi - angle) * (inner + 1.0) + root / np.pi + 1.0


def ntk1_matrix(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)[:, None]
    y = np.asarray(y, dtype=float).reshape(-1)[None, :]
    xy, dist = x * y, np.abs(x - y)
    angle = np.arctan2(dist, 1.0 + xy)
    return 2.0 / np.pi * (np.pi - angle) * (1.0 + xy) + dist / np.pi + 1.0


def g_alpha_matrix(alpha: float, x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    return alpha - np.abs(x[:, None] - y[None, :]) / np.pi


def pi_matrices(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float).reshape(-1)[:, None]
    y = np.asarray(y, dtype=float).reshape(-1)[None, :]
    dist = np.abs(x - y)
    gap = np.pi - np.arctan2(dist, 1.0 + x * y)
    return gap / np.pi, ((1.0 + x * y) * gap + dist) / np.pi


# ---------------------------------------------------------------------------
# kernel selection and Gram assembly


@dataclass(frozen=True)
class KernelSpec:
    """Which kernel to evaluate.

    ``kind`` is one of ``"ntk"`` (any d), ``"ntk1"``, ``"g_alpha"``, ``"pi0"``,
    ``"pi1"``.  Build instances with the classmethods.
    """

    kind: str
    d: int | None = None
    alpha: float | None = None

    @classmethod
    def ntk(cls, d: int) -> "KernelSpec":
        if d < 1:
            raise DomainError("NTK needs d >= 1")
        return cls("ntk", d=d)

    @classmethod
    def ntk1(cls) -> "KernelSpec":
        return cls("ntk1", d=1)

    @classmethod
    def g_alpha(cls, alpha: float) -> "KernelSpec":
        if not alpha > 0.5:
            raise DomainError("G_alpha needs alpha > 1/2")
        return cls("g_alpha", d=1, alpha=float(alpha))

    @classmethod
    def pi0(cls) -> "KernelSpec":
        return cls("pi0", d=1)

    @classmethod
    def pi1(cls) -> "KernelSpec":
        return cls("pi1", d=1)

    @property
    def dim(self) -> int:
        return self.d or 1

    def matrix(self, x, y) -> np.ndarray:
        """Cross-kernel matrix k(x_i, y_j)."""
        x, y = as_points(x, self.dim), as_points(y, self.dim)
        if self.kind == "ntk":
            return ntk_matrix(x, y)
        if self.kind == "ntk1":
            return ntk1_matrix(x, y)
        if self.kind == "g_alpha":
            return g_alpha_matrix(self.alpha, x, y)
        if self.kind == "pi0":
            return pi_matrices(x, y)[0]
        if self.kind == "pi1":
            return pi_matrices(x, y)[1]
        raise DomainError(f"unknown kernel kind {self.kind!r}")

    def __call__(self, x, y) -> float:
        return float(self.matrix(np.atleast_1d(x)[None, :], np.atleast_1d(y)[None, :])[0, 0])

    def __str__(self) -> str:
        if self.kind == "ntk":
            return f"ntk(d={self.d})"
        if self.kind == "g_alpha":
            return f"g_alpha({self.alpha:g})"
        return self.kind


def min_distance(points) -> float:
    """Smallest pairwise Euclidean distance (inf for a single point)."""
    x = as_points(points)
    n = x.shape[0]
    if n < 2:
        return np.inf
    if x.shape[1] == 1:
        return float(np.min(np.diff(np.sort(x[:, 0]))))
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * x @ x.T
    d2[np.diag_indices(n)] = np.inf
    i, j = np.unravel_index(np.argmin(d2), d2.shape)
    return float(np.linalg.norm(x[i] - x[j]))


@dataclass(frozen=True)
class GramMatrix:
    spec: KernelSpec
    points: np.ndarray
    matrix: np.ndarray

    @property
    def n(self) -> int:
        return self.points.shape[0]


def gram(spec: KernelSpec, points) -> GramMatrix:
    """Symmetric Gram matrix of ``spec`` on ``points``; rejects near-duplicates."""
    x = as_points(points, spec.dim)
    if min_distance(x) <= DUPLICATE_TOL:
        raise DuplicatePoints(f"points closer than {DUPLICATE_TOL:g}")
    k = spec.matrix(x, x)
    k = np.triu(k) + np.triu(k, 1).T  # exact symmetry
    return GramMatrix(spec=spec, points=x, matrix=k)

