"""Dense linear algebra, seeded sampling and power-law fitting.

Everything here operates on plain float64 numpy arrays.  The production eigen
solver is LAPACK's ``syevd`` via :func:`numpy.linalg.eigh`; :func:`jacobi_eigen`
is a slow, self-contained cyclic Jacobi solver kept as an independent reference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DomainError, LengthMismatch, NonFinite, NotPositiveDefinite

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalues sorted descending and the matching orthonormal columns."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.vectors * self.values) @ self.vectors.T


def as_symmetric(a, *, tol: float = 0.0) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise DomainError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix has NaN or infinite entries")
    if tol == 0.0:
        if not np.array_equal(a, a.T):
            raise DomainError("matrix is not exactly symmetric")
    elif np.max(np.abs(a - a.T)) > tol * max(np.max(np.abs(a)), 1.0):
        raise DomainError("matrix is not symmetric")
    return a


def sym_eigen(a) -> EigenPair:
    """Full eigendecomposition of a symmetric matrix, values descending.

    Negative eigenvalues of matrices that are PSD in exact arithmetic are
    reported as computed; clipping is the caller's business.
    """
    a = as_symmetric(a, tol=1e-12)
    w, q = np.linalg.eigh(a)
    return EigenPair(values=w[::-1].copy(), vectors=q[:, ::-1].copy())


def sym_eigvals(a) -> np.ndarray:
    a = as_symmetric(a, tol=1e-12)
    return np.linalg.eigvalsh(a)[::-1].copy()


def jacobi_eigen(a, *, rtol: float = 1e-12, max_sweeps: int = 100) -> EigenPair:
    """Cyclic Jacobi eigen-solver.

    Sweeps over all (p, q) pairs with the classical rotation until the
    off-diagonal Frobenius norm drops below ``rtol * ||A||_F``.  O(n^3) per
    sweep in Python loops over pairs, so only sensible for small n.
    """
    a = as_symmetric(a, tol=1e-12).copy()
    n = a.shape[0]
    v = np.eye(n)
    target = rtol * np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    w = np.diag(a).copy()
    order = np.argsort(w)[::-1]
    return EigenPair(values=w[order], vectors=v[:, order])


def spd_solve(a, b, *, tau0: float = 1e-12, tau_max: float = 1e-6) -> np.ndarray:
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Cholesky first; if that fails, retry with ``tau * mean(diag) * I`` added,
    tau = 1e-12, 1e-11, ... up to 1e-6.
    """
    a = as_symmetric(a, tol=1e-12)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != a.shape[0]:
        raise LengthMismatch(f"rhs has length {b.shape[0]}, matrix order {a.shape[0]}")
    if not np.all(np.isfinite(b)):
        raise NonFinite("rhs has NaN or infinite entries")
    scale = np.trace(a) / a.shape[0]
    tau = 0.0
    while True:
        try:
            shifted = a if tau == 0.0 else a + tau * scale * np.eye(a.shape[0])
            factor = scipy.linalg.cho_factor(shifted, lower=True, check_finite=False)
            return scipy.linalg.cho_solve(factor, b, check_finite=False)
        except np.linalg.LinAlgError:
            tau = tau0 if tau == 0.0 else tau * 10.0
            if tau > tau_max * (1 + 1e-9):
                raise NotPositiveDefinite(
                    f"Cholesky failed even with jitter {tau / 10:.0e} * mean diagonal"
                ) from None


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(ys) against log(xs)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise LengthMismatch("xs and ys differ in length")
    if xs.size < 2:
        raise DomainError("need at least two points for a slope")
    if np.any(xs <= 0) or np.any(ys <= 0) or not np.all(np.isfinite(xs * ys)):
        raise DomainError("log-log fit needs strictly positive finite values")
    lx, ly = np.log(xs), np.log(ys)
    lx = lx - lx.mean()
    return float(np.dot(lx, ly - ly.mean()) / np.dot(lx, lx))


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class Rng:
    """Seeded stream: Philox-4x64 counter generator keyed by the seed.

    * uniforms are ``(raw >> 11) * 2**-53`` in [0, 1);
    * normals use Box-Muller on consecutive raw pairs (u1, u2), emitting
      ``r*cos``, ``r*sin`` in that order; an odd request drops the last sine;
    * :meth:`split` derives child seeds by SplitMix64, so per-worker streams do
      not depend on scheduling.

    The Philox update rule is fixed, so the raw 64-bit sequence is identical on
    every platform; normals additionally depend on IEEE ``log``/``cos``/``sin``.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._bits = np.random.Philox(key=self.seed)

    def raw(self, count: int) -> np.ndarray:
        if count <= 0:
            return np.empty(0, dtype=np.uint64)
        return np.asarray(self._bits.random_raw(count), dtype=np.uint64)

    def uniform(self, count: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        u = (self.raw(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return low + (high - low) * u

    def normal(self, count: int) -> np.ndarray:
        if count < 0:
            raise DomainError("count must be nonnegative")
        if count == 0:
            return np.empty(0)
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))  # 1 - u1 lies in (0, 1]
        angle = 2.0 * np.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = r * np.cos(angle)
        z[:, 1] = r * np.sin(angle)
        return z.reshape(-1)[:count]

    def integers(self, count: int, high: int) -> np.ndarray:
        """Uniform integers in [0, high)."""
        return np.minimum(np.floor(self.uniform(count) * high), high - 1).astype(np.int64)

    def split(self, index: int) -> "Rng":
        return Rng(splitmix64(self.seed ^ splitmix64(int(index) & _MASK64)))


def normal(rng: Rng, count: int) -> np.ndarray:
    return rng.normal(count)
