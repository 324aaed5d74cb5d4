"""Eigenvalues of the one-dimensional NTK and of the distance kernel G_alpha.

Mercer eigenvalues of ``G_alpha(x, x') = alpha - |x - x'| / pi`` on [0, 1] with
the uniform measure satisfy ``lambda = 2 / (pi * omega**2)`` where omega is a
positive root of

    h(omega) = 2 + 2 cos(omega) + omega sin(omega) (1 - 2 alpha pi).

For alpha in {1, 9/7} the roots are bracketed as follows (1-based j):
omega_1 in [pi/6, pi/2]; omega_j = (j - 1) pi for even j; omega_j in
((j - 1) pi, (j - 1/2) pi) for odd j > 1.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BracketFailure, DomainError, NotSorted, TooSmall
from .kernels import GramMatrix, KernelSpec, as_points, g_alpha_matrix, gram, min_distance, ntk1_matrix
from .numerics import loglog_slope, sym_eigvals

BRACKETED_ALPHAS = (1.0, 9.0 / 7.0)
ROOT_TOL = 1e-13


def min_eigenvalue(g: GramMatrix) -> float:
    return float(sym_eigvals(g.matrix)[-1])


def g_alpha_inverse(alpha: float, sorted_x) -> np.ndarray:
    """Closed-form inverse of the G_alpha Gram matrix on sorted points in [0, pi].

    (pi/2) times a tridiagonal matrix of reciprocal gaps, plus a wrap-around
    coupling 1 / (2 alpha pi - x_n + x_1) between the first and last points.
    """
    x = np.asarray(sorted_x, dtype=float).ravel()
    n = x.size
    if n < 3:
        raise TooSmall("closed-form inverse needs at least 3 points")
    gaps = np.diff(x)
    if np.any(gaps <= 0):
        raise NotSorted("points must be strictly increasing")
    inv_gap = 1.0 / gaps
    wrap = 1.0 / (2.0 * alpha * np.pi - x[-1] + x[0])
    out = np.zeros((n, n))
    diag = np.zeros(n)
    diag[:-1] += inv_gap
    diag[1:] += inv_gap
    diag[0] += wrap
    diag[-1] += wrap
    out[np.diag_indices(n)] = diag
    idx = np.arange(n - 1)
    out[idx, idx + 1] = -inv_gap
    out[idx + 1, idx] = -inv_gap
    out[0, -1] = out[-1, 0] = wrap
    return np.pi / 2.0 * out


def h_omega(alpha: float, omega):
    return 2.0 + 2.0 * np.cos(omega) + omega * np.sin(omega) * (1.0 - 2.0 * alpha * np.pi)


def _bisect(f, lo: float, hi: float, tol: float = ROOT_TOL) -> float:
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise BracketFailure(f"no sign change on [{lo!r}, {hi!r}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:  # interval at float resolution
            break
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if np.sign(fmid) == np.sign(flo):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class MercerSpectrum:
    alpha: float
    roots: np.ndarray
    eigenvalues: np.ndarray
    bracket_guaranteed: bool

    @property
    def j(self) -> np.ndarray:
        return np.arange(1, self.roots.size + 1)


def mercer_spectrum(alpha: float, j_max: int) -> MercerSpectrum:
    """Roots of h and the Mercer eigenvalues of G_alpha, j = 1..j_max."""
    if j_max < 1:
        raise DomainError("j_max must be >= 1")
    guaranteed = any(math.isclose(alpha, a, rel_tol=0, abs_tol=1e-15) for a in BRACKETED_ALPHAS)
    if not guaranteed:
        warnings.warn(f"root brackets are only proven for alpha in {{1, 9/7}}, got {alpha}", stacklevel=2)

    def h(w):
        return float(h_omega(alpha, w))

    roots = np.empty(j_max)
    roots[0] = _bisect(h, np.pi / 6.0, np.pi / 2.0)
    for j in range(2, j_max + 1):
        if j % 2 == 0:
            roots[j - 1] = (j - 1) * np.pi
        else:
            roots[j - 1] = _bisect(h, (j - 1) * np.pi, (j - 0.5) * np.pi)
    return MercerSpectrum(
        alpha=float(alpha),
        roots=roots,
        eigenvalues=2.0 / (np.pi * roots**2),
        bracket_guaranteed=guaranteed,
    )


def uniform_grid(grid_n: int) -> np.ndarray:
    if grid_n < 1:
        raise DomainError("grid_n must be >= 1")
    if grid_n == 1:
        return np.zeros(1)
    return np.arange(grid_n) / (grid_n - 1)


def empirical_mercer(spec: KernelSpec, grid_n: int, j_max: int) -> np.ndarray:
    """Top ``j_max`` eigenvalues of Gram / grid_n on the closed uniform grid of [0, 1]."""
    if not 1 <= j_max <= grid_n:
        raise DomainError("need 1 <= j_max <= grid_n")
    g = gram(spec, uniform_grid(grid_n))
    return sym_eigvals(g.matrix / grid_n)[:j_max]


def sandwich_check(x, *, slack: float = 1e-10) -> tuple[bool, bool]:
    """Loewner-order check G_1 <= K_1 <= 7 G_{9/7} on points in [0, 1]."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 1:
        raise DomainError("need at least one point")
    if np.any(x < 0) or np.any(x > 1):
        raise DomainError("sandwich ordering is stated for points in [0, 1]")
    gram(KernelSpec.ntk1(), x)  # duplicate check
    k = ntk1_matrix(x, x)
    lo = sym_eigvals(k - g_alpha_matrix(1.0, x, x))[-1]
    hi = sym_eigvals(7.0 * g_alpha_matrix(9.0 / 7.0, x, x) - k)[-1]
    return bool(lo >= -slack), bool(hi >= -slack)


def decay_report(lambdas, j_lo: int, j_hi: int, *, index_offset: int = 0) -> float:
    """Log-log slope of lambda_j against (j - index_offset), j in [j_lo, j_hi].

    ``lambdas[0]`` is lambda_1.  The default abscissa is j itself; with
    ``index_offset=1`` the abscissa is the root index j - 1, which matches the
    exact even-j values 2 / (pi^3 (j - 1)^2) of the transcendental spectrum.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if j_lo < 2:
        raise DomainError("fits start at j = 2; lambda_1 is only bracketed")
    if j_hi > lambdas.size or j_hi <= j_lo:
        raise DomainError(f"need j_lo < j_hi <= {lambdas.size}")
    j = np.arange(j_lo, j_hi + 1)
    return loglog_slope(j - index_offset, lambdas[j_lo - 1 : j_hi])


@dataclass(frozen=True)
class SpectrumReport:
    n: int
    d_min: float
    lambda_min: float
    all_eigenvalues: np.ndarray
    sandwich_ok: bool | None
    decay_slope: float


def spectrum_report(spec: KernelSpec, points, *, j_hi: int = 40) -> SpectrumReport:
    """Gram spectrum summary; the decay slope uses eigenvalues of Gram / n."""
    x = as_points(points, spec.dim)
    g = gram(spec, x)
    values = sym_eigvals(g.matrix)
    n = x.shape[0]
    top = min(n, j_hi)
    slope = float("nan")
    if top >= 3 and np.all(values[:top] > 0):
        slope = decay_report(values / n, 2, top)
    sandwich = None
    if x.shape[1] == 1 and np.all((x >= 0) & (x <= 1)):
        sandwich = all(sandwich_check(x[:, 0]))
    return SpectrumReport(
        n=n,
        d_min=min_distance(x),
        lambda_min=float(values[-1]),
        all_eigenvalues=values,
        sandwich_ok=sandwich,
        decay_slope=slope,
    )
