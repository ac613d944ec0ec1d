"""Volumes, metric and density of states in correlator space.

Uniform sampling of the probability simplex H_N induces, in normalized
coordinates (n0, g2, ..., gN), the density

    P_g = J * sqrt|F| / A_N * Theta = n0^((N^2+N-2)/2) / sf(N-1) * Theta

where A_N is the simplex volume, F the (constant) first fundamental form of
the linear map G -> P, J the Jacobian of G -> g and Theta the support
indicator. Theta is decided by reconstructing P and testing 0 <= P_i <= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hilbert_chart.core import (
    EPS_PHYS,
    GlauberPoint,
    _inverse_coefficients,
    denormalize,
    denormalize_array,
    fock_of,
    jacobian_G_to_g,
)
from hilbert_chart.errors import DomainError

_SF_DIRECT_MAX = 10


def simplex_volume(N: int) -> float:
    """Volume A_N = sqrt(N+1)/N! of the probability simplex of H_N."""
    if N < 0:
        raise DomainError(f"N must be non-negative, got {N}")
    return math.sqrt(N + 1) / math.factorial(N)


def log_superfactorial(N: int) -> float:
    return math.fsum(math.lgamma(i + 1) for i in range(N + 1))


def superfactorial(N: int) -> float:
    """sf(N) = prod_{i=0..N} i!; log-space beyond N = 10."""
    if N < 0:
        raise DomainError(f"N must be non-negative, got {N}")
    if N <= _SF_DIRECT_MAX:
        return float(math.prod(math.factorial(i) for i in range(N + 1)))
    return math.exp(log_superfactorial(N))


def fundamental_form(N: int) -> np.ndarray:
    """Gram matrix of dP/dG^(k), k = 1..N (independent of the point)."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    # Columns 1..N of the inverse map are the tangent vectors dP/dG^(k).
    D = _inverse_coefficients(N)[:, 1:]
    F = np.empty((N, N))
    for a in range(N):
        for b in range(N):
            F[a, b] = math.fsum(D[:, a] * D[:, b])
    return F


def sqrt_det_fundamental_form(N: int) -> float:
    """Numerical sqrt|F| via Cholesky (F is a Gram matrix, hence SPD)."""
    L = np.linalg.cholesky(fundamental_form(N))
    return float(np.exp(np.sum(np.log(np.diag(L)))))


def sqrt_det_fundamental_form_closed(N: int) -> float:
    """Closed form sqrt(N+1)/sf(N)."""
    return math.sqrt(N + 1) / superfactorial(N)


def density_prefactor(N: int) -> float:
    """1/sf(N-1), the constant in front of n0^((N^2+N-2)/2)."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    return 1.0 / superfactorial(N - 1)


def numerical_density(n0, N: int):
    """J * sqrt|F| / A_N assembled from its numerically computed factors."""
    return jacobian_G_to_g(n0, N) * sqrt_det_fundamental_form(N) / simplex_volume(N)


@dataclass(frozen=True)
class DensityValue:
    value: float
    in_support: bool


def _point_args(q, N):
    if isinstance(q, GlauberPoint):
        if N is not None and N != q.N:
            raise DomainError(f"point is dimensioned for N={q.N}, not {N}")
        return q
    vals = [float(x) for x in q]
    if N is not None and len(vals) != N:
        raise DomainError(f"expected n0 plus {N - 1} correlators for N={N}, got {len(vals)} values")
    return GlauberPoint.of(*vals)


def is_physical(q, N: int | None = None) -> bool:
    """Support indicator Theta: does some state in H_N have these correlators?

    ``q`` is a :class:`GlauberPoint` or a sequence ``(n0, g2, ..., gN)``.
    Points with some P_i exactly 0 or 1 count as physical.
    """
    q = _point_args(q, N)
    if q.n0 == 0.0:
        return True
    P = fock_of(denormalize(q))
    return bool(np.all(P >= -EPS_PHYS) and np.all(P <= 1 + EPS_PHYS))


def physical_mask(n0, g, eps: float = EPS_PHYS) -> np.ndarray:
    """Vectorized support test; ``g`` has shape (..., N-1)."""
    P = fock_of(denormalize_array(n0, g))
    return np.all((P >= -eps) & (P <= 1 + eps), axis=-1)


def joint_density(q, N: int | None = None) -> DensityValue:
    """Joint density of (n0, g2, ..., gN) under uniform sampling of H_N."""
    q = _point_args(q, N)
    if q.N < 1:
        raise DomainError("the joint density needs N >= 1")
    if not is_physical(q):
        return DensityValue(0.0, False)
    return DensityValue(float(jacobian_G_to_g(q.n0, q.N)) * density_prefactor(q.N), True)


def joint_density_array(n0, g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    N = g.shape[-1] + 1
    n0 = np.asarray(n0, dtype=float)
    inside = physical_mask(n0, g)
    return np.where(inside, jacobian_G_to_g(n0, N) * density_prefactor(N), 0.0)
