"""Exact maps between Fock probabilities, raw moments G^(k) and Glauber g^(k).

Three coordinate systems describe the diagonal of a state truncated to at most
N quanta:

* Fock probabilities ``p = (P_0, ..., P_N)``,
* factorial moments ``G = (1, n0, G2, ..., GN)`` with ``G[k] = <a^+k a^k>``,
* normalized correlators ``(n0, g2, ..., gN)`` with ``gk = Gk / n0**k``.

``G = M @ p`` with ``M[k, n] = n! / (n - k)!`` (upper triangular), so the
inverse is available in closed form. Array functions broadcast over leading
axes; the last axis always holds the N+1 components.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from hilbert_chart.errors import DomainError, NormalizationError

EPS_NORM = 1e-9
EPS_ROUND = 1e-10
EPS_PHYS = 1e-12

# 20! is the largest factorial that is exact in double precision.
_EXACT_FACTORIAL_MAX = 20


def falling_factorial(n: int, k: int) -> float:
    """(n)_k = n (n-1) ... (n-k+1); zero when k > n."""
    if k > n:
        return 0.0
    out = 1.0
    for p in range(k):
        out *= n - p
    return out


@lru_cache(maxsize=None)
def _build_M(N: int) -> np.ndarray:
    M = np.zeros((N + 1, N + 1))
    for k in range(N + 1):
        for n in range(k, N + 1):
            M[k, n] = falling_factorial(n, k)
    M.setflags(write=False)
    return M


def build_M(N: int) -> np.ndarray:
    """Upper-triangular moment matrix with ``M[k, n] = (n)_k``."""
    if N < 0:
        raise DomainError(f"N must be non-negative, got {N}")
    return _build_M(int(N)).copy()


@lru_cache(maxsize=None)
def _inverse_coefficients(N: int) -> np.ndarray:
    # C[i, j] = (-1)^(i+j) / (i! (j-i)!) for j >= i
    C = np.zeros((N + 1, N + 1))
    for i in range(N + 1):
        for j in range(i, N + 1):
            if j <= _EXACT_FACTORIAL_MAX:
                mag = 1.0 / (float(math.factorial(i)) * float(math.factorial(j - i)))
            else:
                mag = math.exp(-math.lgamma(i + 1) - math.lgamma(j - i + 1))
            C[i, j] = mag if (i + j) % 2 == 0 else -mag
    C.setflags(write=False)
    return C


def inverse_M(N: int) -> np.ndarray:
    """Closed-form inverse of :func:`build_M`."""
    if N < 0:
        raise DomainError(f"N must be non-negative, got {N}")
    return _inverse_coefficients(int(N)).copy()


def _compensated_matvec(C: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Return ``x @ C.T`` over the last axis with Neumaier summation."""
    n = C.shape[1]
    total = np.zeros(x.shape[:-1] + (C.shape[0],))
    comp = np.zeros_like(total)
    for j in range(n):
        term = x[..., j, None] * C[:, j]
        t = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - t) + term, (term - t) + total)
        total = t
    return total + comp


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0 or arr.shape[-1] == 0:
        raise DomainError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def correlators_of(p) -> np.ndarray:
    """Factorial moments ``(sum P, n0, G2, ..., GN)`` of Fock probabilities.

    Raises :class:`NormalizationError` when ``sum(p)`` is off by more than
    ``EPS_NORM``.
    """
    p = _as_vector(p, "p")
    norm = p.sum(axis=-1)
    if np.any(np.abs(norm - 1.0) > EPS_NORM):
        raise NormalizationError(f"probabilities sum to {norm!r}, not 1")
    M = _build_M(p.shape[-1] - 1)
    return p @ M.T


def fock_of(G, N: int | None = None) -> np.ndarray:
    """Invert :func:`correlators_of`.

    ``P_i = sum_{j>=i} (-1)^(i+j) G_j / (i! (j-i)!)``, summed with
    compensation. Unphysical inputs give vectors outside [0, 1]; that is
    data, not an error.
    """
    G = _as_vector(G, "G")
    if N is None:
        N = G.shape[-1] - 1
    if G.shape[-1] != N + 1:
        raise DomainError(f"expected {N + 1} correlators for N={N}, got {G.shape[-1]}")
    return _compensated_matvec(_inverse_coefficients(N), G)


@dataclass(frozen=True)
class FockDistribution:
    """Validated diagonal (P_0, ..., P_N) of a state in H_N."""

    p: tuple[float, ...]

    def __post_init__(self):
        arr = _as_vector(self.p, "p")
        if arr.ndim != 1:
            raise DomainError("FockDistribution holds a single vector")
        if np.any(arr < -EPS_PHYS) or np.any(arr > 1 + EPS_PHYS):
            raise DomainError(f"probabilities outside [0, 1]: {arr}")
        if abs(arr.sum() - 1.0) > EPS_NORM:
            raise NormalizationError(f"probabilities sum to {arr.sum()!r}")
        object.__setattr__(self, "p", tuple(float(x) for x in arr))

    @property
    def N(self) -> int:
        return len(self.p) - 1

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.p, dtype=dtype)


@dataclass(frozen=True)
class CorrelatorVector:
    """Validated raw moments (G0 = 1, n0, G2, ..., GN)."""

    values: tuple[float, ...]

    def __post_init__(self):
        arr = _as_vector(self.values, "G")
        if arr.ndim != 1:
            raise DomainError("CorrelatorVector holds a single vector")
        if abs(arr[0] - 1.0) > EPS_NORM:
            raise NormalizationError(f"G0 must be 1, got {arr[0]!r}")
        if np.any(arr < 0):
            raise DomainError(f"negative moments: {arr}")
        object.__setattr__(self, "values", tuple(float(x) for x in arr))

    @property
    def N(self) -> int:
        return len(self.values) - 1

    @property
    def n0(self) -> float:
        return self.values[1] if self.N >= 1 else 0.0

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True)
class GlauberPoint:
    """Normalized point ``(n0, g2, ..., gN)``.

    ``g`` is ``None`` for the vacuum image (n0 = 0), where normalized
    correlators do not exist.
    """

    n0: float
    g: tuple[float, ...] | None
    N: int

    def __post_init__(self):
        if self.N < 0:
            raise DomainError(f"N must be non-negative, got {self.N}")
        if not math.isfinite(self.n0) or self.n0 < 0:
            raise DomainError(f"n0 must be finite and >= 0, got {self.n0}")
        if self.g is not None:
            g = tuple(float(x) for x in self.g)
            if len(g) != max(self.N - 1, 0):
                raise DomainError(f"expected {max(self.N - 1, 0)} correlators g2..gN, got {len(g)}")
            if any(not math.isfinite(x) or x < 0 for x in g):
                raise DomainError(f"correlators must be finite and >= 0, got {g}")
            object.__setattr__(self, "g", g)
        object.__setattr__(self, "n0", float(self.n0))

    @classmethod
    def of(cls, n0: float, *g: float) -> "GlauberPoint":
        """Build from ``n0, g2, ..., gN``; N is inferred from the count."""
        return cls(n0, tuple(g), len(g) + 1)

    @property
    def defined(self) -> bool:
        return self.g is not None

    def gk(self, k: int) -> float:
        if self.g is None:
            raise DomainError("g^(k) is undefined at n0 = 0")
        return self.g[k - 2]


def normalize(G) -> GlauberPoint:
    """Map ``(1, n0, G2, ..., GN)`` to ``(n0, G2/n0^2, ..., GN/n0^N)``."""
    G = _as_vector(G, "G")
    if G.ndim != 1:
        raise DomainError("normalize takes a single vector")
    if abs(G[0] - 1.0) > EPS_NORM:
        raise NormalizationError(f"G0 must be 1, got {G[0]!r}")
    N = G.shape[0] - 1
    if N == 0:
        return GlauberPoint(0.0, (), 0)
    n0 = float(G[1])
    if n0 == 0.0:
        if np.any(G[2:] != 0.0):
            raise DomainError("n0 = 0 with non-zero higher moments is impossible")
        return GlauberPoint(0.0, None, N)
    k = np.arange(2, N + 1)
    return GlauberPoint(n0, tuple(G[2:] / n0**k), N)


def denormalize(q: GlauberPoint) -> np.ndarray:
    """Inverse of :func:`normalize`; the vacuum maps to all-zero moments."""
    out = np.zeros(q.N + 1)
    out[0] = 1.0
    if q.N == 0 or q.n0 == 0.0:
        return out
    out[1] = q.n0
    if q.g is None:
        raise DomainError("g components are undefined but n0 > 0")
    k = np.arange(2, q.N + 1)
    out[2:] = np.asarray(q.g) * q.n0**k
    return out


def denormalize_array(n0, g) -> np.ndarray:
    """Vectorized :func:`denormalize`; ``g`` has shape (..., N-1)."""
    n0 = np.asarray(n0, dtype=float)
    g = np.asarray(g, dtype=float)
    N = g.shape[-1] + 1
    k = np.arange(2, N + 1)
    out = np.empty(np.broadcast_shapes(n0.shape, g.shape[:-1]) + (N + 1,))
    out[..., 0] = 1.0
    out[..., 1] = n0
    out[..., 2:] = g * n0[..., None] ** k
    return out


def jacobian_G_to_g(n0, N: int):
    """``prod_{p=2..N} n0^p = n0^((N^2+N-2)/2)``."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    return np.power(n0, (N * N + N - 2) // 2)
