"""Closed-form boundaries of the physical region in correlator space.

H_2 and H_3 admit explicit bounds for each variable given the others. For
general N only the projections on (n0, g^(k)) have closed forms; they are
realized by "coin states", mixtures of exactly two Fock states.

The physicality test in :mod:`hilbert_chart.geometry` is authoritative; the
formulas here are exact but are validated against it in the test-suite.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from hilbert_chart.core import (
    EPS_PHYS,
    FockDistribution,
    GlauberPoint,
    falling_factorial,
)
from hilbert_chart.errors import DomainError

log = logging.getLogger(__name__)

FOCK3_G3 = 2.0 / 9.0  # g^(3) of the Fock state |3>


@dataclass(frozen=True)
class BoundaryResult:
    """Admissible interval for ``which_var`` given the other coordinates."""

    lower: float
    upper: float
    which_var: str
    feasible: bool

    def contains(self, value: float, slack: float = EPS_PHYS) -> bool:
        if not self.feasible:
            return False
        tol = slack * max(1.0, abs(value))
        return self.lower - tol <= value <= self.upper + tol


def _infeasible(which: str) -> BoundaryResult:
    return BoundaryResult(math.nan, math.nan, which, False)


# ---------------------------------------------------------------------------
# H_2
# ---------------------------------------------------------------------------


def h2_g2_bounds(n0: float) -> BoundaryResult:
    """Bounds on g2 at fixed n0 in H_2: floor formula below, 1/n0 above."""
    if not 0.0 <= n0 <= 2.0:
        return _infeasible("g2")
    if n0 == 0.0:
        return BoundaryResult(0.0, math.inf, "g2", True)
    m = math.floor(n0)
    lower = m * (2 * n0 - m - 1) / n0**2
    return BoundaryResult(lower, 1.0 / n0, "g2", True)


def h2_n0_upper(g2):
    """Largest population compatible with g2 in H_2.

    Equal to ``(1 - sqrt(1-2 g2) theta(1-2 g2)) / g2``, written as
    ``2 / (1 + sqrt(1 - 2 g2))`` below g2 = 1/2 so that g2 -> 0 is exact.
    """
    g2 = np.asarray(g2, dtype=float)
    if np.any(g2 < 0):
        raise DomainError("g2 must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        low = 2.0 / (1.0 + np.sqrt(np.clip(1.0 - 2.0 * g2, 0.0, None)))
        out = np.where(g2 <= 0.5, low, 1.0 / g2)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# General H_N projections on (n0, g^(k))
# ---------------------------------------------------------------------------


def gk_lower(n0: float, k: int) -> float:
    """Smallest g^(k) at population n0 (any N >= ceil(n0)).

    Attained by the coin state between |m> and |m+1>, m = floor(n0):
    G^(k) = (m)_k (1 - f) + (m+1)_k f with f = n0 - m. For m >= k this is the
    floor formula m!/((m-k)! n0^k) (1 + k f / (m + 1 - k)); for m = k-1 it
    reduces to k! f / n0^k and for m < k-1 it vanishes.
    """
    if n0 <= 0.0:
        return 0.0
    m = math.floor(n0)
    f = n0 - m
    G = falling_factorial(m, k) * (1.0 - f) + falling_factorial(m + 1, k) * f
    return G / n0**k


def gk_upper(n0: float, k: int, N: int) -> float:
    """Largest g^(k) at population n0 in H_N: (N-1)!/(N-k)! / n0^(k-1)."""
    if n0 == 0.0:
        return math.inf
    return falling_factorial(N - 1, k - 1) / n0 ** (k - 1)


def hN_gk_bounds(n0: float, k: int, N: int) -> BoundaryResult:
    """Projected bounds on g^(k) at fixed n0 in H_N."""
    if not 2 <= k <= N:
        raise DomainError(f"need 2 <= k <= N, got k={k}, N={N}")
    which = f"g{k}"
    if not 0.0 <= n0 <= N:
        return _infeasible(which)
    if n0 == 0.0:
        return BoundaryResult(0.0, math.inf, which, True)
    return BoundaryResult(gk_lower(n0, k), gk_upper(n0, k, N), which, True)


def hinf_gk_lower(n0: float, k: int) -> BoundaryResult:
    """H_infinity keeps only the lower bound."""
    if n0 < 0:
        return _infeasible(f"g{k}")
    return BoundaryResult(gk_lower(n0, k), math.inf, f"g{k}", True)


# ---------------------------------------------------------------------------
# H_3
# ---------------------------------------------------------------------------


def _bounded(lower: float, upper: float, which: str) -> BoundaryResult:
    tol = EPS_PHYS * max(1.0, abs(upper), abs(lower))
    return BoundaryResult(lower, upper, which, lower <= upper + tol)


def h3_g2_bounds(n0: float, g3: float) -> BoundaryResult:
    """g2 range at fixed (n0, g3) in H_3.

    upper = n0 g3 / 2 + 1/n0, lower = max(n0 g3, n0 g3 / 3 + 2/n0 - 2/n0^2).
    """
    if g3 < 0 or not hN_gk_bounds(n0, 3, 3).contains(g3):
        return _infeasible("g2")
    if n0 == 0.0:
        return BoundaryResult(0.0, math.inf, "g2", True)
    upper = n0 * g3 / 2 + 1 / n0
    lower = max(n0 * g3, n0 * g3 / 3 + 2 / n0 - 2 / n0**2)
    return _bounded(lower, upper, "g2")


def h3_g3_bounds(n0: float, g2: float) -> BoundaryResult:
    """g3 range at fixed (n0, g2) in H_3.

    upper = min(g2/n0, 3 g2/n0 - 6/n0^2 + 6/n0^3), lower = max(0, 2 g2/n0 - 2/n0^2).
    """
    if g2 < 0 or not hN_gk_bounds(n0, 2, 3).contains(g2):
        return _infeasible("g3")
    if n0 == 0.0:
        return BoundaryResult(0.0, math.inf, "g3", True)
    upper = min(g2 / n0, 3 * g2 / n0 - 6 / n0**2 + 6 / n0**3)
    lower = max(0.0, 2 * g2 / n0 - 2 / n0**2)
    return _bounded(lower, upper, "g3")


def aux_f0(g2, g3):
    """Square root of the cubic discriminant term; complex when negative."""
    g2 = np.asarray(g2, dtype=float)
    g3 = np.asarray(g3, dtype=float)
    rad = 6 * g2**3 * g3**2 - 3 * g2**2 * g3**2 - 18 * g2 * g3**3 + 9 * g3**4 + 8 * g3**3
    return np.sqrt(rad.astype(complex))


def _f1_complex(g2, g3):
    g2 = np.asarray(g2, dtype=float)
    g3 = np.asarray(g3, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        # Principal complex cube root; it selects the smallest positive root
        # of P_0(n0) = 0 wherever U uses it (checked against bisection).
        c = (-(g2**3) + aux_f0(g2, g3) + 3 * g2 * g3 - 3 * g3**2) ** (1.0 / 3.0)
        return -c / g3 + (18 * g3 - 9 * g2**2) / (9 * g3 * c) + g2 / g3


def aux_f1(g2, g3):
    """Cardano root of P_0 = 1 - n0 + n0^2 g2/2 - n0^3 g3/6 = 0.

    Raises :class:`DomainError` where the principal branch is not real, which
    happens only outside the region where the population bound uses it.
    """
    z = _f1_complex(g2, g3)
    bad = np.abs(z.imag) > 1e-7 * np.maximum(1.0, np.abs(z.real))
    if np.any(bad | ~np.isfinite(z.real)):
        log.warning("f1 has no real principal branch at g2=%s, g3=%s", g2, g3)
        raise DomainError("f1 is not real on the principal branch here")
    out = z.real
    return out[()] if out.ndim == 0 else out


def aux_f2(g3):
    """g2 at which the population bound switches from f1 to the sqrt branch.

    Defined for g3 in [0, 2/9]; the real part is taken as written.
    """
    g3 = np.asarray(g3, dtype=float)
    r = (
        -8748 * g3**2
        - 4860 * g3
        + 8748 * np.sqrt((g3 - FOCK3_G3).astype(complex)) ** 3 * np.sqrt(g3)
        + 54
    ) ** (1.0 / 3.0)
    out = (r / (18 * 2 ** (1 / 3)) - (-324 * g3 - 9) / (9 * 2 ** (2 / 3) * r)).real + 1 / 6
    return out[()] if out.ndim == 0 else out


def _cubic_polish(n, g2, g3, steps: int = 3):
    # Newton on p(n) = g3 n^3 - 3 g2 n^2 + 6 n - 6, the root condition of P_0.
    for _ in range(steps):
        p = ((g3 * n - 3 * g2) * n + 6) * n - 6
        dp = (3 * g3 * n - 6 * g2) * n + 6
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dp != 0, p / dp, 0.0)
        n = np.where(np.abs(step) < 1e-3 * np.abs(n), n - step, n)
    return n


def _p0_first_root(g2: np.ndarray, g3: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Root of p(n) = g3 n^3 - 3 g2 n^2 + 6 n - 6 (P_0 = 0) in (0, upper], g3 > 0.

    ``upper`` is the first critical point of p (inf if there is none), so p
    increases from p(0) = -6 and the root is unique when p(upper) > 0.
    Cardano (principal branch) plus Newton polishing; where that fails to
    certify a root inside the bracket, bisect on the sign of p.
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # H_2 root as start value where Cardano loses digits
        start = np.where(g3 < 1e-7, h2_n0_upper(np.minimum(g2, 0.5)), _f1_complex(g2, g3).real)
        n = _cubic_polish(start, g2, g3)
        resid = np.abs(((g3 * n - 3 * g2) * n + 6) * n - 6)
        scale = ((g3 * n + 3 * g2) * n + 6) * n + 6
        # near a double root the residual is quadratic in the error, so only
        # a residual at rounding level certifies the root
        ok = np.isfinite(n) & (n > 0) & (n <= upper) & (resid <= 64 * np.finfo(float).eps * scale)
    bad = ~ok
    if np.any(bad):
        a, b = g2[bad], g3[bad]
        # Cauchy bound on the positive roots caps an infinite bracket
        hi = np.minimum(upper[bad], 1.0 + np.maximum(3 * a, 6.0) / b)
        lo = np.zeros_like(hi)
        for _ in range(1100):
            mid = 0.5 * (lo + hi)
            if np.all((mid == lo) | (mid == hi)):
                break
            pos = ((b * mid - 3 * a) * mid + 6) * mid - 6 > 0
            hi = np.where(pos, mid, hi)
            lo = np.where(pos, lo, mid)
        n[bad] = 0.5 * (lo + hi)
    return n


def h3_n0_upper(g2, g3):
    """Population bound U(g2, g3) of H_3: physical iff 0 <= n0 <= U.

    U is the smallest of the three binding constraints P_0 >= 0 (Cardano
    root f1), P_1 >= 0 (quadratic root) and P_2 >= 0 (g2/g3), organized in
    four cases split at g3 = 2/9. g3 = 0 is the H_2 limit.
    """
    g2 = np.asarray(g2, dtype=float)
    g3 = np.asarray(g3, dtype=float)
    if np.any(g2 < 0) or np.any(g3 < 0):
        raise DomainError("g2 and g3 must be non-negative")
    g2, g3 = np.broadcast_arrays(g2, g3)
    out = np.empty(g2.shape)
    zero = g3 == 0
    out[zero] = h2_n0_upper(g2[zero])
    pos = ~zero
    a, b = g2[pos], g3[pos]
    below = b <= FOCK3_G3
    use_quad = np.where(below, a >= aux_f2(np.minimum(b, FOCK3_G3)), a >= np.sqrt(2 * b))
    res = np.empty(a.shape)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        # rationalized (g2 - sqrt(g2^2 - 2 g3)) / g3
        qa, qb = a[use_quad], b[use_quad]
        disc = qa * qa - 2 * qb
        # a discriminant within rounding of 0 is a double root of P_1 (the
        # |0>-|3> coin curve); snapping it keeps that family on the bound
        disc = np.where(disc <= 4 * np.finfo(float).eps * qa * qa, 0.0, disc)
        res[use_quad] = 2.0 / (qa + np.sqrt(disc))
        ca, cb = a[~use_quad], b[~use_quad]
        # The P_1 root is the first local maximum of the P_0 cubic p, so P_0
        # only binds first when p is already positive there. Near the f2
        # curve both coincide and the quadratic root is the better conditioned.
        cdisc = ca * ca - 2 * cb
        p1 = np.where(cdisc >= 0, 2.0 / (ca + np.sqrt(np.maximum(cdisc, 0.0))), np.inf)
        at_p1 = ((cb * p1 - 3 * ca) * p1 + 6) * p1 - 6
        at_scale = ((cb * p1 + 3 * ca) * p1 + 6) * p1 + 6
        p0 = np.full(ca.shape, np.inf)
        # a maximum within rounding of zero is a touch, not a crossing
        crosses = ~np.isfinite(p1) | (at_p1 > 64 * np.finfo(float).eps * at_scale)
        p0[crosses] = _p0_first_root(ca[crosses], cb[crosses], p1[crosses])
        res[~use_quad] = np.minimum(np.minimum(p0, ca / cb), p1)
    out[pos] = res
    # At (2/3, 2/9) all three constraints share a triple root at n0 = 3, so
    # the Cardano root moves by ~eps^(1/3) under rounding of the inputs.
    # Inside that rounding neighbourhood use g2/g3, which is well conditioned.
    tol = 8 * np.finfo(float).eps
    triple = pos & (np.abs(g2 - 2.0 / 3.0) <= tol) & (np.abs(g3 - FOCK3_G3) <= tol)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(triple, g2 / np.where(triple, g3, 1.0), out)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Coin states and the factorial-moment inequalities
# ---------------------------------------------------------------------------


def coin_state(mu: int, nu: int, n0: float, N: int | None = None) -> FockDistribution:
    """Mixture of |mu> and |nu> with mean population n0."""
    if N is None:
        N = nu
    if not (0 <= mu < nu <= N):
        raise DomainError(f"need 0 <= mu < nu <= N, got mu={mu}, nu={nu}, N={N}")
    if not mu <= n0 <= nu:
        raise DomainError(f"n0={n0} outside [{mu}, {nu}]")
    p = [0.0] * (N + 1)
    p[mu] = (nu - n0) / (nu - mu)
    p[nu] = (n0 - mu) / (nu - mu)
    return FockDistribution(tuple(p))


def _slack(*values: float) -> float:
    return EPS_PHYS * max(1.0, *(abs(v) for v in values))


def check_prop1(G, N: int | None = None) -> bool:
    """(N-k+1)! G^(k-1) >= (N-k)! G^(k) for 2 <= k <= N."""
    G = np.asarray(G, dtype=float)
    if N is None:
        N = len(G) - 1
    for k in range(2, N + 1):
        lhs = math.factorial(N - k + 1) * G[k - 1]
        rhs = math.factorial(N - k) * G[k]
        if lhs < rhs - _slack(lhs, rhs):
            return False
    return True


def _as_point(q, N):
    if isinstance(q, GlauberPoint):
        return q
    return GlauberPoint.of(*q)


def check_prop2(q, N: int | None = None) -> bool:
    """g2 <= (N-1)/n0, with equality only for the |0>-|N> coin states."""
    q = _as_point(q, N)
    N = q.N if N is None else N
    if q.n0 == 0.0 or N < 2:
        return True
    bound = (N - 1) / q.n0
    return q.gk(2) <= bound + _slack(bound)


def check_chain_corollary(q, N: int | None = None) -> bool:
    """g^(k) <= (N-2)!/(N-k)! g2 / n0^(k-2) for 3 <= k <= N."""
    q = _as_point(q, N)
    N = q.N if N is None else N
    if q.n0 == 0.0:
        return True
    for k in range(3, N + 1):
        bound = falling_factorial(N - 2, k - 2) * q.gk(2) / q.n0 ** (k - 2)
        if q.gk(k) > bound + _slack(bound):
            return False
    return True
