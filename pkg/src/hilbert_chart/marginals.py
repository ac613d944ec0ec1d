"""Exact marginal and reduced densities for H_2 and H_3, Irwin-Hall for H_N.

All densities are for uniform sampling of the probability simplex. Every
function is vectorized and returns 0 outside its support. Closed-form 1D
marginals are also exposed as :class:`PiecewiseDensity1D` objects, which know
their breakpoints and can check continuity and normalization.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import integrate

from hilbert_chart.boundaries import h3_n0_upper
from hilbert_chart.errors import DomainError, QuadratureError


def _scalar(out: np.ndarray):
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class PiecewiseDensity1D:
    """Density made of analytic pieces; piece i lives on (b_i, b_{i+1}].

    The first breakpoint belongs to the first piece when ``closed[0]`` is
    true; the last breakpoint may be ``inf``.
    """

    breakpoints: tuple[float, ...]
    pieces: tuple[Callable, ...]
    closed: tuple[bool, bool] = (True, True)
    poly_degree: int | None = None

    def __post_init__(self):
        if len(self.pieces) != len(self.breakpoints) - 1:
            raise ValueError("need one piece per interval between breakpoints")
        if any(b >= a for a, b in zip(self.breakpoints[1:], self.breakpoints)):
            raise ValueError("breakpoints must be strictly increasing")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        b = self.breakpoints
        for i, piece in enumerate(self.pieces):
            lo, hi = b[i], b[i + 1]
            mask = (x > lo) & (x <= hi)
            if i == 0 and self.closed[0]:
                mask |= x == lo
            if i == len(self.pieces) - 1 and not self.closed[1]:
                mask &= x < hi
            if np.any(mask):
                out[mask] = piece(x[mask])
        return _scalar(out)

    @property
    def support(self) -> tuple[float, float]:
        return self.breakpoints[0], self.breakpoints[-1]

    def continuity_gaps(self) -> list[float]:
        """|left piece - right piece| at each interior breakpoint."""
        gaps = []
        for i, x in enumerate(self.breakpoints[1:-1]):
            left = float(self.pieces[i](np.array([x]))[0])
            right = float(self.pieces[i + 1](np.array([x]))[0])
            gaps.append(abs(left - right))
        return gaps

    def derivative_gaps(self, h: float = 1e-3, levels: int = 5) -> list[float]:
        """Mismatch of one-sided derivatives at interior breakpoints.

        Pieces built from square roots approach a breakpoint like
        (b - x)^(3/2), so plain one-sided differences converge only as
        sqrt(h). Each side is extrapolated in powers of sqrt(h) from steps
        h, h/4, h/16, ...; every piece is sampled only inside its interval.
        """
        gaps = []
        for i, x in enumerate(self.breakpoints[1:-1]):
            dl = _one_sided_derivative(self.pieces[i], x, -h, levels)
            dr = _one_sided_derivative(self.pieces[i + 1], x, h, levels)
            gaps.append(abs(dl - dr))
        return gaps

    def _piece_integral(self, i: int, lo: float, hi: float, k: int, tol: float) -> float:
        piece = self.pieces[i]
        if self.poly_degree is not None and math.isfinite(hi):
            # Gauss-Legendre is exact for polynomial pieces and immune to the
            # evaluation noise that stalls adaptive quadrature.
            x, w = np.polynomial.legendre.leggauss((self.poly_degree + k) // 2 + 1)
            t = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
            return float(0.5 * (hi - lo) * np.sum(w * t**k * piece(t)))
        val, _ = integrate.quad(
            lambda t: t**k * float(piece(np.array([t]))[0]), lo, hi, epsabs=tol, epsrel=tol, limit=200
        )
        return val

    def integrate(self, a: float | None = None, b: float | None = None, tol: float = 1e-12) -> float:
        """Integral over [a, b] (defaults to the whole support), piece by piece."""
        lo_all, hi_all = self.support
        a = lo_all if a is None else max(a, lo_all)
        b = hi_all if b is None else min(b, hi_all)
        total = 0.0
        for i in range(len(self.pieces)):
            lo = max(a, self.breakpoints[i])
            hi = min(b, self.breakpoints[i + 1])
            if hi > lo:
                total += self._piece_integral(i, lo, hi, 0, tol)
        return total

    def moment(self, k: int, tol: float = 1e-12) -> float:
        """Raw moment of order k over the whole support."""
        return math.fsum(
            self._piece_integral(i, self.breakpoints[i], self.breakpoints[i + 1], k, tol)
            for i in range(len(self.pieces))
        )


def _one_sided_derivative(f: Callable, x: float, h: float, levels: int) -> float:
    steps = h / 4.0 ** np.arange(levels)
    fx = float(f(np.array([x]))[0])
    d = [(float(f(np.array([x + t]))[0]) - fx) / t for t in steps]
    # halving sqrt(step) per level: remove the sqrt(h)^p error term at pass p
    for p in range(1, levels):
        d = [(2.0**p * d[j + 1] - d[j]) / (2.0**p - 1.0) for j in range(len(d) - 1)]
    return d[0]


# ---------------------------------------------------------------------------
# H_2
# ---------------------------------------------------------------------------

H2_N0 = PiecewiseDensity1D((0.0, 1.0, 2.0), (lambda x: x, lambda x: 2.0 - x))


def _h2_g2_antibunched(x):
    # sqrt(8/9) (1 - sqrt(1-2x) - x)^(3/2) / x^3 == (8/3) / (1 + sqrt(1-2x))^3,
    # i.e. U^3/3 with the rationalized population bound; no cancellation at 0.
    return (8.0 / 3.0) / (1.0 + np.sqrt(np.clip(1.0 - 2.0 * x, 0.0, None))) ** 3


H2_G2 = PiecewiseDensity1D(
    (0.0, 0.5, math.inf),
    (_h2_g2_antibunched, lambda x: 1.0 / (3.0 * x**3)),
    closed=(True, False),
)


def h2_marginal_n0(n0):
    """Population density in H_2: triangle on [0, 2] peaked at n0 = 1."""
    return H2_N0(n0)


def h2_marginal_g2(g2):
    """g2 density in H_2; mode at 1/2 (Fock |2>), tail 1/(3 g2^3)."""
    return H2_G2(g2)


def h2_joint_n0_g2(n0, g2):
    """n0^2 on the closed-form support of H_2 (both g2 bounds)."""
    n0 = np.asarray(n0, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    m = np.floor(n0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lower = np.where(n0 > 0, m * (2 * n0 - m - 1) / n0**2, 0.0)
        inside = (n0 > 0) & (n0 <= 2) & (g2 >= lower) & (g2 * n0 <= 1.0)
    return _scalar(np.where(inside, n0**2, 0.0))


# ---------------------------------------------------------------------------
# H_3
# ---------------------------------------------------------------------------


def _h3_n0_pieces():
    return (
        lambda x: x**2 / 2,
        lambda x: -(2 * x**2 - 6 * x + 3) / 2,
        lambda x: (x**2 - 6 * x + 9) / 2,
    )


H3_N0 = PiecewiseDensity1D((0.0, 1.0, 2.0, 3.0), _h3_n0_pieces())


def h3_marginal_n0(n0):
    """Population density in H_3 (Irwin-Hall with three uniforms)."""
    return H3_N0(n0)


def h3_reduced_n0_g2(n0, g2):
    """Joint density of (n0, g2) in H_3 after integrating out g3.

    Four regimes set by g2 against 3/n0 - 3/n0^2 (where the upper g3 bound
    switches) and against 1/n0 (where the lower g3 bound leaves 0).
    """
    n0 = np.asarray(n0, dtype=float)
    g2 = np.asarray(g2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = 3 / n0 - 3 / n0**2
        b = 1 / n0
        below_a = g2 < a
        below_b = g2 < b
        val = np.select(
            [below_a & ~(g2 > b), below_a & (g2 > b), ~below_a & below_b],
            [
                3 * n0**2 - 3 * n0**3 + 1.5 * g2 * n0**4,
                3 * n0**2 - 2 * n0**3 + g2 * n0**4 / 2,
                g2 * n0**4 / 2,
            ],
            default=n0**3 - g2 * n0**4 / 2,
        )
    inside = (n0 > 0) & (n0 <= 3) & (g2 >= 0) & (val > 0)
    return _scalar(np.where(inside, val, 0.0))


def h3_reduced_n0_g3(n0, g3):
    """Joint density of (n0, g3) in H_3 after integrating out g2.

    n0^5/2 times the length of the admissible g2 interval; the lower end
    switches from n0 g3/3 + 2/n0 - 2/n0^2 to n0 g3 at g3 = 3 (n0 - 1)/n0^3.
    """
    n0 = np.asarray(n0, dtype=float)
    g3 = np.asarray(g3, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = 3 * (n0 - 1) / n0**3
        val = np.where(
            g3 < t,
            n0**3 - n0**4 / 2 + n0**6 * g3 / 12,
            n0**4 / 2 - n0**6 * g3 / 4,
        )
    inside = (n0 > 0) & (n0 <= 3) & (g3 >= 0) & (val > 0)
    return _scalar(np.where(inside, val, 0.0))


def h3_joint_g2_g3(g2, g3):
    """Joint density of (g2, g3) in H_3: U(g2, g3)^6 / 12."""
    return h3_n0_upper(g2, g3) ** 6 / 12


# Taylor coefficients (x^1 .. x^30) of the g2 marginal at 0; the closed form
# cancels catastrophically there.
_H3_G2_SERIES = tuple(
    float(c)
    for c in (
        Fraction(1, 10),
        Fraction(5, 24),
        Fraction(19, 54),
        Fraction(325, 576),
        Fraction(2321, 2592),
        Fraction(133133, 93312),
        Fraction(26767, 11664),
        Fraction(1393405, 373248),
        Fraction(30961165, 5038848),
        Fraction(206162825, 20155392),
        Fraction(1300810471, 75582720),
        Fraction(254646990325, 8707129344),
        Fraction(24259873645, 483729408),
        Fraction(1510173292625, 17414258688),
        Fraction(1480074030515, 9795520512),
        Fraction(166191006939815, 626913312768),
        Fraction(146713653603385, 313456656384),
        Fraction(28138534944970975, 33853318889472),
        Fraction(12558930730150025, 8463329722368),
        Fraction(2162973203584818625, 812479653347328),
        Fraction(87701906851993737017, 18280792200314880),
        Fraction(42320531905790078035, 4874877920083968),
        Fraction(259454821177270962017, 16452712980283392),
        Fraction(136217827245297293894125, 4738381338321616896),
        Fraction(124571321174990045540639, 2369190669160808448),
        Fraction(304724639100264387887617, 3158920892214411264),
        Fraction(11353550181621116753795357, 63968148067341828096),
        Fraction(2681075508608958344749560695, 8187922952619753996288),
        Fraction(7438122588785431425465838045, 12281884428929630994432),
        Fraction(496430346780470177385238723025, 442147839441466715799552),
    )
)
_H3_G2_SERIES_MAX = 0.15


def _h3_g2_piece1(x):
    a = np.sqrt(np.clip(9 - 12 * x, 0.0, None))
    b = np.sqrt(np.clip(1 - 2 * x, 0.0, None))
    small = x < _H3_G2_SERIES_MAX
    with np.errstate(divide="ignore", invalid="ignore"):
        closed = (2 * x * ((-12 * a + 16 * b + 75) * x + 63 * a - 56 * b - 190) - 81 * a + 48 * b + 195) / (
            40 * x**4
        )
    series = np.polynomial.polynomial.polyval(x, (0.0,) + _H3_G2_SERIES)
    return np.where(small, series, closed)


def _h3_g2_piece2(x):
    a = np.sqrt(np.clip(9 - 12 * x, 0.0, None))
    c = np.sqrt(np.clip(4 - 6 * x, 0.0, None))
    return (
        2 * x * (-3 * (4 * a - 16 * c + 75) * x + 63 * a - 224 * c + 370) - 81 * a + 256 * c - 271
    ) / (40 * x**4)


def _h3_g2_piece3(x):
    a = np.sqrt(np.clip(9 - 12 * x, 0.0, None))
    return 3 * (2 * a * (21 - 4 * x) * x - 27 * a + 5) / (20 * x**4)


H3_G2 = PiecewiseDensity1D(
    (0.0, 0.5, 2.0 / 3.0, 0.75, math.inf),
    (_h3_g2_piece1, _h3_g2_piece2, _h3_g2_piece3, lambda x: 3.0 / (4.0 * x**4)),
    closed=(True, False),
)


def h3_marginal_g2(g2):
    """g2 density in H_3; breakpoints at 1/2, 2/3, 3/4, tail 3/(4 g2^4)."""
    return H3_G2(g2)


def _n0_breakpoints_g3(g3: float) -> list[float]:
    pts = {1.0, 2.0, 3.0}
    if g3 > 0:
        pts.add(math.sqrt(2.0 / g3))
        # g3 = 3 (n0-1)/n0^3 and g3 = 6 (n0-2)/n0^3
        for coeffs in ((g3, 0.0, -3.0, 3.0), (g3, 0.0, -6.0, 12.0)):
            for r in np.roots(coeffs):
                if abs(r.imag) < 1e-12 and 0 < r.real < 3:
                    pts.add(float(r.real))
    return sorted(p for p in pts if 0 < p <= 3)


def h3_marginal_g3(g3, quad_tol: float = 1e-6):
    """g3 density in H_3 by adaptive quadrature over the admissible region.

    The joint density n0^5/2 is constant in g2, so the inner integral over
    the closed-form g2 interval is exact; the outer integral over n0 is
    adaptive, split at every kink of the interval length.
    """
    if quad_tol <= 0:
        raise DomainError("quad_tol must be positive")
    g3_arr = np.asarray(g3, dtype=float)
    out = np.empty(g3_arr.shape)
    for idx, val in np.ndenumerate(g3_arr):
        if val < 0:
            out[idx] = 0.0
            continue
        pts = _n0_breakpoints_g3(val)
        hi = pts[-1]
        with warnings.catch_warnings():
            # non-convergence is judged from the error estimate below
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            res, err = integrate.quad(
                lambda n: float(h3_reduced_n0_g3(n, val)),
                0.0,
                hi,
                points=pts[:-1] or None,
                epsabs=0.0,
                epsrel=max(quad_tol, 50 * np.finfo(float).eps),
                limit=200,
            )
        if err > quad_tol * abs(res) and err > 1e-15:
            raise QuadratureError(f"g3 marginal at g3={val}: estimate {res} +- {err}", res, err)
        out[idx] = res
    return _scalar(out)


# ---------------------------------------------------------------------------
# Irwin-Hall (general N)
# ---------------------------------------------------------------------------


def irwin_hall_n0(n0, N: int):
    """Population density in H_N: Irwin-Hall density of N uniforms."""
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    x = np.asarray(n0, dtype=float)
    # Reflect into [0, N/2] and keep only k <= x: the short alternating sum
    # avoids the cancellation of the full sign form near the upper end.
    y = np.clip(np.minimum(x, N - x), 0.0, None)
    total = np.zeros(x.shape)
    for k in range(int(math.floor(N / 2)) + 1):
        d = y - k
        total += np.where(d > 0, (-1) ** k * math.comb(N, k) * np.clip(d, 0.0, None) ** (N - 1), 0.0)
    out = total / math.factorial(N - 1)
    if N == 1:
        # uniform on [0, 1]; the endpoints take the mean of the one-sided limits
        out = np.where((x == 0) | (x == 1), 0.5, 1.0)
    inside = (x >= 0) & (x <= N)
    return _scalar(np.where(inside, np.clip(out, 0.0, None), 0.0))


def irwin_hall_density(N: int) -> PiecewiseDensity1D:
    pieces = tuple((lambda x, N=N: irwin_hall_n0(x, N)) for _ in range(N))
    return PiecewiseDensity1D(tuple(float(k) for k in range(N + 1)), pieces, poly_degree=N - 1)
