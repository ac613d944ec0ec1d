"""Monte Carlo sampling of H_N and histogram checks against closed-form densities.

Draws are uniform on the probability simplex (flat Dirichlet, built from
normalized standard exponentials) and pushed through the correlator map.

Stream splitting: draw ``i`` belongs to chunk ``i // CHUNK_SIZE``, and chunk
``c`` uses ``PCG64(SeedSequence(seed, spawn_key=(c,)))``. A batch is therefore
the same array whatever the number of worker threads.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np
from scipy import stats

from hilbert_chart.core import GlauberPoint, _build_M, fock_of
from hilbert_chart.errors import DomainError
from hilbert_chart.geometry import density_prefactor

CHUNK_SIZE = 65536
N0_FLOOR = 1e-12
# two-sided 3 sigma
REJECT_P = 2.0 * stats.norm.sf(3.0)


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Uniform draws from H_N in all three coordinate systems.

    ``g`` has shape (count, N-1) and holds NaN for the ``rejected`` draws
    whose population fell below ``N0_FLOOR``.
    """

    seed: int
    N: int
    count: int
    P: np.ndarray
    n0: np.ndarray
    g: np.ndarray
    rejected: int

    @property
    def valid(self) -> np.ndarray:
        return self.n0 >= N0_FLOOR

    @property
    def points(self) -> Iterator[GlauberPoint]:
        for n0, g, ok in zip(self.n0, self.g, self.valid):
            yield GlauberPoint(float(n0), tuple(g) if ok else None, self.N)

    def coordinate(self, name: str) -> np.ndarray:
        """Column by name: ``n0``, ``g2``..``gN``, ``G2``..``GN`` or ``P0``..``PN``."""
        if name == "n0":
            return self.n0
        kind, idx = name[0], name[1:]
        if not idx.isdigit():
            raise DomainError(f"unknown coordinate {name!r}")
        k = int(idx)
        if kind == "P" and 0 <= k <= self.N:
            return self.P[:, k]
        if kind in "gG" and 2 <= k <= self.N:
            if kind == "g":
                return self.g[:, k - 2]
            return self.P @ _build_M(self.N)[k]
        raise DomainError(f"unknown coordinate {name!r} for N={self.N}")

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.seed}:{self.N}:{self.count}:{self.rejected}".encode())
        for arr in (self.P, self.n0, self.g):
            h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return h.hexdigest()


def _draw_chunk(seed: int, N: int, chunk: int, size: int) -> np.ndarray:
    e = _chunk_rng(seed, chunk).standard_exponential((size, N + 1))
    return e / e.sum(axis=1, keepdims=True)


def sample_simplex(seed: int, N: int, count: int, workers: int = 1) -> SampleBatch:
    """Draw ``count`` states uniformly from H_N and map them to correlators."""
    seed = _check_seed(seed)
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    sizes = [min(CHUNK_SIZE, count - start) for start in range(0, count, CHUNK_SIZE)]
    jobs = [(seed, N, c, s) for c, s in enumerate(sizes)]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _draw_chunk(*a), jobs))
    else:
        parts = [_draw_chunk(*a) for a in jobs]
    P = np.concatenate(parts)
    G = P @ _build_M(N).T
    n0 = G[:, 1].copy()
    ok = n0 >= N0_FLOOR
    g = np.full((count, N - 1), np.nan)
    k = np.arange(2, N + 1)
    g[ok] = G[ok, 2:] / n0[ok, None] ** k
    return SampleBatch(seed, N, count, P, n0, g, int(count - ok.sum()))


# ---------------------------------------------------------------------------
# Histograms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Axis:
    """Binning of one coordinate; ``log`` bins are uniform in log(x)."""

    var: str
    lo: float
    hi: float
    bins: int
    log: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise DomainError(f"axis {self.var}: need finite lo < hi, got [{self.lo}, {self.hi}]")
        if self.bins < 1:
            raise DomainError(f"axis {self.var}: bins must be >= 1")
        if self.log and self.lo <= 0:
            raise DomainError(f"axis {self.var}: log binning needs lo > 0")

    @classmethod
    def default(cls, var: str, N: int, bins: int = 50) -> "Axis":
        """n0 on [0, N]; gk on [0, 4 k!] (thermal value k! in the middle)."""
        if var == "n0":
            return cls(var, 0.0, float(N), bins)
        k = int(var[1:])
        return cls(var, 0.0, 4.0 * math.factorial(k), bins)

    @property
    def edges(self) -> np.ndarray:
        if self.log:
            return np.geomspace(self.lo, self.hi, self.bins + 1)
        return np.linspace(self.lo, self.hi, self.bins + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return np.sqrt(e[:-1] * e[1:]) if self.log else 0.5 * (e[:-1] + e[1:])


@dataclass(frozen=True, eq=False)
class Histogram:
    """Counts on a 1D or 2D grid.

    ``outside`` tallies usable draws that fell outside the axis ranges and
    ``excluded`` the draws without defined coordinates, so
    ``counts.sum() + outside + excluded`` equals the batch size.
    """

    axes: tuple[Axis, ...]
    counts: np.ndarray
    outside: int = 0
    excluded: int = 0

    @property
    def total(self) -> int:
        """Draws with defined coordinates, in range or not."""
        return int(self.counts.sum()) + self.outside

    @property
    def cell_sizes(self) -> np.ndarray:
        widths = [np.diff(a.edges) for a in self.axes]
        out = widths[0]
        for w in widths[1:]:
            out = np.multiply.outer(out, w)
        return out

    @property
    def density(self) -> np.ndarray:
        """count / (total * cell size): estimates the underlying density."""
        if self.total == 0:
            return np.zeros(self.counts.shape)
        return self.counts / (self.total * self.cell_sizes)

    def __add__(self, other: "Histogram") -> "Histogram":
        if self.axes != other.axes:
            raise DomainError("cannot merge histograms with different axes")
        return Histogram(
            self.axes, self.counts + other.counts, self.outside + other.outside, self.excluded + other.excluded
        )


Histogram2D = Histogram


def histogram_values(axes: tuple[Axis, ...], columns: list[np.ndarray]) -> Histogram:
    """Bin raw coordinate columns; NaN rows count as excluded."""
    data = np.column_stack(columns)
    defined = ~np.isnan(data).any(axis=1)
    data = data[defined]
    inside = np.ones(len(data), dtype=bool)
    for j, a in enumerate(axes):
        inside &= (data[:, j] >= a.lo) & (data[:, j] <= a.hi)
    counts, _ = np.histogramdd(data[inside], bins=[a.edges for a in axes])
    return Histogram(
        tuple(axes),
        counts.astype(np.int64),
        int((~inside).sum()),
        int((~defined).sum()),
    )


def histogram(batch: SampleBatch, x: Axis, y: Axis | None = None) -> Histogram:
    """Histogram one or two coordinates of a batch.

    Draws below the population floor keep their n0 but have no g, so they
    only enter n0-only histograms.
    """
    axes = (x,) if y is None else (x, y)
    return histogram_values(axes, [batch.coordinate(a.var) for a in axes])


# ---------------------------------------------------------------------------
# Goodness of fit
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GoodnessOfFit:
    chi2: float
    dof: int
    p_value: float
    residuals: np.ndarray = field(repr=False)
    pooled_cells: int = 0

    @property
    def passed(self) -> bool:
        """Not rejected at 3 sigma."""
        return self.p_value >= REJECT_P


def _subgrid(edges: np.ndarray, s: int) -> tuple[np.ndarray, np.ndarray]:
    # midpoints of s equal sub-intervals of every bin, and their weights
    lo, w = edges[:-1], np.diff(edges)
    frac = (np.arange(s) + 0.5) / s
    pts = lo[:, None] + w[:, None] * frac[None, :]
    return pts, np.broadcast_to(w[:, None] / s, pts.shape)


def _row_probabilities(density: Callable, x_lo: float, x_hi: float, y_edges: np.ndarray, s: int) -> np.ndarray:
    x, wx = _subgrid(np.array([x_lo, x_hi]), s)
    y, wy = _subgrid(y_edges, s)
    # shapes (s, 1, 1) and (1, by, s)
    vals = np.asarray(density(x[0][:, None, None], y[None, :, :]), dtype=float)
    return np.sum(vals * wx[0][:, None, None] * wy[None, :, :], axis=(0, 2))


def cell_probabilities(
    axes: tuple[Axis, ...],
    density: Callable,
    subgrid: int = 16,
    max_subgrid: int = 256,
    rtol: float = 1e-3,
    atol: float = 1e-7,
) -> np.ndarray:
    """Integral of ``density`` over each cell.

    A 1D density exposing ``integrate(a, b)`` is integrated exactly; other
    1D densities use a midpoint sub-grid. In 2D each row of cells starts
    from a ``subgrid`` x ``subgrid`` midpoint rule per cell and doubles the
    resolution until successive estimates agree to ``rtol`` (or ``atol``),
    so cells cut by a support boundary into thin slivers are not missed.
    """
    if len(axes) == 1:
        e = axes[0].edges
        if hasattr(density, "integrate"):
            return np.array([density.integrate(a, b) for a, b in zip(e[:-1], e[1:])])
        x, w = _subgrid(e, subgrid)
        return np.sum(np.asarray(density(x), dtype=float) * w, axis=1)
    if len(axes) == 2:
        xe, ye = axes[0].edges, axes[1].edges
        out = np.empty((len(xe) - 1, len(ye) - 1))
        for i in range(len(xe) - 1):
            s = subgrid
            row = _row_probabilities(density, xe[i], xe[i + 1], ye, s)
            while s < max_subgrid:
                s *= 2
                finer = _row_probabilities(density, xe[i], xe[i + 1], ye, s)
                done = np.all(np.abs(finer - row) <= np.maximum(atol, rtol * np.abs(finer)))
                row = finer
                if done:
                    break
            out[i] = row
        return out
    raise DomainError("only 1D and 2D histograms are supported")


def compare_to_density(
    h: Histogram,
    density: Callable,
    subgrid: int = 16,
    min_expected: float = 5.0,
    outside_probability: float | None = None,
) -> GoodnessOfFit:
    """Pearson chi-square of a histogram against a normalized density.

    Without ``outside_probability`` the test is conditional on the number of
    in-range draws. Cells expecting fewer than ``min_expected`` counts are
    pooled into one cell; dof = cells used - 1.
    """
    prob = cell_probabilities(h.axes, density, subgrid)
    obs = h.counts.astype(float).ravel()
    prob = np.clip(prob.ravel(), 0.0, None)
    if outside_probability is not None:
        n = float(h.total)
        obs = np.append(obs, h.outside)
        prob = np.append(prob, max(outside_probability, 0.0))
        exp = n * prob
    else:
        n = obs.sum()
        exp = n * prob / prob.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        residuals = np.where(exp > 0, (obs - exp) / np.sqrt(exp), np.where(obs > 0, np.inf, 0.0))
    small = exp < min_expected
    o = list(obs[~small])
    e = list(exp[~small])
    if small.any():
        o.append(obs[small].sum())
        e.append(exp[small].sum())
    o, e = np.array(o), np.array(e)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(e > 0, (o - e) ** 2 / e, np.where(o > 0, np.inf, 0.0))
    chi2 = float(terms.sum())
    dof = max(len(o) - 1, 1)
    res = residuals[: h.counts.size].reshape(h.counts.shape)
    return GoodnessOfFit(chi2, dof, float(stats.chi2.sf(chi2, dof)), res, int(small.sum()))


def fit_tail_slope(values: np.ndarray, lo: float, hi: float, bins: int = 30) -> tuple[float, float]:
    """Log-log slope of the empirical density on [lo, hi] and its std error.

    Log-spaced bins; weighted least squares with weights equal to the bin
    counts (the inverse variance of log count).
    """
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    edges = np.geomspace(lo, hi, bins + 1)
    counts, _ = np.histogram(values, bins=edges)
    keep = counts > 0
    if keep.sum() < 3:
        raise DomainError("too few populated bins for a tail fit")
    x = np.log(np.sqrt(edges[:-1] * edges[1:]))[keep]
    y = np.log(counts[keep] / np.diff(edges)[keep])
    w = counts[keep].astype(float)
    X = np.column_stack([np.ones_like(x), x])
    A = X.T @ (w[:, None] * X)
    coef = np.linalg.solve(A, X.T @ (w * y))
    cov = np.linalg.inv(A)
    return float(coef[1]), float(math.sqrt(cov[1, 1]))


def scar_contrast(
    batch: SampleBatch,
    n0_range: tuple[float, float] = (1.0, 1.8),
    width: float = 0.02,
    offset: float = 0.08,
) -> float:
    """Relative excess of draws on the |0>-|2> coin curve g2 = 1/n0.

    Uses y = n0 g2 - 1, which vanishes on the curve. Counts in the strip
    |y| < width are compared with the mean of the two strips centred at
    y = +-offset; the result is on / off - 1.
    """
    if batch.N < 2:
        raise DomainError("scar contrast needs N >= 2")
    ok = batch.valid & (batch.n0 >= n0_range[0]) & (batch.n0 <= n0_range[1])
    y = batch.n0[ok] * batch.g[ok, 0] - 1.0
    on = np.count_nonzero(np.abs(y) < width)
    off = 0.5 * (np.count_nonzero(np.abs(y - offset) < width) + np.count_nonzero(np.abs(y + offset) < width))
    if off == 0:
        raise DomainError("no draws next to the coin curve; enlarge the batch")
    return on / off - 1.0


def mc_normalization(N: int, count: int, seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of the integral of the joint g-density over g_N.

    Points are uniform in the box prod_k [0, N!/(N-k)!] of unnormalized
    moments, where the density pulled back through G -> g is the constant
    1/sf(N-1) on the image of H_N. Returns (estimate, standard error).
    """
    seed = _check_seed(seed)
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    hi = np.array([math.factorial(N) / math.factorial(N - k) for k in range(1, N + 1)])
    vol = float(np.prod(hi))
    hits = 0
    for c, start in enumerate(range(0, count, CHUNK_SIZE)):
        size = min(CHUNK_SIZE, count - start)
        u = _chunk_rng(seed, c).random((size, N)) * hi
        G = np.column_stack([np.ones(size), u])
        P = fock_of(G)
        hits += int(np.count_nonzero(np.all(P >= 0, axis=1)))
    frac = hits / count
    scale = vol * density_prefactor(N)
    return scale * frac, scale * math.sqrt(frac * (1 - frac) / count)
