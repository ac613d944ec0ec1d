"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) and then
asserts, so a failure is reported both ways.
"""

import io
import math
import time

import numpy as np

from hilbert_chart import FockDistribution, correlators_of, fock_of
from hilbert_chart.boundaries import (
    FOCK3_G3,
    coin_state,
    h2_g2_bounds,
    h3_n0_upper,
    hN_gk_bounds,
)
from hilbert_chart.cli import main
from hilbert_chart.core import build_M, denormalize_array, normalize
from hilbert_chart.geometry import simplex_volume, sqrt_det_fundamental_form, superfactorial
from hilbert_chart.marginals import (
    H2_G2,
    H2_N0,
    H3_G2,
    H3_N0,
    h2_joint_n0_g2,
    h3_joint_g2_g3,
    h3_reduced_n0_g2,
    h3_reduced_n0_g3,
    irwin_hall_density,
    irwin_hall_n0,
)
from hilbert_chart.sampler import Axis, compare_to_density, fit_tail_slope, histogram, sample_simplex, scar_contrast
from acceptance_log import record
from golden_runs import GOLDEN_NS, check_golden
from oracles import bisection_U


def test_criterion_1_roundtrip_and_inverse():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    worst_rt = worst_solve = 0.0
    for N in range(2, 11):
        dists = [FockDistribution(tuple(p)) for p in rng.dirichlet(np.ones(N + 1), 10_000)]
        P = np.array([d.p for d in dists])
        G = correlators_of(P)
        back = fock_of(G)
        solved = np.linalg.solve(build_M(N), G.T).T
        worst_rt = max(worst_rt, float(np.abs(back - P).max()))
        worst_solve = max(worst_solve, float(np.abs(back - solved).max()))
    elapsed = time.perf_counter() - t0
    ok = worst_rt <= 1e-10 and worst_solve <= 1e-10 and elapsed < 10
    detail = f"roundtrip {worst_rt:.1e}, vs solve {worst_solve:.1e}, {elapsed:.2f} s"
    assert record(1, ok, detail), detail


def _numerical_jacobian_det(n0: float, g: np.ndarray) -> float:
    """det d(G1..GN)/d(n0, g2..gN) by Richardson-extrapolated central differences."""
    x0 = np.concatenate([[n0], g])
    f = lambda x: denormalize_array(x[0], x[1:])[1:]  # noqa: E731
    cols = []
    for j in range(x0.size):
        h = 1e-3 * max(1.0, abs(x0[j]))
        ds = []
        for step in (h, h / 2):
            e = np.zeros_like(x0)
            e[j] = step
            ds.append((f(x0 + e) - f(x0 - e)) / (2 * step))
        cols.append((4 * ds[1] - ds[0]) / 3)
    return float(np.linalg.det(np.column_stack(cols)))


def test_criterion_2_density_identity():
    rng = np.random.default_rng(2)
    worst = 0.0
    for N in range(1, 9):
        root_F = sqrt_det_fundamental_form(N)
        for n0 in rng.uniform(0.05, N, 100):
            g = rng.uniform(0.1, 2.0, N - 1)
            J = _numerical_jacobian_det(n0, g) if N > 1 else 1.0
            lhs = J * root_F / simplex_volume(N)
            rhs = n0 ** ((N * N + N - 2) // 2) / superfactorial(N - 1)
            worst = max(worst, abs(lhs / rhs - 1))
    ok = worst <= 1e-9
    detail = f"max relative deviation {worst:.1e} over N = 1..8"
    assert record(2, ok, detail), detail


def _fits(batch, specs):
    out = {}
    for name, axes, density in specs:
        out[name] = compare_to_density(histogram(batch, *axes), density)
    return out


def test_criterion_3_h2_histograms():
    t0 = time.perf_counter()
    batch = sample_simplex(3, 2, 1_000_000)
    fits = _fits(
        batch,
        [
            ("n0-g2", (Axis("n0", 0, 2, 40), Axis("g2", 0, 2, 40)), h2_joint_n0_g2),
            ("n0", (Axis("n0", 0, 2, 50),), H2_N0),
            ("g2", (Axis("g2", 0, 3, 60),), H2_G2),
        ],
    )
    slope, se = fit_tail_slope(batch.coordinate("g2"), 1.0, 30.0)
    elapsed = time.perf_counter() - t0
    ok = all(f.passed for f in fits.values()) and abs(slope + 3) <= 0.05 and elapsed < 120
    detail = ", ".join(f"{k} p={f.p_value:.3f}" for k, f in fits.items())
    detail += f", tail slope {slope:.4f} +- {se:.4f}, {elapsed:.1f} s"
    assert record(3, ok, detail), detail


def test_criterion_4_h3_histograms():
    batch = sample_simplex(4, 3, 1_000_000)
    fits = _fits(
        batch,
        [
            ("n0-g2", (Axis("n0", 0, 3, 30), Axis("g2", 0, 2, 30)), h3_reduced_n0_g2),
            ("n0-g3", (Axis("n0", 0, 3, 30), Axis("g3", 0, 2, 30)), h3_reduced_n0_g3),
            ("g2", (Axis("g2", 0, 3, 60),), H3_G2),
            ("n0", (Axis("n0", 0, 3, 60),), H3_N0),
            ("g2-g3", (Axis("g2", 0, 2, 30), Axis("g3", 0, 1.5, 30)), h3_joint_g2_g3),
        ],
    )
    gaps = H3_G2.continuity_gaps()
    ok = all(f.passed for f in fits.values()) and max(gaps) <= 1e-8
    detail = ", ".join(f"{k} p={f.p_value:.3f}" for k, f in fits.items())
    detail += f", g2 marginal jumps at 1/2, 2/3, 3/4 <= {max(gaps):.1e}"
    assert record(4, ok, detail), detail


def _coin_g(mu, nu, n0, N):
    return normalize(correlators_of(np.asarray(coin_state(mu, nu, n0, N))))


def test_criterion_5_coin_states_saturate():
    worst = 0.0
    for n0 in np.linspace(0.01, 2.0, 200):
        r = h2_g2_bounds(n0)
        worst = max(worst, abs(_coin_g(0, 2, n0, 2).gk(2) - r.upper))
        m = min(math.floor(n0), 1)
        worst = max(worst, abs(_coin_g(m, m + 1, n0, 2).gk(2) - r.lower))
    for N in range(3, 8):
        for n0 in np.linspace(0.01, N, 150):
            up = _coin_g(0, N, n0, N)
            m = min(math.floor(n0), N - 1)
            low = _coin_g(m, m + 1, n0, N)
            for k in range(2, N + 1):
                r = hN_gk_bounds(n0, k, N)
                worst = max(worst, abs(up.gk(k) - r.upper) / max(1, r.upper))
                worst = max(worst, abs(low.gk(k) - r.lower) / max(1, r.lower))
    fock3 = normalize(correlators_of([0, 0, 0, 1]))
    pinned = max(abs(fock3.n0 - 3), abs(fock3.gk(2) - 2 / 3), abs(fock3.gk(3) - FOCK3_G3))
    saturates = abs(h3_n0_upper(fock3.gk(2), fock3.gk(3)) - 3.0)
    ok = worst <= 1e-9 and pinned <= 1e-12 and saturates <= 1e-9
    detail = f"coin deviation {worst:.1e}, |3> pinned to {pinned:.1e}, U(|3>) - 3 = {saturates:.1e}"
    assert record(5, ok, detail), detail


def test_criterion_6_U_against_bisection():
    g = np.geomspace(1e-3, 1e3, 121)
    A, B = np.meshgrid(g, g, indexing="ij")
    grid_err = float(np.abs(h3_n0_upper(A, B) - bisection_U(A, B)).max())
    # one probe deep in each asymptotic regime plus both sides of g3 = 2/9
    probes = np.array(
        [(1e-3, 1e-3), (1e-3, 1e3), (1e3, 1e-3), (1e3, 1e3), (1e3, 1e7)]
        + [(g2, FOCK3_G3 * (1 + s)) for g2 in (0.3, 0.6, 2 / 3, 0.7, 1.0) for s in (-1e-9, 0.0, 1e-9)]
    )
    probe_err = float(np.abs(h3_n0_upper(probes[:, 0], probes[:, 1]) - bisection_U(probes[:, 0], probes[:, 1])).max())
    ok = grid_err <= 1e-6 and probe_err <= 1e-6
    detail = f"log grid max error {grid_err:.1e}, regime and g3 = 2/9 probes {probe_err:.1e}"
    assert record(6, ok, detail), detail


def _check_cli(*values, n=None):
    out = io.StringIO()
    args = ["check"] + (["--n", str(n)] if n is not None else []) + [repr(float(v)) for v in values]
    code = main(args, stdout=out, stderr=io.StringIO())
    return code, out.getvalue()


def test_criterion_7_check_certificates():
    antibunched = []
    for n0 in np.linspace(1.05, 1.95, 10):
        g2 = 2 * (n0 - 1) / n0**2
        code, out = _check_cli(n0, g2)
        antibunched.append(code == 0 and g2 < 0.5 and "n0 > 1" in out)
    code_inf, out_inf = _check_cli(0.7, 0.0, n="inf")
    code_3, out_3 = _check_cli(0.7, 0.0, 0.0)
    P = [float(x) for x in out_3.split("P = (")[1].split(")")[0].split(",")]
    single = code_inf == 0 and "P_n = 0 for n >= 2" in out_inf and code_3 == 0 and max(abs(x) for x in P[2:]) < 1e-15
    ok = all(antibunched) and single
    detail = f"|1>-|2> coins with n0 > 1, g2 < 1/2 certified: {sum(antibunched)}/10; g2 = 0 single-particle: {single}"
    assert record(7, ok, detail), detail


def test_criterion_8_irwin_hall():
    x = np.linspace(0, 3, 30001)
    pointwise = float(np.abs(irwin_hall_n0(x, 3) - H3_N0(x)).max())
    worst = 0.0
    for N in range(1, 13):
        d = irwin_hall_density(N)
        mean = d.moment(1)
        var = d.moment(2) - mean**2
        worst = max(worst, abs(mean - N / 2), abs(var - N / 12))
    ok = pointwise <= 1e-12 and worst <= 1e-8
    detail = f"N=3 pointwise {pointwise:.1e}, moments N <= 12 within {worst:.1e}"
    assert record(8, ok, detail), detail


def test_criterion_9_golden_files_and_scar():
    golden = {N: check_golden(N) for N in GOLDEN_NS}
    scar = [scar_contrast(sample_simplex(2024, N, 300_000)) for N in (3, 4, 5)]
    monotone = scar[0] > scar[1] > scar[2]
    ok = all(golden.values()) and monotone
    detail = f"golden CSVs identical for N = {sorted(k for k, v in golden.items() if v)}; scar contrast N=3..5 " + ", ".join(
        f"{s:.3f}" for s in scar
    )
    assert record(9, ok, detail), detail
