"""Command-line front end.

Subcommands::

    check     physicality verdict and reconstructed P for (n0, g2, ..., gN)
    boundary  lower/upper boundary curves as table rows
    density   joint density at a point
    marginal  closed-form marginal or reduced density on a grid
    sample    seeded Monte Carlo histogram (or raw draws)

Exit codes: 0 ok, 1 unphysical input, 2 malformed input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from hilbert_chart import __version__
from hilbert_chart.boundaries import (
    gk_lower,
    h2_n0_upper,
    h3_g2_bounds,
    h3_g3_bounds,
    h3_n0_upper,
    hinf_gk_lower,
    hN_gk_bounds,
)
from hilbert_chart.core import EPS_NORM, EPS_PHYS, EPS_ROUND, GlauberPoint, denormalize, fock_of
from hilbert_chart.errors import ChartError, QuadratureError
from hilbert_chart.export import TIMESTAMP_KEY, Table, render, write_atomic
from hilbert_chart.geometry import joint_density
from hilbert_chart import marginals as mg
from hilbert_chart.sampler import Axis, histogram, sample_simplex

EXIT_OK, EXIT_UNPHYSICAL, EXIT_MALFORMED, EXIT_NUMERICAL = 0, 1, 2, 3

COMMANDS = ("check", "boundary", "density", "marginal", "sample")
_AUTO = object()  # --n omitted


class UsageError(ChartError):
    pass


@dataclass
class RunConfig:
    """Validated parameters of one invocation."""

    command: str
    N: int | None  # None means the untruncated space
    seed: int = 0
    count: int = 100_000
    bins: int = 50
    range: tuple[float, float] | None = None
    yrange: tuple[float, float] | None = None
    ybins: int | None = None
    out: str | None = None
    format: str = "csv"
    quad_tol: float = 1e-6
    precision: int = 12
    values: tuple[float, ...] = ()
    var: str | None = None
    yvar: str | None = None
    fixed: dict[str, float] = field(default_factory=dict)
    name: str | None = None
    points: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.N is not None and self.N < 1:
            raise UsageError(f"--n must be >= 1 or 'inf', got {self.N}")
        if not 0 <= self.seed < 2**64:
            raise UsageError("--seed must be a 64-bit unsigned integer")
        if self.count < 1:
            raise UsageError("--count must be >= 1")
        if self.bins < 1 or (self.ybins is not None and self.ybins < 1):
            raise UsageError("bin counts must be >= 1")
        for r in (self.range, self.yrange):
            if r is not None and not (math.isfinite(r[0]) and math.isfinite(r[1]) and r[0] < r[1]):
                raise UsageError(f"ranges need finite lo < hi, got {r}")
        if not (self.quad_tol > 0 and math.isfinite(self.quad_tol)):
            raise UsageError("--tol must be a positive number")
        if not 1 <= self.precision <= 17:
            raise UsageError("--precision must lie in 1..17")
        if self.format not in ("csv", "jsonl"):
            raise UsageError("--format must be csv or jsonl")
        if any(not math.isfinite(v) for v in self.values):
            raise UsageError("values must be finite numbers")
        if any(not math.isfinite(v) for v in self.fixed.values()):
            raise UsageError("fixed values must be finite numbers")


def _parse_n(text: str) -> int | None:
    if text.lower() in ("inf", "infinity", "∞"):
        return None
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--n expects an integer or 'inf', got {text!r}") from None


def _parse_fixed(items: list[str]) -> dict[str, float]:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--fix expects name=value, got {item!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise UsageError(f"--fix value is not a number: {item!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--n", type=_parse_n, default=_AUTO, metavar="N", help="truncation N or 'inf' (default: from the values)"
    )
    common.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--precision", type=int, default=12, help="significant digits in output")
    common.add_argument("--tol", type=float, default=1e-6, help="quadrature tolerance")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"))
    grid.add_argument("--bins", type=int, default=50)
    grid.add_argument("--yrange", type=float, nargs=2, metavar=("LO", "HI"))
    grid.add_argument("--ybins", type=int)

    p = argparse.ArgumentParser(prog="hilbert-chart", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="is (n0, g2, ..., gN) physical?")
    c.add_argument("values", type=float, nargs="+", metavar="VALUE", help="n0 g2 ... gN")

    b = sub.add_parser("boundary", parents=[common, grid], help="boundary curves")
    b.add_argument("--var", required=True, help="bounded variable: n0 or gK")
    b.add_argument("--fix", action="append", metavar="NAME=VALUE", help="hold a correlator fixed (N=3)")

    d = sub.add_parser("density", parents=[common], help="joint density at a point")
    d.add_argument("values", type=float, nargs="+", metavar="VALUE", help="n0 g2 ... gN")

    m = sub.add_parser("marginal", parents=[common, grid], help="closed-form marginals on a grid")
    m.add_argument("--name", required=True, choices=sorted(MARGINALS))

    s = sub.add_parser("sample", parents=[common, grid], help="Monte Carlo histogram")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=100_000)
    s.add_argument("--x", default="n0", help="x coordinate (n0, gK, GK, PK)")
    s.add_argument("--y", default="g2", help="y coordinate, or 'none' for a 1D histogram")
    s.add_argument("--points", action="store_true", help="emit raw draws instead of a histogram")
    return p


def _resolve_n(ns: argparse.Namespace) -> int | None:
    if ns.n is not _AUTO:
        return ns.n
    if ns.command in ("check", "density"):
        return len(ns.values)
    if ns.command == "marginal":
        space = {"h2": 2, "h3": 3}.get(ns.name[:2])
        if space is None:
            raise UsageError(f"--name {ns.name} needs --n")
        return space
    raise UsageError(f"{ns.command} needs --n")


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        command=ns.command,
        N=_resolve_n(ns),
        seed=getattr(ns, "seed", 0),
        count=getattr(ns, "count", 100_000),
        bins=getattr(ns, "bins", 50),
        range=tuple(ns.range) if getattr(ns, "range", None) else None,
        yrange=tuple(ns.yrange) if getattr(ns, "yrange", None) else None,
        ybins=getattr(ns, "ybins", None),
        out=ns.out,
        format=ns.format,
        quad_tol=ns.tol,
        precision=ns.precision,
        values=tuple(getattr(ns, "values", ()) or ()),
        var=getattr(ns, "var", None) or getattr(ns, "x", None),
        yvar=getattr(ns, "y", None),
        fixed=_parse_fixed(getattr(ns, "fix", None)),
        name=getattr(ns, "name", None),
        points=getattr(ns, "points", False),
    )


def _header(cfg: RunConfig, **extra) -> dict[str, str]:
    h = {
        "tool": "hilbert-chart",
        "version": __version__,
        "command": cfg.command,
        "N": "inf" if cfg.N is None else str(cfg.N),
    }
    if cfg.command == "sample":
        h["seed"] = str(cfg.seed)
        h["count"] = str(cfg.count)
    h.update(
        eps_norm=repr(EPS_NORM),
        eps_round=repr(EPS_ROUND),
        eps_phys=repr(EPS_PHYS),
        quad_tol=repr(cfg.quad_tol),
        precision=str(cfg.precision),
    )
    h.update({k: str(v) for k, v in extra.items()})
    h[TIMESTAMP_KEY] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return h


def _emit(cfg: RunConfig, table: Table, stdout) -> None:
    text = render(table, cfg.format)
    if cfg.out:
        write_atomic(cfg.out, text)
    else:
        stdout.write(text)


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------


@dataclass
class CheckReport:
    physical: bool
    N: int | None
    n0: float
    g: tuple[float, ...]
    P: tuple[float, ...] | None
    violations: list[str]
    flags: list[str]

    def lines(self) -> list[str]:
        space = "H_inf (lower bounds only)" if self.N is None else f"H_{self.N}"
        out = [f"verdict: {'physical' if self.physical else 'unphysical'} in {space}"]
        if self.P is not None:
            out.append("P = (" + ", ".join(f"{p:.12g}" for p in self.P) + ")")
        for v in self.violations:
            out.append(f"violated: {v}")
        for f in self.flags:
            out.append(f"note: {f}")
        return out


def _interpretive_flags(n0: float, g2: float | None) -> list[str]:
    if g2 is None:
        return []
    flags = []
    if g2 == 0.0:
        flags.append("g2 = 0: P_n = 0 for all n >= 2, a single-particle certificate")
    elif g2 < 0.5:
        flags.append("g2 < 1/2: at most two particles on average (n0 < 2); single-particle certificate requires g2 = 0")
        if n0 > 1:
            flags.append("n0 > 1 with g2 < 1/2: physical region missed by the g2 < 1/2 single-photon criterion")
    else:
        flags.append("g2 >= 1/2: no bound on the particle number from g2")
    return flags


def check_point(values: tuple[float, ...], N: int | None) -> CheckReport:
    """Physicality of (n0, g2, ..., gK); N = None applies only lower bounds."""
    n0, g = values[0], tuple(values[1:])
    if n0 < 0 or any(x < 0 for x in g):
        raise UsageError("n0 and all g must be non-negative")
    g2 = g[0] if g else None
    violations: list[str] = []
    slack = EPS_PHYS
    if N is None:
        for k, gk in enumerate(g, start=2):
            lo = float(gk_lower(n0, k)) if n0 > 0 else 0.0
            if gk < lo - slack * max(1.0, lo):
                violations.append(f"g{k} >= {lo:.12g} (lower bound at n0={n0:.12g})")
        flags = _interpretive_flags(n0, g2)
        if g2 == 0.0 and not violations:
            flags.append("G2 = sum n(n-1) P_n = 0 forces P_n = 0 for n >= 2")
        return CheckReport(not violations, None, n0, g, None, violations, flags)

    if len(g) != N - 1:
        raise UsageError(f"N={N} needs n0 plus {N - 1} correlators, got {len(values)} values")
    point = GlauberPoint(n0, g, N)
    P = tuple(float(p) for p in fock_of(denormalize(point)))
    if n0 > N:
        violations.append(f"n0 <= {N}")
    elif n0 > 0:
        for k, gk in enumerate(g, start=2):
            r = hN_gk_bounds(n0, k, N)
            if gk < r.lower - slack * max(1.0, r.lower):
                violations.append(f"g{k} >= {r.lower:.12g} (lower bound at n0={n0:.12g})")
            if gk > r.upper + slack * max(1.0, r.upper):
                violations.append(f"g{k} <= {r.upper:.12g} (upper bound at n0={n0:.12g})")
    for i, p in enumerate(P):
        if p < -slack:
            violations.append(f"P{i} >= 0 (reconstructed P{i} = {p:.12g})")
        elif p > 1 + slack:
            violations.append(f"P{i} <= 1 (reconstructed P{i} = {p:.12g})")
    flags = _interpretive_flags(n0, g2)
    return CheckReport(not violations, N, n0, g, P, violations, flags)


def cmd_check(cfg: RunConfig, stdout) -> int:
    N = cfg.N
    if N is not None and len(cfg.values) != N:
        raise UsageError(f"N={N} needs {N} values (n0 g2 ... gN), got {len(cfg.values)}")
    report = check_point(cfg.values, N)
    if cfg.out:
        cols = ["physical", "n0"] + [f"g{k}" for k in range(2, len(cfg.values) + 1)]
        row = [float(report.physical), *cfg.values]
        if report.P is not None:
            cols += [f"P{i}" for i in range(len(report.P))]
            row += list(report.P)
        table = Table(cols, [row], _header(cfg, violations="; ".join(report.violations) or "none"))
        _emit(cfg, table, stdout)
    stdout.write("\n".join(report.lines()) + "\n")
    return EXIT_OK if report.physical else EXIT_UNPHYSICAL


# ---------------------------------------------------------------------------
# boundary
# ---------------------------------------------------------------------------


def _grid(r: tuple[float, float], bins: int) -> np.ndarray:
    return np.linspace(r[0], r[1], bins)


def boundary_table(cfg: RunConfig) -> Table:
    var, N, fixed = cfg.var, cfg.N, cfg.fixed
    rows = []
    if var == "n0":
        if N == 2:
            xs = _grid(cfg.range or (0.0, 2.0), cfg.bins)
            rows = [[x, 0.0, float(h2_n0_upper(x)), 1.0] for x in xs]
            return Table(["g2", "lower", "upper", "feasible"], rows, _header(cfg, var="n0"))
        if N == 3 and len(fixed) == 1 and set(fixed) <= {"g2", "g3"}:
            (name, val), = fixed.items()
            other = "g3" if name == "g2" else "g2"
            xs = _grid(cfg.range or (0.0, 2.0), cfg.bins)
            if name == "g3":
                up = h3_n0_upper(xs, val)
            else:
                up = h3_n0_upper(val, xs)
            rows = [[x, 0.0, float(u), 1.0] for x, u in zip(xs, up)]
            return Table([other, "lower", "upper", "feasible"], rows, _header(cfg, var="n0", **fixed))
        raise UsageError("--var n0 is available for N=2, and for N=3 with exactly one of g2, g3 fixed")
    if not (var and var[0] == "g" and var[1:].isdigit() and int(var[1:]) >= 2):
        raise UsageError(f"--var must be n0 or gK with K >= 2, got {var!r}")
    k = int(var[1:])
    if N is not None and k > N:
        raise UsageError(f"g{k} does not exist for N={N}")
    xs = _grid(cfg.range or (0.0, float(N or 5)), cfg.bins)
    xs = xs[xs > 0]
    for x in xs:
        if N == 3 and fixed:
            if set(fixed) != ({"g2", "g3"} - {var}):
                raise UsageError("with N=3, --fix must name the other of g2, g3")
            other = next(iter(fixed.values()))
            r = h3_g2_bounds(x, other) if var == "g2" else h3_g3_bounds(x, other)
        elif fixed:
            raise UsageError("--fix is only supported for N=3")
        elif N is None:
            r = hinf_gk_lower(x, k)
        else:
            r = hN_gk_bounds(x, k, N)
        if r.feasible:
            rows.append([x, r.lower, r.upper, 1.0])
        else:
            rows.append([x, math.nan, math.nan, 0.0])
    return Table(["n0", "lower", "upper", "feasible"], rows, _header(cfg, var=var, **fixed))


def cmd_boundary(cfg: RunConfig, stdout) -> int:
    _emit(cfg, boundary_table(cfg), stdout)
    return EXIT_OK


# ---------------------------------------------------------------------------
# density / marginal
# ---------------------------------------------------------------------------


def cmd_density(cfg: RunConfig, stdout) -> int:
    N = cfg.N
    if N is None:
        raise UsageError("the joint density needs a finite N")
    if len(cfg.values) != N:
        raise UsageError(f"N={N} needs {N} values (n0 g2 ... gN), got {len(cfg.values)}")
    n0, g = cfg.values[0], cfg.values[1:]
    if n0 < 0 or any(x < 0 for x in g):
        raise UsageError("n0 and all g must be non-negative")
    d = joint_density(GlauberPoint(n0, g, N))
    cols = ["n0"] + [f"g{k}" for k in range(2, N + 1)] + ["density", "in_support"]
    _emit(cfg, Table(cols, [[*cfg.values, d.value, float(d.in_support)]], _header(cfg)), stdout)
    return EXIT_OK if d.in_support else EXIT_UNPHYSICAL


# name -> (columns, callable, default x range, default y range)
MARGINALS = {
    "h2-n0": (("n0",), mg.h2_marginal_n0, (0.0, 2.0), None),
    "h2-g2": (("g2",), mg.h2_marginal_g2, (0.0, 4.0), None),
    "h2-n0-g2": (("n0", "g2"), mg.h2_joint_n0_g2, (0.0, 2.0), (0.0, 4.0)),
    "h3-n0": (("n0",), mg.h3_marginal_n0, (0.0, 3.0), None),
    "h3-g2": (("g2",), mg.h3_marginal_g2, (0.0, 4.0), None),
    "h3-g3": (("g3",), None, (0.0, 4.0), None),
    "h3-n0-g2": (("n0", "g2"), mg.h3_reduced_n0_g2, (0.0, 3.0), (0.0, 4.0)),
    "h3-n0-g3": (("n0", "g3"), mg.h3_reduced_n0_g3, (0.0, 3.0), (0.0, 8.0)),
    "h3-g2-g3": (("g2", "g3"), mg.h3_joint_g2_g3, (0.0, 4.0), (0.0, 8.0)),
    "irwin-hall": (("n0",), None, None, None),
}


def marginal_table(cfg: RunConfig) -> Table:
    cols, fn, xr, yr = MARGINALS[cfg.name]
    extra = {"marginal": cfg.name}
    space = {"h2": 2, "h3": 3}.get(cfg.name[:2])
    if space is not None and cfg.N != space:
        raise UsageError(f"{cfg.name} describes N={space}, got --n {cfg.N}")
    if cfg.name == "irwin-hall":
        if cfg.N is None:
            raise UsageError("irwin-hall needs a finite --n")
        N = cfg.N
        fn, xr = (lambda x: mg.irwin_hall_n0(x, N)), (0.0, float(N))
    elif cfg.name == "h3-g3":
        fn = lambda x: mg.h3_marginal_g3(x, quad_tol=cfg.quad_tol)  # noqa: E731
    xs = _grid(cfg.range or xr, cfg.bins)
    if len(cols) == 1:
        vals = np.atleast_1d(fn(xs))
        rows = [[x, v] for x, v in zip(xs, vals)]
    else:
        ys = _grid(cfg.yrange or yr, cfg.ybins or cfg.bins)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        V = np.asarray(fn(X, Y))
        rows = [[x, y, v] for x, y, v in zip(X.ravel(), Y.ravel(), V.ravel())]
    return Table([*cols, "density"], rows, _header(cfg, **extra))


def cmd_marginal(cfg: RunConfig, stdout) -> int:
    _emit(cfg, marginal_table(cfg), stdout)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------


def _axis(var: str, r, bins: int, N: int) -> Axis:
    if r is None:
        return Axis.default(var, N, bins) if var == "n0" or var[0] == "g" else Axis(var, 0.0, 1.0, bins)
    return Axis(var, float(r[0]), float(r[1]), bins)


def sample_table(cfg: RunConfig) -> Table:
    if cfg.N is None:
        raise UsageError("sampling needs a finite --n")
    N = cfg.N
    batch = sample_simplex(cfg.seed, N, cfg.count)
    if cfg.points:
        cols = ["n0"] + [f"g{k}" for k in range(2, N + 1)]
        rows = np.column_stack([batch.n0, batch.g]).tolist()
        return Table(cols, rows, _header(cfg, rejected=batch.rejected, digest=batch.digest()))
    x = _axis(cfg.var, cfg.range, cfg.bins, N)
    y = None
    if cfg.yvar and cfg.yvar.lower() != "none":
        y = _axis(cfg.yvar, cfg.yrange, cfg.ybins or cfg.bins, N)
    h = histogram(batch, x, y)
    extra = dict(
        rejected=batch.rejected, outside=h.outside, excluded=h.excluded, digest=batch.digest()
    )
    if y is None:
        rows = [[c, n, d] for c, n, d in zip(x.centers, h.counts, h.density)]
        return Table([x.var, "count", "density"], rows, _header(cfg, **extra))
    X, Y = np.meshgrid(x.centers, y.centers, indexing="ij")
    rows = [
        [a, b, n, d] for a, b, n, d in zip(X.ravel(), Y.ravel(), h.counts.ravel(), h.density.ravel())
    ]
    return Table([x.var, y.var, "count", "density"], rows, _header(cfg, **extra))


def cmd_sample(cfg: RunConfig, stdout) -> int:
    _emit(cfg, sample_table(cfg), stdout)
    return EXIT_OK


_DISPATCH = {
    "check": cmd_check,
    "boundary": cmd_boundary,
    "density": cmd_density,
    "marginal": cmd_marginal,
    "sample": cmd_sample,
}


def main(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports malformed flags with code 2
        return int(exc.code or 0)
    try:
        cfg = config_from_args(ns)
        return _DISPATCH[cfg.command](cfg, stdout)
    except QuadratureError as exc:
        stderr.write(f"error: {exc} (estimate {exc.value:.12g} +- {exc.error:.3g})\n")
        return EXIT_NUMERICAL
    except ArithmeticError as exc:
        stderr.write(f"error: numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except (ChartError, OSError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_MALFORMED


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
