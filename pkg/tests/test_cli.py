import io
import subprocess
import sys

import numpy as np
import pytest

from hilbert_chart.cli import (
    EXIT_MALFORMED,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_UNPHYSICAL,
    RunConfig,
    UsageError,
    check_point,
    main,
)
from hilbert_chart.export import parse, parse_csv
from golden_runs import GOLDEN_NS, check_golden, golden_path, run_golden


def run(*args):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in args], stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


# --- check -----------------------------------------------------------------------------


def test_check_physical_point():
    code, out, _ = run("check", 1.5, 0.5, 0.1)
    assert code == EXIT_OK
    assert out.startswith("verdict: physical in H_3")
    assert "P = (" in out


def test_check_unphysical_point_names_violation():
    code, out, _ = run("check", 1.5, 0.2, 0.1)
    assert code == EXIT_UNPHYSICAL
    assert "violated: g2 >=" in out


def test_check_population_above_truncation():
    code, out, _ = run("check", "--n", 2, 2.5, 0.5)
    assert code == EXIT_UNPHYSICAL and "n0 <= 2" in out


def test_check_certifies_antibunched_multi_particle_states():
    # |1>-|2> coins: n0 in (1, 2), g2 = 2 (n0 - 1)/n0^2 < 1/2
    for n0 in np.linspace(1.05, 1.95, 19):
        g2 = 2 * (n0 - 1) / n0**2
        r = check_point((n0, g2), 2)
        assert r.physical and g2 < 0.5
        assert any("n0 > 1" in f for f in r.flags)


def test_check_g2_zero_forces_single_particle():
    r = check_point((0.4, 0.0), None)
    assert r.physical
    assert any("P_n = 0 for n >= 2" in f for f in r.flags)
    r = check_point((0.4, 0.0, 0.0), 3)
    assert r.physical
    np.testing.assert_allclose(r.P[2:], 0.0, atol=1e-15)


def test_check_infinite_truncation_uses_lower_bounds():
    code, out, _ = run("check", "--n", "inf", 1.5, 10.0)
    assert code == EXIT_OK and "H_inf" in out
    code, out, _ = run("check", "--n", "inf", 1.5, 0.3)
    assert code == EXIT_UNPHYSICAL


def test_check_writes_table(tmp_path):
    path = tmp_path / "c.csv"
    code, out, _ = run("check", "--out", path, 1.0, 0.5)
    assert code == EXIT_OK
    t = parse_csv(path.read_text())
    assert t.columns == ["physical", "n0", "g2", "P0", "P1", "P2"]
    assert t.rows[0][:3] == [1.0, 1.0, 0.5]
    assert t.header["violations"] == "none"


def test_check_malformed():
    assert run("check", "--n", 3, 1.0, 0.5)[0] == EXIT_MALFORMED
    assert run("check", 1.0, -0.5)[0] == EXIT_MALFORMED
    assert run("check", 1.0, "nan")[0] == EXIT_MALFORMED
    assert run("check", "abc")[0] == EXIT_MALFORMED
    assert run("check")[0] == EXIT_MALFORMED
    assert run("check", "--n", 0, 1.0)[0] == EXIT_MALFORMED


# --- boundary ------------------------------------------------------------------------


def test_boundary_gk_rows():
    code, out, _ = run("boundary", "--n", 4, "--var", "g2", "--range", 0, 5, "--bins", 11)
    assert code == EXIT_OK
    t = parse_csv(out)
    assert t.columns == ["n0", "lower", "upper", "feasible"]
    assert t.header["var"] == "g2" and t.header["N"] == "4"
    assert len(t.rows) == 10  # n0 = 0 dropped
    assert t.rows[-1][3] == 0.0 and np.isnan(t.rows[-1][1])
    n0, lo, up, _ = t.rows[1]
    assert n0 == 1.0 and lo == 0.0 and up == pytest.approx(3.0)


def test_boundary_n0_upper_rows():
    _, out, _ = run("boundary", "--n", 2, "--var", "n0", "--range", 0.5, 2, "--bins", 4)
    assert parse_csv(out).rows[0] == [0.5, 0.0, 2.0, 1.0]
    _, out, _ = run("boundary", "--n", 3, "--var", "n0", "--fix", "g3=0.5", "--range", 1, 2, "--bins", 2)
    t = parse_csv(out)
    assert t.columns[0] == "g2" and t.rows[0][2] == pytest.approx(2.0)


def test_boundary_fixed_slices():
    assert run("boundary", "--n", 3, "--var", "g2", "--fix", "g3=1", "--range", 1, 1, "--bins", 1)[0] == EXIT_MALFORMED
    _, out, _ = run("boundary", "--n", 3, "--var", "g2", "--fix", "g3=1", "--range", 0.5, 1, "--bins", 2)
    t = parse_csv(out)
    assert t.rows[1] == [1.0, 1.0, 1.5, 1.0]


def test_boundary_infinite_truncation():
    _, out, _ = run("boundary", "--n", "inf", "--var", "g3", "--range", 2, 3, "--bins", 2)
    t = parse_csv(out)
    assert t.header["N"] == "inf"
    assert t.rows[0][1] == 0.0 and t.rows[0][2] == float("inf")
    assert t.rows[1][1] == pytest.approx(2 / 9)


def test_boundary_usage_errors():
    assert run("boundary", "--var", "g2")[0] == EXIT_MALFORMED  # no --n
    assert run("boundary", "--n", 3, "--var", "g7")[0] == EXIT_MALFORMED
    assert run("boundary", "--n", 3, "--var", "x")[0] == EXIT_MALFORMED
    assert run("boundary", "--n", 4, "--var", "n0")[0] == EXIT_MALFORMED
    assert run("boundary", "--n", 4, "--var", "g2", "--fix", "g3=1")[0] == EXIT_MALFORMED
    assert run("boundary", "--n", 3, "--var", "g2", "--fix", "g3")[0] == EXIT_MALFORMED
    assert run("boundary", "--n", 3, "--var", "g2", "--range", 2, 1)[0] == EXIT_MALFORMED


# --- density / marginal --------------------------------------------------------------------


def test_density_command():
    code, out, _ = run("density", 1.5, 0.5, 0.1)
    t = parse_csv(out)
    assert code == EXIT_OK and t.rows[0][-1] == 1.0
    assert t.rows[0][-2] == pytest.approx(1.5**5 / 2)
    code, out, _ = run("density", 1.5, 0.2, 0.1)
    assert code == EXIT_UNPHYSICAL and parse_csv(out).rows[0][-2] == 0.0
    assert run("density", "--n", "inf", 1.0, 0.5)[0] == EXIT_MALFORMED


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_marginal_command(fmt):
    code, out, _ = run("marginal", "--name", "h3-n0", "--range", 0, 3, "--bins", 7, "--format", fmt)
    t = parse(out, fmt)
    assert code == EXIT_OK and t.columns == ["n0", "density"]
    assert t.header["N"] == "3" and t.header["marginal"] == "h3-n0"
    assert [r[1] for r in t.rows] == pytest.approx([0, 0.125, 0.5, 0.75, 0.5, 0.125, 0])


def test_marginal_2d_and_irwin_hall():
    _, out, _ = run("marginal", "--name", "h2-n0-g2", "--bins", 3, "--ybins", 2)
    assert len(parse_csv(out).rows) == 6
    _, out, _ = run("marginal", "--name", "irwin-hall", "--n", 4, "--bins", 5)
    assert parse_csv(out).rows[2] == [2.0, pytest.approx(2 / 3)]
    assert run("marginal", "--name", "irwin-hall")[0] == EXIT_MALFORMED
    assert run("marginal", "--name", "h3-g2", "--n", 4)[0] == EXIT_MALFORMED
    assert run("marginal", "--name", "nope")[0] == EXIT_MALFORMED


def test_marginal_quadrature_failure_is_numerical():
    code, _, err = run("marginal", "--name", "h3-g3", "--range", 0.2, 0.3, "--bins", 2, "--tol", 1e-16)
    assert code == EXIT_NUMERICAL
    assert "estimate" in err


def test_output_file_and_unwritable_path(tmp_path):
    path = tmp_path / "m.jsonl"
    assert run("marginal", "--name", "h2-n0", "--bins", 3, "--format", "jsonl", "--out", path)[0] == EXIT_OK
    assert len(path.read_text().splitlines()) == 4
    assert run("marginal", "--name", "h2-n0", "--out", tmp_path / "missing" / "x.csv")[0] == EXIT_MALFORMED


def test_precision_flag():
    _, out, _ = run("marginal", "--name", "h2-g2", "--range", 0.25, 1, "--bins", 2, "--precision", 4)
    assert out.splitlines()[-2:] == ["0.25,0.536", "1,0.3333"]
    assert run("marginal", "--name", "h2-g2", "--precision", 30)[0] == EXIT_MALFORMED


# --- sample --------------------------------------------------------------------------


def test_sample_histogram_header_and_accounting():
    code, out, _ = run("sample", "--n", 3, "--seed", 4, "--count", 5000, "--bins", 6, "--ybins", 4, "--yrange", 0, 2)
    t = parse_csv(out)
    assert code == EXIT_OK and t.columns == ["n0", "g2", "count", "density"]
    assert t.header["seed"] == "4" and t.header["count"] == "5000"
    counted = sum(r[2] for r in t.rows)
    assert counted + int(t.header["outside"]) + int(t.header["excluded"]) == 5000
    assert len(t.header["digest"]) == 64


def test_sample_1d_and_points():
    _, out, _ = run("sample", "--n", 2, "--count", 100, "--y", "none", "--bins", 4)
    t = parse_csv(out)
    assert t.columns == ["n0", "count", "density"] and sum(r[1] for r in t.rows) == 100
    _, out, _ = run("sample", "--n", 3, "--count", 7, "--points")
    t = parse_csv(out)
    assert t.columns == ["n0", "g2", "g3"] and len(t.rows) == 7


def test_sample_usage_errors():
    assert run("sample", "--count", 10)[0] == EXIT_MALFORMED
    assert run("sample", "--n", 2, "--count", 0)[0] == EXIT_MALFORMED
    assert run("sample", "--n", 2, "--seed", -3)[0] == EXIT_MALFORMED
    assert run("sample", "--n", 2, "--x", "g5", "--count", 10)[0] == EXIT_MALFORMED


def test_sample_output_is_reproducible():
    a = run_golden(3)
    assert a == run_golden(3)


@pytest.mark.parametrize("N", GOLDEN_NS)
def test_golden_sample_files(N):
    assert check_golden(N), f"{golden_path(N).name} differs from a fresh run"


# --- config & entry point ----------------------------------------------------------------


def test_run_config_validation():
    RunConfig("check", 3, values=(1.0, 0.5, 0.1))
    for kwargs in (
        dict(command="nope", N=2),
        dict(command="check", N=0),
        dict(command="check", N=2, quad_tol=-1.0),
        dict(command="check", N=2, format="xml"),
        dict(command="check", N=2, bins=0),
        dict(command="check", N=2, range=(1.0, float("inf"))),
    ):
        with pytest.raises(UsageError):
            RunConfig(**kwargs)


def test_version_and_help():
    assert run("--version")[0] == EXIT_OK
    assert run()[0] == EXIT_MALFORMED


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "hilbert_chart.cli", "check", "1.0", "0.5"], capture_output=True, text=True
    )
    assert proc.returncode == EXIT_OK
    assert proc.stdout.startswith("verdict: physical")
