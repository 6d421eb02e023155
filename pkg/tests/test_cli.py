import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import constant_problem, offdiag_Q, zero_problem
from matspec import cli, io_formats
from matspec.errors import AssumptionOneViolated, CountMismatch
from matspec.model import ModelProblem, model_spectral_data
from matspec.ode import BoundaryProblem

W12 = np.diag([np.pi / 2, np.pi])


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def files(tmp_path):
    def problem(p, name="p.json"):
        path = tmp_path / name
        io_formats.write_problem(p, path)
        return path

    def data(d, name="d.json"):
        path = tmp_path / name
        io_formats.write_spectral(d, path)
        return path

    files.problem, files.data, files.dir = problem, data, tmp_path
    return files


# --------------------------------------------------------------------------- forward


def test_forward_zero_potential(files):
    out = files.dir / "zero.json"
    code, text, _ = run("forward", "--problem", files.problem(zero_problem(1)), "--nmax", 10, "--out", out)
    assert code == 0 and text.startswith("condition")
    d = io_formats.read_spectral(out)
    n = np.arange(11)
    assert np.abs(d.lam[:, 0] - n**2).max() <= 1e-9
    assert np.abs(d.alpha[:, 0, 0, 0] - np.where(n == 0, 1 / np.pi, 2 / np.pi)).max() <= 1e-7
    rep = json.loads((files.dir / "zero.report.json").read_text())
    assert rep["conditions"]["structural"]["verdict"] == "pass"


def test_forward_decoupled(files):
    out = files.dir / "d12.json"
    code, _, _ = run("forward", "--problem", files.problem(constant_problem([1, 2])), "--nmax", 6, "--out", out)
    assert code == 0
    d = io_formats.read_spectral(out)
    n = np.arange(7)
    assert np.abs(d.lam - (n[:, None] ** 2 + np.array([1, 2]))).max() <= 1e-8
    assert np.abs(d.alpha[4, 1] - 2 / np.pi * np.diag([0, 1])).max() <= 1e-7
    assert np.abs(d.omega - W12).max() <= 1e-10


def test_forward_complex_spectrum(files):
    out = files.dir / "c.json"
    code, text, _ = run("forward", "--problem", files.problem(constant_problem([2j])), "--nmax", 6, "--out", out)
    assert code == 0
    verdicts = {line.split()[0]: line.split()[1] for line in text.splitlines()[1:]}
    assert verdicts["S"] == "fail"
    assert np.abs(io_formats.read_spectral(out).lam[:, 0].imag - 2).max() <= 1e-8


def test_forward_rotates_nondiagonal_omega(files):
    out = files.dir / "o.json"
    code, _, err = run("forward", "--problem", files.problem(BoundaryProblem.from_function(offdiag_Q)), "--nmax", 4, "--out", out)
    assert code == 0 and "not diagonal" in err
    rep = json.loads((files.dir / "o.report.json").read_text())
    U = np.array(rep["frame"])[..., 0] + 1j * np.array(rep["frame"])[..., 1]
    assert np.allclose(U.conj().T @ U, np.eye(2))


def test_forward_exit_codes(files, monkeypatch):
    path = files.problem(zero_problem(1))

    def assumption(*a, **k):
        raise AssumptionOneViolated("pole of order 2", cluster=3)

    def count(*a, **k):
        raise CountMismatch("found 3 zeros, expected 2", band=5, found=3, expected=2)

    monkeypatch.setattr(cli, "forward_spectral_data", assumption)
    assert run("forward", "--problem", path, "--nmax", 4)[0] == 2
    monkeypatch.setattr(cli, "forward_spectral_data", count)
    code, _, err = run("forward", "--problem", path, "--nmax", 4)
    assert code == 3 and "band 5" in err


def test_forward_plots_and_workers(files):
    path = files.problem(BoundaryProblem.from_function(lambda x: np.diag([0.4 * np.cos(x), np.sin(2 * x)])))
    a, b = files.dir / "a.json", files.dir / "b.json"
    assert run("forward", "--problem", path, "--nmax", 5, "--out", a, "--emit-plots")[0] == 0
    assert run("forward", "--problem", path, "--nmax", 5, "--out", b, "--workers", 3)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    with open(files.dir / "a_rho_residuals.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["n", "q", "lambda_re", "lambda_im", "rho_residual"] and len(rows) == 1 + 6 * 2


def test_missing_file_and_bad_workers(files):
    assert run("forward", "--problem", files.dir / "nope.json")[0] == 1
    assert run("forward", "--problem", files.problem(zero_problem(1)), "--workers", 0)[0] == 1


# --------------------------------------------------------------------------- inverse


def test_inverse_model_data(files):
    md = model_spectral_data(ModelProblem(W12), 10)
    out = files.dir / "r.json"
    code, text, err = run("inverse", "--data", files.data(md), "--out", out, "--grid", 129)
    assert code == 0 and "warning" not in err and "N_trunc=10" in text
    r = io_formats.read_result(out)
    assert np.abs(r["Q_rec"] - 2 * W12 / np.pi).max() <= 1e-9
    assert np.abs(r["h_rec"]).max() <= 1e-9 and np.abs(r["H_rec"]).max() <= 1e-9
    assert r["diagnostics"]["input_conditions"] == {"A": "pass", "R": "pass"}


def test_inverse_error_decreases(files, cos_data, cos_problem):
    path = files.data(cos_data.truncated(20))
    errs = []
    for N in (5, 10, 20):
        out = files.dir / f"r{N}.json"
        assert run("inverse", "--data", path, "--ntrunc", N, "--out", out)[0] == 0
        r = io_formats.read_result(out)
        errs.append(np.sqrt(np.trapezoid(np.abs(r["Q_rec"][:, 0, 0] - cos_problem.Q[:, 0, 0]) ** 2, r["grid"])))
    assert errs[0] > errs[1] > errs[2]


def test_inverse_plots(files):
    md = model_spectral_data(ModelProblem(np.zeros((2, 2))), 4)
    out = files.dir / "r.json"
    assert run("inverse", "--data", files.data(md), "--out", out, "--grid", 65, "--emit-plots")[0] == 0
    with open(files.dir / "r_Q_rec.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 66 and len(rows[0]) == 1 + 2 * 4
    with open(files.dir / "r_xi.csv") as fh:
        assert len(list(csv.reader(fh))) == 1 + 5


def test_inverse_rank_corrupted(files):
    md = model_spectral_data(ModelProblem(W12), 12)
    alpha = md.alpha.copy()
    alpha[3, 0] = 0
    code, _, err = run("inverse", "--data", files.data(md.replace(alpha=alpha)))
    assert code == 4
    assert "condition (R) fails" in err and "x=" in err


def test_inverse_invalid_arguments(files):
    path = files.data(model_spectral_data(ModelProblem(np.zeros((1, 1))), 6))
    assert run("inverse", "--data", path, "--ntrunc", 7)[0] == 1
    assert run("inverse", "--data", path, "--ntrunc", 1)[0] == 1
    assert run("inverse", "--data", path, "--grid", 64)[0] == 1


# --------------------------------------------------------------------------- check


def test_check_model_data(files):
    path = files.data(model_spectral_data(ModelProblem(W12), 12))
    out = files.dir / "c.json"
    code, text, _ = run("check", "--data", path, "--out", out)
    assert code == 0
    rep = json.loads(out.read_text())
    assert {k: v["verdict"] for k, v in rep.items()} == dict.fromkeys("ARSC", "pass")


def test_check_non_selfadjoint(files, shift2i_data):
    path = files.data(shift2i_data)
    assert run("check", "--data", path, "--conditions", "A,R")[0] == 0
    assert run("check", "--data", path, "--conditions", "S")[0] == 1


def test_check_short_data(files):
    path = files.data(model_spectral_data(ModelProblem(np.zeros((1, 1))), 4))
    code, text, _ = run("check", "--data", path, "--conditions", "A")
    assert code == 1 and "indeterminate" in text


def test_check_structural_with_problem(files, diag12_data):
    path = files.data(diag12_data.truncated(5))
    code, text, _ = run("check", "--data", path, "--conditions", "structural", "--problem", files.problem(constant_problem([1, 2])))
    assert code == 0 and "structural" in text


def test_tolerance_override_and_env(files, monkeypatch):
    path = files.data(model_spectral_data(ModelProblem(np.zeros((1, 1))), 12))
    assert run("check", "--data", path, "--conditions", "A")[0] == 0
    assert run("check", "--data", path, "--conditions", "A", "--tol-override", "a_min_nmax=20")[0] == 1
    assert run("check", "--data", path, "--tol-override", "no_such_key=1")[0] == 1
    tol = files.dir / "tol.json"
    tol.write_text(json.dumps({"a_min_nmax": 20}))
    monkeypatch.setenv("MATSPEC_TOL_FILE", str(tol))
    assert run("check", "--data", path, "--conditions", "A")[0] == 1


# --------------------------------------------------------------------------- roundtrip


def test_roundtrip_zero_potential(files):
    out = files.dir / "rt.json"
    code, _, _ = run("roundtrip", "--problem", files.problem(zero_problem(2)), "--nmax", 8, "--out", out)
    assert code == 0
    row = json.loads(out.read_text())["sweep"][0]
    assert max(row["L2"], row["sup"], row["h_err"], row["H_err"]) <= 1e-8


def test_roundtrip_scalar_sweep(files, cos_problem):
    out = files.dir / "sw.json"
    code, text, _ = run(
        "roundtrip", "--problem", files.problem(cos_problem), "--nmax", 40, "--sweep", "10,20,40", "--out", out, "--emit-plots"
    )
    assert code == 0
    l2 = [r["L2"] for r in json.loads(out.read_text())["sweep"]]
    assert l2[0] > l2[1] > l2[2]
    with open(files.dir / "sw_sweep.csv") as fh:
        assert [r[0] for r in csv.reader(fh)] == ["N_trunc", "10", "20", "40"]
    with open(files.dir / "sw_error_x.csv") as fh:
        assert len(list(csv.reader(fh))) == 1 + cos_problem.grid.size


def test_roundtrip_matrix(files):
    out = files.dir / "m.json"
    code, _, err = run("roundtrip", "--problem", files.problem(BoundaryProblem.from_function(offdiag_Q)), "--nmax", 40, "--out", out)
    assert code == 0 and "not diagonal" in err
    assert json.loads(out.read_text())["sweep"][0]["L2"] <= 5e-2


def test_roundtrip_rejects_small_truncation(files):
    assert run("roundtrip", "--problem", files.problem(zero_problem(1)), "--sweep", "1,4")[0] == 1


def test_module_entry_point(files):
    path = files.data(model_spectral_data(ModelProblem(np.zeros((1, 1))), 10))
    p = subprocess.run([sys.executable, "-m", "matspec", "check", "--data", str(path)], capture_output=True, text=True)
    assert p.returncode == 0 and "C" in p.stdout
