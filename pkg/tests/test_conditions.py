import numpy as np
import pytest

from conftest import constant_problem, zero_problem
from matspec.conditions import (
    FAIL,
    INDETERMINATE,
    PASS,
    asymptotic_residuals,
    check_A,
    check_C,
    check_R,
    check_S,
    check_structural,
    run_checks,
)
from matspec.forward import forward_spectral_data
from matspec.model import ModelProblem, model_spectral_data
from matspec.ode import BoundaryProblem

W12 = np.diag([np.pi / 2, np.pi])


@pytest.fixture(scope="module")
def md12():
    return model_spectral_data(ModelProblem(W12), 12)


def _unitary(m, seed=0):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    return np.linalg.qr(Z)[0]


# --------------------------------------------------------------------------- (A)


def test_model_residuals_vanish():
    for omega in (np.zeros((1, 1)), np.zeros((2, 2))):
        res = asymptotic_residuals(model_spectral_data(ModelProblem(omega), 12))
        assert set(res) == {"rho", "group", "total", "offgroup"}
        for seq in res.values():
            assert np.abs(seq[1:]).max() <= 1e-13


def test_model_residuals_shifted(md12):
    # the weights match exactly; rho_n = sqrt(n^2 + s) leaves an O(n^-2) remainder.
    # lambda = 2 is shared by (0, 2) and (1, 1) and counted once, at n = 0
    res = asymptotic_residuals(md12)
    for k in ("group", "total", "offgroup"):
        assert np.abs(res[k][2:]).max() <= 1e-13
    n = np.arange(1, 13)[:, None]
    s = np.array([1.0, 2.0])
    expect = np.abs(n * (np.sqrt(n**2 + s) - n - s / (2 * n))).max(axis=1)
    assert np.abs(res["rho"][1:] - expect).max() <= 1e-12
    assert check_A(md12).verdict == PASS


def test_injected_weight_violation():
    md = model_spectral_data(ModelProblem(np.zeros((1, 1))), 12)
    alpha = md.alpha.copy()
    alpha[1:] = 4 / np.pi
    r = check_A(md.replace(alpha=alpha))
    assert r.verdict == FAIL
    tails = r.diagnostics["tails"]["total"]
    assert tails["upper"] > tails["lower"]


def test_forward_data_pass_A(cos_data, offdiag_data):
    for d in (cos_data, offdiag_data):
        r = check_A(d)
        assert r.verdict == PASS and np.isfinite(r.diagnostics["alpha_bound"])


def test_short_data_indeterminate():
    md = model_spectral_data(ModelProblem(np.zeros((1, 1))), 4)
    assert check_A(md).verdict == INDETERMINATE


# --------------------------------------------------------------------------- (R)


def test_ranks_model(md12):
    r = check_R(md12)
    assert r.passed
    # the lambda = 2 cluster joins (0, 2) and (1, 1)
    ranks = {(n, q): (rk, mu) for n, q, rk, mu in r.diagnostics["ranks"]}
    assert ranks[(0, 2)] == (2, 2) and ranks[(3, 1)] == (1, 1)


def test_ranks_coincident_channels():
    md = model_spectral_data(ModelProblem(np.zeros((2, 2))), 6)
    r = check_R(md)
    assert r.passed and all(rk == 2 and mu == 2 for _, _, rk, mu in r.diagnostics["ranks"])


def test_ranks_distinct_shifts():
    md = model_spectral_data(ModelProblem(np.diag([0.3, 1.1])), 6)
    r = check_R(md)
    assert r.passed and all(rk == 1 and mu == 1 for _, _, rk, mu in r.diagnostics["ranks"])


def test_zeroed_weight_fails_R(md12):
    alpha = md12.alpha.copy()
    alpha[3, 0] = 0
    r = check_R(md12.replace(alpha=alpha))
    assert r.verdict == FAIL and r.diagnostics["mismatches"] == [(3, 1)]


# --------------------------------------------------------------------------- (S)


def test_S_model_real(md12):
    assert check_S(md12).passed


def test_S_non_selfadjoint(shift2i_data):
    r = check_S(shift2i_data)
    assert r.verdict == FAIL and "non-real eigenvalue" in r.diagnostics["failures"]


def test_S_negative_weight(md12):
    alpha = md12.alpha.copy()
    alpha[2, 0] = -alpha[2, 0]
    r = check_S(md12.replace(alpha=alpha))
    assert r.verdict == FAIL and r.diagnostics["failures"] == ["weight not positive semidefinite"]


def test_S_non_hermitian(md12):
    alpha = md12.alpha.copy()
    alpha[2, 0, 0, 1] = 0.1
    assert "non-Hermitian weight" in check_S(md12.replace(alpha=alpha)).diagnostics["failures"]


# --------------------------------------------------------------------------- (C)


def test_C_cosine_system():
    md = model_spectral_data(ModelProblem(np.zeros((1, 1))), 10)
    r = check_C(md, n_bands=10)
    assert r.passed and abs(r.diagnostics["sigma_min"] - 1) <= 1e-12 and r.diagnostics["size"] == 11


def test_C_duplicate_datum():
    md = model_spectral_data(ModelProblem(np.zeros((1, 1))), 10)
    lam, alpha = md.lam.copy(), md.alpha.copy()
    lam[7], alpha[7] = lam[3], alpha[3]
    r = check_C(md.replace(lam=lam, alpha=alpha))
    assert r.verdict == FAIL and r.diagnostics["sigma_min"] <= 1e-12


def test_C_monotone_on_failure():
    md = model_spectral_data(ModelProblem(np.zeros((1, 1))), 10)
    lam, alpha = md.lam.copy(), md.alpha.copy()
    lam[4], alpha[4] = lam[2], alpha[2]
    sig = [check_C(md.replace(lam=lam, alpha=alpha), n_bands=nb).diagnostics["sigma_min"] for nb in range(4, 11)]
    assert all(s <= 1e-12 for s in sig)


def test_C_forward_decoupled(diag12_data):
    assert check_C(diag12_data).passed


def test_C_n_bands_bound(md12):
    with pytest.raises(ValueError):
        check_C(md12, n_bands=13)


# --------------------------------------------------------------------------- unitary invariance


def _assert_same_verdicts(d, U):
    base = run_checks(d)
    rot = run_checks(d.transformed(U))
    for k in base.results:
        assert base[k].verdict == rot[k].verdict
    assert abs(base["C"].diagnostics["sigma_min"] - rot["C"].diagnostics["sigma_min"]) <= 1e-10
    a, b = base["A"].diagnostics["residuals"], rot["A"].diagnostics["residuals"]
    for k in a:
        assert np.abs(a[k] - b[k]).max() <= 1e-12


def test_verdicts_invariant_single_group():
    # omega = 0: one group, so any unitary keeps the data in the same class
    p = BoundaryProblem.from_function(lambda x: np.array([[0, 0.3 * np.cos(x)], [0.3 * np.cos(x), 0]]))
    d = forward_spectral_data(p, 10)
    for seed in range(3):
        _assert_same_verdicts(d, _unitary(2, seed))
    md = model_spectral_data(ModelProblem(np.zeros((3, 3))), 10)
    _assert_same_verdicts(md, _unitary(3, 9))


def test_verdicts_invariant_group_preserving(offdiag_data, md12):
    # with distinct omega_q only unitaries commuting with omega keep the class
    U = np.diag(np.exp(1j * np.array([0.4, -1.3])))
    for d in (offdiag_data, md12):
        _assert_same_verdicts(d, U)


# --------------------------------------------------------------------------- structural


def test_structural_zero_potential():
    p = zero_problem(1)
    d = forward_spectral_data(p, 6)
    r = check_structural(p, d)
    for k in ("prodval", "sym_self", "sym_cross", "weyl_dual"):
        assert r.diagnostics[k] <= 1e-9


def test_structural_decoupled(diag12_data):
    r = check_structural(constant_problem([1, 2]), diag12_data.truncated(6))
    assert all(r.diagnostics[k] <= 1e-7 for k in ("prodval", "sym_self", "sym_cross", "weyl_dual"))


def test_structural_non_hermitian():
    p = constant_problem([1 + 0.5j, -0.3j])
    d = forward_spectral_data(p, 5)
    r = check_structural(p, d)
    assert r.passed and all(r.diagnostics[k] <= 1e-6 for k in ("prodval", "sym_self", "sym_cross"))


def test_structural_detects_wrong_weights(diag12_data):
    d = diag12_data.truncated(4)
    r = check_structural(constant_problem([1, 2]), d.replace(alpha=1.1 * d.alpha))
    assert r.verdict == FAIL and r.diagnostics["sym_self"] > 1e-3


# --------------------------------------------------------------------------- report


def test_report_table_and_dict(md12):
    rep = run_checks(md12)
    assert rep.passed
    table = rep.table()
    for name in "ARSC":
        assert f"\n{name} " in table
    d = rep.to_dict()
    assert d["A"]["verdict"] == PASS and isinstance(d["A"]["diagnostics"]["residuals"]["rho"], list)
    with pytest.raises(ValueError):
        run_checks(md12, ["Z"])
    with pytest.raises(ValueError):
        run_checks(md12, ["structural"])
