import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import constant_problem, offdiag_Q, zero_problem
from matspec import ode
from matspec.errors import GridMismatch, InvalidProblem, NearSingular, NonFiniteState
from matspec.ode import (
    BoundaryProblem,
    boundary_form_U,
    boundary_form_V,
    boundary_values,
    char_det,
    d_kernel,
    integral_kernel,
    integrate_solutions,
    integration_error_estimate,
    lagrange_bracket,
    spectral_scalars,
    sqrt_branch,
    weyl_matrix,
)

finite = st.floats(-1e4, 1e4, allow_nan=False)


@pytest.fixture(scope="module")
def p_off():
    return BoundaryProblem.from_function(offdiag_Q, h=np.array([[0.1, 0.2], [0.0, 0.3]]), H=np.array([[0.0, 0.1], [0.2, -0.1]]))


# --------------------------------------------------------------------------- branch


@given(finite, finite)
def test_sqrt_branch_properties(a, b):
    lam = complex(a, b)
    rho = complex(sqrt_branch(lam))
    assert abs(rho**2 - lam) <= 1e-12 * max(1.0, abs(lam))
    assert rho.real >= 0
    if rho.real == 0:
        assert rho.imag >= 0


def test_sqrt_branch_ties():
    assert sqrt_branch(-4.0) == 2j
    s = spectral_scalars(-9)
    assert s.rho == 3j and s.tau == 3.0
    assert spectral_scalars(4).rho == 2


# --------------------------------------------------------------------------- solutions


def test_zero_potential_closed_form():
    p = zero_problem(1)
    s = integrate_solutions(p, 4)
    g = p.grid
    assert np.abs(s.phi[:, 0, 0] - np.cos(2 * g)).max() <= 1e-9
    assert np.abs(s.S[:, 0, 0] - np.sin(2 * g) / 2).max() <= 1e-9


def test_decoupled_constant_channels():
    p = constant_problem([1, 2])
    s = integrate_solutions(p, 5)
    g = p.grid
    expect = np.zeros((g.size, 2, 2))
    expect[:, 0, 0] = np.cos(2 * g)
    expect[:, 1, 1] = np.cos(np.sqrt(3) * g)
    assert np.abs(s.phi - expect).max() <= 1e-9


def test_initial_conditions_exact(p_off):
    s = integrate_solutions(p_off, 3.3 + 1j)
    I = np.eye(2)
    assert np.array_equal(s.phi[0], I)
    assert np.array_equal(s.dphi[0], p_off.h)
    assert np.array_equal(s.S[0], np.zeros((2, 2)))
    assert np.array_equal(s.dS[0], I)
    assert np.array_equal(s.phistar[0], I)
    assert np.array_equal(s.dphistar[0], p_off.h)


def test_wronskian_example():
    p = BoundaryProblem.from_function(offdiag_Q)
    s = integrate_solutions(p, 2.5)
    br = lagrange_bracket(s.phistar, s.dphistar, s.phi, s.dphi)
    assert np.abs(br - br[0]).max() <= 1e-8


_P_WRON = BoundaryProblem.from_function(offdiag_Q, h=np.array([[0.1, 0.2], [0.0, 0.3]]))


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 100), st.floats(0, 2 * np.pi))
def test_wronskian_constancy_random(r, t):
    s = integrate_solutions(_P_WRON, r * np.exp(1j * t))
    br = lagrange_bracket(s.phistar, s.dphistar, s.phi, s.dphi)
    # the bracket is a difference of products that grow like exp(2 pi Im rho)
    size = lambda A: np.linalg.norm(A, ord=2, axis=(-2, -1))
    scale = (size(s.dphistar) * size(s.phi) + size(s.phistar) * size(s.dphi)).max()
    assert np.abs(br - br[0]).max() <= 10 * 1e-10 * max(1.0, scale)


def test_lagrange_identity(p_off):
    lam, mu = 7.3 + 0.5j, 3.1 - 1j
    sl = integrate_solutions(p_off, lam)
    sm = integrate_solutions(p_off, mu)
    br = lagrange_bracket(sm.phistar, sm.dphistar, sl.phi, sl.dphi)
    quad = (lam - mu) * integral_kernel(sm, sl)
    assert np.abs((br - br[0]) - quad).max() <= 1e-7


def test_selfadjoint_symmetry():
    p = BoundaryProblem.from_function(offdiag_Q, h=np.array([[0.3, 0.1j], [-0.1j, 0.0]]), selfadjoint_hint=True)
    for lam in (4.0 + 2j, 30 - 5j, 0.5j):
        s = integrate_solutions(p, lam)
        sb = integrate_solutions(p, np.conj(lam))
        assert np.abs(s.phistar - sb.phi.conj().transpose(0, 2, 1)).max() <= 1e-8


def test_weyl_equals_dual(p_off):
    rng = np.random.default_rng(7)
    dual = p_off.dual()
    for _ in range(20):
        z = rng.uniform(-5, 400) + 1j * rng.choice([-1, 1]) * rng.uniform(0.5, 20)
        M = weyl_matrix(p_off, z)
        Ms = weyl_matrix(dual, z).T
        assert np.abs(M - Ms).max() / max(1, np.abs(M).max()) <= 1e-7


def test_step_halving_order_four():
    p = BoundaryProblem.from_function(offdiag_Q, n_nodes=65, h=np.array([[0.1, 0.2], [0.0, 0.3]]))
    y0, yp0 = ode._initial_blocks(p)
    for lam in (2.5, 100.0, 400 + 20j, 900.0):
        ys = [ode._propagate(p, [lam], y0, yp0, s, False, False)[0] for s in (1, 2, 4, 8)]
        est = [np.abs(ys[i] - ys[i + 1]).max() for i in range(3)]
        for a, b in zip(est, est[1:]):
            # the ratio tends to 2^4; allow 1% for the next-order term
            assert a / b >= 16 * 0.99


def test_error_estimate_within_tolerance(p_off):
    for lam in (1.0, 250.0 + 3j, 1600.0):
        assert integration_error_estimate(p_off, lam, tol=1e-10) <= 1e-10


# --------------------------------------------------------------------------- boundary forms


@pytest.mark.parametrize("lam", [2.25, 0.7, 10.0 + 2j, -3.0])
def test_zero_potential_boundary_forms(lam):
    p = zero_problem(1)
    s = integrate_solutions(p, lam)
    rho = sqrt_branch(lam)
    assert abs(boundary_form_V(p, s)[0, 0] - (-rho * np.sin(rho * np.pi))) <= 1e-9 * max(1, abs(rho * np.sin(rho * np.pi)))
    assert abs(boundary_form_V(p, s, "S")[0, 0] - np.cos(rho * np.pi)) <= 1e-9 * max(1, abs(np.cos(rho * np.pi)))
    assert abs(boundary_form_U(p, s)[0, 0]) <= 1e-15


def test_decoupled_boundary_form():
    p = constant_problem([1, 2])
    V = boundary_form_V(p, integrate_solutions(p, 5))
    expect = np.diag([-2 * np.sin(2 * np.pi), -np.sqrt(3) * np.sin(np.sqrt(3) * np.pi)])
    assert np.abs(V - expect).max() <= 1e-9


def test_boundary_values_matches_samples(p_off):
    lams = np.array([1.0, 17.0 + 2j, 300.0])
    bv = boundary_values(p_off, lams, with_dlam=True)
    for k, lam in enumerate(lams):
        s = integrate_solutions(p_off, lam)
        assert np.abs(bv.phi[k] - s.phi[-1]).max() <= 1e-9
        assert np.abs(bv.V(p_off.H)[k] - boundary_form_V(p_off, s)).max() <= 1e-9
        assert np.abs(bv.phi_lam[k] - s.phi_lam[-1]).max() <= 1e-9


def test_boundary_values_workers_identical(p_off):
    lams = np.linspace(0, 1600, 300) + 0.5j
    a = boundary_values(p_off, lams, workers=1, chunk=64)
    b = boundary_values(p_off, lams, workers=4, chunk=64)
    assert np.array_equal(a.phi, b.phi) and np.array_equal(a.dS, b.dS)


def test_lambda_derivative_matches_difference(p_off):
    lam, e = 30.3, 1e-5
    a = boundary_values(p_off, [lam + e, lam - e])
    b = boundary_values(p_off, [lam], with_dlam=True)
    assert np.abs((a.phi[0] - a.phi[1]) / (2 * e) - b.phi_lam[0]).max() <= 1e-6


# --------------------------------------------------------------------------- characteristic function and Weyl matrix


def test_char_det_zeros_scalar():
    p = zero_problem(1)
    for n in range(4):
        assert abs(char_det(p, n**2)) <= 1e-9
    assert abs(char_det(p, 2.25) - 1.5) <= 1e-9


def test_char_det_zeros_decoupled():
    p = constant_problem([1, 2])
    lams = np.array([n**2 + q for n in range(4) for q in (1, 2)], dtype=complex)
    assert np.abs(char_det(p, lams)).max() <= 1e-9
    assert abs(char_det(p, 2.5 + 1j)) > 1e-3


def test_weyl_zero_potential():
    p = zero_problem(1)
    assert abs(weyl_matrix(p, 2.25)[0, 0]) <= 1e-9
    assert abs(weyl_matrix(p, 0.25)[0, 0]) <= 1e-9
    lam = 3.7 + 0.4j
    rho = np.sqrt(lam)
    expect = np.cos(rho * np.pi) / (rho * np.sin(rho * np.pi))
    assert abs(weyl_matrix(p, lam)[0, 0] - expect) <= 1e-9 * abs(expect)


def test_weyl_decoupled_matches_scalar_runs():
    lam = 6.1 + 0.8j
    M = weyl_matrix(constant_problem([1, 2]), lam)
    m1 = weyl_matrix(constant_problem([1]), lam)[0, 0]
    m2 = weyl_matrix(constant_problem([2]), lam)[0, 0]
    assert np.abs(M - np.diag([m1, m2])).max() <= 1e-9


def test_weyl_near_singular():
    with pytest.raises(NearSingular):
        weyl_matrix(zero_problem(1), 4.0)
    with pytest.raises(NearSingular):
        weyl_matrix(constant_problem([1, 2]), 5.0)
    M, cond = weyl_matrix(zero_problem(1), 4.5, return_cond=True)
    assert cond < 10


# --------------------------------------------------------------------------- D kernel


def test_d_kernel_examples():
    p = zero_problem(1)
    s0 = integrate_solutions(p, 0)
    assert abs(d_kernel(s0, s0, -1)[0, 0] - np.pi) <= 1e-9
    s1, s4 = integrate_solutions(p, 1), integrate_solutions(p, 4)
    assert abs(d_kernel(s4, s1, -1)[0, 0]) <= 1e-9


def test_d_kernel_quotient_vs_integral(p_off):
    sm = integrate_solutions(p_off, 2.0)
    sl = integrate_solutions(p_off, 2.0 + 1e-9)
    near = d_kernel(sm, sl, -1)
    quad = integral_kernel(sm, sl)[-1]
    assert np.abs(near - quad).max() <= 1e-6
    # just above the switch the quotient form is used; it must still match quadrature
    s_far = integrate_solutions(p_off, 2.0 + 1e-6)
    assert np.abs(d_kernel(sm, s_far, -1) - integral_kernel(sm, s_far)[-1]).max() <= 1e-6


def test_d_kernel_grid_mismatch():
    a = integrate_solutions(zero_problem(1), 1.0)
    b = integrate_solutions(zero_problem(1, n_nodes=129), 1.0)
    with pytest.raises(GridMismatch):
        d_kernel(a, b, -1)


# --------------------------------------------------------------------------- validation


def test_non_finite_state():
    with pytest.raises(NonFiniteState, match="grid node"):
        integrate_solutions(zero_problem(1), -1e6)


def test_non_finite_lambda():
    with pytest.raises(ValueError):
        integrate_solutions(zero_problem(1), np.nan)


@pytest.mark.parametrize(
    "grid, Q, hint",
    [
        (np.linspace(0, np.pi, 10), np.zeros(10), False),
        (np.linspace(0, 3, 100), np.zeros(100), False),
        (np.r_[np.linspace(0, 1, 50), np.linspace(1, np.pi, 50)], np.zeros(100), False),
        (np.linspace(0, np.pi, 100), np.zeros(99), False),
        (np.linspace(0, np.pi, 100), np.r_[np.zeros(99), np.nan], False),
        (np.linspace(0, np.pi, 100), np.full(100, 1j), True),
    ],
)
def test_invalid_problems(grid, Q, hint):
    with pytest.raises(InvalidProblem):
        BoundaryProblem(grid, Q, 0, 0, hint)


def test_problem_helpers(p_off):
    assert p_off.m == 2 and p_off.n_nodes == 257
    x = np.array([0.0, 1.234, np.pi])
    Qx = p_off.Q_at(x)
    assert np.abs(Qx - np.array([offdiag_Q(t) for t in x])).max() <= 1e-4
    U = np.array([[1, 1], [0, 1]], complex)
    c = p_off.conjugated(U)
    assert np.allclose(U @ c.Q @ np.linalg.inv(U), p_off.Q)
    d = p_off.dual()
    assert np.array_equal(d.Q, p_off.Q.transpose(0, 2, 1)) and np.array_equal(d.h, p_off.h.T)
    assert not p_off.is_hermitian()
    assert BoundaryProblem.from_function(offdiag_Q).is_hermitian()
