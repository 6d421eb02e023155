"""Reconstruction of ``(Q, h, H)`` from spectral data by the method of spectral mappings.

For each ``x`` the truncated main equation

    phi~(x, lam_v) = phi(x, lam_v) + sum_u phi(x, lam_u) C_u D~(x, lam_v, lam_u)

is solved for the unknown matrices ``phi(x, lam_u)``.  The nodes ``lam_u`` are
the given eigenvalues (sign +1) and the model eigenvalues (sign -1) for bands
``0..N_trunc``; coincident values are merged into one node whose coefficient
``C_u`` is the signed sum of the primed weights.  Then

    eps0(x) = sum_u phi(x, lam_u) C_u phi~*(x, lam_u),
    Q = Q~ - 2 eps0',   h = h~ - eps0(0),   H = H~ + eps0(pi).
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.linalg.lapack import get_lapack_funcs

from .config import DEFAULT, Tolerances
from .errors import DimensionMismatch, MainEquationSingular, TruncationTooLarge
from .forward import SpectralData, group_sums, row_norm
from .model import ModelProblem, cos_entries, dcos_entries, kernel_entries, model_spectral_data

__all__ = [
    "TailTooLarge",
    "OmegaTailGrowth",
    "XiResult",
    "xi_sequence",
    "IndexSet",
    "MainEquationSystem",
    "build_main_system",
    "solve_main_equation",
    "ReconstructionResult",
    "reconstruct",
    "fd_derivative",
]


class TailTooLarge(UserWarning):
    """The last retained band contributes too much to ``eps0``."""


class OmegaTailGrowth(UserWarning):
    """The tail of ``xi_n`` does not decrease over the available prefix."""


def _check_compatible(data: SpectralData, model_data: SpectralData):
    if data.m != model_data.m:
        raise DimensionMismatch(f"m differs: {data.m} vs {model_data.m}", path="m")
    if data.n_max != model_data.n_max:
        raise DimensionMismatch(f"n_max differs: {data.n_max} vs {model_data.n_max}", path="n_max")


# --------------------------------------------------------------------------- xi


@dataclass(frozen=True)
class XiResult:
    xi: np.ndarray
    Omega: float
    tail_growth: bool


def xi_sequence(data: SpectralData, model_data: SpectralData, tolerances: Tolerances = DEFAULT, warn=True) -> XiResult:
    """Distance ``xi_n`` between the data and the model data, and ``Omega = ||(n+1) xi_n||_2``.

    ``xi_n`` adds the eigenvalue gaps ``|rho_nq - rho~_nq|``, the in-group
    spreads of both sets relative to each group's representative, the group
    weight differences divided by ``n`` (by 1 at ``n = 0``) and the total weight
    difference, all in the row-sum norm.
    """
    _check_compatible(data, model_data)
    groups = data.groups(tolerances)
    rho, rho_t = data.rho, model_data.rho
    N1 = data.n_max + 1
    xi = np.abs(rho - rho_t).sum(axis=1)
    for g in groups:
        rep = g[0]
        xi += np.abs(rho[:, g] - rho[:, [rep]]).sum(axis=1)
        xi += np.abs(rho_t[:, g] - rho_t[:, [rep]]).sum(axis=1)
    gs, tot = group_sums(data, tolerances)
    gs_t, tot_t = group_sums(model_data, tolerances)
    div = np.maximum(np.arange(N1), 1)
    xi += row_norm(gs - gs_t).sum(axis=1) / div
    xi += row_norm(tot - tot_t)
    Omega = float(np.sqrt(np.sum(((np.arange(N1) + 1) * xi) ** 2)))
    half = N1 // 2
    lower, upper = np.linalg.norm(xi[:half]), np.linalg.norm(xi[half:])
    # a tail at rounding level carries no trend
    growth = bool(N1 >= 4 and upper > lower and upper > tolerances.a_noise_floor)
    if growth and warn:
        warnings.warn(
            f"xi_n tail grows over the available prefix ({upper:.3e} > {lower:.3e}); data may violate the asymptotics",
            OmegaTailGrowth,
            stacklevel=2,
        )
    return XiResult(xi, Omega, growth)


# --------------------------------------------------------------------------- system


@dataclass(frozen=True)
class IndexSet:
    """Triples ``(n, q, i)`` in lexicographic order with their node values.

    ``node`` maps each triple to its merged node; ``coef[u]`` is the signed sum
    of primed weights at node ``u``.
    """

    n: np.ndarray
    q: np.ndarray
    i: np.ndarray
    lam: np.ndarray
    weight: np.ndarray  # signed primed weights, (K, m, m)
    node: np.ndarray
    node_lam: np.ndarray
    coef: np.ndarray

    @property
    def size(self) -> int:
        return self.n.size


def _index_set(data, model_data, N_trunc, tolerances):
    m = data.m
    n, q, i = np.meshgrid(np.arange(N_trunc + 1), np.arange(m), np.arange(2), indexing="ij")
    n, q, i = n.ravel(), q.ravel(), i.ravel()
    lam = np.where(i == 0, data.lam[n, q], model_data.lam[n, q])
    ap0, ap1 = data.alpha_primed, model_data.alpha_primed
    weight = np.where((i == 0)[:, None, None], ap0[n, q], -ap1[n, q])
    # merge coincident nodes
    order = np.lexsort((lam.imag, lam.real))
    node = np.empty(lam.size, int)
    node_lam = []
    for k in order:
        if node_lam:
            ref = node_lam[-1]
            if abs(lam[k] - ref) <= tolerances.coincidence_rel * (1 + abs(ref)):
                node[k] = len(node_lam) - 1
                continue
        node_lam.append(lam[k])
        node[k] = len(node_lam) - 1
    # renumber nodes in order of first appearance in the index set
    first = {}
    for k in range(lam.size):
        first.setdefault(node[k], len(first))
    node = np.array([first[u] for u in node])
    node_lam = np.array([lam[np.flatnonzero(node == u)[0]] for u in range(len(first))])
    coef = np.zeros((node_lam.size, m, m), complex)
    np.add.at(coef, node, weight)
    return IndexSet(n, q, i, lam, weight, node, node_lam, coef)


@dataclass
class MainEquationSystem:
    """``psi~(x) = psi(x) (I + R(x))`` at one grid point, on merged nodes.

    ``A`` is ``I + R`` of side ``m * U``: block ``(u, v)`` equals
    ``C_u diag(D~(x, lam_v, lam_u))``.  ``rhs`` stacks ``phi~(x, lam_v)`` as an
    ``m x (m U)`` row-block vector.
    """

    x: float
    index: IndexSet
    A: np.ndarray
    rhs: np.ndarray
    solved: np.ndarray | None = None
    residual: float | None = None
    cond: float | None = None
    lu: tuple | None = field(default=None, repr=False)


def _kernel_table(model, node_lam, x):
    """``d[u, v, q] = D~_q(x, lam_v, lam_u)`` (symmetric in u, v)."""
    return kernel_entries(model, node_lam[None, :], node_lam[:, None], x)


def _assemble(coef, d):
    U, m = coef.shape[0], coef.shape[1]
    R = coef[:, :, None, :] * d[:, None, :, :]  # (u, i, v, j) = C_u[i, j] d[u, v, j]
    return np.eye(U * m) + R.reshape(U * m, U * m)


def build_main_system(
    x: float,
    data: SpectralData,
    model_data: SpectralData,
    model: ModelProblem,
    N_trunc: int,
    tolerances: Tolerances = DEFAULT,
    index: IndexSet | None = None,
) -> MainEquationSystem:
    """Dense truncated main equation at ``x``."""
    if N_trunc > data.n_max or N_trunc > model_data.n_max:
        raise TruncationTooLarge(f"N_trunc={N_trunc} exceeds n_max={min(data.n_max, model_data.n_max)}")
    _check_compatible(data, model_data)
    if not 0 <= x <= np.pi + 1e-12:
        raise ValueError("x must lie in [0, pi]")
    index = index or _index_set(data, model_data, N_trunc, tolerances)
    d = _kernel_table(model, index.node_lam, x)
    A = _assemble(index.coef, d)
    c = cos_entries(model, index.node_lam, x)  # (U, m)
    m = data.m
    rhs = np.zeros((m, index.node_lam.size, m), complex)
    rhs[np.arange(m), :, np.arange(m)] = c.T
    return MainEquationSystem(float(x), index, A, rhs.reshape(m, -1))


_gecon = {}


def _condition(lu, anorm):
    fn = _gecon.get(lu.dtype)
    if fn is None:
        fn = _gecon[lu.dtype] = get_lapack_funcs("gecon", (lu,))
    rcond, info = fn(lu, anorm, norm="1")
    return np.inf if rcond == 0 else 1.0 / rcond


def solve_main_equation(system: MainEquationSystem, tolerances: Tolerances = DEFAULT, extra_rhs=None):
    """Solve ``psi (I + R) = psi~`` by LU.

    Records the residual ``||psi~ - psi A|| / ||psi~||`` and the 1-norm
    condition estimate; raises :class:`MainEquationSingular` above
    ``tolerances.main_cond_max``.  ``extra_rhs`` (same shape as the rhs) is
    solved with the same factorisation and returned as a second value.
    """
    A = system.A
    with warnings.catch_warnings():
        # exact singularity shows up in the condition estimate below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(A.T, check_finite=False)
    cond = _condition(lu, np.abs(A.T).sum(axis=0).max())
    system.cond = float(cond)
    if not np.isfinite(cond) or cond > tolerances.main_cond_max:
        raise MainEquationSingular(
            f"main equation is numerically singular at x={system.x:.6g} (cond={cond:.3e})", x=system.x, cond=cond
        )
    psi = lu_solve((lu, piv), system.rhs.T, check_finite=False).T
    system.solved = psi
    system.lu = (lu, piv)
    nr = np.linalg.norm(system.rhs)
    system.residual = float(np.linalg.norm(system.rhs - psi @ A) / (nr if nr > 0 else 1.0))
    if extra_rhs is not None:
        return psi, lu_solve((lu, piv), extra_rhs.T, check_finite=False).T
    return psi


# --------------------------------------------------------------------------- reconstruction


def fd_derivative(f, grid):
    """Fourth-order finite-difference derivative along axis 0 (one-sided near the ends).

    Uses five-point Fornberg weights on the actual node positions, so
    non-uniform grids are allowed.
    """
    grid = np.asarray(grid, dtype=float)
    G = grid.size
    out = np.empty_like(f)
    for k in range(G):
        lo = min(max(k - 2, 0), G - 5)
        idx = np.arange(lo, lo + 5)
        w = _fornberg_first(grid[k], grid[idx])
        out[k] = np.tensordot(w, f[idx], axes=(0, 0))
    return out


def _fornberg_first(x0, xs):
    """Weights for the first derivative at ``x0`` from nodes ``xs`` (Fornberg's recursion)."""
    n = len(xs)
    c = np.zeros((n, 2))
    c1, c4 = 1.0, xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, 1)
        c2, c5, c4 = 1.0, c4, xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, 1]


@dataclass
class ReconstructionResult:
    grid: np.ndarray
    Q_rec: np.ndarray
    h_rec: np.ndarray
    H_rec: np.ndarray
    eps0: np.ndarray
    eps: np.ndarray
    residual_report: np.ndarray
    cond_report: np.ndarray
    truncation: int
    Omega: float
    xi: np.ndarray
    tail: float
    tail_rel: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.Q_rec.shape[1]


def reconstruct(
    data: SpectralData,
    N_trunc: int,
    grid=None,
    model: ModelProblem | None = None,
    model_data: SpectralData | None = None,
    tolerances: Tolerances = DEFAULT,
    derivative: str = "fd",
    workers: int = 1,
    omega_policy: str = "warn",
) -> ReconstructionResult:
    """Recover ``Q`` on ``grid`` and the boundary matrices from ``data``.

    Parameters
    ----------
    data : SpectralData
        Must have a diagonal ``omega``.
    N_trunc : int
        Bands ``0..N_trunc`` enter the main equation.
    grid : array, optional
        Reconstruction nodes on [0, pi] (default 257 uniform nodes).
    model, model_data : optional
        Default: the model problem built from ``data.omega`` and its closed-form data.
    derivative : {"fd", "termwise"}
        How ``eps = -2 eps0'`` is obtained: fourth-order finite differences of
        ``eps0`` on the grid, or term-wise differentiation of the series (one
        extra right-hand side per grid point).
    omega_policy : {"warn", "fail", "ignore"}
        What to do when ``xi_n`` grows over the available prefix.
    """
    model = model or ModelProblem.from_data(data)
    if model_data is None:
        model_data = model_spectral_data(model, data.n_max)
    if N_trunc > data.n_max or N_trunc > model_data.n_max:
        raise TruncationTooLarge(f"N_trunc={N_trunc} exceeds n_max={min(data.n_max, model_data.n_max)}")
    if derivative not in ("fd", "termwise"):
        raise ValueError("derivative must be 'fd' or 'termwise'")
    grid = np.linspace(0.0, np.pi, 257) if grid is None else np.asarray(grid, dtype=float)
    m = data.m
    xr = xi_sequence(data.truncated(N_trunc), model_data.truncated(N_trunc), tolerances, warn=omega_policy == "warn")
    if xr.tail_growth and omega_policy == "fail":
        raise ValueError("xi_n tail grows over the available prefix; refusing to reconstruct")
    index = _index_set(data, model_data, N_trunc, tolerances)
    U = index.node_lam.size
    C = index.coef
    last = index.n == N_trunc

    def at(x):
        system = build_main_system(x, data, model_data, model, N_trunc, tolerances, index=index)
        c = cos_entries(model, index.node_lam, x)  # (U, m)
        if derivative == "termwise":
            dc = dcos_entries(model, index.node_lam, x)
            rhs_d = np.zeros((m, U, m), complex)
            rhs_d[np.arange(m), :, np.arange(m)] = dc.T
            # d/dx D~(x, lam_v, lam_u) = phi~*(x, lam_u) phi~(x, lam_v)
            dd = c[:, None, :] * c[None, :, :]
            Rx = (C[:, :, None, :] * dd[:, None, :, :]).reshape(U * m, U * m)
            psi = solve_main_equation(system, tolerances)
            extra = rhs_d.reshape(m, -1) - psi @ Rx
            dpsi = lu_solve(system.lu, extra.T, check_finite=False).T
        else:
            psi = solve_main_equation(system, tolerances)
        Phi = psi.reshape(m, U, m).transpose(1, 0, 2)  # (U, m, m)
        terms = Phi @ C * c[:, None, :]  # Phi_u C_u diag(c_u)
        e0 = terms.sum(axis=0)
        wt = index.weight[last] * c[index.node[last]][:, None, :]
        tail = np.abs((Phi[index.node[last]] @ wt).sum(axis=0))
        de0 = None
        if derivative == "termwise":
            dPhi = dpsi.reshape(m, U, m).transpose(1, 0, 2)
            dc = dcos_entries(model, index.node_lam, x)
            de0 = (dPhi @ C * c[:, None, :]).sum(axis=0) + (Phi @ C * dc[:, None, :]).sum(axis=0)
        return e0, de0, tail, system.residual, system.cond

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(at, grid))
    else:
        results = [at(x) for x in grid]
    eps0 = np.array([r[0] for r in results])
    if derivative == "termwise":
        deps0 = np.array([r[1] for r in results])
    else:
        deps0 = fd_derivative(eps0, grid)
    tail_mat = np.array([r[2] for r in results])
    residuals = np.array([r[3] for r in results])
    conds = np.array([r[4] for r in results])
    eps = -2 * deps0
    Qt = 2 * model.omega / np.pi
    Q_rec = Qt[None] + eps
    h_rec = -eps0[0]
    H_rec = eps0[-1]
    tail = float(row_norm(tail_mat).max())
    e0max = float(row_norm(eps0).max())
    tail_rel = tail / e0max if e0max > 0 else 0.0
    too_large = tail > tolerances.tail_rel * e0max and tail > tolerances.tail_abs_floor
    if too_large:
        warnings.warn(
            f"band {N_trunc} contributes {tail:.3e} to eps0 (max {e0max:.3e}); truncation may be too early",
            TailTooLarge,
            stacklevel=2,
        )
    diagnostics = {
        "max_residual": float(residuals.max()),
        "max_cond": float(conds.max()),
        "nodes": int(U),
        "residual_ok": bool(residuals.max() <= tolerances.main_residual),
        "tail_too_large": bool(too_large),
        "xi_tail_growth": xr.tail_growth,
        "derivative": derivative,
    }
    return ReconstructionResult(
        grid=grid,
        Q_rec=Q_rec,
        h_rec=h_rec,
        H_rec=H_rec,
        eps0=eps0,
        eps=eps,
        residual_report=residuals,
        cond_report=conds,
        truncation=N_trunc,
        Omega=xr.Omega,
        xi=xr.xi,
        tail=tail,
        tail_rel=tail_rel,
        diagnostics=diagnostics,
    )
