"""Matrix Sturm-Liouville problem on (0, pi) and its fundamental solutions.

The equation is ``-Y'' + Q(x) Y = lam Y`` with boundary forms
``U(Y) = Y'(0) - h Y(0)`` and ``V(Y) = Y'(pi) + H Y(pi)``.  The potential is
given by samples on a grid and is linear between nodes.

Solutions are propagated with a fourth-order commutator-free Magnus scheme:
each step is a product of two exponentials of frozen-coefficient systems
``[[0, I], [B - lam, 0]]``, which are evaluated exactly through an
eigendecomposition of ``B``.  Because ``lam`` only shifts ``B``, the
decompositions are computed once per problem and reused for every ``lam``;
the scheme is exact for piecewise-constant potentials.  Derivatives with
respect to ``lam`` are propagated alongside (exact derivative of the discrete
map), which gives Newton steps and the confluent kernel ``D(x, lam, lam)``.
"""

from __future__ import annotations

import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .config import DEFAULT, Tolerances
from .errors import GridMismatch, InvalidProblem, NearSingular, NonFiniteState

__all__ = [
    "BoundaryProblem",
    "MatrixSolutionSample",
    "BoundaryValues",
    "SpectralScalars",
    "spectral_scalars",
    "sqrt_branch",
    "integrate_solutions",
    "boundary_values",
    "boundary_form_U",
    "boundary_form_V",
    "char_det",
    "weyl_matrix",
    "d_kernel",
    "lagrange_bracket",
    "hermite_cumulative",
    "integral_kernel",
    "integration_error_estimate",
]

_SQRT3 = math.sqrt(3.0)
_GAUSS = (0.5 - _SQRT3 / 6.0, 0.5 + _SQRT3 / 6.0)
# weights of the two commutator-free exponentials (first applied, second applied)
_CF_WEIGHTS = (
    (0.25 + _SQRT3 / 6.0, 0.25 - _SQRT3 / 6.0),
    (0.25 - _SQRT3 / 6.0, 0.25 + _SQRT3 / 6.0),
)
# empirical error model of the scheme: err ~ C h^4 (A + |lam|) * qscale
_ERR_C = 1.5e-4
_ERR_A = 20.0


def sqrt_branch(lam):
    """Square root with ``Re rho >= 0``; on the cut ``Re rho == 0`` pick ``Im rho >= 0``."""
    rho = np.sqrt(np.asarray(lam, dtype=complex))
    flip = (rho.real == 0) & (rho.imag < 0)
    rho = np.where(flip, -rho, rho)
    return rho[()] if rho.ndim == 0 else rho


@dataclass(frozen=True)
class SpectralScalars:
    lam: complex
    rho: complex
    tau: float


def spectral_scalars(lam) -> SpectralScalars:
    rho = complex(sqrt_branch(complex(lam)))
    return SpectralScalars(complex(lam), rho, rho.imag)


@dataclass(frozen=True, eq=False)
class BoundaryProblem:
    """The boundary value problem ``L(Q, h, H)`` on a grid over [0, pi].

    Parameters
    ----------
    grid : (G,) array
        Strictly increasing nodes from 0 to pi, at least 65 of them.
    Q : (G, m, m) array
        Potential samples; linear interpolation between nodes.
    h, H : (m, m) arrays
        Boundary matrices.
    selfadjoint_hint : bool
        Assert that Q, h, H are Hermitian (checked on construction).
    """

    grid: np.ndarray
    Q: np.ndarray
    h: np.ndarray
    H: np.ndarray
    selfadjoint_hint: bool = False

    def __post_init__(self):
        grid = np.ascontiguousarray(self.grid, dtype=float)
        Q = np.array(self.Q, dtype=complex)
        if Q.ndim == 1:
            Q = Q[:, None, None]
        if Q.ndim != 3 or Q.shape[1] != Q.shape[2]:
            raise InvalidProblem(f"Q must have shape (G, m, m), got {Q.shape}")
        m = Q.shape[1]
        h = np.array(self.h, dtype=complex).reshape(m, m)
        H = np.array(self.H, dtype=complex).reshape(m, m)
        if grid.ndim != 1 or grid.size < 65:
            raise InvalidProblem("grid must be one-dimensional with at least 65 nodes")
        if abs(grid[0]) > 1e-12 or abs(grid[-1] - np.pi) > 1e-12:
            raise InvalidProblem("grid must start at 0 and end at pi")
        if np.any(np.diff(grid) <= 0):
            raise InvalidProblem("grid must be strictly increasing")
        if Q.shape[0] != grid.size:
            raise InvalidProblem(f"Q has {Q.shape[0]} nodes but grid has {grid.size}")
        bad = ~np.isfinite(Q).all(axis=(1, 2))
        if bad.any():
            raise InvalidProblem(f"Q is not finite at node {int(np.argmax(bad))}")
        if not (np.isfinite(h).all() and np.isfinite(H).all()):
            raise InvalidProblem("h and H must be finite")
        if self.selfadjoint_hint:
            herm = max(
                np.abs(Q - Q.conj().transpose(0, 2, 1)).max(),
                np.abs(h - h.conj().T).max(),
                np.abs(H - H.conj().T).max(),
            )
            if herm > 1e-10:
                raise InvalidProblem(f"selfadjoint_hint set but data are not Hermitian ({herm:.2e})")
        grid = grid.copy()
        grid[0], grid[-1] = 0.0, np.pi
        for arr in (grid, Q, h, H):
            arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "H", H)

    @property
    def m(self) -> int:
        return self.Q.shape[1]

    @property
    def n_nodes(self) -> int:
        return self.grid.size

    @classmethod
    def from_function(cls, Qfun, m=None, h=None, H=None, n_nodes=257, grid=None, selfadjoint_hint=False):
        """Sample ``Qfun(x) -> (m, m)`` (or scalar) on a uniform grid."""
        if grid is None:
            grid = np.linspace(0.0, np.pi, n_nodes)
        Q = np.array([np.atleast_2d(np.asarray(Qfun(x), dtype=complex)) for x in grid])
        m = Q.shape[1] if m is None else m
        h = np.zeros((m, m)) if h is None else h
        H = np.zeros((m, m)) if H is None else H
        return cls(grid, Q, h, H, selfadjoint_hint)

    def dual(self) -> "BoundaryProblem":
        """Problem with transposed coefficients; its column solutions transpose to the row solutions of L*."""
        return BoundaryProblem(self.grid, self.Q.transpose(0, 2, 1), self.h.T, self.H.T, self.selfadjoint_hint)

    def conjugated(self, U) -> "BoundaryProblem":
        """Apply the similarity ``X -> U^{-1} X U`` to Q, h and H."""
        U = np.asarray(U, dtype=complex)
        Ui = np.linalg.inv(U)
        return BoundaryProblem(self.grid, Ui @ self.Q @ U, Ui @ self.h @ U, Ui @ self.H @ U, self.selfadjoint_hint)

    def with_data(self, Q=None, h=None, H=None) -> "BoundaryProblem":
        return BoundaryProblem(
            self.grid,
            self.Q if Q is None else Q,
            self.h if h is None else h,
            self.H if H is None else H,
            False,
        )

    def Q_at(self, x):
        """Potential at arbitrary points (linear interpolation), shape ``x.shape + (m, m)``."""
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        idx = np.clip(np.searchsorted(self.grid, flat, side="right") - 1, 0, self.n_nodes - 2)
        x0, x1 = self.grid[idx], self.grid[idx + 1]
        t = ((flat - x0) / (x1 - x0))[:, None, None]
        out = (1 - t) * self.Q[idx] + t * self.Q[idx + 1]
        return out.reshape(x.shape + (self.m, self.m))

    def integral_Q(self) -> np.ndarray:
        return np.trapezoid(self.Q, self.grid, axis=0)

    def is_hermitian(self, tol=1e-10) -> bool:
        return (
            np.abs(self.Q - self.Q.conj().transpose(0, 2, 1)).max() <= tol
            and np.abs(self.h - self.h.conj().T).max() <= tol
            and np.abs(self.H - self.H.conj().T).max() <= tol
        )


# --------------------------------------------------------------------------- stepping


@dataclass
class _StepTable:
    tau: np.ndarray  # (S,) half-exponential lengths (h/2 per factor)
    d: np.ndarray  # (S, m) eigenvalues of the frozen matrices
    P: np.ndarray | None  # (S, m, m) or None when all frozen matrices are diagonal
    Pinv: np.ndarray | None
    B: np.ndarray  # (S, m, m) frozen matrices, for the expm fallback
    fallback: np.ndarray  # (S,) bool
    node_of: np.ndarray  # (S,) grid node reached after this factor, or -1


def _qscale(problem: BoundaryProblem) -> float:
    dQ = np.abs(np.diff(problem.Q, axis=0)).sum(axis=2).max(axis=1)
    slope = float((dQ / np.diff(problem.grid)).max()) if problem.n_nodes > 1 else 0.0
    if slope == 0.0:
        return 0.0
    qmax = float(np.abs(problem.Q).sum(axis=2).max())
    return max(1.0, slope, 0.25 * qmax)


def _substeps(problem: BoundaryProblem, lam_abs_max, tol: float):
    """Substeps per grid cell so that the modelled error stays below ``tol`` (vectorised)."""
    lam_abs_max = np.asarray(lam_abs_max, dtype=float)
    qs = _qscale(problem)
    if qs == 0.0:
        out = np.ones(lam_abs_max.shape, dtype=int)
    else:
        hmax = float(np.diff(problem.grid).max())
        h_target = (tol / (_ERR_C * (_ERR_A + lam_abs_max) * qs)) ** 0.25
        out = np.maximum(1, np.ceil(hmax / h_target)).astype(int)
    return int(out) if out.ndim == 0 else out


@functools.lru_cache(maxsize=64)
def _step_table(problem: BoundaryProblem, sub: int) -> _StepTable:
    grid, m = problem.grid, problem.m
    x0 = grid[:-1]
    dx = np.diff(grid)
    j = np.arange(sub)
    starts = (x0[:, None] + dx[:, None] * j[None, :] / sub).ravel()
    steps = np.repeat(dx / sub, sub)
    Q1 = problem.Q_at(starts + _GAUSS[0] * steps)
    Q2 = problem.Q_at(starts + _GAUSS[1] * steps)
    B = np.empty((starts.size, 2, m, m), dtype=complex)
    for k, (w1, w2) in enumerate(_CF_WEIGHTS):
        B[:, k] = 2.0 * (w1 * Q1 + w2 * Q2)
    B = B.reshape(-1, m, m)
    tau = np.repeat(steps / 2.0, 2)
    node_of = np.full(B.shape[0], -1)
    node_of[2 * sub - 1 :: 2 * sub] = np.arange(1, grid.size)
    offdiag = np.abs(B - np.einsum("sii->si", B)[:, :, None] * np.eye(m)).max()
    if offdiag == 0.0:
        d = np.einsum("sii->si", B).copy()
        return _StepTable(tau, d, None, None, B, np.zeros(B.shape[0], bool), node_of)
    d, P = np.linalg.eig(B)
    cond = np.linalg.cond(P)
    fallback = ~np.isfinite(cond) | (cond > 1e6)
    P[fallback] = np.eye(m)
    Pinv = np.linalg.inv(P)
    return _StepTable(tau, d, P, Pinv, B, fallback, node_of)


def _frozen_functions(z, t, with_dlam):
    """cosh(w t), sinh(w t)/w, w sinh(w t) with w^2 = z, and their lam-derivatives (lam = -z)."""
    zt2 = z * (t * t)
    small = np.abs(zt2) < 1e-2
    w = np.sqrt(z)
    e = np.exp(w * t)
    ei = 1.0 / e
    ch = 0.5 * (e + ei)
    if small.any():
        w_safe = np.where(small, 1.0, w)
        sw = np.where(small, t * (1 + zt2 / 6 * (1 + zt2 / 20 * (1 + zt2 / 42))), 0.5 * (e - ei) / w_safe)
    else:
        sw = 0.5 * (e - ei) / w
    ws = z * sw
    if not with_dlam:
        return ch, sw, ws, None, None, None
    if small.any():
        z_safe = np.where(small, 1.0, z)
        t3 = t**3
        dsw_series = t3 / 6 + t3 * zt2 / 60 + t3 * zt2**2 / 1680 + t3 * zt2**3 / 90720
        dsw_dz = np.where(small, dsw_series, (t * ch - sw) / (2 * z_safe))
    else:
        dsw_dz = (t * ch - sw) / (2 * z)
    dch_dz = 0.5 * t * sw
    dws_dz = 0.5 * (sw + t * ch)
    return ch, sw, ws, -dch_dz, -dsw_dz, -dws_dz


def _propagate(problem: BoundaryProblem, lams, y0, yp0, sub, store_nodes, with_dlam):
    # overflow is reported as NonFiniteState by _check_finite, not as a RuntimeWarning
    with np.errstate(over="ignore", invalid="ignore"):
        return _propagate_raw(problem, lams, y0, yp0, sub, store_nodes, with_dlam)


def _propagate_raw(problem: BoundaryProblem, lams, y0, yp0, sub, store_nodes, with_dlam):
    """Propagate column blocks ``(y, y')`` for every lam in ``lams``.

    Returns arrays of shape (L, [G,] m, k) for y, y', dy/dlam, dy'/dlam.
    """
    lams = np.asarray(lams, dtype=complex).ravel()
    table = _step_table(problem, sub)
    L = lams.size
    m, k = y0.shape
    # internal layout (m, L, k): the similarity transforms become single GEMMs
    y = np.ascontiguousarray(np.broadcast_to(np.asarray(y0, complex)[:, None, :], (m, L, k)))
    yp = np.ascontiguousarray(np.broadcast_to(np.asarray(yp0, complex)[:, None, :], (m, L, k)))
    dy = np.zeros_like(y) if with_dlam else None
    dyp = np.zeros_like(y) if with_dlam else None
    if store_nodes:
        G = problem.n_nodes
        Y = np.empty((G, m, L, k), complex)
        Yp = np.empty((G, m, L, k), complex)
        Y[0], Yp[0] = y, yp
        if with_dlam:
            dY = np.zeros((G, m, L, k), complex)
            dYp = np.zeros((G, m, L, k), complex)

    def mul(A, x):
        return (A @ x.reshape(m, -1)).reshape(m, L, k)

    for s in range(table.tau.size):
        t = table.tau[s]
        if table.fallback[s]:
            y, yp, dy, dyp = _fallback_step(table.B[s], t, lams, y, yp, dy, dyp)
        else:
            z = table.d[s][:, None] - lams[None, :]
            ch, sw, ws, dch, dsw, dws = _frozen_functions(z, t, with_dlam)
            dense = table.P is not None
            if dense:
                Pi = table.Pinv[s]
                u, v = mul(Pi, y), mul(Pi, yp)
            else:
                u, v = y, yp
            ch_, sw_, ws_ = ch[:, :, None], sw[:, :, None], ws[:, :, None]
            nu = ch_ * u + sw_ * v
            nv = ws_ * u + ch_ * v
            if with_dlam:
                du, dv = (mul(Pi, dy), mul(Pi, dyp)) if dense else (dy, dyp)
                dch_, dsw_, dws_ = dch[:, :, None], dsw[:, :, None], dws[:, :, None]
                ndu = ch_ * du + sw_ * dv + dch_ * u + dsw_ * v
                ndv = ws_ * du + ch_ * dv + dws_ * u + dch_ * v
            if dense:
                P = table.P[s]
                y, yp = mul(P, nu), mul(P, nv)
                if with_dlam:
                    dy, dyp = mul(P, ndu), mul(P, ndv)
            else:
                y, yp = nu, nv
                if with_dlam:
                    dy, dyp = ndu, ndv
        node = table.node_of[s]
        if node >= 0 and store_nodes:
            Y[node], Yp[node] = y, yp
            if with_dlam:
                dY[node], dYp[node] = dy, dyp
    if store_nodes:
        out = (Y, Yp, dY, dYp) if with_dlam else (Y, Yp, None, None)
        out = tuple(None if a is None else a.transpose(2, 0, 1, 3) for a in out)
    else:
        out = tuple(None if a is None else a.transpose(1, 0, 2) for a in (y, yp, dy, dyp))
    _check_finite(problem, lams, out[0], out[1], store_nodes)
    return out


def _fallback_step(B, t, lams, y, yp, dy, dyp):
    m = B.shape[0]
    L = lams.size
    A = np.zeros((L, 2 * m, 2 * m), complex)
    A[:, :m, m:] = np.eye(m)
    A[:, m:, :m] = B[None] - lams[:, None, None] * np.eye(m)
    A *= t
    back = lambda a: np.ascontiguousarray(a.transpose(1, 0, 2))
    y, yp = y.transpose(1, 0, 2), yp.transpose(1, 0, 2)
    state = np.concatenate([y, yp], axis=1)
    if dy is None:
        E = expm(A)
        new = E @ state
        return back(new[:, :m]), back(new[:, m:]), None, None
    # exp([[A, N], [0, A]]) carries the Frechet derivative in its upper-right block
    N = np.zeros_like(A)
    N[:, m:, :m] = -t * np.eye(m)
    big = np.zeros((L, 4 * m, 4 * m), complex)
    big[:, : 2 * m, : 2 * m] = A
    big[:, 2 * m :, 2 * m :] = A
    big[:, : 2 * m, 2 * m :] = N
    Eb = expm(big)
    E, F = Eb[:, : 2 * m, : 2 * m], Eb[:, : 2 * m, 2 * m :]
    dstate = np.concatenate([dy.transpose(1, 0, 2), dyp.transpose(1, 0, 2)], axis=1)
    new = E @ state
    dnew = E @ dstate + F @ state
    return back(new[:, :m]), back(new[:, m:]), back(dnew[:, :m]), back(dnew[:, m:])


def _check_finite(problem, lams, Y, Yp, store_nodes):
    ok = np.isfinite(Y).all(axis=(-2, -1)) & np.isfinite(Yp).all(axis=(-2, -1))
    if ok.all():
        return
    bad = np.argwhere(~ok)[0]
    lam = lams[bad[0]]
    node = int(bad[1]) if store_nodes else problem.n_nodes - 1
    raise NonFiniteState(f"solution overflowed at grid node {node} for lambda={lam}", node=node, lam=lam)


def _initial_blocks(problem: BoundaryProblem):
    """Column block [phi, S] at x = 0 and its derivative."""
    m = problem.m
    I = np.eye(m, dtype=complex)
    Z = np.zeros((m, m), dtype=complex)
    return np.hstack([I, Z]), np.hstack([problem.h, I])


# --------------------------------------------------------------------------- public


@dataclass(frozen=True)
class MatrixSolutionSample:
    """Grid values of phi, S, the dual phi* and d(phi)/d(lam) for one lam."""

    lam: complex
    grid: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    S: np.ndarray
    dS: np.ndarray
    phistar: np.ndarray
    dphistar: np.ndarray
    phi_lam: np.ndarray = field(default=None, repr=False)
    dphi_lam: np.ndarray = field(default=None, repr=False)


def integrate_solutions(problem: BoundaryProblem, lam, tol: float | None = None, substeps: int | None = None):
    """Fundamental solutions on the grid for a single spectral parameter."""
    lam = complex(lam)
    if not np.isfinite(lam):
        raise ValueError("lambda must be finite")
    tol = DEFAULT.ode_tol if tol is None else tol
    sub = substeps or _substeps(problem, abs(lam), tol)
    y0, yp0 = _initial_blocks(problem)
    Y, Yp, dY, dYp = _propagate(problem, [lam], y0, yp0, sub, True, True)
    m = problem.m
    dual = problem.dual()
    W, Wp, _, _ = _propagate(dual, [lam], np.eye(m), dual.h, sub, True, False)
    return MatrixSolutionSample(
        lam=lam,
        grid=problem.grid,
        phi=Y[0, :, :, :m],
        dphi=Yp[0, :, :, :m],
        S=Y[0, :, :, m:],
        dS=Yp[0, :, :, m:],
        phistar=W[0].transpose(0, 2, 1),
        dphistar=Wp[0].transpose(0, 2, 1),
        phi_lam=dY[0, :, :, :m],
        dphi_lam=dYp[0, :, :, :m],
    )


def integration_error_estimate(problem: BoundaryProblem, lam, tol: float | None = None, substeps: int | None = None):
    """Relative error of ``[phi, S]`` at ``x = pi`` estimated by halving the step.

    The scheme is fourth order, so the difference between the two runs
    over-estimates the error of the finer one by a factor of about 15.
    """
    tol = DEFAULT.ode_tol if tol is None else tol
    lam = complex(lam)
    sub = substeps or _substeps(problem, abs(lam), tol)
    y0, yp0 = _initial_blocks(problem)
    y1, _, _, _ = _propagate(problem, [lam], y0, yp0, sub, False, False)
    y2, _, _, _ = _propagate(problem, [lam], y0, yp0, 2 * sub, False, False)
    return float(np.abs(y1 - y2).max() / max(1.0, np.abs(y2).max()))


@dataclass(frozen=True)
class BoundaryValues:
    """Values of phi, phi', S, S' at x = pi for a batch of lam (arrays of shape (L, m, m))."""

    lams: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    S: np.ndarray
    dS: np.ndarray
    phi_lam: np.ndarray | None = None
    dphi_lam: np.ndarray | None = None

    def V(self, H, which="phi"):
        if which == "phi":
            return self.dphi + H @ self.phi
        if which == "S":
            return self.dS + H @ self.S
        if which == "phi_lam":
            return self.dphi_lam + H @ self.phi_lam
        raise ValueError(which)


def _chunks(n, size):
    return [slice(i, min(n, i + size)) for i in range(0, n, size)]


def boundary_values(
    problem: BoundaryProblem,
    lams,
    tol: float | None = None,
    with_dlam: bool = False,
    workers: int = 1,
    chunk: int = 4096,
) -> BoundaryValues:
    """Endpoint values of phi and S for many lam at once.

    The batch is split by magnitude so that each part gets its own substep
    count, and the parts can be spread over a thread pool; results are merged
    back in input order.
    """
    tol = DEFAULT.ode_tol if tol is None else tol
    lams = np.asarray(lams, dtype=complex).ravel()
    m = problem.m
    L = lams.size
    out = {k: np.empty((L, m, m), complex) for k in ("phi", "dphi", "S", "dS")}
    if with_dlam:
        out["phi_lam"] = np.empty((L, m, m), complex)
        out["dphi_lam"] = np.empty((L, m, m), complex)
    if L == 0:
        return BoundaryValues(lams, **out)
    subs = _substeps(problem, np.abs(lams), tol)
    jobs = []
    for sub in np.unique(subs):
        idx = np.flatnonzero(subs == sub)
        for sl in _chunks(idx.size, chunk):
            jobs.append((int(sub), idx[sl]))
    y0, yp0 = _initial_blocks(problem)

    def run(job):
        sub, idx = job
        return idx, _propagate(problem, lams[idx], y0, yp0, sub, False, with_dlam)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]
    for idx, (y, yp, dy, dyp) in results:
        out["phi"][idx], out["S"][idx] = y[:, :, :m], y[:, :, m:]
        out["dphi"][idx], out["dS"][idx] = yp[:, :, :m], yp[:, :, m:]
        if with_dlam:
            out["phi_lam"][idx] = dy[:, :, :m]
            out["dphi_lam"][idx] = dyp[:, :, :m]
    return BoundaryValues(lams, **out)


def boundary_form_U(problem: BoundaryProblem, sample: MatrixSolutionSample, which: str = "phi"):
    """``Y'(0) - h Y(0)`` for ``which`` in {"phi", "S"}."""
    Y, dY = (sample.phi, sample.dphi) if which == "phi" else (sample.S, sample.dS)
    return dY[0] - problem.h @ Y[0]


def boundary_form_V(problem: BoundaryProblem, sample: MatrixSolutionSample, which: str = "phi"):
    """``Y'(pi) + H Y(pi)`` for ``which`` in {"phi", "S"}."""
    Y, dY = (sample.phi, sample.dphi) if which == "phi" else (sample.S, sample.dS)
    return dY[-1] + problem.H @ Y[-1]


def char_det(problem: BoundaryProblem, lam, tol: float | None = None, workers: int = 1):
    """Characteristic function ``det V(phi(., lam))``; vectorised over ``lam``."""
    lam_arr = np.asarray(lam, dtype=complex)
    bv = boundary_values(problem, lam_arr.ravel(), tol=tol, workers=workers)
    det = np.linalg.det(bv.V(problem.H, "phi")).reshape(lam_arr.shape)
    return det[()] if det.ndim == 0 else det


def weyl_matrix(
    problem: BoundaryProblem,
    lam,
    tol: float | None = None,
    tolerances: Tolerances = DEFAULT,
    return_cond: bool = False,
):
    """Weyl matrix ``M(lam) = -V(phi)^{-1} V(S)``.

    Raises :class:`NearSingular` when ``V(phi)`` is numerically singular,
    i.e. ``max(||V(phi)||, (1 + |rho|) ||V(S)||) / sigma_min(V(phi))`` exceeds
    ``tolerances.near_singular_cond`` (``lam`` too close to an eigenvalue).
    """
    bv = boundary_values(problem, [lam], tol=tol)
    Vphi = bv.V(problem.H, "phi")[0]
    VS = bv.V(problem.H, "S")[0]
    # measure V(phi) against the size of the pair (V(phi), V(S)) so that the
    # test is also meaningful for m = 1, where cond(V(phi)) is always 1
    rho = abs(sqrt_branch(complex(lam)))
    scale = max(np.linalg.norm(Vphi, 2), (1 + rho) * np.linalg.norm(VS, 2))
    with np.errstate(divide="ignore"):
        sv_min = np.linalg.svd(Vphi, compute_uv=False)[-1]
        cond = float(scale / sv_min) if sv_min > 0 else np.inf
    if not np.isfinite(cond) or cond > tolerances.near_singular_cond:
        raise NearSingular(f"V(phi) is near singular at lambda={lam} (cond={cond:.3e})", cond=cond)
    M = -np.linalg.solve(Vphi, VS)
    return (M, cond) if return_cond else M


def lagrange_bracket(Z, dZ, Y, dY):
    """``<Z, Y> = Z' Y - Z Y'`` (matrix products, broadcast over leading axes)."""
    return dZ @ Y - Z @ dY


def hermite_cumulative(grid, f, df):
    """Cumulative integral of ``f`` from grid[0] using cubic Hermite cells (needs ``f'``)."""
    dx = np.diff(grid).reshape((-1,) + (1,) * (f.ndim - 1))
    cell = dx / 2 * (f[:-1] + f[1:]) + dx**2 / 12 * (df[:-1] - df[1:])
    out = np.zeros_like(f)
    out[1:] = np.cumsum(cell, axis=0)
    return out


def d_kernel(
    sample_mu: MatrixSolutionSample,
    sample_lam: MatrixSolutionSample,
    x_index: int,
    tolerances: Tolerances = DEFAULT,
):
    """``D(x, lam, mu) = <phi*(x, mu), phi(x, lam)> / (lam - mu) = int_0^x phi*(t, mu) phi(t, lam) dt``.

    For ``|lam - mu|`` below ``tolerances.d_kernel_switch`` the integral form is
    used; its value is the lam-derivative of the bracket at ``mu``, taken from the
    propagated derivative ``phi_lam``, plus the first-order correction in
    ``lam - mu`` obtained by cubic Hermite quadrature.
    """
    if sample_mu.grid.shape != sample_lam.grid.shape or np.any(sample_mu.grid != sample_lam.grid):
        raise GridMismatch("samples were integrated on different grids")
    i = x_index
    lam, mu = sample_lam.lam, sample_mu.lam
    if abs(lam - mu) >= tolerances.d_kernel_switch:
        br = lagrange_bracket(sample_mu.phistar[i], sample_mu.dphistar[i], sample_lam.phi[i], sample_lam.dphi[i])
        return br / (lam - mu)
    if sample_mu.phi_lam is not None:
        return lagrange_bracket(
            sample_mu.phistar[i], sample_mu.dphistar[i], sample_mu.phi_lam[i], sample_mu.dphi_lam[i]
        )
    return integral_kernel(sample_mu, sample_lam)[i]


def integral_kernel(sample_mu: MatrixSolutionSample, sample_lam: MatrixSolutionSample):
    """``int_0^x phi*(t, mu) phi(t, lam) dt`` at every grid node by Hermite quadrature."""
    Z, dZ = sample_mu.phistar, sample_mu.dphistar
    Y, dY = sample_lam.phi, sample_lam.dphi
    f = Z @ Y
    df = dZ @ Y + Z @ dY
    return hermite_cumulative(sample_lam.grid, f, df)
