"""Closed forms for the model problem ``Q = (2/pi) omega``, ``h = H = 0``.

With a constant diagonal potential the channels decouple: channel ``q`` is
the scalar problem with potential ``s_q = 2 omega_q / pi``, so
``phi = diag(cos(nu_q x))`` with ``nu_q = sqrt(lam - s_q)`` and the spectrum is
``n^2 + s_q``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import SpectralData, assign_clusters
from .ode import BoundaryProblem, sqrt_branch

__all__ = [
    "ModelProblem",
    "model_phi",
    "model_phistar",
    "model_dphi",
    "model_d_kernel",
    "model_spectral_data",
    "cos_entries",
    "dcos_entries",
    "kernel_entries",
]


@dataclass(frozen=True, eq=False)
class ModelProblem:
    """Model problem of class ``A(omega)`` with ``Q = (2/pi) omega`` and zero boundary matrices."""

    omega: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=complex)
        if om.ndim == 1:
            om = np.diag(om)
        if om.ndim != 2 or om.shape[0] != om.shape[1]:
            raise ValueError(f"omega must be square, got shape {om.shape}")
        if np.abs(om - np.diag(np.diag(om))).max(initial=0.0) > 0:
            raise ValueError("the model problem needs a diagonal omega")
        om.setflags(write=False)
        object.__setattr__(self, "omega", om)

    @classmethod
    def from_data(cls, data: SpectralData) -> "ModelProblem":
        return cls(np.diag(np.diag(data.omega)))

    @property
    def m(self) -> int:
        return self.omega.shape[0]

    @property
    def shift(self) -> np.ndarray:
        """Per-channel constant potential ``2 omega_q / pi``."""
        return 2 * np.diag(self.omega) / np.pi

    def nu(self, lam) -> np.ndarray:
        """``sqrt(lam - s_q)`` with shape ``lam.shape + (m,)``."""
        lam = np.asarray(lam, dtype=complex)
        return sqrt_branch(lam[..., None] - self.shift)

    def boundary_problem(self, grid=None, n_nodes=257) -> BoundaryProblem:
        grid = np.linspace(0, np.pi, n_nodes) if grid is None else np.asarray(grid)
        Q = np.broadcast_to(2 * self.omega / np.pi, (grid.size, self.m, self.m))
        Z = np.zeros((self.m, self.m))
        return BoundaryProblem(grid, Q, Z, Z)


def _sin_over(c, x):
    """``sin(c x) / c`` with the limit ``x`` at ``c = 0``."""
    c = np.asarray(c, dtype=complex)
    cx = c * x
    small = np.abs(cx) < 1e-3
    c_safe = np.where(small, 1.0, c)
    series = x * (1 - cx**2 / 6 * (1 - cx**2 / 20 * (1 - cx**2 / 42)))
    return np.where(small, series, np.sin(cx) / c_safe)


def cos_entries(model: ModelProblem, lam, x) -> np.ndarray:
    """Diagonal entries ``cos(nu_q(lam) x)``, shape ``lam.shape + x.shape + (m,)``."""
    nu = model.nu(lam)
    lam_shape = np.shape(lam)
    x = np.asarray(x, dtype=float)
    nu = nu.reshape(lam_shape + (1,) * x.ndim + (model.m,))
    return np.cos(nu * x[..., None])


def dcos_entries(model: ModelProblem, lam, x) -> np.ndarray:
    """Diagonal entries ``-nu_q sin(nu_q x)``."""
    nu = model.nu(lam)
    lam_shape = np.shape(lam)
    x = np.asarray(x, dtype=float)
    nu = nu.reshape(lam_shape + (1,) * x.ndim + (model.m,))
    return -nu * np.sin(nu * x[..., None])


def _diag(entries):
    m = entries.shape[-1]
    out = np.zeros(entries.shape + (m,), dtype=complex)
    idx = np.arange(m)
    out[..., idx, idx] = entries
    return out


def model_phi(model: ModelProblem, lam, x) -> np.ndarray:
    """``phi(x, lam) = diag(cos(nu_q x))`` as matrices of shape ``lam.shape + x.shape + (m, m)``."""
    return _diag(cos_entries(model, lam, x))


def model_phistar(model: ModelProblem, lam, x) -> np.ndarray:
    """Row solution of the dual problem; equal to ``phi`` for a diagonal potential."""
    return model_phi(model, lam, x)


def model_dphi(model: ModelProblem, lam, x) -> np.ndarray:
    return _diag(dcos_entries(model, lam, x))


def kernel_entries(model: ModelProblem, lam, mu, x) -> np.ndarray:
    """``int_0^x cos(nu_q(mu) t) cos(nu_q(lam) t) dt`` for every channel.

    ``lam`` and ``mu`` broadcast against each other; ``x`` is a scalar.  The
    product-to-sum form is used, with the difference of square roots taken as
    ``(lam - mu) / (a + b)`` to avoid cancellation for nearby arguments.
    """
    lam = np.asarray(lam, dtype=complex)
    mu = np.asarray(mu, dtype=complex)
    a = model.nu(lam)
    b = model.nu(mu)
    s = a + b
    d_direct = a - b
    use_quot = np.abs(s) > np.abs(d_direct)
    s_safe = np.where(use_quot, s, 1.0)
    d = np.where(use_quot, (lam - mu)[..., None] / s_safe, d_direct)
    return 0.5 * (_sin_over(d, x) + _sin_over(s, x))


def model_d_kernel(model: ModelProblem, lam, mu, x) -> np.ndarray:
    """``D(x, lam, mu) = <phi*(x, mu), phi(x, lam)> / (lam - mu)`` of the model problem (diagonal matrix)."""
    return _diag(kernel_entries(model, lam, mu, float(x)))


def model_spectral_data(model: ModelProblem, n_max: int, cluster_rel: float = 1e-12) -> SpectralData:
    """Eigenvalues ``n^2 + s_q`` and per-channel residues, merged over coincident values.

    Channel ``q`` contributes ``(1/pi) e_q e_q^T`` at ``n = 0`` and
    ``(2/pi) e_q e_q^T`` for ``n >= 1``; when several ``(n, q)`` share an
    eigenvalue, their weights are summed into one cluster weight.
    """
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    m = model.m
    n = np.arange(n_max + 1)
    lam = n[:, None] ** 2 + model.shift[None, :]
    per = np.zeros((n_max + 1, m, m, m), dtype=complex)
    for q in range(m):
        per[:, q, q, q] = np.where(n == 0, 1 / np.pi, 2 / np.pi)
    cid, mult = assign_clusters(lam, cluster_rel)
    alpha = np.empty_like(per)
    for c in np.unique(cid):
        mask = cid == c
        alpha[mask] = per[mask].sum(axis=0)
    return SpectralData(lam, alpha, mult, cid, model.omega, {"model": True})
