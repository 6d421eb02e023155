"""Quadrature on circles: argument-principle counts, residues and Beyn's method."""

from __future__ import annotations

import numpy as np

__all__ = ["Circle", "winding_number", "contour_moments", "beyn_eigenvalues"]


class Circle:
    """Circle ``center + radius * exp(i theta)`` with ``n`` equispaced nodes."""

    def __init__(self, center, radius, n):
        self.center = complex(center)
        self.radius = float(radius)
        self.n = int(n)
        theta = 2 * np.pi * np.arange(self.n) / self.n
        self.unit = np.exp(1j * theta)
        self.nodes = self.center + self.radius * self.unit

    def refined(self) -> "Circle":
        """Circle with twice as many nodes; the even nodes coincide with ``self.nodes``."""
        return Circle(self.center, self.radius, 2 * self.n)

    def contains(self, z) -> np.ndarray:
        return np.abs(np.asarray(z) - self.center) < self.radius

    def integral(self, values, power=0):
        """``(1/2 pi i) * oint f(lam) zeta^power dlam`` with ``zeta = (lam - center) / radius``.

        ``values`` has the node axis first; the trapezoid rule is spectrally
        accurate here because the integrand is periodic in the angle.
        """
        w = self.radius * self.unit ** (power + 1) / self.n
        return np.tensordot(w, values, axes=(0, 0))


def winding_number(values):
    """Winding number of a closed sampled curve about 0.

    Returns ``(count, max_step)`` where ``max_step`` is the largest phase
    increment between consecutive samples; a count is trustworthy only when
    ``max_step`` is well below pi.
    """
    values = np.asarray(values)
    steps = np.angle(np.roll(values, -1) / values)
    count = int(np.rint(steps.sum() / (2 * np.pi)))
    return count, float(np.abs(steps).max())


def contour_moments(circle: Circle, Tinv, n_moments):
    """Scaled moments ``A_p = (1/2 pi i) oint zeta^p T(lam)^{-1} dlam``, p = 0..n_moments-1."""
    return [circle.integral(Tinv, p) for p in range(n_moments)]


def beyn_eigenvalues(circle: Circle, Tinv, count, block_size=None):
    """Eigenvalues of a matrix function inside ``circle`` from samples of its inverse.

    Uses block Hankel matrices of the scaled moments with the identity as
    probing matrix, truncated to ``count`` singular triplets.

    Parameters
    ----------
    circle : Circle
    Tinv : (n, m, m) array
        ``T(lam)^{-1}`` at ``circle.nodes``.
    count : int
        Number of eigenvalues (with multiplicity) inside, e.g. from the
        winding number of ``det T``.
    block_size : int, optional
        Number of Hankel block rows; by default the smallest ``K`` with
        ``K * m > count``.

    Returns
    -------
    eigs : (count,) complex array, sorted by real part.
    sv : singular values of the Hankel matrix (for diagnostics).
    """
    if count == 0:
        return np.empty(0, complex), np.empty(0)
    m = Tinv.shape[-1]
    K = block_size or (count // m + 1)
    A = contour_moments(circle, Tinv, 2 * K)
    H0 = np.block([[A[i + j] for j in range(K)] for i in range(K)])
    H1 = np.block([[A[i + j + 1] for j in range(K)] for i in range(K)])
    U, sv, Vh = np.linalg.svd(H0)
    Uk, Vk, sk = U[:, :count], Vh[:count].conj().T, sv[:count]
    B = (Uk.conj().T @ H1 @ Vk) / sk[None, :]
    zeta = np.linalg.eigvals(B)
    eigs = circle.center + circle.radius * zeta
    return eigs[np.argsort(eigs.real, kind="stable")], sv
