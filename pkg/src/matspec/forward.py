"""Forward spectral problem: eigenvalues and weight matrices of ``L(Q, h, H)``.

Eigenvalues are the zeros of ``Delta(lam) = det V(phi)``; weight matrices are
the residues of the Weyl matrix ``M(lam)``.  Both are obtained with contour
integrals:

* a large circle holding the first few bands (where the asymptotic picture
  ``rho ~ n + omega_q / (pi n)`` is not yet reliable) and one circle per band
  beyond it give eigenvalue seeds by Beyn's method, with counts from the
  argument principle;
* a small circle around each cluster of coincident eigenvalues gives the
  multiplicity (winding of Delta), a refined eigenvalue and the residue.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .config import DEFAULT, Tolerances
from .contour import Circle, beyn_eigenvalues, winding_number
from .errors import (
    AssumptionOneViolated,
    ContourCollision,
    CountMismatch,
    DimensionMismatch,
    InvalidProblem,
    NoConvergence,
)
from .ode import BoundaryProblem, boundary_values, sqrt_branch

log = logging.getLogger(__name__)

__all__ = [
    "row_norm",
    "OmegaResult",
    "compute_omega",
    "diagonalize_omega",
    "group_partition",
    "SpectralDatum",
    "SpectralData",
    "Cluster",
    "LocatedSpectrum",
    "locate_eigenvalues",
    "weight_matrices",
    "forward_spectral_data",
    "group_sums",
    "assign_clusters",
]


def row_norm(A) -> np.ndarray:
    """Max row-sum norm ``max_j sum_k |a_jk|`` over the last two axes."""
    return np.abs(np.asarray(A)).sum(axis=-1).max(axis=-1)


# --------------------------------------------------------------------------- omega


class OmegaResult(NamedTuple):
    omega: np.ndarray
    is_diagonal: bool
    offdiag: float


def compute_omega(problem: BoundaryProblem, tolerances: Tolerances = DEFAULT) -> OmegaResult:
    """``omega = h + H + (1/2) int_0^pi Q`` (trapezoidal) and whether it is diagonal."""
    omega = problem.h + problem.H + 0.5 * problem.integral_Q()
    off = omega - np.diag(np.diag(omega))
    offdiag = float(np.abs(off).max()) if off.size else 0.0
    return OmegaResult(omega, offdiag <= tolerances.omega_diag_tol, offdiag)


def diagonalize_omega(problem: BoundaryProblem):
    """Conjugate the problem so that its ``omega`` becomes diagonal.

    Returns ``(U, problem')`` with ``problem' = U^{-1} (Q, h, H) U``.  For a
    Hermitian ``omega`` the matrix ``U`` is unitary.
    """
    omega = compute_omega(problem).omega
    if np.allclose(omega, omega.conj().T, atol=1e-12):
        _, U = np.linalg.eigh(omega)
    else:
        _, U = np.linalg.eig(omega)
        if np.linalg.cond(U) > 1e8:
            raise InvalidProblem("omega is not diagonalizable")
    return U, problem.conjugated(U)


def group_partition(omega, tolerances: Tolerances = DEFAULT):
    """Channels grouped by equal ``omega_q``, as lists of 0-based indices ordered by their smallest member."""
    w = np.diag(np.asarray(omega))
    tol = tolerances.omega_group_tol * (1 + float(row_norm(omega)))
    groups: list[list[int]] = []
    for q in range(w.size):
        for g in groups:
            if abs(w[q] - w[g[0]]) <= tol:
                g.append(q)
                break
        else:
            groups.append([q])
    return groups


# --------------------------------------------------------------------------- data


@dataclass(frozen=True)
class SpectralDatum:
    """One eigenvalue ``lam`` with its weight matrix; ``q`` is 1-based."""

    n: int
    q: int
    lam: complex
    rho: complex
    alpha: np.ndarray
    multiplicity: int
    cluster_id: int
    is_head: bool

    @property
    def alpha_primed(self) -> np.ndarray:
        return self.alpha if self.is_head else np.zeros_like(self.alpha)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Spectral data ``{lam_nq, alpha_nq}`` for ``n = 0..n_max`` and ``q = 0..m-1``.

    Parameters
    ----------
    lam : (N+1, m) complex array
    alpha : (N+1, m, m, m) complex array
        ``alpha[n, q]`` is the weight matrix of ``lam[n, q]``.
    multiplicity : (N+1, m) int array
    cluster_id : (N+1, m) int array
        Entries sharing an id are one eigenvalue counted ``multiplicity`` times;
        the first of them in ``(n, q)`` order is the cluster head.
    omega : (m, m) array
        Diagonal matrix ``omega``.
    """

    lam: np.ndarray
    alpha: np.ndarray
    multiplicity: np.ndarray
    cluster_id: np.ndarray
    omega: np.ndarray
    info: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        lam = np.array(self.lam, dtype=complex)
        if lam.ndim != 2:
            raise DimensionMismatch(f"lam must be (n_max+1, m), got shape {lam.shape}", path="lam")
        N1, m = lam.shape
        alpha = np.array(self.alpha, dtype=complex)
        if alpha.shape != (N1, m, m, m):
            raise DimensionMismatch(f"alpha must have shape {(N1, m, m, m)}, got {alpha.shape}", path="alpha")
        mult = np.array(self.multiplicity, dtype=int)
        cid = np.array(self.cluster_id, dtype=int)
        for name, arr in (("multiplicity", mult), ("cluster_id", cid)):
            if arr.shape != (N1, m):
                raise DimensionMismatch(f"{name} must have shape {(N1, m)}, got {arr.shape}", path=name)
        omega = np.array(self.omega, dtype=complex)
        if omega.ndim == 1:
            omega = np.diag(omega)
        if omega.shape != (m, m):
            raise DimensionMismatch(f"omega must be {m}x{m}, got {omega.shape}", path="omega")
        for arr in (lam, alpha, mult, cid, omega):
            arr.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "multiplicity", mult)
        object.__setattr__(self, "cluster_id", cid)
        object.__setattr__(self, "omega", omega)
        _, first = np.unique(cid.ravel(), return_index=True)
        head = np.zeros(N1 * m, bool)
        head[first] = True
        head = head.reshape(N1, m)
        head.setflags(write=False)
        object.__setattr__(self, "_head", head)

    @property
    def m(self) -> int:
        return self.lam.shape[1]

    @property
    def n_max(self) -> int:
        return self.lam.shape[0] - 1

    @property
    def rho(self) -> np.ndarray:
        return sqrt_branch(self.lam)

    @property
    def head(self) -> np.ndarray:
        """Boolean (N+1, m) mask of cluster heads."""
        return self._head

    @property
    def alpha_primed(self) -> np.ndarray:
        """Weights with non-head cluster members set to zero."""
        return np.where(self._head[:, :, None, None], self.alpha, 0)

    @property
    def omega_diag(self) -> np.ndarray:
        return np.diag(self.omega).copy()

    def groups(self, tolerances: Tolerances = DEFAULT):
        return group_partition(self.omega, tolerances)

    def datum(self, n: int, q: int) -> SpectralDatum:
        """Entry ``(n, q)`` with ``q`` 1-based."""
        k = q - 1
        lam = complex(self.lam[n, k])
        return SpectralDatum(
            n=n,
            q=q,
            lam=lam,
            rho=complex(sqrt_branch(lam)),
            alpha=self.alpha[n, k].copy(),
            multiplicity=int(self.multiplicity[n, k]),
            cluster_id=int(self.cluster_id[n, k]),
            is_head=bool(self._head[n, k]),
        )

    def entries(self):
        for n in range(self.n_max + 1):
            for q in range(1, self.m + 1):
                yield self.datum(n, q)

    def truncated(self, n_max: int) -> "SpectralData":
        if n_max > self.n_max:
            raise ValueError(f"cannot extend data from n_max={self.n_max} to {n_max}")
        s = slice(0, n_max + 1)
        return SpectralData(self.lam[s], self.alpha[s], self.multiplicity[s], self.cluster_id[s], self.omega, dict(self.info))

    def replace(self, **changes) -> "SpectralData":
        kw = dict(
            lam=self.lam,
            alpha=self.alpha,
            multiplicity=self.multiplicity,
            cluster_id=self.cluster_id,
            omega=self.omega,
            info=dict(self.info),
        )
        kw.update(changes)
        return SpectralData(**kw)

    def transformed(self, U) -> "SpectralData":
        """Apply ``alpha -> U alpha U^{-1}`` to every weight (``omega`` is kept)."""
        U = np.asarray(U, dtype=complex)
        return self.replace(alpha=U @ self.alpha @ np.linalg.inv(U))


def assign_clusters(lam, cluster_rel=DEFAULT.cluster_rel):
    """Cluster ids and multiplicities for a (N+1, m) table of eigenvalues.

    Values within ``cluster_rel * (1 + |lam|)`` of each other share a cluster.
    Ids are numbered in order of their head entry.
    """
    lam = np.asarray(lam)
    flat = lam.ravel()
    labels = _cluster_labels(flat, cluster_rel)
    ids = np.empty(flat.size, int)
    seen: dict[int, int] = {}
    for i, lab in enumerate(labels):
        ids[i] = seen.setdefault(lab, len(seen))
    counts = np.bincount(ids)
    return ids.reshape(lam.shape), counts[ids].reshape(lam.shape)


def _cluster_labels(values, rel):
    """Single-linkage labels: values closer than ``rel * (1 + |v|)`` are joined."""
    values = np.asarray(values, dtype=complex)
    order = np.lexsort((values.imag, values.real))
    parent = list(range(values.size))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a_pos, a in enumerate(order):
        for b in order[a_pos + 1 :]:
            gap = values[b].real - values[a].real
            if gap > rel * (1 + abs(values[a])) + 1e-300:
                break
            if abs(values[b] - values[a]) <= rel * (1 + max(abs(values[a]), abs(values[b]))):
                parent[find(b)] = find(a)
    return np.array([find(i) for i in range(values.size)])


def group_sums(data: SpectralData, tolerances: Tolerances = DEFAULT):
    """Group sums ``alpha_n^{(s)}`` (shape (N+1, p, m, m)) and totals ``alpha_n`` ((N+1, m, m)).

    Each cluster is counted once (the primed convention).
    """
    ap = data.alpha_primed
    groups = data.groups(tolerances)
    per_group = np.stack([ap[:, g].sum(axis=1) for g in groups], axis=1)
    return per_group, per_group.sum(axis=1)


# --------------------------------------------------------------------------- location


@dataclass
class Cluster:
    """Coincident eigenvalues found inside one small circle."""

    lam: complex
    multiplicity: int
    bands: list
    circle: Circle | None = None
    alpha: np.ndarray | None = None
    delta_max: float = 0.0
    _M: np.ndarray | None = field(default=None, repr=False)


@dataclass
class LocatedSpectrum:
    """Output of :func:`locate_eigenvalues`."""

    problem: BoundaryProblem
    n_max: int
    omega: np.ndarray
    clusters: list
    n_split: int
    diagnostics: dict = field(default_factory=dict)


class _Evaluator:
    """Batched evaluation of V(phi), V(S) at contour nodes."""

    def __init__(self, problem, tolerances, workers):
        self.problem = problem
        self.tol = tolerances
        self.workers = workers
        self.n_evals = 0

    def __call__(self, nodes):
        bv = boundary_values(self.problem, nodes, tol=self.tol.ode_tol, workers=self.workers)
        self.n_evals += np.size(nodes)
        return bv.V(self.problem.H, "phi"), bv.V(self.problem.H, "S")


def _low_group_geometry(problem, omega_d, n_split, L_scale):
    shifts = 2 * omega_d / np.pi
    cbar = shifts.mean()
    bnd = float(row_norm(problem.h) + row_norm(problem.H))
    qnorm = float(row_norm(problem.Q).max())
    L = -(qnorm + 2 * bnd**2 + 2 * bnd + 1) * L_scale + min(0.0, cbar.real)
    R = (n_split + 0.5) ** 2 + cbar.real
    return complex(0.5 * (L + R), cbar.imag), 0.5 * (R - L)


def _split_parameter(problem, omega_d):
    shifts = 2 * omega_d / np.pi
    s = float(np.abs(shifts - shifts.mean()).max())
    Qmean = problem.integral_Q() / np.pi
    beta = float(row_norm(problem.Q - Qmean).max() + 2 * (row_norm(problem.h) + row_norm(problem.H)))
    return max(2, math.ceil(s + beta + 1.5))


def _count_and_seed(evaluate, circle, expected, tolerances, band):
    """Winding count of Delta on ``circle`` and Beyn seeds, doubling nodes as needed."""
    prev = None
    while True:
        Vphi, _ = evaluate(circle.nodes)
        det = np.linalg.det(Vphi)
        count, step = winding_number(det)
        if step < np.pi / 2:
            Tinv = np.linalg.inv(Vphi)
            eigs, _ = beyn_eigenvalues(circle, Tinv, count)
            scale = 1 + np.abs(eigs)
            if prev is not None and prev.size == eigs.size and np.all(np.abs(prev - eigs) <= 1e-6 * scale):
                return count, eigs, circle.n
            prev = eigs
        if circle.n * 2 > tolerances.contour_max_nodes:
            if step < np.pi / 2 and prev is not None:
                return count, prev, circle.n
            raise CountMismatch(
                f"argument principle did not settle on the band-{band} contour", band=band, found=count, expected=expected
            )
        circle = circle.refined()


def _seed_eigenvalues(problem, omega_d, n_max, tolerances, evaluate):
    m = problem.m
    n_split = _split_parameter(problem, omega_d)
    cbar = (2 * omega_d / np.pi).mean()
    L_scale = 1.0
    diag = {"contour_retries": 0}
    for attempt in range(tolerances.count_retries + 1):
        n_low = min(n_split, n_max + 1)
        center, radius = _low_group_geometry(problem, omega_d, n_low, L_scale)
        expected = m * (n_low + 1)
        start = max(tolerances.contour_nodes, 2 ** math.ceil(math.log2(16 * expected)))
        count, eigs, used = _count_and_seed(evaluate, Circle(center, radius, start), expected, tolerances, 0)
        if count != expected:
            diag["contour_retries"] += 1
            if attempt == tolerances.count_retries:
                raise CountMismatch(
                    f"low bands 0..{n_low}: found {count} eigenvalues, expected {expected}",
                    band=0,
                    found=count,
                    expected=expected,
                )
            L_scale *= 2
            n_split += 1
            continue
        bands = [eigs[k * m : (k + 1) * m] for k in range(n_low + 1)]
        failed = None
        for n in range(n_low + 1, n_max + 2):
            circle = Circle(n * n + cbar, n - 0.5, tolerances.contour_nodes)
            c, e, _ = _count_and_seed(evaluate, circle, m, tolerances, n)
            if c != m:
                failed = (n, c)
                break
            bands.append(e)
        if failed is None:
            diag.update(n_split=n_split, low_radius=radius, low_nodes=used)
            return bands, n_split, diag
        diag["contour_retries"] += 1
        if attempt == tolerances.count_retries:
            n, c = failed
            raise CountMismatch(f"band {n}: found {c} eigenvalues, expected {m}", band=n, found=c, expected=m)
        n_split = failed[0] + 1
    raise AssertionError("unreachable")


def _radii(centers, floor):
    centers = np.asarray(centers)
    d = np.abs(centers[:, None] - centers[None, :])
    np.fill_diagonal(d, np.inf)
    r = 0.5 * d.min(axis=1)
    r[~np.isfinite(r)] = 1.0
    if np.any(r < floor):
        k = int(np.argmin(r))
        raise ContourCollision(f"clusters at {centers[k]} are closer than {2 * floor:g}")
    return r


def _refine_clusters(seeds, bands, n_max, tolerances, evaluate):
    """Small circles around every cluster: multiplicity, refined eigenvalue, splitting."""
    values = np.concatenate(seeds)
    band_of = np.concatenate(bands)
    coarse = max(tolerances.cluster_rel, 1e-5)
    labels = _cluster_labels(values, coarse)
    pending = []
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        pending.append((values[idx].mean(), sorted(band_of[idx].tolist())))
    final: list[Cluster] = []
    for _ in range(4):
        if not pending:
            break
        centers = [c.lam for c in final] + [p[0] for p in pending]
        r = _radii(centers, tolerances.residue_radius_floor)[len(final) :]
        circles = [Circle(p[0], ri, 2 * tolerances.contour_nodes) for p, ri in zip(pending, r)]
        nodes = np.concatenate([c.nodes for c in circles])
        Vphi, VS = evaluate(nodes)
        next_pending = []
        pos = 0
        for (center, members), circle in zip(pending, circles):
            sl = slice(pos, pos + circle.n)
            pos += circle.n
            det = np.linalg.det(Vphi[sl])
            k, step = winding_number(det)
            if k != len(members) or step >= np.pi / 2:
                raise CountMismatch(
                    f"cluster near {center:.6g}: winding {k} but {len(members)} eigenvalues seeded",
                    band=members[0],
                    found=k,
                    expected=len(members),
                )
            Tinv = np.linalg.inv(Vphi[sl])
            eigs, _ = beyn_eigenvalues(circle, Tinv, k, block_size=1 if k <= Vphi.shape[-1] else None)
            lam_hat = eigs.mean()
            spread = np.abs(eigs - lam_hat).max()
            if spread > tolerances.cluster_rel * (1 + abs(lam_hat)) and k > 1:
                sub = _cluster_labels(eigs, tolerances.cluster_rel)
                ordered = sorted(members)
                pos_m = 0
                for lab in np.unique(sub):
                    e = eigs[sub == lab]
                    next_pending.append((e.mean(), ordered[pos_m : pos_m + e.size]))
                    pos_m += e.size
                continue
            M = -np.linalg.solve(Vphi[sl], VS[sl])
            final.append(
                Cluster(
                    lam=complex(lam_hat),
                    multiplicity=k,
                    bands=list(members),
                    circle=circle,
                    delta_max=float(np.abs(det).max()),
                    _M=M,
                )
            )
        pending = next_pending
    if pending:
        raise NoConvergence("cluster splitting did not settle")
    final = [c for c in final if min(c.bands) <= n_max]
    final.sort(key=lambda c: (c.lam.real, c.lam.imag))
    return final


def locate_eigenvalues(
    problem: BoundaryProblem,
    n_max: int,
    tolerances: Tolerances = DEFAULT,
    workers: int = 1,
) -> LocatedSpectrum:
    """Find all eigenvalues of bands ``0..n_max`` with their multiplicities.

    Bands up to a split index share one large circle; every later band gets
    the circle of radius ``n - 1/2`` about ``n^2 + mean(2 omega_q / pi)``.
    Counts come from the argument principle for ``Delta``; a mismatch widens
    the low circle and retries ``tolerances.count_retries`` times before
    raising :class:`CountMismatch`.  Band ``n_max + 1`` is located too so that
    the clusters of the last band know their neighbours.
    """
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    om = compute_omega(problem, tolerances)
    if not om.is_diagonal:
        raise InvalidProblem(
            f"omega is not diagonal (off-diagonal {om.offdiag:.2e}); conjugate the problem with diagonalize_omega first"
        )
    omega_d = np.diag(om.omega)
    evaluate = _Evaluator(problem, tolerances, workers)
    seeds, n_split, diag = _seed_eigenvalues(problem, omega_d, n_max, tolerances, evaluate)
    bands = [np.full(len(s), n) for n, s in enumerate(seeds)]
    clusters = _refine_clusters(seeds, bands, n_max, tolerances, evaluate)
    diag["evaluations"] = evaluate.n_evals
    return LocatedSpectrum(problem, n_max, om.omega, clusters, n_split, diag)


# --------------------------------------------------------------------------- residues


def _cluster_residue(problem, cluster: Cluster, tolerances, evaluate):
    circle = cluster.circle
    M = cluster._M
    if M is None:
        Vphi, VS = evaluate(circle.nodes)
        M = -np.linalg.solve(Vphi, VS)
    alpha = circle.integral(M)
    half = Circle(circle.center, circle.radius, circle.n // 2)
    prev = half.integral(M[::2])
    while np.abs(alpha - prev).max() > tolerances.residue_agree * max(1.0, np.abs(alpha).max()):
        if circle.n * 2 > tolerances.contour_max_nodes:
            raise AssumptionOneViolated(
                f"residue at {cluster.lam:.10g} did not converge (pole may not be simple)", cluster=cluster.lam
            )
        fine = circle.refined()
        Vphi, VS = evaluate(fine.nodes[1::2])
        Mfine = np.empty((fine.n,) + M.shape[1:], complex)
        Mfine[::2] = M
        Mfine[1::2] = -np.linalg.solve(Vphi, VS)
        circle, M, prev = fine, Mfine, alpha
        alpha = circle.integral(M)
    return alpha


def weight_matrices(
    located: LocatedSpectrum,
    tolerances: Tolerances = DEFAULT,
    workers: int = 1,
) -> SpectralData:
    """Residues of ``M`` at the located clusters and the assembled :class:`SpectralData`.

    Raises :class:`AssumptionOneViolated` if a residue's numerical rank
    differs from the zero multiplicity of ``Delta`` there, and
    :class:`NoConvergence` if ``|Delta|`` at a refined eigenvalue is not
    small relative to its size on the cluster contour.
    """
    problem = located.problem
    m, n_max = problem.m, located.n_max
    evaluate = _Evaluator(problem, tolerances, workers)
    clusters = located.clusters
    lam_hat = np.array([c.lam for c in clusters])
    bv = boundary_values(problem, lam_hat, tol=tolerances.ode_tol, workers=workers)
    det_hat = np.abs(np.linalg.det(bv.V(problem.H, "phi")))
    rank_table = []
    for c, dh in zip(clusters, det_hat):
        alpha = _cluster_residue(problem, c, tolerances, evaluate)
        sv = np.linalg.svd(alpha, compute_uv=False)
        rank = int((sv > tolerances.rank_rel * max(sv[0], 1e-300)).sum())
        rank_table.append((c.lam, c.multiplicity, rank))
        if rank != c.multiplicity:
            raise AssumptionOneViolated(
                f"residue at lambda={c.lam:.10g} has rank {rank} but Delta has a zero of order {c.multiplicity}",
                cluster=c.lam,
            )
        if dh > tolerances.delta_residual_rel * c.delta_max:
            raise NoConvergence(f"|Delta| = {dh:.3e} at refined eigenvalue {c.lam:.10g} is not small")
        c.alpha = alpha

    # channel assignment per band
    by_band: dict[int, list[int]] = {}
    for k, c in enumerate(clusters):
        for n in c.bands:
            if n <= n_max:
                by_band.setdefault(n, []).append(k)
    omega_d = np.diag(located.omega)
    lam = np.empty((n_max + 1, m), complex)
    owner = np.empty((n_max + 1, m), int)
    for n in range(n_max + 1):
        ks = by_band.get(n, [])
        if len(ks) != m:
            raise CountMismatch(f"band {n} holds {len(ks)} eigenvalues, expected {m}", band=n, found=len(ks), expected=m)
        vals = np.array([clusters[k].lam for k in ks])
        if n == 0:
            order = np.argsort(np.abs(vals), kind="stable")
        else:
            seeds = n + omega_d / (np.pi * n)
            cost = np.abs(sqrt_branch(vals)[:, None] - seeds[None, :])
            rows, cols = linear_sum_assignment(cost)
            order = np.empty(m, int)
            order[cols] = rows
        lam[n] = vals[order]
        owner[n] = np.asarray(ks)[order]
    alpha = np.array([[clusters[k].alpha for k in row] for row in owner])
    # renumber clusters by head order
    remap: dict[int, int] = {}
    for k in owner.ravel():
        remap.setdefault(int(k), len(remap))
    cluster_id = np.vectorize(remap.__getitem__)(owner)
    mult = np.array([[clusters[k].multiplicity for k in row] for row in owner])
    info = dict(located.diagnostics)
    info["rank_table"] = rank_table
    return SpectralData(lam, alpha, mult, cluster_id, np.diag(omega_d), info)


def forward_spectral_data(
    problem: BoundaryProblem,
    n_max: int,
    tolerances: Tolerances = DEFAULT,
    workers: int = 1,
) -> SpectralData:
    """Eigenvalues and weight matrices for bands ``0..n_max``."""
    located = locate_eigenvalues(problem, n_max, tolerances, workers)
    return weight_matrices(located, tolerances, workers)
