"""Numerical checks of the characterization conditions of spectral data.

* (A) asymptotics of eigenvalues and weight matrices,
* (R) rank of each weight equals the multiplicity of its eigenvalue,
* (S) real eigenvalues and Hermitian positive semidefinite weights,
* (C) a finite section of the cosine system built from the weights is
  linearly independent (necessary for completeness),

plus structural identities that hold for data computed from a known problem.

On finite data "square summable" can only be judged by trend; (A) passes
when the upper-half tail of each residual sequence does not exceed
``growth_factor`` times its lower-half tail (default 1, i.e. no growth).
Tails below ``a_noise_floor`` carry no trend and always pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT, Tolerances
from .forward import SpectralData, group_sums, row_norm
from .model import _sin_over
from .ode import BoundaryProblem, boundary_values, integrate_solutions, lagrange_bracket, weyl_matrix

__all__ = [
    "PASS",
    "FAIL",
    "INDETERMINATE",
    "ConditionResult",
    "ConditionReport",
    "asymptotic_residuals",
    "check_A",
    "check_R",
    "check_S",
    "check_C",
    "check_structural",
    "run_checks",
]

PASS, FAIL, INDETERMINATE = "pass", "fail", "indeterminate"


@dataclass
class ConditionResult:
    name: str
    verdict: str
    diagnostics: dict = field(default_factory=dict)
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == PASS


@dataclass
class ConditionReport:
    results: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def __getitem__(self, key) -> ConditionResult:
        return self.results[key]

    def table(self) -> str:
        lines = [f"{'condition':<12}{'verdict':<15}summary"]
        for name, r in self.results.items():
            lines.append(f"{name:<12}{r.verdict:<15}{_summary(r)}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            name: {"verdict": r.verdict, "note": r.note, "diagnostics": _jsonable(r.diagnostics)}
            for name, r in self.results.items()
        }


def _summary(r: ConditionResult) -> str:
    keys = {
        "A": ("tail_ratio_max", "alpha_bound"),
        "R": ("mismatches",),
        "S": ("max_imag_rel", "max_nonhermitian", "min_eigenvalue"),
        "C": ("sigma_min",),
        "structural": ("prodval", "sym_self", "sym_cross", "weyl_dual"),
    }.get(r.name, ())
    parts = []
    for k in keys:
        v = r.diagnostics.get(k)
        if isinstance(v, float):
            parts.append(f"{k}={v:.3e}")
        elif isinstance(v, list):
            parts.append(f"{k}={len(v)}")
        elif v is not None:
            parts.append(f"{k}={v}")
    if r.note:
        parts.append(r.note)
    return ", ".join(parts)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# --------------------------------------------------------------------------- (A)


def asymptotic_residuals(data: SpectralData, tolerances: Tolerances = DEFAULT) -> dict:
    """The four residual sequences for ``n = 1..n_max`` (spectral norm, entry 0 unused).

    * ``rho``: ``max_q n |rho_nq - n - omega_q / (pi n)|``
    * ``group``: ``max_s ||alpha_n^{(s)} - (2/pi) I^{(s)}||``
    * ``total``: ``n ||alpha_n - (2/pi) I||``
    * ``offgroup``: ``max_{s, q in J_s} ||(I - I^{(s)}) alpha_nq||``
    """
    m, N = data.m, data.n_max
    n = np.arange(N + 1)
    nn = np.maximum(n, 1)
    w = data.omega_diag
    groups = data.groups(tolerances)
    r = {}
    r["rho"] = np.abs(nn[:, None] * (data.rho - nn[:, None] - w[None, :] / (np.pi * nn[:, None]))).max(axis=1)
    gs, tot = group_sums(data, tolerances)
    proj = []
    for g in groups:
        P = np.zeros((m, m))
        P[g, g] = 1.0
        proj.append(P)
    proj = np.array(proj)
    r["group"] = np.linalg.norm(gs - (2 / np.pi) * proj[None], ord=2, axis=(-2, -1)).max(axis=1)
    r["total"] = n * np.linalg.norm(tot - (2 / np.pi) * np.eye(m), ord=2, axis=(-2, -1))
    off = np.zeros(N + 1)
    for s, g in enumerate(groups):
        comp = (np.eye(m) - proj[s]) @ data.alpha[:, g]
        off = np.maximum(off, np.linalg.norm(comp, ord=2, axis=(-2, -1)).max(axis=1))
    r["offgroup"] = off
    for k in r:
        r[k][0] = 0.0
    return r


def check_A(data: SpectralData, tolerances: Tolerances = DEFAULT, growth_factor: float | None = None) -> ConditionResult:
    """Asymptotics: tails of the residual sequences must not grow.

    The verdict is indeterminate for ``n_max < tolerances.a_min_nmax``.
    """
    factor = tolerances.a_growth_factor if growth_factor is None else growth_factor
    res = asymptotic_residuals(data, tolerances)
    N = data.n_max
    half = max(N // 2, 1)
    alpha_bound = float(row_norm(data.alpha).max())
    diag = {"residuals": res, "alpha_bound": alpha_bound, "growth_factor": factor, "split": half}
    tails = {}
    ratio_max = 0.0
    ok = np.isfinite(alpha_bound)
    for k, seq in res.items():
        lower = float(np.linalg.norm(seq[1:half]))
        upper = float(np.linalg.norm(seq[half:]))
        tails[k] = {"lower": lower, "upper": upper}
        if upper > tolerances.a_noise_floor:
            ratio = upper / lower if lower > 0 else np.inf
            ratio_max = max(ratio_max, ratio)
        # tails at rounding level carry no trend
        if not (upper <= factor * lower or upper <= tolerances.a_noise_floor):
            ok = False
    diag["tails"] = tails
    diag["tail_ratio_max"] = float(ratio_max)
    note = "l2 judged by tail non-growth over the available bands"
    if N < tolerances.a_min_nmax:
        return ConditionResult("A", INDETERMINATE, diag, f"n_max={N} < {tolerances.a_min_nmax}")
    return ConditionResult("A", PASS if ok else FAIL, diag, note)


# --------------------------------------------------------------------------- (R)


def _rank(A, rel):
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[0] == 0:
        return 0
    return int((sv > rel * sv[0]).sum())


def check_R(data: SpectralData, tolerances: Tolerances = DEFAULT) -> ConditionResult:
    """Numerical rank of each cluster-head weight against the cluster multiplicity."""
    table = []
    mismatches = []
    for n in range(data.n_max + 1):
        for q in range(data.m):
            if not data.head[n, q]:
                continue
            rank = _rank(data.alpha[n, q], tolerances.rank_rel)
            mult = int(data.multiplicity[n, q])
            table.append((n, q + 1, rank, mult))
            if rank != mult:
                mismatches.append((n, q + 1))
    diag = {"ranks": table, "mismatches": mismatches}
    return ConditionResult("R", FAIL if mismatches else PASS, diag)


# --------------------------------------------------------------------------- (S)


def check_S(data: SpectralData, tolerances: Tolerances = DEFAULT) -> ConditionResult:
    """Real eigenvalues and Hermitian nonnegative weights."""
    lam = data.lam
    imag_rel = np.abs(lam.imag) / (1 + np.abs(lam))
    a = data.alpha
    herm = np.linalg.norm(a - a.conj().swapaxes(-1, -2), ord=2, axis=(-2, -1))
    sym = 0.5 * (a + a.conj().swapaxes(-1, -2))
    min_eig = np.linalg.eigvalsh(sym)[..., 0]
    diag = {
        "max_imag_rel": float(imag_rel.max()),
        "max_nonhermitian": float(herm.max()),
        "min_eigenvalue": float(min_eig.min()),
    }
    fails = []
    if diag["max_imag_rel"] > tolerances.s_imag_rel:
        fails.append("non-real eigenvalue")
    if diag["max_nonhermitian"] > tolerances.s_herm:
        fails.append("non-Hermitian weight")
    if diag["min_eigenvalue"] < -tolerances.s_psd:
        fails.append("weight not positive semidefinite")
    diag["failures"] = fails
    return ConditionResult("S", FAIL if fails else PASS, diag, "; ".join(fails))


# --------------------------------------------------------------------------- (C)


def check_C(data: SpectralData, n_bands: int | None = None, tolerances: Tolerances = DEFAULT) -> ConditionResult:
    """Smallest singular value of the normalised Gram matrix of ``cos(rho x) e``.

    ``e`` runs over orthonormal bases of the ranges of the primed weights with
    ``n <= n_bands``.  A vanishing value certifies dependence; a positive one
    is only evidence of completeness.
    """
    n_bands = data.n_max if n_bands is None else n_bands
    if n_bands > data.n_max:
        raise ValueError(f"n_bands={n_bands} exceeds n_max={data.n_max}")
    rhos, vecs = [], []
    for n in range(n_bands + 1):
        for q in range(data.m):
            if not data.head[n, q]:
                continue
            U, sv, _ = np.linalg.svd(data.alpha[n, q])
            if sv[0] == 0:
                continue
            k = int((sv > tolerances.rank_rel * sv[0]).sum())
            for j in range(k):
                rhos.append(data.rho[n, q])
                vecs.append(U[:, j])
    rhos = np.array(rhos)
    E = np.array(vecs)
    # int_0^pi cos(a x) conj(cos(b x)) dx with conj(cos(b x)) = cos(conj(b) x)
    a = rhos[:, None]
    b = rhos.conj()[None, :]
    I = 0.5 * (_sin_over(a - b, np.pi) + _sin_over(a + b, np.pi))
    G = I * (E.conj() @ E.T).T
    d = np.sqrt(np.abs(np.diag(G)))
    Gn = G / d[:, None] / d[None, :]
    sigma = np.linalg.svd(Gn, compute_uv=False)
    sigma_min = float(sigma[-1]) if sigma.size else 0.0
    diag = {"sigma_min": sigma_min, "size": int(rhos.size), "n_bands": n_bands}
    verdict = PASS if sigma_min >= tolerances.c_sigma_min else FAIL
    return ConditionResult("C", verdict, diag, "finite-section proxy; a pass is evidence, not proof")


# --------------------------------------------------------------------------- structural


def check_structural(
    problem: BoundaryProblem,
    data: SpectralData,
    tolerances: Tolerances = DEFAULT,
    n_samples: int = 20,
    seed: int = 0,
    bounds: dict | None = None,
) -> ConditionResult:
    """Identities that tie the data to the problem they came from.

    * ``prodval``: ``max ||V(phi(., lam_nq)) alpha_nq||``
    * ``sym_self``: ``max ||alpha_0 int phi*(., lam_0) phi(., lam_0) alpha_0 - alpha_0||`` over heads
    * ``sym_cross``: ``max ||alpha_0 int phi*(., lam_0) phi(., lam_1) alpha_1||`` over distinct heads
    * ``weyl_dual``: ``max ||M(lam) - M*(lam)|| / max(1, ||M||)`` at random non-real ``lam``
    """
    bounds = {"prodval": 1e-6, "sym_self": 1e-6, "sym_cross": 1e-6, "weyl_dual": 1e-7, **(bounds or {})}
    lam = data.lam.ravel()
    alpha = data.alpha.reshape(-1, data.m, data.m)
    bv = boundary_values(problem, lam, tol=tolerances.ode_tol)
    prodval = float(row_norm(bv.V(problem.H, "phi") @ alpha).max())

    heads = np.flatnonzero(data.head.ravel())
    samples = [integrate_solutions(problem, lam[k], tol=tolerances.ode_tol) for k in heads]
    sym_self = 0.0
    for k, s in zip(heads, samples):
        D = lagrange_bracket(s.phistar[-1], s.dphistar[-1], s.phi_lam[-1], s.dphi_lam[-1])
        a = alpha[k]
        sym_self = max(sym_self, float(row_norm(a @ D @ a - a)))
    sym_cross = 0.0
    for i, (k0, s0) in enumerate(zip(heads, samples)):
        for k1, s1 in zip(heads[i + 1 :], samples[i + 1 :]):
            for (ka, sa), (kb, sb) in (((k0, s0), (k1, s1)), ((k1, s1), (k0, s0))):
                # alpha_a int phi*(lam_a) phi(lam_b) alpha_b
                br = lagrange_bracket(sa.phistar[-1], sa.dphistar[-1], sb.phi[-1], sb.dphi[-1])
                D = br / (lam[kb] - lam[ka])
                sym_cross = max(sym_cross, float(row_norm(alpha[ka] @ D @ alpha[kb])))

    rng = np.random.default_rng(seed)
    top = (data.n_max + 1) ** 2
    pts = rng.uniform(-1, top, n_samples) + 1j * rng.choice([-1, 1], n_samples) * rng.uniform(0.5, 20, n_samples)
    dual = problem.dual()
    weyl_dual = 0.0
    for z in pts:
        M = weyl_matrix(problem, z, tol=tolerances.ode_tol, tolerances=tolerances)
        Ms = weyl_matrix(dual, z, tol=tolerances.ode_tol, tolerances=tolerances).T
        weyl_dual = max(weyl_dual, float(row_norm(M - Ms) / max(1.0, row_norm(M))))
    diag = {"prodval": prodval, "sym_self": sym_self, "sym_cross": sym_cross, "weyl_dual": weyl_dual, "bounds": bounds}
    ok = all(diag[k] <= bounds[k] for k in ("prodval", "sym_self", "sym_cross", "weyl_dual"))
    return ConditionResult("structural", PASS if ok else FAIL, diag)


def run_checks(
    data: SpectralData,
    conditions=("A", "R", "S", "C"),
    problem: BoundaryProblem | None = None,
    tolerances: Tolerances = DEFAULT,
    n_bands: int | None = None,
) -> ConditionReport:
    """Run the requested checks (``"structural"`` needs ``problem``)."""
    results = {}
    for c in conditions:
        c = c.strip()
        if c == "A":
            results[c] = check_A(data, tolerances)
        elif c == "R":
            results[c] = check_R(data, tolerances)
        elif c == "S":
            results[c] = check_S(data, tolerances)
        elif c == "C":
            results[c] = check_C(data, n_bands, tolerances)
        elif c == "structural":
            if problem is None:
                raise ValueError("the structural check needs the problem")
            results[c] = check_structural(problem, data, tolerances)
        else:
            raise ValueError(f"unknown condition {c!r}")
    return ConditionReport(results)
