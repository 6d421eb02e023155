"""Text serialization of problems, spectral data and reconstruction results.

Documents are JSON.  Complex numbers are ``[re, im]`` pairs and floats are
written with Python's shortest round-trip representation, so reading a file
and writing it again reproduces it byte for byte.  Each top-level field and
each spectral entry sits on its own line, which keeps files diffable and
parse errors locatable.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, ParseError, UnsupportedVersion
from .forward import SpectralData
from .ode import BoundaryProblem

__all__ = [
    "FORMAT_VERSION",
    "dumps_problem",
    "loads_problem",
    "write_problem",
    "read_problem",
    "dumps_spectral",
    "loads_spectral",
    "write_spectral",
    "read_spectral",
    "dumps_result",
    "write_result",
    "read_result",
]

FORMAT_VERSION = "1"


# --------------------------------------------------------------------------- encoding


def _c(z):
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"cannot serialize non-finite value {z}")
    return [float(z.real), float(z.imag)]


def _carr(a):
    a = np.asarray(a)
    if a.ndim == 0:
        return _c(a)
    return [_carr(x) for x in a]


def _dump(v) -> str:
    return json.dumps(v, separators=(",", ":"), allow_nan=False)


def _document(fields, entries_key=None):
    lines = ["{"]
    items = list(fields.items())
    for k, (key, val) in enumerate(items):
        comma = "," if k < len(items) - 1 else ""
        if key == entries_key:
            lines.append(f"{_dump(key)}:[")
            for j, e in enumerate(val):
                lines.append(_dump(e) + ("," if j < len(val) - 1 else ""))
            lines.append("]" + comma)
        else:
            lines.append(f"{_dump(key)}:{_dump(val)}{comma}")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _write(text, path):
    Path(path).write_text(text, encoding="utf-8")


# --------------------------------------------------------------------------- decoding


def _parse(text, path=None):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, path=path) from None
    if not isinstance(doc, dict):
        raise ParseError("document must be an object", line=1, path=path)
    if "version" not in doc:
        raise ParseError("missing field", path="version")
    if str(doc["version"]) != FORMAT_VERSION:
        raise UnsupportedVersion(f"unsupported format version {doc['version']!r} (expected {FORMAT_VERSION!r})")
    return doc


def _require(doc, key, where=""):
    if key not in doc:
        raise DimensionMismatch("missing field", path=f"{where}{key}")
    return doc[key]


def _complex_array(val, shape, path):
    """Decode nested ``[re, im]`` lists of the given shape."""
    try:
        arr = np.array(val, dtype=float)
    except (TypeError, ValueError):
        raise DimensionMismatch("ragged or non-numeric array", path=path) from None
    if arr.shape != tuple(shape) + (2,):
        raise DimensionMismatch(f"expected shape {tuple(shape)} of [re, im] pairs, got {arr.shape}", path=path)
    if not np.isfinite(arr).all():
        raise DimensionMismatch("non-finite value", path=path)
    return arr[..., 0] + 1j * arr[..., 1]


def _int(val, path):
    if isinstance(val, bool) or not isinstance(val, int):
        raise DimensionMismatch(f"expected an integer, got {val!r}", path=path)
    return val


# --------------------------------------------------------------------------- problem


def dumps_problem(problem: BoundaryProblem) -> str:
    fields = {
        "version": FORMAT_VERSION,
        "m": problem.m,
        "grid": [float(x) for x in problem.grid],
        "Q": _carr(problem.Q),
        "h": _carr(problem.h),
        "H": _carr(problem.H),
        "selfadjoint_hint": bool(problem.selfadjoint_hint),
    }
    return _document(fields)


def loads_problem(text: str, path=None) -> BoundaryProblem:
    doc = _parse(text, path)
    m = _int(_require(doc, "m"), "m")
    grid = _require(doc, "grid")
    if not isinstance(grid, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in grid):
        raise DimensionMismatch("grid must be a list of numbers", path="grid")
    grid = np.array(grid, dtype=float)
    Q = _complex_array(_require(doc, "Q"), (grid.size, m, m), "Q")
    h = _complex_array(_require(doc, "h"), (m, m), "h")
    H = _complex_array(_require(doc, "H"), (m, m), "H")
    hint = doc.get("selfadjoint_hint", False)
    if not isinstance(hint, bool):
        raise DimensionMismatch("expected a boolean", path="selfadjoint_hint")
    return BoundaryProblem(grid, Q, h, H, hint)


def write_problem(problem: BoundaryProblem, path) -> None:
    _write(dumps_problem(problem), path)


def read_problem(path) -> BoundaryProblem:
    return loads_problem(Path(path).read_text(encoding="utf-8"), str(path))


# --------------------------------------------------------------------------- spectral data


def dumps_spectral(data: SpectralData) -> str:
    entries = []
    for n in range(data.n_max + 1):
        for q in range(data.m):
            entries.append(
                {
                    "n": n,
                    "q": q + 1,
                    "lambda": _c(data.lam[n, q]),
                    "alpha": _carr(data.alpha[n, q]),
                    "multiplicity": int(data.multiplicity[n, q]),
                    "cluster_id": int(data.cluster_id[n, q]),
                }
            )
    fields = {
        "version": FORMAT_VERSION,
        "m": data.m,
        "n_max": data.n_max,
        "omega": [_c(w) for w in np.diag(data.omega)],
        "entries": entries,
    }
    return _document(fields, entries_key="entries")


def loads_spectral(text: str, path=None) -> SpectralData:
    doc = _parse(text, path)
    m = _int(_require(doc, "m"), "m")
    n_max = _int(_require(doc, "n_max"), "n_max")
    if m < 1 or n_max < 0:
        raise DimensionMismatch("m must be positive and n_max nonnegative", path="m")
    omega = _complex_array(_require(doc, "omega"), (m,), "omega")
    entries = _require(doc, "entries")
    if not isinstance(entries, list):
        raise DimensionMismatch("expected a list", path="entries")
    lam = np.full((n_max + 1, m), np.nan + 0j)
    alpha = np.zeros((n_max + 1, m, m, m), complex)
    mult = np.zeros((n_max + 1, m), int)
    cid = np.zeros((n_max + 1, m), int)
    seen = np.zeros((n_max + 1, m), bool)
    for k, e in enumerate(entries):
        where = f"entries[{k}]"
        if not isinstance(e, dict):
            raise DimensionMismatch("expected an object", path=where)
        n = _int(_require(e, "n", where + "."), where + ".n")
        q = _int(_require(e, "q", where + "."), where + ".q")
        if not (0 <= n <= n_max and 1 <= q <= m):
            raise DimensionMismatch(f"index (n={n}, q={q}) outside 0..{n_max} x 1..{m}", path=where)
        if seen[n, q - 1]:
            raise DimensionMismatch(f"duplicate entry for (n={n}, q={q})", path=where)
        seen[n, q - 1] = True
        lam[n, q - 1] = _complex_array(_require(e, "lambda", where + "."), (), where + ".lambda")
        alpha[n, q - 1] = _complex_array(_require(e, "alpha", where + "."), (m, m), where + ".alpha")
        mult[n, q - 1] = _int(_require(e, "multiplicity", where + "."), where + ".multiplicity")
        cid[n, q - 1] = _int(_require(e, "cluster_id", where + "."), where + ".cluster_id")
    if not seen.all():
        n, q = np.argwhere(~seen)[0]
        raise DimensionMismatch(f"no entry for (n={n}, q={q + 1})", path="entries")
    return SpectralData(lam, alpha, mult, cid, np.diag(omega))


def write_spectral(data: SpectralData, path) -> None:
    _write(dumps_spectral(data), path)


def read_spectral(path) -> SpectralData:
    return loads_spectral(Path(path).read_text(encoding="utf-8"), str(path))


# --------------------------------------------------------------------------- results


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return _c(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps_result(result, diagnostics: dict | None = None) -> str:
    diag = dict(result.diagnostics)
    diag.update(
        truncation=result.truncation,
        Omega=result.Omega,
        tail=result.tail,
        tail_rel=result.tail_rel,
        xi=[float(v) for v in result.xi],
        residual_max=float(result.residual_report.max()),
    )
    diag.update(diagnostics or {})
    fields = {
        "version": FORMAT_VERSION,
        "m": result.m,
        "grid": [float(x) for x in result.grid],
        "Q_rec": _carr(result.Q_rec),
        "h_rec": _carr(result.h_rec),
        "H_rec": _carr(result.H_rec),
        "eps0": _carr(result.eps0),
        "diagnostics": _plain(diag),
    }
    return _document(fields)


def write_result(result, path, diagnostics: dict | None = None) -> None:
    _write(dumps_result(result, diagnostics), path)


def read_result(path) -> dict:
    """Arrays of a result file as a dict (``grid``, ``Q_rec``, ``h_rec``, ``H_rec``, ``eps0``, ``diagnostics``)."""
    doc = _parse(Path(path).read_text(encoding="utf-8"), str(path))
    m = _int(_require(doc, "m"), "m")
    grid = np.array(_require(doc, "grid"), dtype=float)
    return {
        "grid": grid,
        "Q_rec": _complex_array(_require(doc, "Q_rec"), (grid.size, m, m), "Q_rec"),
        "h_rec": _complex_array(_require(doc, "h_rec"), (m, m), "h_rec"),
        "H_rec": _complex_array(_require(doc, "H_rec"), (m, m), "H_rec"),
        "eps0": _complex_array(_require(doc, "eps0"), (grid.size, m, m), "eps0"),
        "diagnostics": doc.get("diagnostics", {}),
    }
