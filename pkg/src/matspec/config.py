"""Centralised numerical tolerances.

Every threshold used by the solvers and the condition checkers lives in
:class:`Tolerances`.  Defaults can be overridden from a JSON file named by the
``MATSPEC_TOL_FILE`` environment variable and from ``KEY=VAL`` strings (the CLI's
``--tol-override``).
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

TOL_FILE_ENV = "MATSPEC_TOL_FILE"


@dataclass(frozen=True)
class Tolerances:
    # core ODE
    ode_tol: float = 1e-10
    d_kernel_switch: float = 1e-8
    near_singular_cond: float = 1e12
    # forward spectral problem
    omega_diag_tol: float = 1e-8
    omega_group_tol: float = 1e-6
    contour_nodes: int = 64
    contour_max_nodes: int = 2048
    residue_agree: float = 1e-8
    residue_radius_floor: float = 1e-6
    rank_rel: float = 1e-7
    delta_residual_rel: float = 1e-8
    cluster_rel: float = 1e-7
    count_retries: int = 3
    # main equation
    coincidence_rel: float = 1e-12
    main_cond_max: float = 1e12
    main_residual: float = 1e-10
    tail_rel: float = 1e-3
    tail_abs_floor: float = 1e-12
    # conditions
    a_growth_factor: float = 1.0
    a_min_nmax: int = 8
    a_noise_floor: float = 1e-9
    s_imag_rel: float = 1e-8
    s_herm: float = 1e-8
    s_psd: float = 1e-8
    c_sigma_min: float = 1e-6

    def replace(self, **changes) -> "Tolerances":
        return dataclasses.replace(self, **changes)

    def with_overrides(self, overrides) -> "Tolerances":
        """Return a copy with ``overrides`` applied.

        ``overrides`` is a mapping or an iterable of ``"KEY=VAL"`` strings.
        Values are coerced to the type of the default.
        """
        if overrides is None:
            return self
        if not hasattr(overrides, "items"):
            pairs = {}
            for item in overrides:
                key, sep, val = str(item).partition("=")
                if not sep:
                    raise ValueError(f"tolerance override must look like KEY=VAL, got {item!r}")
                pairs[key.strip()] = val.strip()
            overrides = pairs
        fields = {f.name: f for f in dataclasses.fields(self)}
        changes = {}
        for key, val in overrides.items():
            if key not in fields:
                raise KeyError(f"unknown tolerance {key!r}")
            kind = type(getattr(self, key))
            changes[key] = kind(float(val)) if kind is int else kind(val)
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_file(cls, path) -> "Tolerances":
        with open(path, encoding="utf-8") as fh:
            return cls().with_overrides(json.load(fh))

    @classmethod
    def from_env(cls) -> "Tolerances":
        path = os.environ.get(TOL_FILE_ENV)
        return cls.from_file(path) if path else cls()


DEFAULT = Tolerances()
