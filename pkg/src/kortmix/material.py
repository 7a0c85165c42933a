"""Scalar material laws and their admissibility.

The entropy solution leaves four scalar functions free (``s01(eps)``,
``s02(x)`` with ``x = J_rho / J_c``, ``s03(rho)`` and ``phi(rho)``) together
with the constants ``kappa1..3`` and ``s3``, the viscosities and the
heat-flux coefficient. :class:`MaterialParams` carries simple defaults for
all of them; subclass and override the law methods to swap a law in.

Law methods only use arithmetic and ``np.log``, so they accept floats, numpy
arrays and :class:`~kortmix.taylor.Taylor` germs alike.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .taylor import value_of


class DomainError(ValueError):
    """Evaluation point outside the domain of the material laws."""


class ParameterError(ValueError):
    """Material parameters violate a stated invariant."""


def _like(value, x):
    # constant law value shaped like its argument (array or germ)
    return value + 0.0 * x


@dataclass(frozen=True)
class MaterialParams:
    kappa1: float = 1.0
    kappa2: float = 0.2
    kappa3: float = -0.5
    s3: float = -0.1
    cv: float = 1.0
    eps_ref: float = 1.0
    rho_ref: float = 1.0
    a0: float = 0.1
    a2: float = 0.5
    R: float = 1.0
    K: float = 0.01
    tau6: float = 0.05
    tau12: float = 0.1
    q0: float = -0.5
    rho_min: float = 0.5
    rho_max: float = 2.0
    # fault injection only: replaces derived stress coefficients by index
    tau_override: Mapping[int, float] = field(default_factory=dict)

    # -- laws ------------------------------------------------------------------

    def J_rho(self, c):
        return self.kappa1 * c + self.kappa2

    def J_c(self, rho):
        return -self.kappa1 * rho + self.kappa3

    def s01(self, eps):
        return self.cv * np.log(eps / self.eps_ref)

    def ds01(self, eps):
        return self.cv / eps

    def d2s01(self, eps):
        return -self.cv / (eps * eps)

    def s02(self, x):
        return self.a0 * x + 0.5 * self.a2 * x * x

    def ds02(self, x):
        return self.a0 + self.a2 * x

    def d2s02(self, x):
        return _like(self.a2, x)

    def s03(self, rho):
        return -self.R * np.log(rho / self.rho_ref)

    def ds03(self, rho):
        return -self.R / rho

    def d2s03(self, rho):
        return self.R / (rho * rho)

    def dphi(self, rho):
        return _like(-self.K, rho)

    def d2phi(self, rho):
        return _like(0.0, rho)

    def tau6_of(self, rho, c, eps):
        return _like(self.tau6, rho)

    def tau12_of(self, rho, c, eps):
        return _like(self.tau12, rho)

    def q_of(self, rho, c, eps):
        return _like(self.q0, rho)

    # -- bookkeeping -------------------------------------------------------

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["tau_override"] = {str(k): v for k, v in sorted(self.tau_override.items())}
        return out

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def validate(self, thermodynamic: bool = True) -> None:
        """Raise :class:`ParameterError` naming every violated invariant.

        Structural invariants (positive references, ordered density window)
        are always checked; the sign conditions only with ``thermodynamic``.
        """
        problems = []
        if not self.cv > 0:
            problems.append("cv > 0")
        if not self.eps_ref > 0:
            problems.append("eps_ref > 0")
        if not self.rho_ref > 0:
            problems.append("rho_ref > 0")
        if not 0 < self.rho_min < self.rho_max:
            problems.append("0 < rho_min < rho_max")
        if thermodynamic:
            checks = [
                (self.s3 <= 0, "s3 ≤ 0"),
                (self.a2 >= 0, "a2 ≥ 0"),
                (self.tau6 >= 0, "tau6 ≥ 0"),
                (self.tau12 >= 0, "tau12 ≥ 0"),
                (self.q0 <= 0, "q0 ≤ 0"),
                (self.K >= 0, "K ≥ 0"),
                (max(self.J_c(self.rho_min), self.J_c(self.rho_max)) < 0,
                 "J_c < 0 on [rho_min, rho_max]"),
            ]
            problems += [name for ok, name in checks if not ok]
        if problems:
            raise ParameterError("violated: " + ", ".join(problems))


@dataclass(frozen=True)
class MaterialEval:
    s01: object
    ds01: object
    d2s01: object
    x: object
    s02: object
    ds02: object
    d2s02: object
    s03: object
    ds03: object
    dphi: object
    d_rho_dphi: object
    tau6: object
    tau12: object
    q: object
    J_rho: object
    J_c: object


def eval_material(rho, c, eps, params: MaterialParams) -> MaterialEval:
    """Evaluate every scalar law (and the derivatives used downstream)."""
    if np.any(value_of(eps) <= 0):
        raise DomainError("eps must be positive")
    J_rho = params.J_rho(c)
    J_c = params.J_c(rho)
    if np.any(value_of(J_c) >= 0):
        raise DomainError("J_c = -kappa1*rho + kappa3 must be negative")
    x = J_rho / J_c
    return MaterialEval(
        s01=params.s01(eps),
        ds01=params.ds01(eps),
        d2s01=params.d2s01(eps),
        x=x,
        s02=params.s02(x),
        ds02=params.ds02(x),
        d2s02=params.d2s02(x),
        s03=params.s03(rho),
        ds03=params.ds03(rho),
        dphi=params.dphi(rho),
        d_rho_dphi=params.dphi(rho) + rho * params.d2phi(rho),
        tau6=params.tau6_of(rho, c, eps),
        tau12=params.tau12_of(rho, c, eps),
        q=params.q_of(rho, c, eps),
        J_rho=J_rho,
        J_c=J_c,
    )


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    worst_value: float
    worst_point: dict
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class AdmissibilityReport:
    conditions: tuple[ConditionResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def failing(self) -> list[str]:
        return [c.name for c in self.conditions if not c.passed]

    def to_dict(self):
        return {"passed": self.passed, "conditions": [c.to_dict() for c in self.conditions]}


def _jc_sign_change(params: MaterialParams) -> dict:
    # J_c is affine in rho, so the violating part of the window is an interval
    # bounded by its root kappa3 / kappa1 (or the whole window)
    lo, hi = params.rho_min, params.rho_max
    if params.kappa1 == 0:
        return {"violating_rho": [lo, hi]}
    root = params.kappa3 / params.kappa1
    if params.kappa1 > 0:  # J_c decreases with rho: violated below the root
        rng = [lo, min(hi, root)]
    else:
        rng = [max(lo, root), hi]
    return {"rho_root": root, "violating_rho": rng}


def check_admissibility(params: MaterialParams, n_rho: int = 512, n_c: int = 33,
                        eps_range=(0.5, 3.0), n_eps: int = 9) -> AdmissibilityReport:
    """Check the thermodynamic sign conditions on a (rho, c, eps) grid.

    Each condition is written as ``g >= 0``; the reported worst value is the
    minimum of ``g`` over the grid and the point where it occurs.
    """
    rho = np.linspace(params.rho_min, params.rho_max, n_rho)
    c = np.linspace(0.0, 1.0, n_c)
    eps = np.linspace(eps_range[0], eps_range[1], n_eps)
    R3, C3, E3 = np.meshgrid(rho, c, eps, indexing="ij")

    J_c = params.J_c(R3)
    J_rho = params.J_rho(C3)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(J_c != 0, J_rho / np.where(J_c != 0, J_c, 1.0), np.nan)
        entropy_bound = params.kappa2 ** 2 * params.s3 / J_c ** 2 - params.dphi(R3)
    conditions = {
        "max_entropy: kappa2^2 s3/(kappa3-kappa1 rho)^2 - phi' ≥ 0": entropy_bound,
        "max_entropy: s3 ≤ 0": np.full(R3.shape, -params.s3),
        "J_c < 0": -J_c,
        "q ≤ 0": -params.q_of(R3, C3, E3),
        "s02'' ≥ 0": params.d2s02(x),
        "tau6 ≥ 0": params.tau6_of(R3, C3, E3),
        "tau12 ≥ 0": params.tau12_of(R3, C3, E3),
    }
    results = []
    for name, g in conditions.items():
        g = np.broadcast_to(np.asarray(g, dtype=float), R3.shape)
        g_safe = np.where(np.isfinite(g), g, -np.inf)
        k = np.unravel_index(np.argmin(g_safe), g.shape)
        worst = float(g_safe[k])
        strict = name == "J_c < 0"
        ok = worst > 0 if strict else worst >= 0
        point = {"rho": float(R3[k]), "c": float(C3[k]), "eps": float(E3[k])}
        detail = _jc_sign_change(params) if (strict and not ok) else {}
        results.append(ConditionResult(name, bool(ok), worst, point, detail))
    return AdmissibilityReport(tuple(results))
