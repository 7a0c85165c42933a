"""Pointwise verification of the entropy-production results.

Two independent routes to the local entropy production are provided:

* :func:`sigma_direct` evaluates ``rho (s_t + v.grad s) + div J_s`` with the
  time derivatives eliminated through the balance laws and their gradients.
  Divergences are taken on Taylor germs built from the jet, so every chain
  rule term (including third-order slots) is carried exactly.
* :func:`sigma_closed` is the residual quadratic form left after all
  restrictions are imposed; it only reads state-space slots.

Their agreement on random jets, and the insensitivity of the first to the
higher-derivative slots, is what :func:`run_identity_audit` checks.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import constitutive as cst
from .constitutive import Kinematics, dot, trace
from .jet import StateJet, project_to_state_space, stack_jets
from .material import MaterialParams, eval_material
from .taylor import Taylor


def rel_err(a, b):
    """Relative error with a unit floor, ``|a - b| / max(1, |b|)``."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return np.abs(a - b) / np.maximum(1.0, np.abs(b))


# -- balance laws -------------------------------------------------------------


@dataclass(frozen=True)
class TimeJet:
    rho_t: np.ndarray
    c_t: np.ndarray
    v_t: np.ndarray
    eps_t: np.ndarray
    rho_gt: np.ndarray
    c_gt: np.ndarray


def active_dims(jet: StateJet) -> int:
    """Number of leading spatial directions along which the jet varies."""
    for n in (1, 2):
        idle = range(n, 3)
        if all(np.all(t[(Ellipsis,) + (slice(None),) * k + (i,) + (slice(None),) * (order - k - 1)] == 0)
               for t, order in ((jet.rho_g, 1), (jet.c_g, 1), (jet.eps_g, 1), (jet.rho_hess, 2),
                                (jet.c_hess, 2), (jet.eps_hess, 2), (jet.rho_third, 3),
                                (jet.c_third, 3), (jet.v_g, 1), (jet.v_hess, 2))
               for k in range(order) for i in idle):
            return n
    return 3


def field_kinematics(jet: StateJet):
    """Taylor-germ kinematics around each jet point, plus the velocity germ."""
    n = active_dims(jet)
    P = Taylor.from_derivatives(jet.rho, jet.rho_g, jet.rho_hess, jet.rho_third, nvars=n)
    C = Taylor.from_derivatives(jet.c, jet.c_g, jet.c_hess, jet.c_third, nvars=n)
    E = Taylor.from_derivatives(jet.eps, jet.eps_g, jet.eps_hess, nvars=n)
    V = Taylor.from_derivatives(jet.v, jet.v_g, jet.v_hess, nvars=n)
    gP, gC = P.grad(), C.grad()
    return Kinematics(P, C, E, gP, gC, E.grad(), gP.grad(), gC.grad(), V.grad()), V


def _div(F: Taylor) -> Taylor:
    """Divergence over the last value axis."""
    return sum(F[..., k].diff(k) for k in range(3))


def time_derivatives(jet: StateJet, params: MaterialParams) -> TimeJet:
    """Eulerian time derivatives forced by the four balance laws."""
    kin, V = field_kinematics(jet)
    P = kin.rho
    rho_t = -(dot(kin.grad_rho, V) + P * trace(kin.grad_v))
    c_t = -dot(V, kin.grad_c) - _div(cst._mass_flux(kin, params)) / P
    T = cst._stress(kin, params)
    div_T = _div(T).value
    div_q = _div(cst._heat_flux(kin, params)).value
    rho, v, v_g = jet.rho, jet.v, jet.v_g
    v_t = div_T / rho[..., None] - np.einsum("...j,...ij->...i", v, v_g)
    T0 = T.value
    eps_t = -dot(v, jet.eps_g) + (np.einsum("...ij,...ij->...", T0, v_g) - div_q) / rho
    return TimeJet(rho_t=rho_t.value, c_t=c_t.value, v_t=v_t, eps_t=eps_t,
                   rho_gt=rho_t.grad().value, c_gt=c_t.grad().value)


def sigma_direct(jet: StateJet, params: MaterialParams):
    """Entropy production computed straight from the balance laws."""
    tj = time_derivatives(jet, params)
    part = cst.entropy_partials(jet, params)
    v = jet.v
    rho_dot = tj.rho_t + dot(v, jet.rho_g)
    c_dot = tj.c_t + dot(v, jet.c_g)
    eps_dot = tj.eps_t + dot(v, jet.eps_g)
    grad_rho_dot = tj.rho_gt + np.einsum("...j,...kj->...k", v, jet.rho_hess)
    grad_c_dot = tj.c_gt + np.einsum("...j,...kj->...k", v, jet.c_hess)
    s_dot = (part.s_rho * rho_dot + part.s_c * c_dot + part.s_eps * eps_dot
             + dot(part.s_grad_rho, grad_rho_dot) + dot(part.s_grad_c, grad_c_dot))
    kin, _ = field_kinematics(jet)
    div_Js = _div(cst._entropy_flux(kin, params)).value
    return jet.rho * s_dot + div_Js


def sigma_closed(jet: StateJet, params: MaterialParams):
    """Residual entropy production in closed form (state-space slots only)."""
    rho, c, eps = jet.rho, jet.c, jet.eps
    m = eval_material(rho, c, eps, params)
    co = cst.entropy_coefficients(rho, c, eps, params)
    d = cst.entropy_coefficient_derivatives(rho, c, eps, params)
    q = params.q_of(rho, c, eps)[..., None] * jet.eps_g
    L = jet.strain
    div_v = jet.div_v
    D = co.J_rho * trace(jet.rho_hess) + co.J_c * trace(jet.c_hess)
    gr, gc = jet.rho_g, jet.c_g
    return (d.d2s0_deps2 * dot(q, jet.eps_g)
            + (m.tau6 * div_v ** 2 + m.tau12 * (L * L).sum((-2, -1))) * m.ds01
            + 2.0 * co.s_hat3 * D ** 2 / co.J_c
            + co.J_rho * d.d2s0_drho_dc * dot(gr, gr)
            + 2.0 * co.J_rho * d.d2s0_dc2 * dot(gr, gc)
            + co.J_c * d.d2s0_dc2 * dot(gc, gc))


# -- random jets ----------------------------------------------------------------


@dataclass(frozen=True)
class JetRanges:
    rho: tuple = (0.6, 1.8)
    c: tuple = (0.1, 0.9)
    eps: tuple = (0.5, 3.0)
    v: tuple = (-1.0, 1.0)
    deriv: tuple = (-1.0, 1.0)


_HIGHER = ("rho_t3", "c_t3", "eps_h", "v_h")


def random_jet(rng: np.random.Generator, ranges: JetRanges = JetRanges()) -> StateJet:
    lo, hi = ranges.deriv

    def slots(*shape):
        return rng.uniform(lo, hi, size=shape)

    return StateJet(
        rho=rng.uniform(*ranges.rho), rho_g=slots(3), rho_h=slots(6), rho_t3=slots(10),
        c=rng.uniform(*ranges.c), c_g=slots(3), c_h=slots(6), c_t3=slots(10),
        eps=rng.uniform(*ranges.eps), eps_g=slots(3), eps_h=slots(6),
        v=rng.uniform(*ranges.v, size=3), v_g=slots(3, 3), v_h=slots(3, 6),
    )


def _stream(seed: int, index: int, purpose: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index), purpose]))


def sample_jets(n: int, seed: int, ranges: JetRanges = JetRanges()) -> StateJet:
    """``n`` random jets, sample ``i`` drawn from its own (seed, i) stream."""
    return stack_jets(random_jet(_stream(seed, i), ranges) for i in range(n))


def rerandomize_higher(jet: StateJet, seed: int, ranges: JetRanges = JetRanges()) -> StateJet:
    """Redraw the slots that never enter the closed form (per-sample streams)."""
    lo, hi = ranges.deriv
    n = len(jet)
    fresh = {name: np.stack([_stream(seed, i, 1).uniform(lo, hi, size=getattr(jet, name).shape[1:])
                             for i in range(n)]) for name in _HIGHER}
    return jet.replace(**fresh)


# -- identity audit -----------------------------------------------------------


@dataclass
class AuditReport:
    n_samples: int
    seed: int
    params_digest: str
    max_identity_error: float = 0.0
    max_invariance_error: float = 0.0
    min_sigma: float | None = None
    n_identity_fail: int = 0
    n_invariance_fail: int = 0
    n_negative: int = 0
    failures: list = field(default_factory=list)
    samples: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.n_identity_fail == 0 and self.n_invariance_fail == 0 and self.n_negative == 0

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out.pop("samples")
        out["passed"] = self.passed
        return out


MAX_LISTED_FAILURES = 10


def run_identity_audit(params: MaterialParams, n_samples: int = 1000, seed: int = 42,
                       ranges: JetRanges = JetRanges(), tol_identity: float = 1e-9,
                       tol_sign: float = 1e-12, tol_invariance: float = 1e-9,
                       keep_samples: bool = False) -> AuditReport:
    report = AuditReport(n_samples=n_samples, seed=seed, params_digest=params.digest())
    if n_samples == 0:
        return report
    jets = sample_jets(n_samples, seed, ranges)
    direct = sigma_direct(jets, params)
    closed = sigma_closed(project_to_state_space(jets), params)
    redrawn = sigma_direct(rerandomize_higher(jets, seed, ranges), params)

    identity = rel_err(direct, closed)
    invariance = rel_err(redrawn, direct)
    bad_identity = identity > tol_identity
    bad_invariance = invariance > tol_invariance
    negative = closed < -tol_sign

    report.max_identity_error = float(identity.max())
    report.max_invariance_error = float(invariance.max())
    report.min_sigma = float(closed.min())
    report.n_identity_fail = int(bad_identity.sum())
    report.n_invariance_fail = int(bad_invariance.sum())
    report.n_negative = int(negative.sum())

    records = jets.to_record()
    failing = np.flatnonzero(bad_identity | bad_invariance | negative)
    for i in failing[:MAX_LISTED_FAILURES]:
        report.failures.append({
            "index": int(i), "sigma_direct": float(direct[i]), "sigma_closed": float(closed[i]),
            "identity_error": float(identity[i]), "invariance_error": float(invariance[i]),
            "jet": records[i].tolist(),
        })
    if keep_samples:
        report.samples = [{
            "index": i, "sigma_direct": float(direct[i]), "sigma_closed": float(closed[i]),
            "identity_error": float(identity[i]), "invariance_error": float(invariance[i]),
            "jet": records[i].tolist(),
        } for i in range(n_samples)]
    return report


# -- structural checks ----------------------------------------------------------


LOCALITY_FAMILIES = {
    "velocity_gradient": "v_g",
    "energy_gradient": "eps_g",
    "density_hessian": "rho_h",
    "concentration_hessian": "c_h",
}


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    max_error: float

    def to_dict(self):
        return dataclasses.asdict(self)


def _default_mass_flux(jet, params):
    return cst.fluxes(jet, params)[0]


def check_flux_locality(params: MaterialParams, n_samples: int = 32, seed: int = 0,
                        mass_flux: Callable = _default_mass_flux,
                        delta: float = 0.37) -> list[CheckResult]:
    """Confirm the mass flux ignores the slots the highest-derivative restrictions involve.

    Each slot entry of every family is shifted by ``delta`` in turn; any
    change of ``J^(m)`` is a violation.
    """
    jets = sample_jets(n_samples, seed)
    base = np.asarray(mass_flux(jets, params))
    results = []
    for name, slot in LOCALITY_FAMILIES.items():
        arr = getattr(jets, slot)
        worst = 0.0
        for pos in np.ndindex(arr.shape[1:]):
            bumped = np.array(arr)
            bumped[(slice(None),) + pos] += delta
            moved = np.asarray(mass_flux(jets.replace(**{slot: bumped}), params))
            worst = max(worst, float(np.max(np.abs(moved - base), initial=0.0)))
        results.append(CheckResult(name, worst <= 1e-14, worst))
    return results


@dataclass(frozen=True)
class ConcavityReport:
    eigenvalues: np.ndarray
    passed: bool
    tol: float = 1e-12


def check_entropy_concavity(rho, c, eps, params: MaterialParams, tol: float = 1e-12) -> ConcavityReport:
    """Eigenvalues of the gradient part of the entropy, ``[[s1, s2/2], [s2/2, s3]]``."""
    co = cst.entropy_coefficients(np.asarray(rho, dtype=float), np.asarray(c, dtype=float),
                                  np.asarray(eps, dtype=float), params)
    s1, s2, s3 = np.broadcast_arrays(co.s_hat1, co.s_hat2, co.s_hat3)
    M = np.stack([np.stack([s1, 0.5 * s2], -1), np.stack([0.5 * s2, s3], -1)], -2)
    eig = np.linalg.eigvalsh(M)
    return ConcavityReport(eig, bool(np.all(eig <= tol)), tol)


def check_concavity_grid(params: MaterialParams, n_rho: int = 512, n_c: int = 33,
                         eps: float = 1.0, tol: float = 1e-12) -> CheckResult:
    R, C = np.meshgrid(np.linspace(params.rho_min, params.rho_max, n_rho),
                       np.linspace(0.0, 1.0, n_c), indexing="ij")
    rep = check_entropy_concavity(R, C, np.full(R.shape, eps), params, tol)
    return CheckResult("entropy_concavity", rep.passed, float(rep.eigenvalues.max()))


def _fd(f, x, h):
    return (f(x + h) - f(x - h)) / (2.0 * h)


def check_multiplier_consistency(params: MaterialParams, n_samples: int = 64, seed: int = 7,
                                 h: float = 1e-5, rtol: float = 1e-6,
                                 ranges: JetRanges = JetRanges()) -> list[CheckResult]:
    """Analytic entropy partials against central differences of ``s``, slot by slot."""
    jets = sample_jets(n_samples, seed, ranges)
    part = cst.entropy_partials(jets, params)
    zero = np.zeros(n_samples)
    analytic = {
        "rho": lambda pos: part.s_rho,
        "c": lambda pos: part.s_c,
        "eps": lambda pos: np.broadcast_to(part.s_eps, (n_samples,)),
        "rho_g": lambda pos: part.s_grad_rho[(slice(None),) + pos],
        "c_g": lambda pos: part.s_grad_c[(slice(None),) + pos],
        "eps_g": lambda pos: zero,
        "v_g": lambda pos: zero,
        "rho_h": lambda pos: zero,
        "c_h": lambda pos: zero,
    }
    results = []
    for slot, exact in analytic.items():
        arr = getattr(jets, slot)
        worst = 0.0
        for pos in np.ndindex(arr.shape[1:]):
            def s_at(shift, pos=pos):
                bumped = np.array(arr)
                bumped[(slice(None),) + pos] += shift
                return cst.specific_entropy(jets.replace(**{slot: bumped}), params)
            numeric = _fd(s_at, 0.0, h)
            worst = max(worst, float(rel_err(exact(pos), numeric).max()))
        results.append(CheckResult(f"ds/d{slot}", worst <= rtol, worst))
    return results


def tau_identities(rho, c, eps, params: MaterialParams, h: float = 1e-5) -> dict:
    """Pairs (closed form, finite-difference form) for the nine entropy-based tau identities."""
    t = cst.stress_coefficients(rho, c, eps, params)
    theta = cst.temperature(eps, params)

    def coeff(r, cc, name):
        return getattr(cst.entropy_coefficients(r, cc, eps, params), name)

    co = cst.entropy_coefficients(rho, c, eps, params)
    drho = lambda f: (f(rho + h) - f(rho - h)) / (2 * h)  # noqa: E731
    dc = lambda f: (f(c + h) - f(c - h)) / (2 * h)  # noqa: E731
    r2 = rho * rho
    return {
        "tau0": (t[0], r2 * theta * drho(lambda r: coeff(r, c, "s_hat0"))),
        "tau1": (t[1], -theta * drho(lambda r: r * r * coeff(r, c, "s_hat1"))),
        "tau2": (t[2], -theta * (drho(lambda r: r * r * coeff(r, c, "s_hat2"))
                                 + r2 * dc(lambda cc: coeff(rho, cc, "s_hat1")))),
        "tau3": (t[3], -rho * theta * (rho * dc(lambda cc: coeff(rho, cc, "s_hat2")) + co.s_hat3)),
        "tau4": (t[4], -2.0 * r2 * theta * co.s_hat1),
        "tau5": (t[5], -r2 * theta * co.s_hat2),
        "tau7": (t[7], 2.0 * rho * theta * co.s_hat1),
        "tau8": (t[8], 2.0 * rho * theta * co.s_hat2),
        "tau9": (t[9], 2.0 * rho * theta * co.s_hat3),
    }


def check_tau_consistency(params: MaterialParams, n: int = 10, rtol: float = 1e-6,
                          ranges: JetRanges = JetRanges(), h: float = 1e-5) -> list[CheckResult]:
    R, C, E = np.meshgrid(np.linspace(*ranges.rho, n), np.linspace(*ranges.c, n),
                          np.linspace(*ranges.eps, n), indexing="ij")
    results = []
    for name, (closed, numeric) in tau_identities(R, C, E, params, h).items():
        err = float(rel_err(closed, numeric).max())
        results.append(CheckResult(name, err <= rtol, err))
    return results
