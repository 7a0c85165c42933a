"""Closed-form constitutive laws of the binary Korteweg-type mixture.

Everything here is written against a :class:`Kinematics` bundle whose entries
are either numpy arrays (pointwise evaluation on a :class:`StateJet`) or
:class:`~kortmix.taylor.Taylor` germs (field evaluation, used when the audit
needs divergences). The same code path serves both.

Sign conventions: the equilibrium pressure is ``p = -tau0`` and the viscous
trace ``tau6 * div(v)`` is kept separate from it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .jet import StateJet
from .material import DomainError, MaterialParams, eval_material
from .taylor import value_of


class Kinematics(NamedTuple):
    rho: object
    c: object
    eps: object
    grad_rho: object  # (..., 3)
    grad_c: object
    grad_eps: object
    hess_rho: object  # (..., 3, 3)
    hess_c: object
    grad_v: object  # (..., 3, 3), [i, j] = v_{i,j}


def kinematics(jet: StateJet) -> Kinematics:
    return Kinematics(jet.rho, jet.c, jet.eps, jet.rho_g, jet.c_g, jet.eps_g,
                      jet.rho_hess, jet.c_hess, jet.v_g)


def dot(a, b):
    return (a * b).sum(-1)


def trace(m):
    return m[..., 0, 0] + m[..., 1, 1] + m[..., 2, 2]


def outer(a, b):
    return a[..., :, None] * b[..., None, :]


def sym(m):
    return 0.5 * (m + m.swapaxes(-1, -2))


# -- entropy ----------------------------------------------------------------


@dataclass(frozen=True)
class EntropyCoeffs:
    s_hat0: object
    s_hat1: object
    s_hat2: object
    s_hat3: object
    J_rho: object
    J_c: object


def entropy_coefficients(rho, c, eps, params: MaterialParams) -> EntropyCoeffs:
    m = eval_material(rho, c, eps, params)
    s3 = params.s3
    s_hat3 = s3 / rho
    return EntropyCoeffs(
        s_hat0=m.s01 + m.J_c * m.s02 + m.s03,
        s_hat1=(m.J_rho * m.J_rho - params.kappa2 ** 2) / (m.J_c * m.J_c) * s_hat3 + m.dphi / rho,
        s_hat2=2.0 * m.x * s_hat3,
        s_hat3=s_hat3,
        J_rho=m.J_rho,
        J_c=m.J_c,
    )


@dataclass(frozen=True)
class EntropyDerivatives:
    """Analytic partials of the entropy coefficients in (rho, c, eps)."""

    ds0_drho: object
    ds0_dc: object
    ds0_deps: object
    d2s0_dc2: object
    d2s0_drho_dc: object
    d2s0_deps2: object
    ds1_drho: object
    ds1_dc: object
    ds2_drho: object
    ds2_dc: object
    ds3_drho: object
    ds3_dc: object


def entropy_coefficient_derivatives(rho, c, eps, params: MaterialParams) -> EntropyDerivatives:
    m = eval_material(rho, c, eps, params)
    k1, k2, s3 = params.kappa1, params.kappa2, params.s3
    Jr, Jc, x = m.J_rho, m.J_c, m.x
    # dx/dc = k1/Jc, dx/drho = k1 Jr/Jc^2
    B = (Jr * Jr - k2 ** 2) / (Jc * Jc)
    dB_drho = 2.0 * k1 * (Jr * Jr - k2 ** 2) / (Jc * Jc * Jc)
    dB_dc = 2.0 * k1 * Jr / (Jc * Jc)
    d2phi = params.d2phi(rho)
    return EntropyDerivatives(
        ds0_drho=-k1 * (m.s02 - x * m.ds02) + m.ds03,
        ds0_dc=k1 * m.ds02,
        ds0_deps=m.ds01,
        d2s0_dc2=k1 * k1 * m.d2s02 / Jc,
        d2s0_drho_dc=k1 * k1 * Jr * m.d2s02 / (Jc * Jc),
        d2s0_deps2=m.d2s01,
        ds1_drho=s3 * (dB_drho / rho - B / (rho * rho)) + d2phi / rho - m.dphi / (rho * rho),
        ds1_dc=s3 * dB_dc / rho,
        ds2_drho=2.0 * s3 * (k1 * Jr / (Jc * Jc * rho) - x / (rho * rho)),
        ds2_dc=2.0 * k1 * s3 / (Jc * rho),
        ds3_drho=-s3 / (rho * rho),
        ds3_dc=0.0 * rho,
    )


def _quadratic(coeffs: EntropyCoeffs, grad_rho, grad_c):
    return (coeffs.s_hat1 * dot(grad_rho, grad_rho) + coeffs.s_hat2 * dot(grad_rho, grad_c)
            + coeffs.s_hat3 * dot(grad_c, grad_c))


def specific_entropy(jet: StateJet, params: MaterialParams):
    coeffs = entropy_coefficients(jet.rho, jet.c, jet.eps, params)
    return coeffs.s_hat0 + _quadratic(coeffs, jet.rho_g, jet.c_g)


def temperature(eps, params: MaterialParams):
    """Absolute temperature from ``1/theta = ds01/deps``."""
    if np.any(value_of(eps) <= 0):
        raise DomainError("eps must be positive")
    return 1.0 / params.ds01(eps)


def heat_conductivity(rho, c, eps, params: MaterialParams):
    """Fourier conductivity ``k = -q * deps/dtheta`` (non-negative when q <= 0)."""
    m = eval_material(rho, c, eps, params)
    deps_dtheta = -(m.ds01 * m.ds01) / m.d2s01
    return -m.q * deps_dtheta


class EntropyPartials(NamedTuple):
    s_rho: object
    s_c: object
    s_eps: object
    s_grad_rho: object
    s_grad_c: object


def _entropy_partials(kin: Kinematics, params: MaterialParams) -> EntropyPartials:
    co = entropy_coefficients(kin.rho, kin.c, kin.eps, params)
    d = entropy_coefficient_derivatives(kin.rho, kin.c, kin.eps, params)
    pp = dot(kin.grad_rho, kin.grad_rho)
    pg = dot(kin.grad_rho, kin.grad_c)
    gg = dot(kin.grad_c, kin.grad_c)
    return EntropyPartials(
        s_rho=d.ds0_drho + d.ds1_drho * pp + d.ds2_drho * pg + d.ds3_drho * gg,
        s_c=d.ds0_dc + d.ds1_dc * pp + d.ds2_dc * pg + d.ds3_dc * gg,
        s_eps=d.ds0_deps,
        s_grad_rho=2.0 * co.s_hat1[..., None] * kin.grad_rho + co.s_hat2[..., None] * kin.grad_c,
        s_grad_c=co.s_hat2[..., None] * kin.grad_rho + 2.0 * co.s_hat3[..., None] * kin.grad_c,
    )


def entropy_partials(jet: StateJet, params: MaterialParams) -> EntropyPartials:
    """Partial derivatives of ``s`` with respect to its nonzero jet slots.

    The entropy ansatz does not depend on ``v_{i,j}``, ``eps_{,k}`` or the
    Hessians of rho and c, so those partials vanish identically.
    """
    return _entropy_partials(kinematics(jet), params)


# -- fluxes -----------------------------------------------------------------


def _mass_flux(kin: Kinematics, params: MaterialParams):
    m = eval_material(kin.rho, kin.c, kin.eps, params)
    return m.J_rho[..., None] * kin.grad_rho + m.J_c[..., None] * kin.grad_c


def _heat_flux(kin: Kinematics, params: MaterialParams):
    q = params.q_of(kin.rho, kin.c, kin.eps)
    return q[..., None] * kin.grad_eps


def fluxes(jet: StateJet, params: MaterialParams):
    """Diffusional mass flux and heat flux."""
    kin = kinematics(jet)
    return _mass_flux(kin, params), _heat_flux(kin, params)


# -- stress -----------------------------------------------------------------


@dataclass(frozen=True)
class StressCoeffs:
    tau: tuple  # tau[0] .. tau[12]

    def __getitem__(self, k):
        return self.tau[k]


def stress_coefficients(rho, c, eps, params: MaterialParams) -> StressCoeffs:
    m = eval_material(rho, c, eps, params)
    k1, k2, s3 = params.kappa1, params.kappa2, params.s3
    Jr, Jc, x = m.J_rho, m.J_c, m.x
    theta = 1.0 / m.ds01
    A = (Jr * Jr - k2 ** 2) / (Jc * Jc) * s3
    Jc_2k1rho = Jc + 2.0 * k1 * rho
    zero = 0.0 * rho
    tau = [
        rho * rho * theta * (-k1 * (m.s02 - x * m.ds02) + m.ds03),
        -theta * ((Jr * Jr - k2 ** 2) * Jc_2k1rho / (Jc * Jc * Jc) * s3 + m.d_rho_dphi),
        -2.0 * theta * Jr / (Jc * Jc) * Jc_2k1rho * s3,
        -theta * Jc_2k1rho / Jc * s3,
        -2.0 * rho * theta * (A + m.dphi),
        -2.0 * rho * theta * x * s3,
        m.tau6,
        2.0 * theta * (A + m.dphi),
        4.0 * theta * x * s3,
        2.0 * theta * s3,
        zero,
        zero,
        m.tau12,
    ]
    for k, val in params.tau_override.items():
        tau[int(k)] = zero + val
    return StressCoeffs(tuple(tau))


def _stress(kin: Kinematics, params: MaterialParams):
    t = stress_coefficients(kin.rho, kin.c, kin.eps, params)
    gr, gc = kin.grad_rho, kin.grad_c
    iso = (t[0] + t[1] * dot(gr, gr) + t[2] * dot(gr, gc) + t[3] * dot(gc, gc)
           + t[4] * trace(kin.hess_rho) + t[5] * trace(kin.hess_c) + t[6] * trace(kin.grad_v))

    def s(a):
        return a[..., None, None]

    return (s(iso) * np.eye(3) + s(t[7]) * outer(gr, gr) + s(t[8]) * sym(outer(gr, gc))
            + s(t[9]) * outer(gc, gc) + s(t[10]) * kin.hess_rho + s(t[11]) * kin.hess_c
            + s(t[12]) * sym(kin.grad_v))


def stress(jet: StateJet, params: MaterialParams):
    """Cauchy stress ``T_ij`` assembled from the thirteen-coefficient ansatz."""
    return _stress(kinematics(jet), params)


def korteweg_reduction(rho, eps, params: MaterialParams, c):
    """Korteweg material functions (alpha1, alpha2, alpha3, alpha4, p) at uniform c."""
    t = stress_coefficients(rho, c, eps, params)
    return t[1], t[4], t[7], t[10], -t[0]


# -- entropy flux -------------------------------------------------------------


def _entropy_flux(kin: Kinematics, params: MaterialParams):
    co = entropy_coefficients(kin.rho, kin.c, kin.eps, params)
    m = eval_material(kin.rho, kin.c, kin.eps, params)
    theta = 1.0 / m.ds01
    rho = kin.rho
    Jm = _mass_flux(kin, params)
    q = _heat_flux(kin, params)
    D = co.J_rho * trace(kin.hess_rho) + co.J_c * trace(kin.hess_c)
    div_v = trace(kin.grad_v)
    ds0_dc = params.kappa1 * m.ds02
    a = co.s_hat2 * D + 2.0 * rho * rho * co.s_hat1 * div_v
    b = 2.0 * co.s_hat3 * D + rho * rho * co.s_hat2 * div_v
    return (q / theta[..., None] + ds0_dc[..., None] * Jm + a[..., None] * kin.grad_rho
            + b[..., None] * kin.grad_c)


def entropy_flux(jet: StateJet, params: MaterialParams):
    return _entropy_flux(kinematics(jet), params)


@dataclass(frozen=True)
class FluxSet:
    Jm: np.ndarray
    q: np.ndarray
    T: np.ndarray
    Js: np.ndarray


def flux_set(jet: StateJet, params: MaterialParams) -> FluxSet:
    kin = kinematics(jet)
    return FluxSet(_mass_flux(kin, params), _heat_flux(kin, params),
                   _stress(kin, params), _entropy_flux(kin, params))


# -- Lagrange multipliers -----------------------------------------------------


@dataclass(frozen=True)
class Multipliers:
    lam1: np.ndarray
    lam2: np.ndarray
    lam3: np.ndarray
    lam4: np.ndarray
    Lam1: np.ndarray
    Lam2: np.ndarray
    Lam3: np.ndarray
    Lam4: np.ndarray
    Th1: np.ndarray
    Th2: np.ndarray


def lagrange_multipliers(jet: StateJet, params: MaterialParams) -> Multipliers:
    """Multipliers of the balance laws and their gradient extensions.

    Under the entropy ansatz every partial of ``s`` with respect to
    ``v_{i,k}``, ``eps_{,k}``, ``rho_{,ik}`` and ``c_{,ik}`` is zero, which
    leaves ``lam3``, ``Lam3``, ``Lam4``, ``Th1`` and ``Th2`` identically zero.
    """
    part = entropy_partials(jet, params)
    rho = jet.rho
    batch = jet.batch_shape
    zeros3, zeros33 = np.zeros(batch + (3,)), np.zeros(batch + (3, 3))
    Lam2 = part.s_grad_c
    return Multipliers(
        lam1=rho * part.s_rho,
        lam2=part.s_c - dot(jet.rho_g, Lam2) / rho,
        lam3=zeros3,
        lam4=np.asarray(part.s_eps, dtype=float),
        Lam1=rho[..., None] * part.s_grad_rho,
        Lam2=Lam2,
        Lam3=zeros33,
        Lam4=zeros3,
        Th1=zeros33,
        Th2=zeros33,
    )
