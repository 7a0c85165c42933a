"""Periodic 1-D finite-difference solver for the mixture balance laws.

Nodes carry primitive fields (rho, c, v, eps). Central differences give the
x-derivatives at every node, which seed univariate Taylor germs. The stress
coefficients, mass flux and heat flux are evaluated on those germs by the
audited constitutive laws, and only the 1-D components (T11, J1, q1) are
assembled. :func:`spatial_jets` lifts the same nodes to full 3-D jets, so
:func:`kortmix.audit.time_derivatives` serves as a reference right-hand side.
The discretization is not in conservation form; the integral totals are
monitored, not enforced.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import constitutive as cst
from .audit import sigma_closed, time_derivatives
from .jet import StateJet
from .material import DomainError, MaterialParams, eval_material
from .taylor import Taylor

# central stencils: offset -> weight, scaled by dx**order
_STENCILS = {
    2: {
        1: {1: 0.5, -1: -0.5},
        2: {1: 1.0, 0: -2.0, -1: 1.0},
        3: {2: 0.5, 1: -1.0, -1: 1.0, -2: -0.5},
    },
    4: {
        1: {2: -1 / 12, 1: 8 / 12, -1: -8 / 12, -2: 1 / 12},
        2: {2: -1 / 12, 1: 16 / 12, 0: -30 / 12, -1: 16 / 12, -2: -1 / 12},
        3: {3: -1 / 8, 2: 1.0, 1: -13 / 8, -1: 13 / 8, -2: -1.0, -3: 1 / 8},
    },
}


class SolverAbort(RuntimeError):
    """Numerical instability or invariant violation; carries the last good state."""

    def __init__(self, message, grid=None, t=None, step=None):
        super().__init__(message)
        self.grid = grid
        self.t = t
        self.step = step


@dataclass(frozen=True, eq=False)
class Grid1D:
    L: float
    rho: np.ndarray
    c: np.ndarray
    v: np.ndarray
    eps: np.ndarray

    def __post_init__(self):
        for name in ("rho", "c", "v", "eps"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.N < 8:
            raise ValueError("Grid1D needs N >= 8")

    @property
    def N(self) -> int:
        return self.rho.shape[0]

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.N) * self.dx

    def fields(self):
        return np.stack([self.rho, self.c, self.v, self.eps])

    def with_fields(self, f) -> "Grid1D":
        return Grid1D(self.L, f[0], f[1], f[2], f[3])

    def violations(self) -> list[str]:
        out = []
        f = self.fields()
        if not np.all(np.isfinite(f)):
            out.append("non-finite field values")
            return out
        if np.any(self.rho <= 0):
            out.append("rho <= 0")
        if np.any(self.eps <= 0):
            out.append("eps <= 0")
        if np.any((self.c < 0) | (self.c > 1)):
            out.append("c outside [0, 1]")
        return out


def derivative(f, dx: float, k: int, order: int = 2) -> np.ndarray:
    """k-th periodic central difference (k = 1, 2, 3) of the given accuracy order."""
    stencil = _STENCILS[order][k]
    out = np.zeros_like(f)
    for offset, w in stencil.items():
        out += w * np.roll(f, -offset)
    return out / dx ** k


def spatial_jets(grid: Grid1D, order: int = 2) -> StateJet:
    N, dx = grid.N, grid.dx

    def d(f, k):
        return derivative(f, dx, k, order)

    def vec(x):
        out = np.zeros((N, 3))
        out[:, 0] = x
        return out

    def packed(x, size):
        out = np.zeros((N, size))
        out[:, 0] = x
        return out

    v_g = np.zeros((N, 3, 3))
    v_g[:, 0, 0] = d(grid.v, 1)
    v_h = np.zeros((N, 3, 6))
    v_h[:, 0, 0] = d(grid.v, 2)
    return StateJet(
        rho=grid.rho, rho_g=vec(d(grid.rho, 1)), rho_h=packed(d(grid.rho, 2), 6),
        rho_t3=packed(d(grid.rho, 3), 10),
        c=grid.c, c_g=vec(d(grid.c, 1)), c_h=packed(d(grid.c, 2), 6),
        c_t3=packed(d(grid.c, 3), 10),
        eps=grid.eps, eps_g=vec(d(grid.eps, 1)), eps_h=packed(d(grid.eps, 2), 6),
        v=vec(grid.v), v_g=v_g, v_h=v_h,
    )


_FACTORIALS = (1.0, 1.0, 2.0, 6.0)


def _germ(*derivs) -> Taylor:
    # univariate germ from the node values and their first x-derivatives
    coeffs = np.zeros(derivs[0].shape + (len(_FACTORIALS),))
    for k, f in enumerate(derivs):
        coeffs[..., k] = f / _FACTORIALS[k]
    return Taylor(coeffs)


def _rhs_1d(grid: Grid1D, params: MaterialParams, order: int) -> np.ndarray:
    dx = grid.dx
    rho, c, v, eps = grid.rho, grid.c, grid.v, grid.eps
    rx, cx, ex, vx = (derivative(f, dx, 1, order) for f in (rho, c, eps, v))
    P = _germ(rho, rx, derivative(rho, dx, 2, order), derivative(rho, dx, 3, order))
    C = _germ(c, cx, derivative(c, dx, 2, order), derivative(c, dx, 3, order))
    E = _germ(eps, ex, derivative(eps, dx, 2, order))
    V = _germ(v, vx, derivative(v, dx, 2, order))
    Px, Cx, Ex, Vx = P.diff(0), C.diff(0), E.diff(0), V.diff(0)

    t = cst.stress_coefficients(P, C, E, params)
    T11 = (t[0] + (t[1] + t[7]) * Px * Px + (t[2] + t[8]) * Px * Cx + (t[3] + t[9]) * Cx * Cx
           + (t[4] + t[10]) * Px.diff(0) + (t[5] + t[11]) * Cx.diff(0) + (t[6] + t[12]) * Vx)
    m = eval_material(P, C, E, params)
    J = m.J_rho * Px + m.J_c * Cx
    q = params.q_of(P, C, E) * Ex

    rho_t = -(rx * v + rho * vx)
    c_t = -v * cx - J.diff(0).value / rho
    v_t = T11.diff(0).value / rho - v * vx
    eps_t = -v * ex + (T11.value * vx - q.diff(0).value) / rho
    return np.stack([rho_t, c_t, v_t, eps_t])


def reference_rhs(grid: Grid1D, params: MaterialParams, order: int = 2) -> np.ndarray:
    """Right-hand side through the general 3-D balance-law evaluation (slower)."""
    tj = time_derivatives(spatial_jets(grid, order), params)
    return np.stack([tj.rho_t, tj.c_t, tj.v_t[:, 0], tj.eps_t])


def rhs(grid: Grid1D, params: MaterialParams, order: int = 2) -> np.ndarray:
    """Time derivatives stacked as (rho_t, c_t, v_t, eps_t)."""
    try:
        out = _rhs_1d(grid, params, order)
    except DomainError as exc:
        raise SolverAbort(f"material domain left: {exc}", grid) from exc
    if not np.all(np.isfinite(out)):
        raise SolverAbort("non-finite right-hand side", grid)
    return out


def _checked(grid: Grid1D, f) -> Grid1D:
    new = grid.with_fields(f)
    bad = new.violations()
    if bad:
        raise SolverAbort("invariant violation: " + ", ".join(bad), grid)
    return new


def step_rk4(grid: Grid1D, dt: float, params: MaterialParams, order: int = 2) -> Grid1D:
    """One classical four-stage Runge-Kutta step; aborts if any stage state is invalid."""
    u0 = grid.fields()
    k1 = rhs(grid, params, order)
    g = _checked(grid, u0 + 0.5 * dt * k1)
    k2 = rhs(g, params, order)
    g = _checked(grid, u0 + 0.5 * dt * k2)
    k3 = rhs(g, params, order)
    g = _checked(grid, u0 + dt * k3)
    k4 = rhs(g, params, order)
    return _checked(grid, u0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))


# -- time step ------------------------------------------------------------------


@dataclass(frozen=True)
class StepBounds:
    safety: float = 0.25
    advective: float = 1.0
    viscous: float = 1.6
    dispersive: float = 4.0


def sound_speed(rho, c, eps, params: MaterialParams, h: float = 1e-6):
    """Isentropic sound speed from p = -tau0 (finite differences in rho and eps)."""
    def p(r, e):
        return -cst.stress_coefficients(r, c, e, params)[0]
    p0 = p(rho, eps)
    dp_drho = (p(rho + h, eps) - p(rho - h, eps)) / (2 * h)
    dp_deps = (p(rho, eps + h) - p(rho, eps - h)) / (2 * h)
    return np.sqrt(np.maximum(dp_drho + dp_deps * p0 / rho ** 2, 0.0))


def stable_dt(grid: Grid1D, params: MaterialParams, bounds: StepBounds = StepBounds()) -> float:
    """``safety * min(dx/a, dx^2/nu, dx^3/beta)`` from the current state."""
    rho, c, eps, dx = grid.rho, grid.c, grid.eps, grid.dx
    a = np.max(np.abs(grid.v) + sound_speed(rho, c, eps, params))
    t = cst.stress_coefficients(rho, c, eps, params)
    nu = np.max(np.maximum.reduce([
        np.abs(t[6] + t[12]) / rho,
        np.abs(params.J_c(rho)) / rho,
        np.abs(params.q_of(rho, c, eps)) / rho,
    ]))
    beta = np.max((np.abs(t[4]) + np.abs(t[5])) / rho)
    limits = [bounds.advective * dx / a if a > 0 else np.inf,
              bounds.viscous * dx ** 2 / nu if nu > 0 else np.inf,
              bounds.dispersive * dx ** 3 / beta if beta > 0 else np.inf]
    dt = bounds.safety * min(limits)
    if not np.isfinite(dt):
        raise SolverAbort("no finite time-step bound", grid)
    return float(dt)


# -- diagnostics ---------------------------------------------------------------


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    M: float
    Mc: float
    P: float
    E: float
    S: float
    min_sigma: float
    dt: float

    def to_dict(self):
        return dataclasses.asdict(self)


def node_fields(grid: Grid1D, params: MaterialParams, order: int = 2):
    """Per-node specific entropy, temperature and closed-form entropy production."""
    jets = spatial_jets(grid, order)
    s = cst.specific_entropy(jets, params)
    theta = cst.temperature(grid.eps, params)
    sigma = sigma_closed(jets, params)
    return s, theta, sigma


def diagnostics(grid: Grid1D, params: MaterialParams, t: float = 0.0, dt: float = 0.0,
                order: int = 2) -> DiagnosticsRecord:
    s, _, sigma = node_fields(grid, params, order)
    dx, rho, v = grid.dx, grid.rho, grid.v
    return DiagnosticsRecord(
        t=float(t),
        M=float(np.sum(rho) * dx),
        Mc=float(np.sum(rho * grid.c) * dx),
        P=float(np.sum(rho * v) * dx),
        E=float(np.sum(rho * (grid.eps + 0.5 * v * v)) * dx),
        S=float(np.sum(rho * s) * dx),
        min_sigma=float(np.min(sigma)),
        dt=float(dt),
    )


# -- initial conditions ----------------------------------------------------------


@dataclass(frozen=True)
class InitialCondition:
    profile: str = "density_bump"
    amplitude: float = 1e-3
    width: float = 1.0
    mode: int = 1
    rho0: float = 1.0
    c0: float = 0.5
    v0: float = 0.0
    eps0: float = 2.0


PROFILES = ("constant", "density_bump", "concentration_sine", "density_sine")


def initial_grid(N: int, L: float, ic: InitialCondition) -> Grid1D:
    x = np.arange(N) * (L / N)
    one = np.ones(N)
    rho, c, v, eps = ic.rho0 * one, ic.c0 * one, ic.v0 * one, ic.eps0 * one
    if ic.profile == "constant":
        pass
    elif ic.profile == "density_bump":
        rho = ic.rho0 * (1.0 + ic.amplitude * np.exp(-((x - 0.5 * L) / ic.width) ** 2))
    elif ic.profile == "concentration_sine":
        c = ic.c0 + ic.amplitude * np.sin(2 * np.pi * ic.mode * x / L)
    elif ic.profile == "density_sine":
        rho = ic.rho0 * (1.0 + ic.amplitude * np.sin(2 * np.pi * ic.mode * x / L))
    else:
        raise ValueError(f"unknown profile {ic.profile!r}; expected one of {PROFILES}")
    return Grid1D(L, rho, c, v, eps)


# -- driver -------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverSettings:
    N: int = 256
    L: float = 16.0
    t_end: float = 1.0
    n_steps: int = 0
    order: int = 2
    diag_every: int = 10
    snapshot_every: int = 0
    bounds: StepBounds = StepBounds()
    initial: InitialCondition = InitialCondition()


@dataclass
class RunResult:
    grid: Grid1D
    t: float
    steps: int
    records: list = field(default_factory=list)
    min_entropy_change: float = 0.0


def run(settings: SolverSettings, params: MaterialParams,
        on_record: Callable[[DiagnosticsRecord], None] | None = None,
        on_snapshot: Callable[[int, float, Grid1D], None] | None = None) -> RunResult:
    """Integrate to ``t_end`` (or exactly ``n_steps`` steps).

    Diagnostics are emitted at step 0, every ``diag_every`` steps and at the
    end; the per-step entropy change is tracked for the H-theorem check.
    Raises :class:`SolverAbort` on instability.
    """
    order = settings.order
    grid = initial_grid(settings.N, settings.L, settings.initial)
    bad = grid.violations()
    if bad:
        raise SolverAbort("invalid initial state: " + ", ".join(bad), grid, 0.0, 0)
    result = RunResult(grid=grid, t=0.0, steps=0)

    def emit(rec):
        result.records.append(rec)
        if on_record is not None:
            on_record(rec)

    rec = diagnostics(grid, params, 0.0, 0.0, order)
    emit(rec)
    if on_snapshot is not None:
        on_snapshot(0, 0.0, grid)
    S_prev = rec.S
    min_dS = np.inf
    t, step = 0.0, 0
    by_steps = settings.n_steps > 0
    while (step < settings.n_steps) if by_steps else (t < settings.t_end * (1 - 1e-14)):
        dt = stable_dt(grid, params, settings.bounds)
        if not by_steps:
            remaining = settings.t_end - t
            # split the tail evenly instead of finishing on a sliver step
            dt = remaining if remaining <= dt else min(dt, 0.5 * remaining)
        try:
            grid = step_rk4(grid, dt, params, order)
        except SolverAbort as exc:
            raise SolverAbort(str(exc), result.grid, t, step) from exc
        t += dt
        step += 1
        result.grid, result.t, result.steps = grid, t, step
        done = (step >= settings.n_steps) if by_steps else (t >= settings.t_end * (1 - 1e-14))
        rec = diagnostics(grid, params, t, dt, order)
        min_dS = min(min_dS, rec.S - S_prev)
        result.min_entropy_change = float(min_dS)
        S_prev = rec.S
        if step % settings.diag_every == 0 or done:
            emit(rec)
        if on_snapshot is not None and settings.snapshot_every > 0 and (
                step % settings.snapshot_every == 0 or done):
            on_snapshot(step, t, grid)
    if on_snapshot is not None and settings.snapshot_every == 0:
        on_snapshot(step, t, grid)
    return result
