"""Time integration of the viscous approximate system on [-L, L].

Two equivalent formulations are provided.  The velocity form advances

    d_t rho + d_x(rho u) = 0
    d_t(rho u) + d_x(rho u^2) - d_x(lambda(rho) d_x u) = 0

with conservative first-order upwind fluxes and the diffusion term implicit
in u (lambda frozen at the old time level), so the time step is restricted
only by the advective CFL condition.  The (rho, w) form advances

    d_t rho + d_x(rho w) = d_x(rho d_x p(rho))
    d_t(rho w) + d_x(rho w u) = 0,       u = w - D_c p(rho)

with the nonlinear diffusion treated by one Picard sweep (coefficient
rho p'(rho) frozen).  Ghost cells carry rho = rho_bar and the datum's
far-field velocity on each side; data must be flat near the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

from . import constitutive as laws
from . import monitors
from .constitutive import Params
from .grid import DomainError, GridField, centered_diff, l1_norm

EPS_U = 1e-8          # velocity floor in the CFL formula
FLATNESS_TOL = 1e-10  # required closeness to the far field in the outer 10%

INITIAL_KINDS = ("equilibrium", "congested_bump", "opposing_streams",
                 "counterexample_trunc")


class AdmissibilityError(ValueError):
    """Initial datum violates one of the admissibility bounds."""


class StepSizeError(ValueError):
    """Requested dt violates the advective CFL cap."""


class MonitorError(RuntimeError):
    """A hard runtime invariant failed during a run."""

    def __init__(self, step: int, invariant: str):
        self.step = step
        self.invariant = invariant
        super().__init__(f"invariant '{invariant}' failed at step {step}")


@dataclass(frozen=True)
class FluidState:
    """Grid samples of (rho, u) at one time instant; rho > 0 pointwise."""

    t: float
    rho: GridField
    u: GridField

    def __post_init__(self):
        if len(self.rho) != len(self.u) or self.rho.h != self.u.h:
            raise DomainError("rho and u must share a grid")
        if np.any(self.rho.values <= 0):
            i = int(np.flatnonzero(self.rho.values <= 0)[0])
            raise DomainError(f"density {self.rho.values[i]} at cell {i} not positive")


@dataclass
class Trajectory:
    """Snapshots at the requested output times, all on one grid."""

    params: Params
    times: list[float]
    states: list[FluidState]

    def __post_init__(self):
        if any(t2 <= t1 for t1, t2 in zip(self.times, self.times[1:])):
            raise DomainError("snapshot times must be strictly increasing")


def _ghost_velocity(u: np.ndarray) -> tuple[float, float]:
    """Far-field velocity per side, read from the (flat) edge cells."""
    return float(u[0]), float(u[-1])


def _upwind_fluxes(q: np.ndarray, u_face: np.ndarray, q_left: float,
                   q_right: float) -> np.ndarray:
    """First-order upwind fluxes of quantity q at the N+1 faces.

    q_left/q_right are the ghost values supplying inflow states.
    """
    q_ext = np.concatenate(([q_left], q, [q_right]))
    return np.where(u_face > 0.0, u_face * q_ext[:-1], u_face * q_ext[1:])


def _check_cfl(dt: float, umax: float, params: Params) -> None:
    cap = params.cfl * params.h / max(umax, EPS_U)
    if dt > cap * (1.0 + 1e-9):
        raise StepSizeError(f"dt = {dt} exceeds CFL cap {cap}")


def _implicit_diffusion(mass: np.ndarray, rhs: np.ndarray, coef_face: np.ndarray,
                        dt: float, h: float, bc: tuple[float, float]) -> np.ndarray:
    """Solve (mass - dt D coef D) q = rhs with Dirichlet ghost values bc.

    Symmetric positive definite for coef >= 0 (asserted), so a banded
    Cholesky solve applies.
    """
    if np.any(coef_face < 0):
        raise DomainError("negative diffusion coefficient breaks diagonal dominance")
    c = dt / h**2
    n = mass.size
    ab = np.zeros((2, n))
    ab[0, 1:] = -c * coef_face[1:-1]
    ab[1, :] = mass + c * (coef_face[:-1] + coef_face[1:])
    b = rhs.copy()
    b[0] += c * coef_face[0] * bc[0]
    b[-1] += c * coef_face[-1] * bc[1]
    return solveh_banded(ab, b)


def _step_velocity(state: FluidState, params: Params, dt: float,
                   u_bc: tuple[float, float] | None = None):
    """One velocity-form step.

    Returns (new_state, mass_influx, dissipation_increment, entropy_production).
    """
    rho, u, h = state.rho.values, state.u.values, params.h
    _check_cfl(dt, float(np.max(np.abs(u))), params)
    if u_bc is None:
        u_bc = _ghost_velocity(u)

    u_ext = np.concatenate(([u_bc[0]], u, [u_bc[1]]))
    u_face = 0.5 * (u_ext[:-1] + u_ext[1:])

    # continuity: conservative upwind flux rho u
    F = _upwind_fluxes(rho, u_face, params.rho_bar, params.rho_bar)
    rho_new = rho - dt / h * np.diff(F)

    # momentum advection: conservative upwind flux (rho u) u
    m = rho * u
    G = _upwind_fluxes(m, u_face, params.rho_bar * u_bc[0], params.rho_bar * u_bc[1])
    u_star = (m - dt / h * np.diff(G)) / rho_new

    # implicit diffusion, lambda frozen at the old time level
    lam = laws.viscosity(state.rho, params.gamma).values
    lam_bar = params.gamma * params.rho_bar ** (params.gamma + 1.0)
    lam_ext = np.concatenate(([lam_bar], lam, [lam_bar]))
    lam_face = 0.5 * (lam_ext[:-1] + lam_ext[1:])
    u_new = _implicit_diffusion(rho_new, rho_new * u_star, lam_face, dt, h, u_bc)

    new = FluidState(state.t + dt, state.rho.with_values(rho_new),
                     state.u.with_values(u_new))
    influx = dt * (F[0] - F[-1])
    grad_new = centered_diff(new.u).values
    diss = 2.0 * dt * float(np.sum(lam * grad_new**2) * h)
    # boundary work of the truncated domain: advected kinetic energy plus
    # viscous traction, both vanish for data with zero far-field velocity
    S_flux = _upwind_fluxes(m * u, u_face, params.rho_bar * u_bc[0] ** 2,
                            params.rho_bar * u_bc[1] ** 2)
    work = dt * (S_flux[0] - S_flux[-1]) + dt * 2.0 * (
        lam_face[-1] * u_bc[1] * (u_bc[1] - u_new[-1]) / h
        - lam_face[0] * u_bc[0] * (u_new[0] - u_bc[0]) / h)
    # discrete balance of the entropy rho S(u), S = u^2; its positive part
    # measures violation of the entropy inequality by the step
    production = (float(np.sum(rho_new * u_new**2 - rho * u**2)) * h
                  + dt * (S_flux[-1] - S_flux[0])) / dt
    return new, influx, diss, max(0.0, production), work


def _step_rw(rho_f: GridField, w_f: GridField, params: Params, dt: float,
             u_bc: tuple[float, float] | None = None):
    """One (rho, w)-form step.  Returns (rho_new, w_new, mass_influx)."""
    rho, w, h = rho_f.values, w_f.values, params.h
    u = laws.actual_velocity(rho_f, w_f, params.gamma).values
    _check_cfl(dt, float(np.max(np.abs(u))), params)
    if u_bc is None:
        u_bc = _ghost_velocity(u)
    w_bc = u_bc  # d_x p vanishes in the flat far field

    u_ext = np.concatenate(([u_bc[0]], u, [u_bc[1]]))
    u_face = 0.5 * (u_ext[:-1] + u_ext[1:])
    w_ext = np.concatenate(([w_bc[0]], w, [w_bc[1]]))
    w_face = 0.5 * (w_ext[:-1] + w_ext[1:])

    # continuity: upwind flux rho w plus implicit diffusion d_x(rho p'(rho) d_x rho)
    F = _upwind_fluxes(rho, w_face, params.rho_bar, params.rho_bar)
    rho_adv = rho - dt / h * np.diff(F)
    k = rho * laws.offset_slope(rho_f, params.gamma).values  # rho p'(rho), frozen
    k_bar = params.gamma * params.rho_bar**params.gamma
    k_ext = np.concatenate(([k_bar], k, [k_bar]))
    k_face = 0.5 * (k_ext[:-1] + k_ext[1:])
    rho_new = _implicit_diffusion(np.ones_like(rho), rho_adv, k_face, dt, h,
                                  (params.rho_bar, params.rho_bar))

    # desired momentum: conservative upwind flux (rho w) u
    mw = rho * w
    G = _upwind_fluxes(mw, u_face, params.rho_bar * w_bc[0], params.rho_bar * w_bc[1])
    w_new = (mw - dt / h * np.diff(G)) / rho_new

    influx = dt * (F[0] - F[-1]) + dt / h * (
        k_face[0] * (params.rho_bar - rho_new[0])
        + k_face[-1] * (params.rho_bar - rho_new[-1])
    )

    # informational energy accounting from the derived velocity
    rho_nf = rho_f.with_values(rho_new)
    u_new = laws.actual_velocity(rho_nf, w_f.with_values(w_new), params.gamma).values
    lam = laws.viscosity(rho_f, params.gamma).values
    grad_new = centered_diff(GridField(u_new, h)).values
    diss = 2.0 * dt * float(np.sum(lam * grad_new**2) * h)
    S_flux = _upwind_fluxes(rho * u * u, u_face, params.rho_bar * u_bc[0] ** 2,
                            params.rho_bar * u_bc[1] ** 2)
    lam_bar = params.gamma * params.rho_bar ** (params.gamma + 1.0)
    work = dt * (S_flux[0] - S_flux[-1]) + dt * 2.0 * (
        lam_bar * u_bc[1] * (u_bc[1] - u_new[-1]) / h
        - lam_bar * u_bc[0] * (u_new[0] - u_bc[0]) / h)
    return rho_nf, w_f.with_values(w_new), influx, diss, work


def step_velocity_form(state: FluidState, params: Params, dt: float) -> FluidState:
    """Advance the (rho, u) formulation by one step of size dt."""
    return _step_velocity(state, params, dt)[0]


def step_rw_form(state_rw: tuple[GridField, GridField], params: Params,
                 dt: float) -> tuple[GridField, GridField]:
    """Advance the (rho, w) formulation by one step of size dt."""
    rho, w = _step_rw(state_rw[0], state_rw[1], params, dt)[:2]
    return rho, w


def run(initial: FluidState, params: Params,
        output_times: list[float] | None = None,
        formulation: str = "velocity",
        extra_monitors: tuple = (),
        max_steps: int = 1_000_000) -> tuple[Trajectory, list[monitors.DiagnosticsRecord]]:
    """Advance the datum to T with adaptive dt = cfl h / max|u|.

    Diffusion is implicit, so no parabolic dt restriction applies.  Every step
    appends a DiagnosticsRecord; snapshots are emitted at output_times (the
    horizon T is always included).  extra_monitors are callables
    (step_index, state, record) that may raise MonitorError.
    """
    if formulation not in ("velocity", "rw"):
        raise ValueError(f"unknown formulation {formulation!r}")
    h = params.h
    targets = sorted(set(output_times or []) | {params.T})
    if any(t < 0 or t > params.T for t in targets):
        raise DomainError("output times must lie in [0, T]")

    init = monitors.InitialSummary.from_state(initial, params)
    u_bc = _ghost_velocity(initial.u.values)
    e_diss = 0.0
    influx_total = 0.0
    entropy_pos = 0.0
    e_boundary = 0.0
    record0 = monitors.record_for_state(initial, params, init, e_diss,
                                        influx_total, entropy_pos, e_boundary)
    records = [record0]

    times: list[float] = []
    states: list[FluidState] = []
    if targets and targets[0] == 0.0:
        targets = targets[1:]
        times.append(0.0)
        states.append(initial)
    if params.T == 0.0:
        if not states:
            times.append(0.0)
            states.append(initial)
        return Trajectory(params, times, states), records

    state = initial
    rho_w: tuple[GridField, GridField] | None = None
    if formulation == "rw":
        rho_w = (state.rho, laws.desired_velocity(state.rho, state.u, params.gamma))

    t = 0.0
    step = 0
    ti = 0
    while ti < len(targets):
        if step >= max_steps:
            raise MonitorError(step, "max_steps exceeded")
        step += 1
        if formulation == "velocity":
            umax = float(np.max(np.abs(state.u.values)))
        else:
            u_now = laws.actual_velocity(rho_w[0], rho_w[1], params.gamma)
            umax = float(np.max(np.abs(u_now.values)))
        dt = min(params.cfl * h / max(umax, EPS_U), targets[ti] - t)
        try:
            if formulation == "velocity":
                state, influx, diss, prod, work = _step_velocity(state, params, dt, u_bc)
            else:
                rho_new, w_new, influx, diss, work = _step_rw(
                    rho_w[0], rho_w[1], params, dt, u_bc)
                rho_w = (rho_new, w_new)
                u_new = laws.actual_velocity(rho_new, w_new, params.gamma)
                state = FluidState(t + dt, rho_new, u_new)
                prod = 0.0
        except DomainError as exc:
            raise MonitorError(step, str(exc)) from exc
        t += dt
        e_diss += diss
        influx_total += influx
        entropy_pos = max(entropy_pos, prod)
        e_boundary += work
        record = monitors.record_for_state(state, params, init, e_diss,
                                           influx_total, entropy_pos, e_boundary)
        records.append(record)
        for mon in extra_monitors:
            mon(step, state, record)
        if t >= targets[ti] - 1e-13:
            times.append(targets[ti])
            states.append(state)
            ti += 1
    return Trajectory(params, times, states), records


@dataclass(frozen=True)
class AdmissibilityCheck:
    name: str
    passed: bool
    measured: float
    bound: float


@dataclass(frozen=True)
class AdmissibilityReport:
    """Measured admissibility quantities of a datum and per-condition verdicts."""

    checks: tuple[AdmissibilityCheck, ...]
    r0_measured: float
    M0_measured: float

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> AdmissibilityCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate_initial(state: FluidState, params: Params) -> AdmissibilityReport:
    """Report-only admissibility audit of a datum against the uniform bounds.

    Measures r0 = min rho0 and M0 = max W(rho0, w0) and checks

      A1rho   r0 <= rho0 <= (1 + C)^(1/(gamma+1))
      A2mom   |rho0 u0|_L1 + |rho0 w0|_L1 <= C
      A3A     sup lambda(rho0) D_c u0 <= gamma / (M0 T + 1/r0)^(gamma+1)
      A4uLinf |u0|_inf <= C

    The declared params.r0 / params.M0 enter the A3A bound; measured values
    are reported alongside.
    """
    rho, u = state.rho, state.u
    w = laws.desired_velocity(rho, u, params.gamma)
    r0_meas = float(np.min(rho.values))
    M0_meas = float(np.max(laws.transported_potential(rho, w).values))

    rho_max = float(np.max(rho.values))
    a1 = AdmissibilityCheck("A1rho", params.r0 <= r0_meas + 1e-12
                            and rho_max <= params.rho_cap + 1e-12,
                            rho_max, params.rho_cap)
    mom = l1_norm(GridField(rho.values * u.values, rho.h)) + \
        l1_norm(GridField(rho.values * w.values, rho.h))
    a2 = AdmissibilityCheck("A2mom", mom <= params.C_mom, mom, params.C_mom)
    v_sup = float(np.max(laws.active_potential(rho, u, params.gamma).values))
    a3_bound = params.gamma / (params.M0 * params.T + 1.0 / params.r0) ** (params.gamma + 1.0)
    a3 = AdmissibilityCheck("A3A", v_sup <= a3_bound, v_sup, a3_bound)
    u_sup = float(np.max(np.abs(u.values)))
    a4 = AdmissibilityCheck("A4uLinf", u_sup <= params.C_mom, u_sup, params.C_mom)
    declared = AdmissibilityCheck("declared_M0", M0_meas <= params.M0 + 1e-8,
                                  M0_meas, params.M0)
    return AdmissibilityReport((a1, a2, a3, a4, declared), r0_meas, M0_meas)


def _check_flatness(state: FluidState, params: Params) -> None:
    n_outer = max(1, params.N // 10)
    rho, u = state.rho.values, state.u.values
    for sl in (slice(0, n_outer), slice(params.N - n_outer, params.N)):
        if np.max(np.abs(rho[sl] - params.rho_bar)) > FLATNESS_TOL:
            raise AdmissibilityError(
                "datum not flat near the boundary: rho deviates from rho_bar "
                f"by {np.max(np.abs(rho[sl] - params.rho_bar)):.3e} in the outer 10% "
                "(increase L)")
        edge = u[sl][0] if sl.start == 0 else u[sl][-1]
        if np.max(np.abs(u[sl] - edge)) > FLATNESS_TOL:
            raise AdmissibilityError(
                "datum not flat near the boundary: u varies by "
                f"{np.max(np.abs(u[sl] - edge)):.3e} in the outer 10% (increase L)")


def _check_bounds(state: FluidState, params: Params) -> None:
    # (A2mom) and (A3A) are horizon/shape-coupled integral bounds; they are
    # measured by validate_initial's report instead of raised here.
    rep = validate_initial(state, params)
    for name in ("A1rho", "A4uLinf"):
        c = rep.check(name)
        if not c.passed:
            raise AdmissibilityError(
                f"initial datum violates ({name}): measured {c.measured:.6g} "
                f"vs bound {c.bound:.6g}")
    _check_flatness(state, params)


def make_initial(kind: str, params: Params, **datum) -> FluidState:
    """Construct a smooth admissible datum of the requested kind.

    equilibrium          rho = rho_bar, u = 0
    congested_bump       rho = rho_bar + (rho_max - rho_bar) exp(-x^2/sigma^2)
                         with rho_max = (1+C)^(1/(gamma+1)) - delta, plus a
                         compressive velocity -u_max tanh(x/sigma_u)
    opposing_streams     rho = rho_bar, u = -u_max tanh(x/sigma)
    counterexample_trunc tapered version of the fully congested datum
                         (rho ~ 1, w ~ 2x e^(x^2)) of the nonuniqueness family

    Raises AdmissibilityError naming the violated bound; the horizon-dependent
    (A3A) condition is left to validate_initial's report.
    """
    if kind not in INITIAL_KINDS:
        raise ValueError(f"unknown initial kind {kind!r}; choose from {INITIAL_KINDS}")
    x = np.linspace(-params.L + 0.5 * params.h, params.L - 0.5 * params.h, params.N)
    rho = np.full(params.N, params.rho_bar)
    u = np.zeros(params.N)

    if kind == "equilibrium":
        pass
    elif kind == "congested_bump":
        sigma = datum.pop("sigma", params.L / 6.0)
        delta = datum.pop("delta", 1e-3)
        u_max = datum.pop("u_max", 0.3)
        sigma_u = datum.pop("sigma_u", params.L / 15.0)
        rho_max = params.rho_cap - delta
        if rho_max <= params.rho_bar:
            raise AdmissibilityError("congested_bump needs (1+C)^(1/(gamma+1)) - delta > rho_bar")
        rho = params.rho_bar + (rho_max - params.rho_bar) * np.exp(-(x / sigma) ** 2)
        u = -u_max * np.tanh(x / sigma_u)
    elif kind == "opposing_streams":
        sigma = datum.pop("sigma", params.L / 15.0)
        u_max = datum.pop("u_max", 0.5)
        u = -u_max * np.tanh(x / sigma)
    elif kind == "counterexample_trunc":
        core = datum.pop("core_width", 1.5)
        w_width = datum.pop("w_width", 1.2)
        taper_rho = np.exp(-((x / core) ** 8))
        rho = params.rho_bar + (1.0 - params.rho_bar) * taper_rho
        w_vals = 2.0 * x * np.exp(x**2) * np.exp(-((x / w_width) ** 8))
        rho_f = GridField(rho, params.h)
        u = w_vals - centered_diff(laws.offset(rho_f, params.gamma)).values
    if datum:
        raise ValueError(f"unknown datum parameters {sorted(datum)} for kind {kind!r}")

    state = FluidState(0.0, GridField(rho, params.h), GridField(u, params.h))
    _check_bounds(state, params)
    return state
