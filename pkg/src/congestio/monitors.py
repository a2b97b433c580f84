"""Quantitative estimates of the stiff system evaluated as runtime diagnostics.

Every uniform bound of the analysis becomes a measurable quantity on discrete
states: the kinetic/dissipated energy identity, L1 momentum bounds, sup-norm
and one-sided maximum principles for u, V = lambda(rho) D_c u and
W = D_c w / rho, the density floor 1/(M0 t + 1/r0), the local potential
bound, the switching residual |(1-rho) pi|, and weak entropy residuals.

Discrete L1/Linf norms replace essential sups and integrals; the observation
window [-L/2, L/2] stands in for an arbitrary compact set, which fixes all
constants and makes the assertions reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from . import constitutive as laws
from .constitutive import Params
from .grid import GridField, centered_diff, l1_norm, l1_norm_window
from .testbank import space_time_bank, weak_residuals

ABS_SMOOTH_ALPHA = 1e-6  # smoothing of |u| in the entropy family sqrt(u^2 + a)


@dataclass(frozen=True)
class InitialSummary:
    """Frozen t = 0 quantities every later check compares against."""

    E1: float
    mass0: float
    mom_u0: float
    mom_w0: float
    dxpi0: float
    u_min0: float
    u_max0: float
    V_sup0: float
    W_sup0: float
    r0: float
    M0: float

    @classmethod
    def from_state(cls, state, params: Params) -> "InitialSummary":
        rho, u = state.rho, state.u
        h = rho.h
        w = laws.desired_velocity(rho, u, params.gamma)
        pi = laws.potential(rho, params.gamma)
        return cls(
            E1=float(np.sum(rho.values * u.values**2) * h),
            mass0=float(np.sum(rho.values - params.rho_bar) * h),
            mom_u0=l1_norm(GridField(rho.values * u.values, h)),
            mom_w0=l1_norm(GridField(rho.values * w.values, h)),
            dxpi0=l1_norm(centered_diff(pi)),
            u_min0=float(np.min(u.values)),
            u_max0=float(np.max(u.values)),
            V_sup0=float(np.max(laws.active_potential(rho, u, params.gamma).values)),
            W_sup0=float(np.max(laws.transported_potential(rho, w).values)),
            r0=float(np.min(rho.values)),
            M0=float(np.max(laws.transported_potential(rho, w).values)),
        )


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Per-step scalars; one CSV row, column order as listed in diagnostics.md."""

    t: float
    mass_defect: float
    E_kinetic: float
    E_dissipated: float
    E1: float
    rel_energy: float
    mom_u_L1: float
    mom_w_L1: float
    dxpi_L1: float
    u_min: float
    u_max: float
    oslc: float
    Wn_sup: float
    Vn_sup: float
    rho_min: float
    rho_min_bound: float
    pi_L1_local: float
    switching_L1: float
    entropy_defect: float
    rho_max: float
    E_boundary: float


CSV_COLUMNS = tuple(f.name for f in fields(DiagnosticsRecord))


def csv_row(record: DiagnosticsRecord) -> str:
    return ",".join(repr(float(getattr(record, c))) for c in CSV_COLUMNS)


def density_floor(t: float, r0: float, M0: float) -> float:
    """Lower bound 1/(M0 t + 1/r0) on the density at time t."""
    denom = M0 * t + 1.0 / r0
    return 1.0 / denom if denom > 0 else np.inf


def relative_energy(rho: GridField, params: Params) -> float:
    """sum H(rho | rho_bar) h with H the stiff relative functional."""
    g1 = params.gamma + 1.0
    rb = params.rho_bar
    r = rho.values
    H = (laws._pow(r, g1) - rb**g1) / g1 - (r - rb) * rb**params.gamma
    return float(np.sum(H) * rho.h)


def record_for_state(state, params: Params, init: InitialSummary,
                     e_dissipated: float, mass_influx: float,
                     entropy_defect: float, e_boundary: float = 0.0) -> DiagnosticsRecord:
    rho, u = state.rho, state.u
    h = rho.h
    w = laws.desired_velocity(rho, u, params.gamma)
    pi = laws.potential(rho, params.gamma)
    mass = float(np.sum(rho.values - params.rho_bar) * h)
    return DiagnosticsRecord(
        t=state.t,
        mass_defect=abs(mass - init.mass0 - mass_influx),
        E_kinetic=float(np.sum(rho.values * u.values**2) * h),
        E_dissipated=e_dissipated,
        E1=init.E1,
        rel_energy=relative_energy(rho, params),
        mom_u_L1=l1_norm(GridField(rho.values * u.values, h)),
        mom_w_L1=l1_norm(GridField(rho.values * w.values, h)),
        dxpi_L1=l1_norm(centered_diff(pi)),
        u_min=float(np.min(u.values)),
        u_max=float(np.max(u.values)),
        oslc=oslc_sup(state),
        Wn_sup=float(np.max(laws.transported_potential(rho, w).values)),
        Vn_sup=float(np.max(laws.active_potential(rho, u, params.gamma).values)),
        rho_min=float(np.min(rho.values)),
        rho_min_bound=density_floor(state.t, init.r0, init.M0),
        pi_L1_local=l1_norm_window(pi, params.L / 2.0),
        switching_L1=switching_residual(state, params),
        entropy_defect=entropy_defect,
        rho_max=float(np.max(rho.values)),
        E_boundary=e_boundary,
    )


def energy_defect(records: list[DiagnosticsRecord]) -> float:
    """Largest relative violation of the truncated-domain energy identity
    E_kinetic(t) + E_dissipated(t) = E1 + E_boundary(t); the boundary work
    vanishes for data with zero far-field velocity."""
    if not records:
        raise ValueError("empty trajectory")
    E1 = records[0].E1
    return max(abs(r.E_kinetic + r.E_dissipated - r.E_boundary - E1)
               for r in records) / max(E1, 1e-14)


@dataclass(frozen=True)
class MomentumReport:
    mom_u_L1: float
    mom_w_L1: float
    dxpi_L1: float
    pass_u: bool
    pass_w: bool
    pass_dxpi: bool


def momentum_l1(state, params: Params, init: InitialSummary,
                tol_rel: float = 1e-6) -> MomentumReport:
    """Discrete L1 momentum norms against their initial bounds.

    mom_u and mom_w must not exceed their own initial values; |d_x pi|_L1 is
    bounded by the initial momentum sum (it is the difference rho w - rho u,
    so it has no monotonicity of its own).
    """
    rho, u = state.rho, state.u
    h = rho.h
    w = laws.desired_velocity(rho, u, params.gamma)
    pi = laws.potential(rho, params.gamma)
    mu = l1_norm(GridField(rho.values * u.values, h))
    mw = l1_norm(GridField(rho.values * w.values, h))
    dp = l1_norm(centered_diff(pi))
    return MomentumReport(
        mom_u_L1=mu, mom_w_L1=mw, dxpi_L1=dp,
        pass_u=mu <= init.mom_u0 * (1.0 + tol_rel) + 1e-14,
        pass_w=mw <= init.mom_w0 * (1.0 + tol_rel) + 1e-14,
        pass_dxpi=dp <= (init.mom_u0 + init.mom_w0) * (1.0 + tol_rel) + 1e-14,
    )


@dataclass(frozen=True)
class MaxPrincipleReport:
    u_in_range: bool
    V_bounded: bool
    W_bounded: bool
    rho_floored: bool
    u_min: float
    u_max: float
    V_sup: float
    W_sup: float
    rho_min: float
    rho_floor: float

    @property
    def all_passed(self) -> bool:
        return self.u_in_range and self.V_bounded and self.W_bounded and self.rho_floored


def max_principles(state, initial, params: Params,
                   eps_u: float = 1e-3, eps_V: float | None = None,
                   eps_W: float = 1e-3, eps_rho: float = 1e-3) -> MaxPrincipleReport:
    """The four pointwise bounds propagated from the initial datum:

    (i)   min(0, min u0) - eps <= u <= max(0, max u0) + eps
    (ii)  sup V(t) <= max(0, sup V(0)) + eps_V
    (iii) sup W(t) <= sup W(0) + eps_W
    (iv)  min rho(t) >= 1/(M0 t + 1/r0) - eps_rho

    First-order schemes honor the continuum principles up to O(h); the eps
    defaults encode that tolerance.
    """
    init = InitialSummary.from_state(initial, params)
    if eps_V is None:
        eps_V = 1e-3 * abs(init.V_sup0) + 1e-6
    rho, u = state.rho, state.u
    w = laws.desired_velocity(rho, u, params.gamma)
    u_min, u_max = float(np.min(u.values)), float(np.max(u.values))
    V_sup = float(np.max(laws.active_potential(rho, u, params.gamma).values))
    W_sup = float(np.max(laws.transported_potential(rho, w).values))
    rho_min = float(np.min(rho.values))
    floor = density_floor(state.t, init.r0, init.M0)
    return MaxPrincipleReport(
        u_in_range=(min(0.0, init.u_min0) - eps_u <= u_min
                    and u_max <= max(0.0, init.u_max0) + eps_u),
        V_bounded=V_sup <= max(0.0, init.V_sup0) + eps_V,
        W_bounded=W_sup <= init.W_sup0 + eps_W,
        rho_floored=rho_min >= floor - eps_rho,
        u_min=u_min, u_max=u_max, V_sup=V_sup, W_sup=W_sup,
        rho_min=rho_min, rho_floor=floor,
    )


def oslc_sup(state) -> float:
    """max_i D_c(u)_i, the discrete one-sided Lipschitz functional."""
    return float(np.max(centered_diff(state.u).values))


def oslc_bound(initial, params: Params) -> float:
    """Constant C_osl of the one-sided bound, computed from the (A3A) data:
    the V maximum principle plus the density floor give
    d_x u <= max(0, sup V0) (M0 T + 1/r0)^(gamma+1) / gamma."""
    init = InitialSummary.from_state(initial, params)
    v0 = max(0.0, init.V_sup0)
    return v0 * (init.M0 * params.T + 1.0 / init.r0) ** (params.gamma + 1.0) / params.gamma


def switching_residual(state, params: Params) -> float:
    """sum |(1 - rho) pi| h over the observation window [-L/2, L/2]."""
    rho = state.rho
    pi = laws.potential(rho, params.gamma)
    vals = np.abs((1.0 - rho.values) * pi.values)
    return l1_norm_window(rho.with_values(vals), params.L / 2.0)


def _entropy(u: np.ndarray, S_id: str, alpha: float) -> np.ndarray:
    if S_id == "square":
        return u**2
    if S_id == "abs_smooth":
        return np.sqrt(u**2 + alpha)
    raise ValueError(f"unknown entropy id {S_id!r}; choose 'square' or 'abs_smooth'")


def entropy_defect(trajectory, S_id: str = "square",
                   alpha: float = ABS_SMOOTH_ALPHA) -> float:
    """Positive part of the weak residual of d_t(rho S(u)) + d_x(rho u S(u)) <= 0
    against the nonnegative space-time bump bank."""
    res = entropy_residuals(trajectory, S_id, alpha)
    return float(max(0.0, np.max(res)))


def entropy_residuals(trajectory, S_id: str = "square",
                      alpha: float = ABS_SMOOTH_ALPHA) -> np.ndarray:
    """Raw weak residuals over the bank (negative where dissipation dominates)."""
    params = trajectory.params
    times = np.asarray(trajectory.times)
    if len(times) < 2:
        return np.zeros(1)
    xs = trajectory.states[0].rho.centers()
    dens = np.stack([s.rho.values * _entropy(s.u.values, S_id, alpha)
                     for s in trajectory.states])
    flux = np.stack([s.rho.values * s.u.values * _entropy(s.u.values, S_id, alpha)
                     for s in trajectory.states])
    bank = space_time_bank(float(times[-1] - times[0]), params.L / 2.0)
    return weak_residuals(times - times[0], xs, params.h, dens, flux, bank)


def continuity_residual(trajectory) -> float:
    """Weak residual of d_t rho + d_x(rho u) = 0 against the bump bank
    (absolute value; an equality, unlike the entropy inequality)."""
    params = trajectory.params
    times = np.asarray(trajectory.times)
    if len(times) < 2:
        return 0.0
    xs = trajectory.states[0].rho.centers()
    dens = np.stack([s.rho.values for s in trajectory.states])
    flux = np.stack([s.rho.values * s.u.values for s in trajectory.states])
    bank = space_time_bank(float(times[-1] - times[0]), params.L / 2.0)
    res = weak_residuals(times - times[0], xs, params.h, dens, flux, bank)
    return float(np.max(np.abs(res)))


def pi_consistency(trajectory, params: Params) -> float:
    """Evolve a companion potential by upwind transport with source
    -lambda D_c u and report its largest windowed L1 distance to the closed
    form pi(rho); checks that d_t pi + u d_x pi + lambda d_x u = 0 and the
    algebraic definition agree along the run.
    """
    states = trajectory.states
    times = trajectory.times
    h = params.h
    pi_bar = params.gamma / (params.gamma + 1.0) * params.rho_bar ** (params.gamma + 1.0)
    tilde = laws.potential(states[0].rho, params.gamma).values.copy()
    defect = 0.0
    for k in range(len(times) - 1):
        t0, t1 = times[k], times[k + 1]
        u0, u1 = states[k].u.values, states[k + 1].u.values
        r0, r1 = states[k].rho.values, states[k + 1].rho.values
        umax = max(float(np.max(np.abs(u0))), float(np.max(np.abs(u1))), 1e-12)
        n_sub = max(1, int(np.ceil((t1 - t0) * umax / (params.cfl * h))))
        dt = (t1 - t0) / n_sub
        for j in range(n_sub):
            frac = (j + 0.5) / n_sub
            u = (1.0 - frac) * u0 + frac * u1
            rho = (1.0 - frac) * r0 + frac * r1
            lam = params.gamma * laws._pow(rho, params.gamma + 1.0)
            dcu = centered_diff(GridField(u, h)).values
            ext = np.concatenate(([pi_bar], tilde, [pi_bar]))
            grad_up = np.where(u > 0, (ext[1:-1] - ext[:-2]) / h,
                               (ext[2:] - ext[1:-1]) / h)
            tilde = tilde - dt * (u * grad_up + lam * dcu)
        closed = laws.potential(states[k + 1].rho, params.gamma).values
        diff = GridField(np.abs(tilde - closed), h)
        defect = max(defect, l1_norm_window(diff, params.L / 2.0))
    return defect
