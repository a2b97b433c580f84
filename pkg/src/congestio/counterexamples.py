"""Closed-form fully congested solution families exhibiting nonuniqueness.

With a spatially constant velocity u(t, x) = c(t), c(0) = 0, and any smooth
nonnegative f, the triples

    sol1 = (1,  f'(x - C(t)),  f(x - C(t)) - c(t) x ;  c(t)),   C = ∫0^t c
    sol2 = (1,  f'(x),         f(x)                 ;  0)

both solve the constrained system from the shared initial data
(1, f'(x), f(x)): the density is constant, the momentum is transported by
c(t), and the potential difference absorbs the velocity so that
m = rho u + d_x pi holds for each.  Weak residuals are verified by tensor
Gauss-Legendre quadrature against a polynomial test bank, and the distance
between the two momenta at positive times quantifies the nonuniqueness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from .grid import DomainError
from .testbank import hat_bank, polynomial_bank

POSITIVITY_SAMPLES = 10_000  # nodes for the sampled pi >= 0 precondition


@dataclass(frozen=True)
class AnalyticSolution:
    """Closed-form evaluators on (t, x); x may be an array."""

    label: str
    rho: Callable[[float, np.ndarray], np.ndarray]
    m: Callable[[float, np.ndarray], np.ndarray]
    pi: Callable[[float, np.ndarray], np.ndarray]
    u: Callable[[float, np.ndarray], np.ndarray]


def _spatialize(g: Callable[[float], float]) -> Callable[[float, np.ndarray], np.ndarray]:
    return lambda t, x: np.full_like(np.asarray(x, dtype=float), g(t))


def family_general(f: Callable[[np.ndarray], np.ndarray],
                   fprime: Callable[[np.ndarray], np.ndarray],
                   c: Callable[[float], float],
                   T: float, x_half: float,
                   c_integral: Callable[[float], float] | None = None,
                   ) -> tuple[AnalyticSolution, AnalyticSolution]:
    """Build the moving/static solution pair for user-supplied f and c.

    Preconditions (checked): c(0) = 0 and min(f(x), f(x) - c(t) x) >= 0 by
    dense sampling of [0, T] x [-x_half, x_half].  ∫0^t c is evaluated by
    adaptive quadrature unless a closed form is supplied.
    """
    if abs(c(0.0)) > 1e-12:
        raise DomainError(f"c(0) must vanish, got {c(0.0)}")
    if c_integral is None:
        def c_integral(t: float) -> float:
            return quad(c, 0.0, t)[0] if t != 0.0 else 0.0

    n = int(np.sqrt(POSITIVITY_SAMPLES))
    xs = np.linspace(-x_half, x_half, n)
    fx = np.asarray(f(xs), dtype=float)
    worst = min(float(np.min(fx)),
                min(float(np.min(fx - c(t) * xs)) for t in np.linspace(0.0, T, n)))
    if worst < 0.0:
        raise DomainError(
            f"positivity precondition fails: min(f, f - c t x) = {worst:.3e} on the window")

    def m1(t, x):
        return np.asarray(fprime(np.asarray(x) - c_integral(t)), dtype=float)

    def pi1(t, x):
        x = np.asarray(x, dtype=float)
        return np.asarray(f(x - c_integral(t)), dtype=float) - c(t) * x

    sol1 = AnalyticSolution("moving", lambda t, x: np.ones_like(np.asarray(x, dtype=float)),
                            m1, pi1, _spatialize(c))
    sol2 = AnalyticSolution("static", lambda t, x: np.ones_like(np.asarray(x, dtype=float)),
                            lambda t, x: np.asarray(fprime(x), dtype=float),
                            lambda t, x: np.asarray(f(x), dtype=float),
                            _spatialize(lambda t: 0.0))
    return sol1, sol2


def concrete_family(T: float, x_half: float = 1.0) -> tuple[AnalyticSolution, AnalyticSolution]:
    """The explicit pair with f = e^(x^2) and c = -t/T, whose moving branch is
    (1, 2(x + t^2/2T) e^((x + t^2/2T)^2), e^((x + t^2/2T)^2) + t x / T; -t/T)."""
    f = lambda x: np.exp(np.asarray(x) ** 2)
    fp = lambda x: 2.0 * np.asarray(x) * np.exp(np.asarray(x) ** 2)
    return family_general(f, fp, lambda t: -t / T, T, x_half,
                          c_integral=lambda t: -t**2 / (2.0 * T))


def pair_remark(T: float) -> tuple[AnalyticSolution, AnalyticSolution]:
    """Nonuniqueness for the pair (rho, m) without pi: constant velocities 0 and
    -1/(2T) share the initial momentum 2x e^(x^2) while the potentials differ
    from t = 0 on."""
    if T <= 0:
        raise DomainError("T must be positive")

    def shift(t):
        return t / (2.0 * T)

    sol_a = AnalyticSolution(
        "static",
        lambda t, x: np.ones_like(np.asarray(x, dtype=float)),
        lambda t, x: 2.0 * np.asarray(x) * np.exp(np.asarray(x) ** 2),
        lambda t, x: np.exp(np.asarray(x) ** 2),
        _spatialize(lambda t: 0.0))
    sol_b = AnalyticSolution(
        "drifting",
        lambda t, x: np.ones_like(np.asarray(x, dtype=float)),
        lambda t, x: 2.0 * (np.asarray(x) + shift(t)) * np.exp((np.asarray(x) + shift(t)) ** 2),
        lambda t, x: np.exp((np.asarray(x) + shift(t)) ** 2) + np.asarray(x) / (2.0 * T),
        _spatialize(lambda t: -1.0 / (2.0 * T)))
    return sol_a, sol_b


def validity_horizon(sol: AnalyticSolution, T: float, x_half: float,
                     n: int = 200) -> float:
    """Largest sampled time up to T with pi >= -1e-12 on the window so far."""
    xs = np.linspace(-x_half, x_half, n)
    ts = np.linspace(0.0, T, n)
    horizon = 0.0
    for t in ts:
        if float(np.min(sol.pi(t, xs))) < -1e-12:
            break
        horizon = t
    return horizon


def _gl_nodes(lo: float, hi: float, order: int, panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes/weights: `panels` panels of given order."""
    base_x, base_w = leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    xs, ws = [], []
    for a, b in zip(edges, edges[1:]):
        xs.append(0.5 * (b - a) * base_x + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * base_w)
    return np.concatenate(xs), np.concatenate(ws)


def weak_residual(sol: AnalyticSolution, T: float, x_half: float,
                  order: int = 12, panels: int = 2) -> tuple[float, float, float]:
    """Weak residuals (r_cont, r_mom, r_constraint) on [0, T] x [-x_half, x_half].

    For each polynomial test function phi,

      R[v, g](phi) = ∫ v(T) phi(T) - ∫ v(0) phi(0) - ∫∫ (v d_t phi + g d_x phi)

    with (v, g) = (rho, rho u) and (m, m u); r_constraint is the sup of
    |(1 - rho) pi| at the quadrature nodes.  Integrals use tensor composite
    Gauss-Legendre of the given per-panel order.
    """
    tq, tw = _gl_nodes(0.0, T, order, panels)
    xq, xw = _gl_nodes(-x_half, x_half, order, panels)
    bank = polynomial_bank(T, x_half)

    r_cont = r_mom = 0.0
    rho_T, rho_0 = sol.rho(T, xq), sol.rho(0.0, xq)
    m_T, m_0 = sol.m(T, xq), sol.m(0.0, xq)
    rows_rho = [(sol.rho(t, xq), sol.rho(t, xq) * sol.u(t, xq)) for t in tq]
    rows_m = [(sol.m(t, xq), sol.m(t, xq) * sol.u(t, xq)) for t in tq]
    for phi in bank:
        endpoints_rho = float(np.sum((rho_T * phi.value(T, xq)
                                      - rho_0 * phi.value(0.0, xq)) * xw))
        endpoints_m = float(np.sum((m_T * phi.value(T, xq)
                                    - m_0 * phi.value(0.0, xq)) * xw))
        bulk_rho = bulk_m = 0.0
        for (t, w_t), (v, g), (vm, gm) in zip(zip(tq, tw), rows_rho, rows_m):
            dt_phi, dx_phi = phi.dt(t, xq), phi.dx(t, xq)
            bulk_rho += w_t * float(np.sum((v * dt_phi + g * dx_phi) * xw))
            bulk_m += w_t * float(np.sum((vm * dt_phi + gm * dx_phi) * xw))
        r_cont = max(r_cont, abs(endpoints_rho - bulk_rho))
        r_mom = max(r_mom, abs(endpoints_m - bulk_m))

    r_constraint = max(float(np.max(np.abs((1.0 - sol.rho(t, xq)) * sol.pi(t, xq))))
                       for t in tq)
    return r_cont, r_mom, r_constraint


def nonuniqueness_gap(sol1: AnalyticSolution, sol2: AnalyticSolution,
                      t: float, x_half: float, order: int = 16) -> float:
    """Dual-Lipschitz distance between the two momenta at time t over the hat
    bank; quadrature is piecewise Gauss-Legendre between hat breakpoints."""
    gap = 0.0
    for hat in hat_bank(x_half):
        pieces = [-x_half, *hat.breakpoints, x_half]
        total = 0.0
        for a, b in zip(pieces, pieces[1:]):
            if b <= a:
                continue
            xq, xw = _gl_nodes(a, b, order, 1)
            total += float(np.sum(hat(xq) * (sol1.m(t, xq) - sol2.m(t, xq)) * xw))
        gap = max(gap, abs(total))
    return gap
