"""Carleman weight machinery.

Everything is driven by an auxiliary function eta0 on (0,1): positive
inside, zero at the boundary, with a derivative vanishing only inside the
control window.  The classical closed form eta0(x) = c * x^r (1-x)^w does
the job in 1D: its unique interior critical point r/(r+w) is placed at the
window midpoint and c normalizes the maximum to 1.

From eta0 and a parameter lam > 0 we get

    sigma(x)   = e^{4*lam*M} - e^{lam*(2M + eta0(x))},      M = max eta0
    alpha(x,t) = sigma(x) / (t(T-t))
    xi(x,t)    = e^{lam*(2M + eta0(x))} / (t(T-t))

plus the variants beta, gamma where t(T-t) is replaced by
ell(t) = T^2/4 on [0,T/2] and t(T-t) on [T/2,T], so beta stays finite at
t=0.  alpha and xi blow up at t=0 and t=T; those rows are stored as inf
and the weight e^{-2 s alpha} is treated as 0 there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import ControlWindow, Grid1D, TimeGrid

__all__ = [
    "CarlemanParams",
    "WeightField",
    "MinMaxReport",
    "build_eta0",
    "make_carleman_params",
    "F_lambda",
    "check_min_max_inequality",
    "build_weights",
    "carleman_functional",
    "xi_bound_check",
]


@dataclass(frozen=True)
class CarlemanParams:
    """Weight parameters: lam, s, the auxiliary function and its extremes."""

    lam: float
    s: float
    eta0: np.ndarray       # samples at interior nodes
    eta0_sup: float        # sup over [0,1] (1.0 for the normalized build)
    sigma: np.ndarray      # sigma(x) at interior nodes
    sigma_plus: float
    sigma_minus: float


@dataclass(frozen=True)
class WeightField:
    """Weight tables on the tensor grid, shape (m_steps+1, n_interior)."""

    alpha: np.ndarray
    xi: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray


@dataclass(frozen=True)
class MinMaxReport:
    passed: bool
    n_checked: int
    worst_margin: float    # min over time nodes of (rhs - lhs) exponents


def build_eta0(grid: Grid1D, window: ControlWindow) -> np.ndarray:
    """Auxiliary function eta0(x) = c * x^r (1-x)^w sampled at the nodes.

    r, w >= 2 are chosen so the unique critical point r/(r+w) sits at the
    window midpoint; c makes max eta0 = 1.  Then eta0 > 0 in (0,1),
    eta0(0) = eta0(1) = 0 and eta0' vanishes only inside the window.
    """
    r, w, c = _eta0_exponents(window)
    x = grid.nodes
    return c * x**r * (1.0 - x) ** w


def _eta0_exponents(window: ControlWindow):
    mid = 0.5 * (window.a + window.b)
    if mid <= 0.5:
        r = 2.0
        w = r * (1.0 - mid) / mid
    else:
        w = 2.0
        r = w * mid / (1.0 - mid)
    c = 1.0 / (mid**r * (1.0 - mid) ** w)
    return r, w, c


def make_carleman_params(lam: float, s: float, grid: Grid1D, window: ControlWindow) -> CarlemanParams:
    """Build eta0 for the window and derive sigma and its extremes."""
    if lam <= 0.0:
        raise ValueError(f"lam must be positive, got {lam}")
    if s <= 1.0:
        raise ValueError(f"s must be > 1, got {s}")
    eta0 = build_eta0(grid, window)
    sup = 1.0  # normalized by construction
    sigma = math.exp(4.0 * lam * sup) - np.exp(lam * (2.0 * sup + eta0))
    sigma_plus = math.exp(4.0 * lam * sup) - math.exp(2.0 * lam * sup)
    sigma_minus = math.exp(4.0 * lam * sup) - math.exp(3.0 * lam * sup)
    return CarlemanParams(
        lam=lam,
        s=s,
        eta0=eta0,
        eta0_sup=sup,
        sigma=sigma,
        sigma_plus=sigma_plus,
        sigma_minus=sigma_minus,
    )


def F_lambda(lam: float, eta0_sup: float = 1.0) -> float:
    """Ratio sigma_minus/sigma_plus as a function of lam.

    Equal to (e^{2*lam*M} - e^{lam*M}) / (e^{2*lam*M} - 1); evaluated via
    expm1 so that both the lam -> 0+ limit (1/2) and the lam -> inf limit
    (1) come out accurately.
    """
    if lam <= 0.0:
        raise ValueError(f"lam must be positive, got {lam}")
    a = lam * eta0_sup
    return math.expm1(-a) / math.expm1(-2.0 * a)


def check_min_max_inequality(params: CarlemanParams, time_grid: TimeGrid) -> MinMaxReport:
    """Check exp(-(1+s) sigma_minus / (t(T-t))) < exp(-s sigma_plus / (t(T-t)))
    at every interior time node.

    The comparison is done on the exponents, which is exact and cannot
    overflow.
    """
    if params.s <= 1.0:
        raise ValueError(f"s must be > 1, got {params.s}")
    t = time_grid.times[1:-1]
    w = t * (time_grid.T - t)
    lhs = -(1.0 + params.s) * params.sigma_minus / w
    rhs = -params.s * params.sigma_plus / w
    margin = rhs - lhs
    return MinMaxReport(
        passed=bool(np.all(margin > 0.0)),
        n_checked=len(t),
        worst_margin=float(margin.min()) if len(t) else math.inf,
    )


def build_weights(params: CarlemanParams, grid: Grid1D, time_grid: TimeGrid) -> WeightField:
    """Tabulate alpha, xi, beta, gamma on the tensor grid.

    alpha/xi rows at t=0 and t=T are flagged as inf; beta/gamma stay finite
    at t=0 (ell(0) = T^2/4) and are inf only at t=T.
    """
    T = time_grid.T
    t = time_grid.times
    numer_xi = np.exp(params.lam * (2.0 * params.eta0_sup + params.eta0))

    tw = t * (T - t)
    ell = np.where(t <= 0.5 * T, 0.25 * T**2, tw)

    with np.errstate(divide="ignore"):
        inv_tw = np.where(tw > 0.0, 1.0 / np.where(tw > 0.0, tw, 1.0), np.inf)
        inv_ell = np.where(ell > 0.0, 1.0 / np.where(ell > 0.0, ell, 1.0), np.inf)

    alpha = inv_tw[:, None] * params.sigma[None, :]
    xi = inv_tw[:, None] * numer_xi[None, :]
    beta = inv_ell[:, None] * params.sigma[None, :]
    gamma = inv_ell[:, None] * numer_xi[None, :]
    return WeightField(alpha=alpha, xi=xi, beta=beta, gamma=gamma)


def carleman_functional(
    traj,
    weights: WeightField,
    params: CarlemanParams,
    grid: Grid1D,
    time_grid: TimeGrid,
    window: ControlWindow,
):
    """Discrete Carleman energy of a trajectory and its local counterpart.

    Returns (lhs, rhs_local) where

        lhs       = s lam^2 II e^{-2 s alpha} xi |grad .|^2
                  + s^3 lam^4 II e^{-2 s alpha} xi^3 |.|^2       over Q
        rhs_local = s^3 lam^4 II e^{-2 s alpha} xi^3 |.|^2       over O x (0,T)

    Gradients are centered differences with zero ghost values; the time
    endpoints contribute nothing (the weight vanishes there).  Products are
    assembled in log space so extreme weight magnitudes cannot overflow.
    """
    states = np.asarray(traj.states, dtype=float)
    m = time_grid.m_steps
    if states.shape != (m + 1, grid.n_interior):
        raise ValueError(
            f"trajectory shape {states.shape} does not match grids "
            f"({m + 1}, {grid.n_interior})"
        )
    s, lam = params.s, params.lam
    h, dt = grid.h, time_grid.dt
    mask = window.mask(grid)

    phi = states[1:m]                      # interior time rows
    alpha = weights.alpha[1:m]
    log_xi = np.log(weights.xi[1:m])

    grad = np.zeros_like(phi)
    grad[:, 1:-1] = (phi[:, 2:] - phi[:, :-2]) / (2.0 * h)
    grad[:, 0] = phi[:, 1] / (2.0 * h)
    grad[:, -1] = -phi[:, -2] / (2.0 * h)

    w1 = np.exp(-2.0 * s * alpha + log_xi)
    w3 = np.exp(-2.0 * s * alpha + 3.0 * log_xi)

    quad = h * dt
    lhs = s * lam**2 * quad * float(np.sum(w1 * grad**2)) + s**3 * lam**4 * quad * float(
        np.sum(w3 * phi**2)
    )
    rhs_local = s**3 * lam**4 * quad * float(np.sum(w3 * phi**2 * mask[None, :]))
    return lhs, rhs_local


def xi_bound_check(weights: WeightField, nu: float, time_grid: TimeGrid) -> bool:
    """Check the uniform bound xi^{-nu} <= (T^2/c0)^nu over the interior grid,
    with c0 = 4 * min_x of the spatial numerator of xi.

    Verified on log-exponents with a 1e-12 slack for the equality case (a
    time node sitting exactly at T/2).
    """
    if nu <= 0.0:
        raise ValueError(f"nu must be positive, got {nu}")
    xi = weights.xi[1:-1]
    T = time_grid.T
    t = time_grid.times[1:-1]
    # recover the spatial numerator from any interior row
    numer = xi[0] * (t[0] * (T - t[0]))
    c0 = 4.0 * float(numer.min())
    lhs = nu * float(np.max(-np.log(xi)))
    rhs = nu * math.log(T**2 / c0)
    return lhs <= rhs + 1e-12 * max(1.0, abs(rhs))


def weight_table_rows(weights: WeightField, grid: Grid1D, time_grid: TimeGrid):
    """Yield (x, t, alpha, xi, beta, gamma) rows for CSV export."""
    for k, t in enumerate(time_grid.times):
        for i, x in enumerate(grid.nodes):
            yield (
                float(x),
                float(t),
                float(weights.alpha[k, i]),
                float(weights.xi[k, i]),
                float(weights.beta[k, i]),
                float(weights.gamma[k, i]),
            )
