"""Catalog of nonlocal kernels K(x,theta,t) and their admissibility constants.

A kernel is a declarative spec: a spatial family (zero, separable
left(x)*right(theta), a Gaussian bump in |x-theta|, or a tabulated cube)
times a scalar amplitude times a time profile.  Profiles carry their decay
parameters baked in, so a spec is self-contained:

    constant            g(t) = 1
    carleman_decay(c)   g(t) = exp(-c * sigma_minus / (t(T-t)))
    terminal_decay(B)   g(t) = exp(-B / (T-t))

Discrete matrices absorb the quadrature weight h, so applying the matrix to
a field approximates integral(K(x,theta,t) f(theta) dtheta) directly.

Two sup-type admissibility constants are estimated on a refined time grid:

    k_constant:  sup exp(sigma_minus/(t(T-t))) * integral |K| dtheta
    m_constant:  sup exp(B/(T-t))              * integral |K| dtheta

Both are computed in log space; divergence at a time endpoint is detected
by monotone growth of the log-exponent at the 3 refined nodes nearest the
endpoint, and reported as math.inf.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .carleman import CarlemanParams
from .grid import Grid1D, TimeGrid

__all__ = [
    "TimeProfile",
    "KernelSpec",
    "KernelMatrix",
    "KernelTable",
    "kernel_matrix_at",
    "compute_K_constant",
    "compute_M_constant",
    "load_kernel_table",
]

_REFINE = 4  # time-grid refinement factor for the sup scans


@dataclass(frozen=True)
class TimeProfile:
    kind: str                  # constant | carleman_decay | terminal_decay
    c: float = 0.0             # carleman_decay strength
    B: float = 0.0             # terminal_decay strength
    sigma_minus: float = 0.0   # weight scale baked in for carleman_decay
    T: float = 0.0             # horizon baked in for both decay profiles

    @staticmethod
    def constant() -> "TimeProfile":
        return TimeProfile(kind="constant")

    @staticmethod
    def carleman_decay(c: float, sigma_minus: float, T: float) -> "TimeProfile":
        if c <= 0.0:
            raise ValueError(f"carleman_decay needs c > 0, got {c}")
        if sigma_minus <= 0.0 or T <= 0.0:
            raise ValueError("carleman_decay needs sigma_minus > 0 and T > 0")
        return TimeProfile(kind="carleman_decay", c=c, sigma_minus=sigma_minus, T=T)

    @staticmethod
    def terminal_decay(B: float, T: float) -> "TimeProfile":
        if B <= 0.0:
            raise ValueError(f"terminal_decay needs B > 0, got {B}")
        if T <= 0.0:
            raise ValueError("terminal_decay needs T > 0")
        return TimeProfile(kind="terminal_decay", B=B, T=T)

    def log_value(self, t: float) -> float:
        """log g(t); -inf where the profile vanishes (endpoints of decays)."""
        if self.kind == "constant":
            return 0.0
        if self.kind == "carleman_decay":
            w = t * (self.T - t)
            return -self.c * self.sigma_minus / w if w > 0.0 else -math.inf
        if self.kind == "terminal_decay":
            rem = self.T - t
            return -self.B / rem if rem > 0.0 else -math.inf
        raise ValueError(f"unknown time profile kind {self.kind!r}")


@dataclass(frozen=True)
class KernelTable:
    """Tabulated kernel values on a tensor (x, theta, t) grid."""

    x: np.ndarray
    theta: np.ndarray
    t: np.ndarray
    values: np.ndarray  # shape (len(x), len(theta), len(t))

    def interpolator(self):
        from scipy.interpolate import RegularGridInterpolator

        return RegularGridInterpolator(
            (self.x, self.theta, self.t), self.values, method="linear"
        )


@dataclass(frozen=True)
class KernelSpec:
    """Declarative kernel description.

    family: zero | separable | gaussian_bump | custom_tabulated.
    separable uses left(x)*right(theta); gaussian_bump uses
    exp(-(x-theta)^2 / (2 rho^2)).
    """

    family: str
    amplitude: float = 1.0
    time_profile: TimeProfile = field(default_factory=TimeProfile.constant)
    left: Callable[[np.ndarray], np.ndarray] | None = None
    right: Callable[[np.ndarray], np.ndarray] | None = None
    rho: float = 0.1
    table: KernelTable | None = None

    def __post_init__(self):
        if self.family not in ("zero", "separable", "gaussian_bump", "custom_tabulated"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not math.isfinite(self.amplitude):
            raise ValueError("kernel amplitude must be finite")
        if self.family == "separable" and (self.left is None or self.right is None):
            raise ValueError("separable kernel needs left and right factors")
        if self.family == "custom_tabulated" and self.table is None:
            raise ValueError("custom_tabulated kernel needs a table")

    @property
    def time_independent(self) -> bool:
        if self.family == "zero":
            return True
        if self.family == "custom_tabulated":
            return len(self.table.t) == 1
        return self.time_profile.kind == "constant"

    def structurally_admissible(self) -> bool | None:
        """Cheap verdict on the sup-with-carleman-weight constant.

        True/False when decidable from the profile alone, None for
        tabulated kernels (needs the numeric scan).
        """
        if self.family == "zero" or self.amplitude == 0.0:
            return True
        if self.family == "custom_tabulated":
            return None
        if self.time_profile.kind == "carleman_decay":
            return self.time_profile.c >= 1.0
        return False  # constant or terminal_decay: no decay at t=0

    def spatial_values(self, grid: Grid1D, t: float) -> np.ndarray:
        """Spatial part S(x_i, theta_j) (amplitude and profile excluded)."""
        x = grid.nodes
        if self.family == "zero":
            return np.zeros((grid.n_interior, grid.n_interior))
        if self.family == "separable":
            return np.outer(self.left(x), self.right(x))
        if self.family == "gaussian_bump":
            d = x[:, None] - x[None, :]
            return np.exp(-(d**2) / (2.0 * self.rho**2))
        if self.family == "custom_tabulated":
            # queries are clamped to the tabulated ranges
            xc = np.clip(x, self.table.x[0], self.table.x[-1])
            thc = np.clip(x, self.table.theta[0], self.table.theta[-1])
            xx, th = np.meshgrid(xc, thc, indexing="ij")
            if len(self.table.t) == 1:
                from scipy.interpolate import RegularGridInterpolator

                interp2 = RegularGridInterpolator(
                    (self.table.x, self.table.theta), self.table.values[:, :, 0]
                )
                pts = np.stack([xx.ravel(), th.ravel()], axis=1)
            else:
                interp2 = self.table.interpolator()
                tc = min(max(t, float(self.table.t[0])), float(self.table.t[-1]))
                pts = np.stack([xx.ravel(), th.ravel(), np.full(xx.size, tc)], axis=1)
            return interp2(pts).reshape(grid.n_interior, grid.n_interior)
        raise AssertionError(self.family)


@dataclass(frozen=True)
class KernelMatrix:
    """Dense kernel matrix at one time node, quadrature weight absorbed."""

    entries: np.ndarray
    t: float


def kernel_matrix_at(spec: KernelSpec, grid: Grid1D, t: float) -> KernelMatrix:
    """Matrix with entries K(x_i, theta_j, t) * h."""
    if spec.family == "zero" or spec.amplitude == 0.0:
        return KernelMatrix(np.zeros((grid.n_interior, grid.n_interior)), t)
    factor = spec.amplitude * math.exp(spec.time_profile.log_value(t)) * grid.h
    entries = factor * spec.spatial_values(grid, t)
    if not np.all(np.isfinite(entries)):
        raise ValueError(f"kernel matrix has non-finite entries at t={t}")
    return KernelMatrix(entries, t)


def _log_row_integrals(spec: KernelSpec, grid: Grid1D, t: float) -> np.ndarray:
    """log of h * sum_j |K(x_i, theta_j, t)| per node, profile factored
    analytically so endpoint decay never underflows."""
    n = grid.n_interior
    if spec.family == "zero" or spec.amplitude == 0.0:
        return np.full(n, -math.inf)
    rows = grid.h * np.abs(spec.spatial_values(grid, t)).sum(axis=1) * abs(spec.amplitude)
    with np.errstate(divide="ignore"):
        log_rows = np.where(rows > 0.0, np.log(np.where(rows > 0.0, rows, 1.0)), -math.inf)
    return log_rows + spec.time_profile.log_value(t)


def _refined_interior_times(time_grid: TimeGrid) -> np.ndarray:
    m_ref = _REFINE * time_grid.m_steps
    return np.linspace(0.0, time_grid.T, m_ref + 1)[1:-1]


def _monotone_growth(exponents: np.ndarray) -> bool:
    """True when the 3 values ordered toward an endpoint strictly increase."""
    e3, e2, e1 = exponents  # e1 is nearest the endpoint
    if not (np.isfinite(e1) and np.isfinite(e2) and np.isfinite(e3)):
        return bool(e1 == math.inf)
    tol = 1e-9 * max(1.0, abs(e1))
    return e1 > e2 + tol and e2 > e3 + tol


def compute_K_constant(
    spec: KernelSpec, params: CarlemanParams, grid: Grid1D, time_grid: TimeGrid
) -> float:
    """Grid maximum of exp(sigma_minus/(t(T-t))) * integral |K| dtheta.

    Scanned over a 4x-refined interior time grid; returns math.inf when the
    log exponent grows monotonically into either endpoint.
    """
    T = time_grid.T
    times = _refined_interior_times(time_grid)
    best = -math.inf
    exps = np.empty(len(times))
    for j, t in enumerate(times):
        w = t * (T - t)
        e = params.sigma_minus / w + float(np.max(_log_row_integrals(spec, grid, t)))
        exps[j] = e
        best = max(best, e)
    if len(times) >= 3:
        if _monotone_growth(exps[2::-1]):  # ordered toward t=0
            return math.inf
        if _monotone_growth(exps[-3:]):    # ordered toward t=T
            return math.inf
    if best == -math.inf:
        return 0.0
    return math.exp(best) if best < 709.0 else math.inf


def compute_M_constant(
    spec: KernelSpec, B: float, grid: Grid1D, time_grid: TimeGrid
) -> float:
    """Grid maximum of exp(B/(T-t)) * integral |K| dtheta.

    The weight is finite at t=0, so the scan includes t=0 and divergence is
    only checked into t=T.
    """
    if B <= 0.0:
        raise ValueError(f"B must be positive, got {B}")
    T = time_grid.T
    times = np.concatenate([[0.0], _refined_interior_times(time_grid)])
    best = -math.inf
    exps = np.empty(len(times))
    for j, t in enumerate(times):
        e = B / (T - t) + float(np.max(_log_row_integrals(spec, grid, t)))
        exps[j] = e
        best = max(best, e)
    if len(times) >= 3 and _monotone_growth(exps[-3:]):
        return math.inf
    if best == -math.inf:
        return 0.0
    return math.exp(best) if best < 709.0 else math.inf


def load_kernel_table(path) -> KernelTable:
    """Read a tabulated kernel from CSV with columns x, theta, t, value.

    The rows must fill a full tensor grid; values are interpolated
    trilinearly between the tabulated coordinates.
    """
    xs, thetas, ts, vals = [], [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"x", "theta", "t", "value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"kernel table needs columns {sorted(required)}")
        for row in reader:
            xs.append(float(row["x"]))
            thetas.append(float(row["theta"]))
            ts.append(float(row["t"]))
            vals.append(float(row["value"]))
    x_ax = np.unique(np.asarray(xs))
    th_ax = np.unique(np.asarray(thetas))
    t_ax = np.unique(np.asarray(ts))
    if len(xs) != len(x_ax) * len(th_ax) * len(t_ax):
        raise ValueError("kernel table rows do not fill a tensor grid")
    cube = np.full((len(x_ax), len(th_ax), len(t_ax)), np.nan)
    ix = np.searchsorted(x_ax, xs)
    ith = np.searchsorted(th_ax, thetas)
    it = np.searchsorted(t_ax, ts)
    cube[ix, ith, it] = vals
    if np.isnan(cube).any():
        raise ValueError("kernel table has duplicate or missing tensor entries")
    return KernelTable(x=x_ax, theta=th_ax, t=t_ax, values=cube)


def zero_kernel() -> KernelSpec:
    return KernelSpec(family="zero", amplitude=0.0)
