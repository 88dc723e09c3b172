"""Implicit-Euler time stepping for the forward and adjoint systems.

Forward step (k -> k+1), with A = -discrete Laplacian, KM the kernel
matrix, D a diagonal zeroth-order term and f the source:

    (I + dt*(A + KM_{k+1} - D_{k+1})) y_{k+1} = y_k + dt*f_{k+1}

The adjoint is the exact transpose of the forward stepping, marching
backward from phi(T):

    (I + dt*(A + KM_{k+1} - D_{k+1}))^T phi_k = phi_{k+1}

Both directions share one LU factorization per step (the transposed solve
reuses it), so the discrete duality identity

    <y_m, phi_m> - <y_0, phi_0> = dt * sum_k <f_{k+1}, phi_k>

holds to machine precision for every kernel, potential and source.  That
identity is what makes the HUM Gramian exactly symmetric.

Convention: source values are indexed by the time node they act at, i.e.
source[k] enters the solve for y_k; source[0] is never used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .grid import ControlWindow, Grid1D, TimeGrid, inner_product, laplacian_matrix, validate_field
from .kernels import KernelSpec, kernel_matrix_at

__all__ = [
    "Trajectory",
    "SourceTerm",
    "SolverError",
    "ImplicitStepper",
    "Scenario",
    "solve_forward",
    "solve_adjoint",
    "duality_gap",
    "spacetime_norm",
]

_LU_CACHE_BYTES = 256 * 2**20  # cache per-step factorizations below this footprint


class SolverError(RuntimeError):
    """Singular step matrix or non-finite state during time stepping."""


@dataclass
class Trajectory:
    """Space-time field, one row per time node; kind is forward or adjoint."""

    states: np.ndarray  # (m_steps+1, n_interior)
    kind: str

    def terminal(self) -> np.ndarray:
        return self.states[-1]

    def initial(self) -> np.ndarray:
        return self.states[0]


@dataclass
class SourceTerm:
    """Right-hand side on the tensor grid; support records masking origin."""

    values: np.ndarray  # (m_steps+1, n_interior)
    support: str = "full"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("source term contains non-finite entries")

    @staticmethod
    def zero(grid: Grid1D, time_grid: TimeGrid) -> "SourceTerm":
        return SourceTerm(np.zeros((time_grid.m_steps + 1, grid.n_interior)))

    @staticmethod
    def window_control(values: np.ndarray, mask: np.ndarray) -> "SourceTerm":
        return SourceTerm(values * mask[None, :], support="window")


class ImplicitStepper:
    """Per-step dense factorizations for one forward/adjoint pair.

    kernel may be None (pure heat).  potential and nonlocal_scale are
    optional (m+1, n) arrays: potential enters as -diag(potential[k]),
    nonlocal_scale right-multiplies the kernel matrix as diag(scale[k])
    (kernel acting on scale*state, the linearized inside-the-integral
    coupling).
    """

    def __init__(
        self,
        grid: Grid1D,
        time_grid: TimeGrid,
        kernel: KernelSpec | None = None,
        potential: np.ndarray | None = None,
        nonlocal_scale: np.ndarray | None = None,
    ):
        self.grid = grid
        self.time_grid = time_grid
        self.kernel = kernel
        self.potential = None if potential is None else np.asarray(potential, dtype=float)
        self.nonlocal_scale = (
            None if nonlocal_scale is None else np.asarray(nonlocal_scale, dtype=float)
        )
        shape = (time_grid.m_steps + 1, grid.n_interior)
        for name, arr in (("potential", self.potential), ("nonlocal_scale", self.nonlocal_scale)):
            if arr is not None and arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
        self._stiffness = laplacian_matrix(grid)
        kernel_ti = kernel is None or kernel.time_independent
        self._time_independent = (
            kernel_ti and self.potential is None and self.nonlocal_scale is None
        )
        n, m = grid.n_interior, time_grid.m_steps
        self._cache_steps = self._time_independent or (m * n * n * 8 <= _LU_CACHE_BYTES)
        self._lu = {}

    def _step_matrix(self, k: int) -> np.ndarray:
        dt = self.time_grid.dt
        b = self._stiffness.copy()
        if self.kernel is not None and self.kernel.family != "zero":
            km = kernel_matrix_at(self.kernel, self.grid, float(self.time_grid.times[k])).entries
            if self.nonlocal_scale is not None:
                km = km * self.nonlocal_scale[k][None, :]
            b += km
        if self.potential is not None:
            b[np.diag_indices_from(b)] -= self.potential[k]
        m = dt * b
        m[np.diag_indices_from(m)] += 1.0
        return m

    def _factor(self, k: int):
        key = 0 if self._time_independent else k
        fac = self._lu.get(key)
        if fac is None:
            try:
                fac = scipy.linalg.lu_factor(self._step_matrix(k))
            except scipy.linalg.LinAlgError as exc:
                raise SolverError(f"singular step matrix at time index {k}") from exc
            if self._cache_steps:
                self._lu[key] = fac
        return fac

    def forward(self, y0: np.ndarray, source: SourceTerm | None = None) -> Trajectory:
        grid, tg = self.grid, self.time_grid
        y0 = validate_field(grid, y0, "y0")
        m, dt = tg.m_steps, tg.dt
        src = None if source is None else source.values
        if src is not None and src.shape != (m + 1, grid.n_interior):
            raise ValueError(
                f"source shape {src.shape} does not match ({m + 1}, {grid.n_interior})"
            )
        states = np.empty((m + 1, grid.n_interior))
        states[0] = y0
        for k in range(1, m + 1):
            rhs = states[k - 1] if src is None else states[k - 1] + dt * src[k]
            states[k] = scipy.linalg.lu_solve(self._factor(k), rhs)
            if not np.all(np.isfinite(states[k])):
                raise SolverError(f"non-finite forward state at time index {k}")
        return Trajectory(states=states, kind="forward")

    def adjoint(self, phi_T: np.ndarray) -> Trajectory:
        grid, tg = self.grid, self.time_grid
        phi_T = validate_field(grid, phi_T, "phi_T")
        m = tg.m_steps
        states = np.empty((m + 1, grid.n_interior))
        states[m] = phi_T
        for k in range(m - 1, -1, -1):
            states[k] = scipy.linalg.lu_solve(self._factor(k + 1), states[k + 1], trans=1)
            if not np.all(np.isfinite(states[k])):
                raise SolverError(f"non-finite adjoint state at time index {k}")
        return Trajectory(states=states, kind="adjoint")


@dataclass
class Scenario:
    """Bundle of grids, window and kernel shared by control experiments."""

    grid: Grid1D
    time_grid: TimeGrid
    window: ControlWindow
    kernel: KernelSpec | None = None
    potential: np.ndarray | None = field(default=None, repr=False)
    nonlocal_scale: np.ndarray | None = field(default=None, repr=False)

    @cached_property
    def mask(self) -> np.ndarray:
        return self.window.mask(self.grid)

    @cached_property
    def stepper(self) -> ImplicitStepper:
        return ImplicitStepper(
            self.grid,
            self.time_grid,
            kernel=self.kernel,
            potential=self.potential,
            nonlocal_scale=self.nonlocal_scale,
        )


def solve_forward(
    grid: Grid1D,
    time_grid: TimeGrid,
    spec: KernelSpec | None,
    y0: np.ndarray,
    source: SourceTerm | None = None,
    potential: np.ndarray | None = None,
) -> Trajectory:
    """One-shot forward solve (see module docstring for the scheme)."""
    return ImplicitStepper(grid, time_grid, kernel=spec, potential=potential).forward(y0, source)


def solve_adjoint(
    grid: Grid1D,
    time_grid: TimeGrid,
    spec: KernelSpec | None,
    phi_T: np.ndarray,
    potential: np.ndarray | None = None,
) -> Trajectory:
    """One-shot adjoint solve: exact transpose stepping, kernel transposed."""
    return ImplicitStepper(grid, time_grid, kernel=spec, potential=potential).adjoint(phi_T)


def duality_gap(
    forward: Trajectory,
    adjoint: Trajectory,
    v: SourceTerm,
    grid: Grid1D,
    time_grid: TimeGrid,
) -> float:
    """|<y(T), phi_T> - <y0, phi(0)> - dt*sum_k <v_{k+1}, phi_k>|.

    The time quadrature matches the stepping scheme (source at the arrival
    node paired with the adjoint at the departure node), so the gap is pure
    roundoff for trajectories built by the transposed pair.
    """
    m = time_grid.m_steps
    shape = (m + 1, grid.n_interior)
    if forward.states.shape != shape or adjoint.states.shape != shape:
        raise ValueError("trajectory shapes do not match the grids")
    if v.values.shape != shape:
        raise ValueError("source shape does not match the grids")
    boundary = inner_product(grid, forward.states[m], adjoint.states[m]) - inner_product(
        grid, forward.states[0], adjoint.states[0]
    )
    pairing = time_grid.dt * grid.h * float(np.sum(v.values[1:] * adjoint.states[:-1]))
    return abs(boundary - pairing)


def spacetime_norm(grid: Grid1D, time_grid: TimeGrid, values: np.ndarray) -> float:
    """Discrete L2(Q) norm sqrt(h*dt*sum values^2)."""
    return float(np.sqrt(grid.h * time_grid.dt * np.sum(np.asarray(values) ** 2)))
