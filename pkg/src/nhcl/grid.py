"""Uniform 1D grid on (0,1) with homogeneous Dirichlet boundary, and a
uniform time grid on [0,T].

Fields (spatial functions) are plain 1-D numpy arrays holding values at the
interior nodes only; the boundary values are identically zero and never
stored.  The discrete L2 pairing is h * sum(f * g), i.e. the trapezoid rule
with zero endpoints, which makes the matrix transpose the exact adjoint of
every operator assembled on this grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Grid1D",
    "TimeGrid",
    "ControlWindow",
    "build_grid",
    "build_time_grid",
    "validate_field",
    "apply_laplacian",
    "inner_product",
    "field_norm",
]


@dataclass(frozen=True)
class Grid1D:
    """Interior nodes of a uniform grid on (0,1)."""

    n_interior: int
    h: float
    nodes: np.ndarray


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time nodes 0, dt, ..., T."""

    T: float
    m_steps: int
    dt: float
    times: np.ndarray


@dataclass(frozen=True)
class ControlWindow:
    """Open observation/control interval (a,b) inside (0,1)."""

    a: float
    b: float

    def __post_init__(self):
        if not (0.0 < self.a < self.b < 1.0):
            raise ValueError(f"window must satisfy 0 < a < b < 1, got ({self.a}, {self.b})")

    def mask(self, grid: Grid1D) -> np.ndarray:
        """0/1 indicator of the window on the interior nodes.

        Raises ValueError if no node falls inside (a,b).
        """
        m = ((grid.nodes > self.a) & (grid.nodes < self.b)).astype(float)
        if not m.any():
            raise ValueError(f"no grid node inside window ({self.a}, {self.b})")
        return m


def build_grid(n_interior: int) -> Grid1D:
    """Uniform grid with n_interior nodes, h = 1/(n_interior+1)."""
    if n_interior < 3:
        raise ValueError(f"n_interior must be >= 3, got {n_interior}")
    h = 1.0 / (n_interior + 1)
    nodes = h * np.arange(1, n_interior + 1)
    return Grid1D(n_interior=n_interior, h=h, nodes=nodes)


def build_time_grid(T: float, m_steps: int) -> TimeGrid:
    if T <= 0.0:
        raise ValueError(f"horizon T must be positive, got {T}")
    if m_steps < 1:
        raise ValueError(f"m_steps must be >= 1, got {m_steps}")
    times = np.linspace(0.0, T, m_steps + 1)
    return TimeGrid(T=T, m_steps=m_steps, dt=T / m_steps, times=times)


def validate_field(grid: Grid1D, f: np.ndarray, name: str = "field") -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n_interior,):
        raise ValueError(f"{name} has shape {f.shape}, expected ({grid.n_interior},)")
    if not np.all(np.isfinite(f)):
        raise ValueError(f"{name} contains non-finite entries")
    return f


def apply_laplacian(grid: Grid1D, f: np.ndarray) -> np.ndarray:
    """Second difference quotient with zero Dirichlet ghost values.

    Returns the discrete Laplacian of f (negative semidefinite, symmetric
    w.r.t. inner_product).
    """
    f = validate_field(grid, f)
    out = -2.0 * f
    out[:-1] += f[1:]
    out[1:] += f[:-1]
    return out / grid.h**2


def inner_product(grid: Grid1D, f: np.ndarray, g: np.ndarray) -> float:
    """Discrete L2(0,1) pairing h * sum(f*g)."""
    f = validate_field(grid, f, "f")
    g = validate_field(grid, g, "g")
    return grid.h * float(np.dot(f, g))


def field_norm(grid: Grid1D, f: np.ndarray) -> float:
    return np.sqrt(max(inner_product(grid, f, f), 0.0))


def laplacian_matrix(grid: Grid1D) -> np.ndarray:
    """Dense matrix of -apply_laplacian (the SPD stiffness matrix)."""
    n, h = grid.n_interior, grid.h
    a = np.zeros((n, n))
    idx = np.arange(n)
    a[idx, idx] = 2.0 / h**2
    a[idx[:-1], idx[:-1] + 1] = -1.0 / h**2
    a[idx[1:], idx[1:] - 1] = -1.0 / h**2
    return a
