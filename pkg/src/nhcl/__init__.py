"""nhcl: a numerical laboratory for null control of the 1D nonlocal heat
equation y_t - y_xx + integral(K(x,theta,t) y(theta,t) dtheta) = v 1_O.

Subpackages cover the spatial/temporal grids, Carleman-type weight
machinery, a kernel catalog with admissibility constants, exactly-dual
forward/adjoint solvers, penalized-HUM control synthesis, controllability
cost sweeps, a rank-one counterexample defeating unique continuation, and
fixed-point control loops for weighted and semilinear variants.
"""

__version__ = "0.1.0"
