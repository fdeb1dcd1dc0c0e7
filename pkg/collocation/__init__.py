"""Collocation solver for implicitly linear homogeneous Volterra equations.

Components:
- models: kernels, nonlinearities, meshes, collocation parameters, solutions
- quadrature: Lagrange basis and collocation weights
- fixedpoint: minimum nonzero fixed points of y -> G(alpha + beta y)
- solver: the step-by-step collocation march
- analysis: existence classification and nondivergence probe
- postprocess: y_h = V z_h, error norms and convergence sweeps
- main: batch command line front end
"""

__version__ = "1.0.0"

# Note: submodules are imported explicitly (collocation.solver, ...) since
# models and config depend on each other at import time
