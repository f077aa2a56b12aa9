"""nevlab: value-distribution functionals on model manifolds, by quadrature and by Brownian motion."""

__version__ = "0.1.0"

from .manifold import (  # noqa: F401
    CurvatureProfile,
    GreenWarp,
    ModelManifold,
    flat,
    hyperbolic,
    kappa_of,
    solve_warp,
    curvature_scalar_pair,
    radial_laplacian,
    warped_from_callables,
    warped_from_samples,
)
from .rng import RngSpec  # noqa: F401
