"""Numerical lab for Hardy, Rellich and Hardy-Rellich inequalities with distance weights.

Submodules: geometry (distance functions of analytic domains), quadrature
(boundary-graded integration), constants, sharpness (minimising sequences),
verifier (inequality slack reports), lemmas (vector inequality fuzzing),
solver (radial fourth-order p-Laplacian problem) and cli.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .constants import bessel_lambda0, constants_report, lambda_p, riesz_lower_bound, sobolev_critical
from .geometry import Annulus, Ball, Box, ExteriorBall, domain_from_config
from .quadrature import QuadratureSpec, coarea_integrate, grid_integrate

__all__ = [
    "__version__", "Annulus", "Ball", "Box", "ExteriorBall", "domain_from_config",
    "QuadratureSpec", "coarea_integrate", "grid_integrate", "bessel_lambda0",
    "constants_report", "lambda_p", "riesz_lower_bound", "sobolev_critical",
]
