"""Resonant semilinear parabolic problems on a spectral Galerkin model.

Sign conditions on the nonlinearity, predicted Conley indices, the
index-comparison criterion for connecting orbits and a numerical orbit search.
"""

__version__ = "0.1.0"

from .homotopy import HomotopyType, smash, sphere, wedge  # noqa: E402,F401
from .spectral import (  # noqa: E402,F401
    ConstantsBundle,
    EigenSystem,
    SpectralState,
    build_laplacian_1d,
    decompose,
)
