"""Physical region and densities of truncated Fock distributions in correlator coordinates.

The package maps Fock probability vectors (P_0, ..., P_N) to unnormalized
correlators (1, n0, G2, ..., GN) and normalized correlators (n0, g2, ..., gN),
decides physicality, evaluates exact boundary surfaces and densities of states
under uniform sampling of the probability simplex, and reconstructs those
densities by Monte Carlo.
"""

from hilbert_chart.core import (
    EPS_NORM,
    EPS_PHYS,
    EPS_ROUND,
    CorrelatorVector,
    FockDistribution,
    GlauberPoint,
    build_M,
    correlators_of,
    denormalize,
    fock_of,
    jacobian_G_to_g,
    normalize,
)
from hilbert_chart.errors import (
    ChartError,
    DomainError,
    NormalizationError,
    QuadratureError,
)
from hilbert_chart.geometry import (
    DensityValue,
    fundamental_form,
    is_physical,
    joint_density,
    simplex_volume,
    superfactorial,
)

__version__ = "0.1.0"

__all__ = [
    "EPS_NORM",
    "EPS_PHYS",
    "EPS_ROUND",
    "ChartError",
    "CorrelatorVector",
    "DensityValue",
    "DomainError",
    "FockDistribution",
    "GlauberPoint",
    "NormalizationError",
    "QuadratureError",
    "build_M",
    "correlators_of",
    "denormalize",
    "fock_of",
    "fundamental_form",
    "is_physical",
    "jacobian_G_to_g",
    "joint_density",
    "normalize",
    "simplex_volume",
    "superfactorial",
]
