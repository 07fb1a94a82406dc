"""minkray: light ray transform of symmetric 2-tensor fields on Minkowski space.

Forward transform by quadrature, Fourier slice verification, per-frequency
spectral recovery from data near one direction, and the trace/divergence-free
decomposition through a strongly elliptic Dirichlet problem.
"""

from .grid_field import (
    Grid,
    MinkowskiMetric,
    ScalarField,
    SymTensorField,
    VectorField,
    component_index,
    divergence,
    scalar_metric,
    sym_derivative,
    trace,
    vector_divergence,
)

__version__ = "0.1.0"
