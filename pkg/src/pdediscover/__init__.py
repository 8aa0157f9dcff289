"""Discover governing PDEs from spatiotemporal data.

The workflow: sample a field on a space-time grid (or simulate one), build
a dictionary of candidate terms with numerically estimated derivatives,
and solve the resulting sparse regression problem. See the README for the
command-line entry points.
"""

from .diffops import DerivativeSpec, central_fd, differentiate, poly_derivative
from .dictionary import (
    CandidateTerm,
    DictionaryError,
    DictionarySpec,
    Dictionary,
    DiffMethod,
    TermSyntaxError,
    build,
    enumerate_terms,
    parse_term,
    subsample,
)
from .grid import (
    FieldSet,
    GridError,
    SnapshotGrid,
    add_noise,
    crop,
    read_grid,
    rmse,
    write_grid,
)
from .preprocess import (
    ComplexSystem,
    PODResult,
    complex_to_real,
    pod_denoise,
    real_to_complex,
    svd_reduce,
)
from .sbl import (
    SBLConfig,
    SBLResult,
    coeff_error,
    compute_weights,
    cost,
    kkt_residual,
    orthonormal_fixed_point_check,
    run_sbl,
    update_gamma,
    weighted_lasso,
)
from .simulate import (
    SimDomain,
    StabilityError,
    burgers_solve,
    fisher_solve,
    kdv_soliton,
    pde_residual,
    sine_gordon_breather,
)

__version__ = "0.1.0"
