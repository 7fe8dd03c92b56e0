"""Spectra of block Jacobi operators with non-invertible hoppings.

Eigenvalues are counted by the spectral flow of a matrix Pruefer phase built
from reduced transfer matrices, and every step can be cross-checked against
a dense eigensolver.
"""

from .channels import (
    HypothesisReport,
    SiteGrading,
    check_hypotheses,
    decompose,
    reduced_hoppings,
    regauge,
    require_admissible,
)
from .errors import (
    BlockJacobiError,
    DimensionCapExceeded,
    EnergyAtPole,
    Hypothesis3Violated,
    HypothesisFailure,
    IllConditionedEnergy,
    MalformedFrame,
    NonMonotoneCrossing,
    NumericalFailure,
    ValidationError,
)
from .green import green_blocks, green_blocks_derivative
from .krein import (
    FlowResult,
    count_eigenvalues,
    eigenphases,
    intersection_dimension,
    iunitarity_defect,
    krein_form,
    locate_eigenvalues,
    monotonicity_certificate,
    multiplicity_at,
    propagate_frames,
    prufer,
    solutions_at,
    spectral_flow,
    stereographic,
)
from .operator import BlockJacobiOperator, apply, assemble_dense, validate
from .oracle import count_leq, crosscheck, dense_spectrum, random_admissible
from .periodic import (
    PeriodicScalarModel,
    build_periodic_scalar,
    monodromy,
    verify_monodromy_equality,
)
from .transfer import (
    analytic_extension,
    boundary_transfer_left,
    boundary_transfer_right,
    interior_transfer,
    reconstruct_solution,
    transfer_derivative,
)

__version__ = "0.1.0"
