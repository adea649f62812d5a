"""Self-consistent Bloch bands of atoms in a driven optical cavity.

Units: energies in E_R, frequencies in w_R (see ``cavityband.model``).
"""
from .errors import (
    CavityBandError,
    DegenerateWindow,
    DerivativeUnavailable,
    ExtremizationFailure,
    InconclusiveError,
    InconsistentSignError,
    NotFoundError,
    NumericalError,
    ParameterError,
    TruncationError,
    ValidationFailure,
)
from .model import UNITS, SystemParams, n_ph_from_depth, validate_params
from .bloch import (
    BlochState,
    OverlapDerivatives,
    build_hamiltonian,
    overlap_derivatives,
    overlap_f,
    solve_bloch,
)
from .steady_state import (
    BranchSet,
    PhotonBranch,
    find_branches,
    find_branches_red_detuned,
    input_output_curve,
    lineshape_sweep,
    state_function_G,
)
from .bands import (
    BandDiagram,
    BandPoint,
    band_sweep,
    cross_validate,
    edge_slopes,
    energy_of_branch,
    loop_endpoints,
    method1_extremize,
)
from .bistability import (
    BifurcationMap,
    CriticalPoint,
    bifurcation_map,
    bistability_residual,
    critical_point_numeric,
    critical_points_numeric,
    eta_cr_analytic_shallow,
    eta_window,
    kerr_critical_point,
)
from .catastrophe import (
    CuspCoordinates,
    SwallowtailPoint,
    butterfly_check,
    cusp_reduce_shallow,
    find_q_sw,
    swallowtail_scan,
    transversality_rank_check,
)
from .stability import StabilityMatrix, StabilityReport, build_stability_matrix, classify_band, classify_branch

__version__ = "0.1.0"
