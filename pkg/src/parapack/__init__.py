"""Parallel-connected battery pack modeling, observability analysis, and
clustered state-of-charge estimation."""

from .cell import (CellParams, CellState, OcvCurve, builtin_ocv,
                   cell_eigenvalue, NOMINAL_PARAMS)
from .cluster import (ClusterAssignment, ClusteredPack, aggregate_cluster,
                      build_clustered_pack, cluster_by_eigenvalue,
                      cluster_true_soc, clustered_state_space)
from .errors import (AggregationError, CareSolverError, DiagonalizationError,
                     FilterDivergenceError, IntegrationError, ParapackError,
                     StudyAbortError)
from .kalman import (FilterDesign, NoiseSpec, care_residual, design_filter,
                     filter_step, run_filter, solve_care, steady_gain)
from .linearize import (EquilibriumPoint, StateSpace,
                        diagonalize_to_first_order, linearize_first_order,
                        linearize_full, make_equilibrium)
from .montecarlo import (FleetSpec, StudyConfig, StudyResult, compute_rmse,
                         generate_fleet, make_profile, run_study)
from .observe import (ObservabilityReport, check_observability,
                      observability_matrix, relative_gap, vandermonde_det)
from .pack import (CURRENT_DRIVEN, VOLTAGE_DRIVEN, DriveProfile, PackModel,
                   PackState, Trajectory, cell_terminal_voltage, simulate,
                   solve_current_split, step_forward, step_inverse)

__version__ = "0.1.0"
