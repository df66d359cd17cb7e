"""Stochastic trajectories for a measured interacting fermion chain.

A half-filled chain of spinless fermions is evolved by alternating exact
short-time unitary steps with a sweep of local two-outcome occupation
measurements.  Tuning the measurement strength drives a dynamical Zeno
transition in the entanglement structure of the trajectory steady states;
the analysis layer locates the transition and extracts scaling exponents
through an unbiased cost-function data collapse.
"""

from zenochain.fockspace import FockBasis, StateVector, build_basis, domain_wall_state, neel_state
from zenochain.dynamics import HamiltonianMatrix, Propagator, apply_propagator, build_hamiltonian, build_propagator
from zenochain.measurement import (
    MeasurementConfig,
    OutcomeRecord,
    apply_measurement_sweep,
    kraus_completeness_check,
)
from zenochain.observables import (
    ReducedDensityMatrix,
    TimeSeries,
    TrajectoryStats,
    purity,
    reduced_density_matrix,
    time_window_average,
    trajectory_statistics,
    von_neumann_entropy,
)
from zenochain.engine import (
    ConfigError,
    EngineError,
    PhysicsError,
    ProtocolConfig,
    SweepResult,
    TrajectoryRecord,
    load_config,
    run_sweep,
    run_trajectory,
    save_sweep,
)
from zenochain.collapse import (
    Ansatz,
    CollapseError,
    CollapseFit,
    DataPoint,
    InsufficientDataError,
    compare_ansatze,
    cost_function,
    critical_entropy_fit,
    delta_s_peaks,
    make_ansatz,
    minimize_cost,
    phase_diagram_fit,
)

__version__ = "0.1.0"
