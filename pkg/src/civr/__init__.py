"""Semiclassical coherent-state propagation with complex trajectories.

Complex classical trajectories are integrated as real trajectories of a
doubled phase space, assembled into a smoothed (or sharp) initial value
representation of the coherent-state propagator with automatic
rejection of non-contributing trajectories, and validated against exact
and split-operator quantum references.
"""

from .config import ConfigError, RunConfig, load_config
from .grids import AxisSpec, PhaseGridSpec
from .hamiltonian import QuarticSpec, ScaledHamiltonian, build_scaled
from .oracles import (NumericalFailure, SplitOpConfig, ground_energy_check,
                      harmonic_exact_K, lowest_energies, split_operator_evolve)
from .phase_space import (CoherentLabel, ComplexPhasePoint, DoublePhasePoint,
                          UnitScaling, from_double, label_overlap, qp_from_uv,
                          to_double, uv_from_qp)
from .propagator import (CivrParams, Contribution, PropagatorGrid,
                         contribution, contribution_map, lambda_check,
                         passes_cutoff, phi_endpoint, phi_exponent, smooth_K,
                         sudden_K)
from .reconstruction import (WavefunctionGrid, coherent_overlap_from_grid,
                             coherent_position_amplitude, coherent_state,
                             fidelity, reconstruct)
from .trajectory import (LaunchParams, TrajectoryRecord, evolve,
                         evolve_ensemble, finite_diff_tangent,
                         initial_conditions, m_to_M, n_to_m,
                         period_and_turning_points, trajectory_history)

__version__ = "0.1.0"

__all__ = [
    "AxisSpec", "CivrParams", "CoherentLabel", "ComplexPhasePoint",
    "ConfigError", "Contribution", "DoublePhasePoint", "LaunchParams",
    "NumericalFailure", "PhaseGridSpec", "PropagatorGrid", "QuarticSpec",
    "RunConfig", "ScaledHamiltonian", "SplitOpConfig", "TrajectoryRecord",
    "UnitScaling", "WavefunctionGrid", "build_scaled",
    "coherent_overlap_from_grid", "coherent_position_amplitude",
    "coherent_state", "contribution", "contribution_map", "evolve",
    "evolve_ensemble", "fidelity", "finite_diff_tangent", "from_double",
    "ground_energy_check", "harmonic_exact_K", "initial_conditions",
    "label_overlap", "lambda_check", "load_config", "lowest_energies",
    "m_to_M", "n_to_m", "passes_cutoff", "period_and_turning_points",
    "phi_endpoint", "phi_exponent", "qp_from_uv", "reconstruct", "smooth_K",
    "split_operator_evolve", "sudden_K", "to_double", "trajectory_history",
    "uv_from_qp",
]
