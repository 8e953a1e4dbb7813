"""Simulation library for chiral states of a three-junction superconducting ring."""

__version__ = "0.1.0"

from .lattice import Basis, PhaseGrid, WaveFunction, LinearMap
from .ring import (
    RingParams,
    HarmonicParams,
    build_hamiltonian,
    build_harmonic_hamiltonian,
    chiral_state,
    chiral_current_map,
    chirality_chi,
)
from .solver import DenseOperator, PropagatorConfig, lowest_eigenpairs, propagate
from .quench import (
    SolverSettings,
    QuenchRun,
    run_quench,
    half_life,
    halflife_scan,
    continuum_scan,
    fit_power_law,
)
from .effective import EffectiveParams, SingleExcitationState, circulation, visit_order
from .scattering import ScatteringParams, smatrix, output_powers, directionality
from .opensys import TruncatedRingSpace, DensityMatrix, plane_wave_state, lindblad_evolve

__all__ = [
    "__version__",
    "Basis", "PhaseGrid", "WaveFunction", "LinearMap",
    "RingParams", "HarmonicParams", "build_hamiltonian", "build_harmonic_hamiltonian",
    "chiral_state", "chiral_current_map", "chirality_chi",
    "DenseOperator", "PropagatorConfig", "lowest_eigenpairs", "propagate",
    "SolverSettings", "QuenchRun", "run_quench", "half_life",
    "halflife_scan", "continuum_scan", "fit_power_law",
    "EffectiveParams", "SingleExcitationState", "circulation", "visit_order",
    "ScatteringParams", "smatrix", "output_powers", "directionality",
    "TruncatedRingSpace", "DensityMatrix", "plane_wave_state", "lindblad_evolve",
]
