"""Entanglement between the internal and motional state of a trapped
three-level atom cooled by electromagnetically induced transparency."""

__version__ = "0.1.0"

from .dynamics import (
    DensityMatrix,
    LaserSchedule,
    Segment,
    StateVector,
    SteadyState,
    Trajectory,
    evolve_effective,
    evolve_lindblad,
    evolve_schrodinger,
    initial_state,
    observables,
    steady_state,
)
from .entanglement import negativity, negativity_pure, partial_transpose, schmidt
from .errors import EITError
from .model import (
    CompositeSpace,
    OperatorSet,
    SystemParams,
    ac_stark,
    build_effective_hamiltonian,
    build_hamiltonian,
    build_operators,
    build_space,
    dressed_states,
    resonance_ratio,
)
from .spectral import (
    effective_eigs,
    find_avoided_crossing,
    gamma1,
    gap_approx,
    lz_pair,
    predict_negativity_damped,
    predict_negativity_pure,
    spectrum_scan,
)
