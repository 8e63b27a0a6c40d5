"""Epistemically restricted phase-space (ERPS) representation of grid wave functions.

The momentum of a state ``psi = sqrt(rho) exp(iS/hbar)`` at position ``q`` is
restricted to ``dS/dq + (xi/2) (drho/dq)/rho`` with a hidden action variable
``xi`` of mean 0 and variance ``hbar^2``. The package builds that law, ties
it to the weak momentum value ``-i hbar psi'/psi``, checks the resulting
identities, samples it, simulates the weak measurement and reconstructs
``psi`` from weak values.
"""

from .errors import (
    AllNodes,
    BadWeights,
    DegenerateJacobianWarning,
    DisconnectedDomain,
    EmptyBin,
    EmptyCalibration,
    ErpsError,
    GridMismatch,
    InvalidGrid,
    InvalidState,
    InvalidXi,
    NodeCrossing,
    NodeEvaluation,
    NormalizationWarning,
    NormDrift,
    StrongCouplingWarning,
    TailClipped,
)
from .state import (
    Grid,
    GridState,
    MixedState,
    PolarFields,
    build_correlated_gaussian,
    build_gaussian,
    eigen_superposition,
    harmonic_eigenstate,
    mix,
    plane_wave,
    polar_decompose,
    shift_phase_space,
    superpose,
    tensor_product,
    two_gaussian,
)
from .xi import XiDistribution
from .phase_space import (
    ErpsSample,
    ErpsSamples,
    conditional_moments,
    erps_mixed_moments,
    marginal_momentum,
    momentum_field,
    momentum_field_grid,
    momentum_moments,
    sample_erps,
    uncertainty_product,
)
from .weak import (
    WeakValueField,
    estimate_decomposition,
    field_from_weak,
    moment_identities_check,
    weak_momentum_value,
)
from .observables import (
    QuadraticObservable,
    equivalence_check,
    phase_space_expectation,
    polynomial_observable,
    quantize,
    quantum_expectation,
)
from .dynamics import Hamiltonian, Trajectory, propagate, wiseman_trajectories
from .tomography import ReconstructionResult, reconstruct, reconstruct_from_noisy
from .measurement import PointerConfig, WeakEstimate, calibrate, simulate_weak_measurement

__version__ = "0.1.0"
