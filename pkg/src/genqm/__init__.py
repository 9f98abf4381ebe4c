"""1D quantum mechanics with a generalized momentum operator.

The momentum operator is deformed by an auxiliary profile A(x),
p = -i hbar (A d/dx + A'/2).  The package assembles the matching
Hamiltonians in two field representations, solves stationary and
time-dependent problems in Hermitian (real A, V) and parity-time
symmetric (complex A, V) regimes, and certifies the generalized
probability density, current density, continuity equation and energy
identities numerically.
"""

__version__ = "0.1.0"

from .errors import GenqmError
from .exprlang import Jet2, eval_jet, parse, to_source
from .model import (
    Field,
    Grid,
    PhysicalConstants,
    ProblemSpec,
    SampledProfiles,
    build_problem,
    pt_reflect,
    pt_symmetry_report,
)
from .operators import (
    EffectivePotential,
    TridiagonalOperator,
    apply_momentum,
    assemble_hamiltonian,
    effective_potential,
    transform_representation,
)
from .spectra import EigenPair, normalize_state, solve_spectrum
from .dynamics import (
    CrankNicolsonStepper,
    EvolutionState,
    crank_nicolson_step,
    evolve,
    initial_state_eigenstate,
    initial_state_gaussian,
)
from .diagnostics import (
    DiagnosticsReport,
    continuity_residual,
    current_density,
    energy_report,
    probability_density,
    total_probability,
)

__all__ = [
    "__version__",
    "GenqmError",
    "Jet2",
    "eval_jet",
    "parse",
    "to_source",
    "Field",
    "Grid",
    "PhysicalConstants",
    "ProblemSpec",
    "SampledProfiles",
    "build_problem",
    "pt_reflect",
    "pt_symmetry_report",
    "EffectivePotential",
    "TridiagonalOperator",
    "apply_momentum",
    "assemble_hamiltonian",
    "effective_potential",
    "transform_representation",
    "EigenPair",
    "normalize_state",
    "solve_spectrum",
    "CrankNicolsonStepper",
    "EvolutionState",
    "crank_nicolson_step",
    "evolve",
    "initial_state_eigenstate",
    "initial_state_gaussian",
    "DiagnosticsReport",
    "continuity_residual",
    "current_density",
    "energy_report",
    "probability_density",
    "total_probability",
]
