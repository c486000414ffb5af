"""Surface-wave scattering on a structured square-lattice half plane.

Exact solver, spectral machinery and small-perturbation asymptotics for the
reflection, transmission and radiative loss of boundary waves crossing a
finite patch of random point-mass defects.
"""

__version__ = "0.1.0"

from .asymptotics import (
    AsymptoticParams,
    MomentSolution,
    RegimeFormulas,
    effective_params,
    exp_integral_e1,
    jump_markov_estimate,
    lambda0_transmittance,
    regime_formulas,
    solve_moment_hierarchy,
    solve_moments,
    strong_mean_loss,
    strong_var_loss,
)
from .ensemble import EnsembleSpec, EnsembleStats, draw_patch, run_ensemble
from .errors import (
    DomainError,
    FrequencyOutOfBand,
    GammaOutOfSpectrum,
    GmLatticeError,
    NonPositiveDiscriminant,
    NoSurfaceBand,
    NumericalError,
    QuadratureNotConverged,
    RootFindFailure,
    SingularSystem,
    TruncationNotConverged,
    ValidationError,
)
from .greens import (
    GreensTable,
    Kernel,
    build_boundary_table,
    greens_boundary,
    greens_boundary_extrapolated,
    greens_boundary_spectral,
    greens_interior,
    greens_interior_spectral,
    greens_table_spectral,
    kernel_eval,
    load_table,
    save_table,
)
from .scattering import (
    EnergyBreakdown,
    PerturbationPatch,
    ScatterContext,
    ScatteringResult,
    SolverSettings,
    radiated_flux,
    solve_patch,
    transmission_reciprocity_check,
)
from .spectrum import (
    DispersionPoint,
    SpectralData,
    SurfaceParams,
    eigenfunction_samples,
    omega_max,
    solve_dispersion,
    solve_inverse_dispersion,
    spectral_data,
    weighted_inner,
)
