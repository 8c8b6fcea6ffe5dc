"""
pnpfermi: entropy-stable finite-volume solver for saturated ion transport
with Poisson-Fermi electrostatics.

Submodules:

  mesh           uniform 1D grid, discrete gradients/divergence, quadrature
  linalg         banded direct solves, damped Newton driver
  model          Fermi-Dirac map, entropy variables, free energy, fluxes
  poisson_fermi  fourth-order potential solves via the Yukawa splitting
  stepper        implicit Euler scheme in entropy variables
  diagnostics    extended mobility matrices, relative entropy, energy checks
  mms            manufactured solutions for convergence studies
  app            configs, scenario/experiment drivers, CSV output, CLI
"""

from .mesh import DIRICHLET, NEUMANN, Mesh, MeshError, build_mesh
from .linalg import (
    BandedMatrix,
    NewtonOptions,
    NewtonResult,
    SingularMatrixError,
    newton_solve,
    solve_banded,
)
from .model import (
    BinaryAnnihilation,
    BoundaryData,
    SpeciesParams,
    State,
    entropy_dissipation,
    entropy_variables,
    face_flux,
    fermi_dirac,
    free_energy,
    make_boundary_data,
    mobility_B,
    reaction_rates,
)
from .poisson_fermi import (
    PotentialPair,
    solve_boundary_extension,
    solve_helmholtz,
    solve_poisson,
    solve_poisson_fermi,
)
from .stepper import (
    StepFailureError,
    StepperOptions,
    StepReport,
    Trajectory,
    initial_state,
    run,
    solve_equilibrium,
    step,
)
from .diagnostics import (
    ExtendedMatrices,
    RelativeEntropyBreakdown,
    check_subspace_pd,
    comparison_matrix_Gstar,
    energy_inequality_check,
    extended_matrices,
    project_L,
    project_Lperp,
    relative_entropy,
    scaled_matrix_G,
)

__version__ = "0.1.0"
