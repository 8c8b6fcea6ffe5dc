"""
Thermodynamic core of the saturated ion-transport model.

A mixture of n ionic species plus solvent carries volume fractions
u_0, ..., u_n with u_0 + ... + u_n = 1 per cell.  The entropy variables

    w_i = log(u_i / u_0) + z_i * Phi,        i = 1 .. n,

invert through the Fermi-Dirac map, which produces compositions strictly
inside the simplex for any real (w, Phi).  Fluxes take the mobility form
J_i = -D_i u_i grad(w_i), and the free energy pairs a Bregman mixing term
against the boundary reference with the electric field energies.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mesh import DIRICHLET, Mesh

# Exponent clamp inside the Fermi-Dirac map; unreachable in converged states.
_EXP_CAP = 700.0
# Strict simplex interior at double precision: floor against underflow to 0,
# cap below 1 by one ulp.  Shifts the cell sum by well under 1e-15.
_U_FLOOR = np.finfo(float).tiny
_U_CAP = 1.0 - np.finfo(float).epsneg


@dataclass(frozen=True)
class BinaryAnnihilation:
    """Reaction r_i = r_j = -k u_i u_j between species i and j (1-based).

    Quasi-positive, total rate <= 0, and r log u -> 0 at the boundary,
    so the free energy estimates tolerate it.
    """

    k: float
    i: int
    j: int


@dataclass(frozen=True)
class SpeciesParams:
    """Diffusivities D_i > 0, valences z_i, Debye length, correlation length."""

    n: int
    D: np.ndarray
    z: np.ndarray
    lam: float
    ell: float
    reaction: Optional[BinaryAnnihilation] = None

    def __post_init__(self):
        object.__setattr__(self, "D", np.asarray(self.D, dtype=float))
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float))
        if self.n < 1:
            raise ValueError("need at least one ion species")
        if self.D.shape != (self.n,) or self.z.shape != (self.n,):
            raise ValueError("D and z must have one entry per species")
        if np.any(self.D <= 0.0):
            raise ValueError("diffusivities must be positive")
        if self.lam <= 0.0:
            raise ValueError("Debye length must be positive")
        if self.ell < 0.0:
            raise ValueError("correlation length must be nonnegative")
        r = self.reaction
        if r is not None:
            if r.k < 0.0:
                raise ValueError("reaction rate constant must be nonnegative")
            if not (1 <= r.i <= self.n and 1 <= r.j <= self.n):
                raise ValueError("reaction species index out of range")


def fermi_dirac(w, Phi, params):
    """Map entropy variables to the composition (u_0, ..., u_n).

    ``w`` has shape (n,) or (n, m); ``Phi`` is scalar or (m,).  Evaluated in
    log-sum-exp form, so arbitrarily large arguments stay finite and the
    output lies strictly inside the simplex with sum 1 up to rounding.
    """
    w = np.asarray(w, dtype=float)
    scalar = w.ndim == 1
    w2 = w[:, None] if scalar else w
    Phi2 = np.broadcast_to(np.asarray(Phi, dtype=float), w2.shape[1:])
    eta = w2 - params.z[:, None] * Phi2[None, :]
    eta = np.clip(eta, -_EXP_CAP, _EXP_CAP)
    top = np.maximum(np.max(eta, axis=0), 0.0)
    expo = np.exp(eta - top[None, :])
    denom = np.exp(-top) + np.sum(expo, axis=0)
    u = np.empty((params.n + 1,) + w2.shape[1:])
    u[0] = np.exp(-top) / denom
    u[1:] = expo / denom
    u = np.clip(u, _U_FLOOR, _U_CAP)
    return u[:, 0] if scalar else u


def entropy_variables(U, Phi, params):
    """Inverse of fermi_dirac: w_i = log(u_i/u_0) + z_i Phi; needs u > 0."""
    U = np.asarray(U, dtype=float)
    if np.any(U <= 0.0):
        raise ValueError("entropy variables need strictly positive concentrations")
    scalar = U.ndim == 1
    U2 = U[:, None] if scalar else U
    Phi2 = np.broadcast_to(np.asarray(Phi, dtype=float), U2.shape[1:])
    w = np.log(U2[1:]) - np.log(U2[0])[None, :] + params.z[:, None] * Phi2[None, :]
    return w[:, 0] if scalar else w


def mobility_B(U, params):
    """Diagonal mobility entries B_ii = D_i u_i (degenerate at u_i = 0)."""
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        return params.D * U[1:]
    return params.D[:, None] * U[1:]


def reaction_rates(U, params):
    """Reaction vector r(u) for species 1..n; zeros without a reaction model."""
    U = np.asarray(U, dtype=float)
    shape = (params.n,) + U.shape[1:]
    r = np.zeros(shape)
    model = params.reaction
    if isinstance(model, BinaryAnnihilation):
        rate = -model.k * U[model.i] * U[model.j]
        r[model.i - 1] += rate
        r[model.j - 1] += rate
    return r


@dataclass
class State:
    """Grid state at one time level.

    U stacks the n+1 volume fractions (solvent first), w the n entropy
    variables; Phi is the correlated potential and phi_split the free-ion
    potential of the Yukawa splitting (equal to Phi when ell = 0).
    U and w stay consistent through the Fermi-Dirac map.
    """

    U: np.ndarray
    w: np.ndarray
    Phi: np.ndarray
    phi_split: np.ndarray
    time: float


def validate_state(state, params, mesh, tol=1e-12):
    """Assert the simplex bounds, saturation, and the u/w roundtrip."""
    U = state.U
    if U.shape != (params.n + 1, mesh.n_cells):
        raise ValueError("state U has wrong shape")
    if np.any(U <= 0.0) or np.any(U >= 1.0):
        raise ValueError("state concentrations leave the open interval (0, 1)")
    sat = np.max(np.abs(U.sum(axis=0) - 1.0))
    if sat > tol:
        raise ValueError(f"saturation defect {sat:.3e} exceeds {tol:.1e}")
    rt = np.max(np.abs(fermi_dirac(state.w, state.Phi, params) - U))
    if rt > tol:
        raise ValueError(f"u/w roundtrip defect {rt:.3e} exceeds {tol:.1e}")


@dataclass
class BoundaryData:
    """Dirichlet data and its extension used by scheme and diagnostics.

    Endpoint values (``uD_left`` etc.) are given only at Dirichlet ends.
    ``PhiD_field``/``phiD_split`` extend the potential data by the
    fourth-order problem with right-hand side f; ``wD_field`` extends the
    endpoint entropy values (constant for a single Dirichlet end, linear
    between two), and ``uD_field = fermi_dirac(wD_field, PhiD_field)`` keeps
    w_i^D = log(u_i^D/u_0^D) + z_i Phi^D exact per cell.
    """

    uD_left: Optional[np.ndarray]
    uD_right: Optional[np.ndarray]
    PhiD_left: Optional[float]
    PhiD_right: Optional[float]
    wD_left: Optional[np.ndarray]
    wD_right: Optional[np.ndarray]
    PhiD_field: np.ndarray
    phiD_split: np.ndarray
    wD_field: np.ndarray
    uD_field: np.ndarray
    f: np.ndarray
    equilibrium_flag: bool


def _check_simplex_values(u, side):
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError(f"{side} Dirichlet concentrations must lie in (0, 1)")
    total = float(u.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"{side} Dirichlet concentrations sum to {total!r}, not 1")
    return u / total


def make_boundary_data(
    mesh,
    params,
    u_left=None,
    phi_left=None,
    u_right=None,
    phi_right=None,
    f=None,
    equilibrium_override=None,
):
    """Assemble BoundaryData from endpoint values and background charge f.

    Concentration vectors include the solvent: (u_0^D, u_1^D, ..., u_n^D),
    each in (0, 1) and summing to 1.  Values are required exactly at the
    Dirichlet endpoints.
    """
    from .poisson_fermi import solve_boundary_extension

    if f is None:
        f = np.zeros(mesh.n_cells)
    f = np.asarray(f, dtype=float)

    def endpoint(side, u, phi):
        bc = mesh.left_bc if side == "left" else mesh.right_bc
        if bc == DIRICHLET:
            if u is None or phi is None:
                raise ValueError(f"missing Dirichlet data at {side} endpoint")
            u = _check_simplex_values(u, side)
            if u.shape != (params.n + 1,):
                raise ValueError(f"{side} Dirichlet data needs n+1 components")
            w = np.log(u[1:] / u[0]) + params.z * float(phi)
            return u, float(phi), w
        if u is not None or phi is not None:
            raise ValueError(f"boundary values supplied at Neumann {side} endpoint")
        return None, None, None

    uL, phiL, wL = endpoint("left", u_left, phi_left)
    uR, phiR, wR = endpoint("right", u_right, phi_right)

    ext = solve_boundary_extension(
        f, params, mesh, left_value=phiL, right_value=phiR
    )

    x = mesh.cell_centers
    if wL is not None and wR is not None:
        frac = x / mesh.length
        wD_field = wL[:, None] * (1.0 - frac)[None, :] + wR[:, None] * frac[None, :]
        equilibrium = bool(np.allclose(wL, wR, rtol=0.0, atol=1e-14))
    elif wL is not None:
        wD_field = np.repeat(wL[:, None], mesh.n_cells, axis=1)
        equilibrium = True
    else:
        wD_field = np.repeat(wR[:, None], mesh.n_cells, axis=1)
        equilibrium = True
    if equilibrium_override is not None:
        equilibrium = bool(equilibrium_override)

    uD_field = fermi_dirac(wD_field, ext.Phi, params)

    return BoundaryData(
        uD_left=uL,
        uD_right=uR,
        PhiD_left=phiL,
        PhiD_right=phiR,
        wD_left=wL,
        wD_right=wR,
        PhiD_field=ext.Phi,
        phiD_split=ext.phi,
        wD_field=wD_field,
        uD_field=uD_field,
        f=f,
        equilibrium_flag=equilibrium,
    )


def _face_mean(cell_values, left_value, right_value):
    """Arithmetic face means; boundary faces average against endpoint data."""
    n_faces = cell_values.size + 1
    m = np.empty(n_faces)
    m[1:-1] = 0.5 * (cell_values[:-1] + cell_values[1:])
    m[0] = cell_values[0] if left_value is None else 0.5 * (left_value + cell_values[0])
    m[-1] = cell_values[-1] if right_value is None else 0.5 * (right_value + cell_values[-1])
    return m


def _wD_bc(bd, i):
    left = None if bd.wD_left is None else bd.wD_left[i]
    right = None if bd.wD_right is None else bd.wD_right[i]
    return left, right


def _uD_bc(bd, i):
    left = None if bd.uD_left is None else bd.uD_left[i]
    right = None if bd.uD_right is None else bd.uD_right[i]
    return left, right


def face_flux(state, bd, params, mesh):
    """Face fluxes J_i = -D_i u_i grad(w_i), one row per species.

    u_i at a face is the arithmetic mean of the adjacent cells (boundary
    faces average against the Dirichlet value); Neumann faces carry
    exactly zero flux.
    """
    J = np.empty((params.n, mesh.n_cells + 1))
    for i in range(params.n):
        wl, wr = _wD_bc(bd, i)
        grad = mesh.face_gradient(state.w[i], wl, wr)
        ul, ur = _uD_bc(bd, i + 1)
        uhat = _face_mean(state.U[i + 1], ul, ur)
        J[i] = -params.D[i] * uhat * grad
        if mesh.left_bc != DIRICHLET:
            J[i, 0] = 0.0
        if mesh.right_bc != DIRICHLET:
            J[i, -1] = 0.0
    return J


def entropy_dissipation(state, bd, params, mesh):
    """Discrete dissipation sum_i D_i int u_i |grad w_i|^2 dx (face quadrature)."""
    wface = mesh.face_weights
    total = 0.0
    for i in range(params.n):
        wl, wr = _wD_bc(bd, i)
        grad = mesh.face_gradient(state.w[i], wl, wr)
        ul, ur = _uD_bc(bd, i + 1)
        uhat = _face_mean(state.U[i + 1], ul, ur)
        total += params.D[i] * float(np.sum(wface * uhat * grad**2))
    return total


def _bregman_entropy_density(U, uD_field):
    return np.sum(U * np.log(U / uD_field) - U + uD_field, axis=0)


def free_energy(state, bd, params, mesh):
    """Discrete free energy H(u, Phi) >= 0 relative to the boundary data.

    The mixing part integrates the closed form u log(u/u^D) - u + u^D for
    all n+1 components; the field part adds (lam^2/2) |grad(Phi - Phi^D)|^2
    and, for ell > 0, the correlation energy evaluated through the
    splitting fields as (lam^2 ell^2 / 2) ((Phi - phi) - (Phi^D - phi^D))^2 / ell^4.
    """
    if np.any(state.U <= 0.0):
        raise ValueError("free energy needs strictly positive concentrations")
    mix = mesh.integrate(_bregman_entropy_density(state.U, bd.uD_field))
    dPhi = state.Phi - bd.PhiD_field
    zl = 0.0 if mesh.left_bc == DIRICHLET else None
    zr = 0.0 if mesh.right_bc == DIRICHLET else None
    grad = mesh.face_gradient(dPhi, zl, zr)
    field = 0.5 * params.lam**2 * float(np.sum(mesh.face_weights * grad**2))
    corr = 0.0
    if params.ell > 0.0:
        lap = ((state.Phi - state.phi_split) - (bd.PhiD_field - bd.phiD_split)) / params.ell**2
        corr = 0.5 * (params.lam * params.ell) ** 2 * mesh.integrate(lap**2)
    return mix + field + corr


def reaction_entropy_production(state, bd, params, mesh):
    """Diagnostic int sum_i r_i(u) (w_i - w_i^D) dx for calibrating the
    reaction growth constant; not a correctness gate."""
    r = reaction_rates(state.U, params)
    return mesh.integrate(np.sum(r * (state.w - bd.wD_field), axis=0))
