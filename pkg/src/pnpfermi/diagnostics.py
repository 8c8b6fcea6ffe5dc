"""
Structure diagnostics for the extended (solvent-included) system.

Writing the equations for the full composition U = (u_0, ..., u_n) with
z_0 = 0 gives mobility and drift matrices A(U), Q(U) whose scaled version
G_ij = A_ij / sqrt(u_i u_j) has kernel L^perp (the sqrt(u) direction) and
is positive definite on L = {Y : sum sqrt(u_i) Y_i = 0}, with the explicit
lower bound checked by ``check_subspace_pd``.  The relative (Bregman)
entropy between two states and the per-step energy inequality checks live
here as executable counterparts of the uniqueness machinery.
"""

from dataclasses import dataclass

import numpy as np

from .mesh import DIRICHLET
from .model import (
    entropy_dissipation,
    free_energy,
    reaction_rates,
)


@dataclass
class ExtendedMatrices:
    """Mobility A and drift Q of the (n+1)-component system, index 0 = solvent."""

    A: np.ndarray
    Q: np.ndarray


def extended_matrices(U, params):
    """A and Q at one composition: A_00 = sum D_i u_i, A_0i = A_i0 = -D_i u_i,
    A_ii = D_i u_i; Q diagonal D_i z_i u_i with Q_00 = -sum D_i z_i u_i."""
    U = np.asarray(U, dtype=float)
    n = params.n
    A = np.zeros((n + 1, n + 1))
    Q = np.zeros((n + 1, n + 1))
    Du = params.D * U[1:]
    A[0, 0] = Du.sum()
    A[0, 1:] = -Du
    A[1:, 0] = -Du
    A[np.arange(1, n + 1), np.arange(1, n + 1)] = Du
    Dzu = params.D * params.z * U[1:]
    Q[0, 0] = -Dzu.sum()
    Q[np.arange(1, n + 1), np.arange(1, n + 1)] = Dzu
    return ExtendedMatrices(A=A, Q=Q)


def scaled_matrix_G(U, params):
    """G_ij = A_ij / sqrt(u_i u_j) where u_i u_j > 0, else 0."""
    U = np.asarray(U, dtype=float)
    A = extended_matrices(U, params).A
    s = np.sqrt(U)
    outer = np.outer(s, s)
    G = np.zeros_like(A)
    mask = outer > 0.0
    G[mask] = A[mask] / outer[mask]
    return G


def comparison_matrix_Gstar(U, params):
    """Equal-diffusivity comparison matrix with D_* = min D_i; G - G_* is
    positive semidefinite on L and G_* carries the explicit bound."""
    U = np.asarray(U, dtype=float)
    n = params.n
    dstar = float(np.min(params.D))
    if U[0] <= 0.0:
        raise ValueError("comparison matrix needs u_0 > 0")
    G = np.zeros((n + 1, n + 1))
    ratio = np.sqrt(U[1:] / U[0])
    G[0, 0] = U[1:].sum() / U[0]
    G[0, 1:] = -ratio
    G[1:, 0] = -ratio
    G[np.arange(1, n + 1), np.arange(1, n + 1)] = 1.0
    return dstar * G


def project_L(Y, U):
    """(P_L Y)_i = Y_i - sqrt(u_i) sum_j sqrt(u_j) Y_j (projection for sum u = 1)."""
    Y = np.asarray(Y, dtype=float)
    s = np.sqrt(np.asarray(U, dtype=float))
    return Y - s * np.dot(s, Y)


def project_Lperp(Y, U):
    Y = np.asarray(Y, dtype=float)
    s = np.sqrt(np.asarray(U, dtype=float))
    return s * np.dot(s, Y)


def check_subspace_pd(U, params, Y):
    """Evaluate the subspace positive-definiteness bound at one draw.

    Returns (lhs, rhs, holds) with lhs = (P_L Y)^T G (P_L Y) and
    rhs = D_* (|(P_L Y)_0|^2 / u_0 + sum_{i>=1} |(P_L Y)_i|^2).
    """
    U = np.asarray(U, dtype=float)
    if U[0] <= 0.0:
        raise ValueError("subspace bound needs u_0 > 0")
    z = project_L(Y, U)
    G = scaled_matrix_G(U, params)
    lhs = float(z @ G @ z)
    dstar = float(np.min(params.D))
    rhs = dstar * float(z[0] ** 2 / U[0] + np.sum(z[1:] ** 2))
    holds = lhs >= rhs - 1e-12 * max(1.0, abs(lhs))
    return lhs, rhs, holds


def subspace_pd_eigen_gap(U, params):
    """Dense-eigenvalue oracle: smallest eigenvalue of P (G - D_* M) P with
    M = diag(1/u_0, 1, ..., 1) and P the orthogonal projection onto L.
    Nonnegative (up to rounding) iff the subspace bound holds."""
    U = np.asarray(U, dtype=float)
    G = scaled_matrix_G(U, params)
    dstar = float(np.min(params.D))
    M = np.diag(np.concatenate(([1.0 / U[0]], np.ones(params.n))))
    s = np.sqrt(U)
    P = np.eye(params.n + 1) - np.outer(s, s)
    B = P @ (G - dstar * M) @ P
    return float(np.min(np.linalg.eigvalsh(0.5 * (B + B.T))))


@dataclass
class RelativeEntropyBreakdown:
    """Bregman distance split into the mixing part h1 and field part h2."""

    h1: float
    h2: float

    @property
    def total(self):
        return self.h1 + self.h2


def relative_entropy(state, ref, params, mesh):
    """Relative free energy H(u, Phi | ubar, Phibar) of a state against a
    strictly interior reference sharing the same mesh and Dirichlet data.

    h1 integrates sum_i [u_i log(u_i/ubar_i) - (u_i - ubar_i)] over all
    n+1 components; h2 adds (lam^2/2)(|grad dPhi|^2 + ell^2 |Lap dPhi|^2)
    with the Laplacian difference taken from the splitting fields.
    """
    if np.any(ref.U <= 0.0):
        raise ValueError("reference state touches the simplex boundary")
    U, Ub = state.U, ref.U
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(U > 0.0, U * np.log(U / Ub), 0.0) - (U - Ub)
    h1 = mesh.integrate(np.sum(integrand, axis=0))
    dPhi = state.Phi - ref.Phi
    zl = 0.0 if mesh.left_bc == DIRICHLET else None
    zr = 0.0 if mesh.right_bc == DIRICHLET else None
    grad = mesh.face_gradient(dPhi, zl, zr)
    h2 = 0.5 * params.lam**2 * float(np.sum(mesh.face_weights * grad**2))
    if params.ell > 0.0:
        lap = ((state.Phi - state.phi_split) - (ref.Phi - ref.phi_split)) / params.ell**2
        h2 += 0.5 * (params.lam * params.ell) ** 2 * mesh.integrate(lap**2)
    return RelativeEntropyBreakdown(h1=h1, h2=h2)


def energy_inequality_check(trajectory, bd, params, mesh, slack):
    """Replay the discrete free energy inequality along a trajectory.

    For equilibrium Dirichlet data the step excess is
    H^k - H^{k-1} + tau dissipation^k - tau int sum_i r_i (w_i - w_i^D);
    otherwise the halved dissipation form with the grad(w^D) allowance is
    used.  Returns one record per step; ``violation`` flags excess > slack.
    """
    states, reports = trajectory.states, trajectory.reports
    records = []
    H_prev = free_energy(states[0], bd, params, mesh)
    wD_grad_term = 0.0
    if not bd.equilibrium_flag:
        for i in range(params.n):
            wl = None if bd.wD_left is None else bd.wD_left[i]
            wr = None if bd.wD_right is None else bd.wD_right[i]
            g = mesh.face_gradient(bd.wD_field[i], wl, wr)
            wD_grad_term += params.D[i] * float(np.sum(mesh.face_weights * g**2))
    for k, state in enumerate(states[1:], start=1):
        tau = reports[k - 1].tau_used
        H_k = free_energy(state, bd, params, mesh)
        diss = entropy_dissipation(state, bd, params, mesh)
        r = reaction_rates(state.U, params)
        reac = mesh.integrate(np.sum(r * (state.w - bd.wD_field), axis=0))
        if bd.equilibrium_flag:
            excess = H_k - H_prev + tau * diss - tau * reac
        else:
            excess = H_k - H_prev + 0.5 * tau * diss - tau * reac - 0.5 * tau * wD_grad_term
        records.append(
            {
                "step": k,
                "time": state.time,
                "H": H_k,
                "dissipation": diss,
                "reaction_term": reac,
                "excess": excess,
                "violation": bool(excess > slack),
            }
        )
        H_prev = H_k
    return records


def dissipation_lower_bound(state, bd, params, mesh):
    """Evaluate both sides of the dissipation lower bound at one state.

    lhs is the flux dissipation sum_i D_i int u_i |grad w_i|^2; rhs is
    (D_*/2) int (sum_i |grad sqrt(u_i)|^2 + |grad log u_0|^2 + |grad u_0|^2)
    - (sum_i D_i z_i^2) int |grad Phi|^2, all with face-averaged gradients.
    """
    lhs = entropy_dissipation(state, bd, params, mesh)
    wface = mesh.face_weights
    dstar = float(np.min(params.D))

    def bval(field_values, side):
        if side == "left":
            return None if bd.uD_left is None else field_values(bd.uD_left)
        return None if bd.uD_right is None else field_values(bd.uD_right)

    sq_sum = np.zeros(mesh.n_cells + 1)
    for i in range(params.n):
        g = mesh.face_gradient(
            np.sqrt(state.U[i + 1]),
            bval(lambda u: np.sqrt(u[i + 1]), "left"),
            bval(lambda u: np.sqrt(u[i + 1]), "right"),
        )
        sq_sum += g**2
    g_log = mesh.face_gradient(
        np.log(state.U[0]),
        bval(lambda u: np.log(u[0]), "left"),
        bval(lambda u: np.log(u[0]), "right"),
    )
    g_u0 = mesh.face_gradient(
        state.U[0],
        bval(lambda u: u[0], "left"),
        bval(lambda u: u[0], "right"),
    )
    g_Phi = mesh.face_gradient(state.Phi, bd.PhiD_left, bd.PhiD_right)
    rhs = 0.5 * dstar * float(np.sum(wface * (sq_sum + g_log**2 + g_u0**2)))
    rhs -= float(np.sum(params.D * params.z**2)) * float(np.sum(wface * g_Phi**2))
    return lhs, rhs
