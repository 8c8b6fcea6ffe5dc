"""
Implicit Euler time stepping in entropy variables.

Each step solves the coupled nonlinear system for the entropy-variable
increment v = w - w^D (zero at Dirichlet endpoints) and the potentials:
per cell j and species i,

    h/tau (u_i^k - u_i^{k-1}) + div_h(-D_i u_i grad_h(v_i + w_i^D))
        + eps h (v_i - Lap_h v_i) = h r_i(u^k),

with u^k = fermi_dirac(v + w^D, Phi^k), appended with the split
Poisson-Fermi residual for (Phi, phi).  Because the new concentrations
are Fermi-Dirac images, the simplex bounds hold by construction at every
accepted step.

The regularization uses a discrete H1 inner product instead of the
continuum H^m one: on a fixed grid every field is bounded, and H1 keeps
the coercivity the discrete energy estimate needs.  The Phi block is not
regularized; the potential solve is already well posed.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .linalg import BandedMatrix, NewtonOptions, NewtonResult, newton_solve
from .mesh import DIRICHLET, dirichlet_shift, laplacian_diagonals
from .model import (
    BinaryAnnihilation,
    State,
    entropy_dissipation,
    entropy_variables,
    fermi_dirac,
    free_energy,
    reaction_rates,
)
from .poisson_fermi import solve_poisson_fermi

FULLY_COUPLED = "fully_coupled"
FIXED_POINT = "fixed_point"

# Initial data is clipped this far into the open simplex so that the
# initial entropy variables are finite.
CLIP_MARGIN = 1e-12


class StepFailureError(RuntimeError):
    pass


@dataclass
class StepperOptions:
    tau: float
    eps: float = 1e-8
    newton: NewtonOptions = field(default_factory=NewtonOptions)
    coupling: str = FULLY_COUPLED
    max_step_halvings: int = 8

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError("time step must be positive")
        if self.eps < 0.0:
            raise ValueError("regularization eps must be nonnegative")
        if self.coupling not in (FULLY_COUPLED, FIXED_POINT):
            raise ValueError(f"unknown coupling mode {self.coupling!r}")


@dataclass
class StepReport:
    newton_iterations: int
    residual_norm: float
    tau_used: float
    energy_before: float
    energy_after: float
    dissipation: float
    accepted: bool


@dataclass
class MmsSources:
    """Manufactured source terms: ``mass(x, t) -> (n, N)`` added to the
    reaction side and ``charge(x, t) -> (N,)`` added to the space charge."""

    mass: Optional[Callable] = None
    charge: Optional[Callable] = None


@dataclass
class Trajectory:
    states: list
    reports: list


def _fermi_derivatives(U, params):
    """Derivatives of the Fermi-Dirac map u(v + w^D, Phi).

    Returns dudv with dudv[a, m] = d u_a / d v_{m+1} = u_a (delta - u_{m+1})
    and dudPhi[a] = u_a (zbar - z_a) with z_0 = 0, zbar = sum z_m u_m.
    """
    n = U.shape[0] - 1
    zext = np.concatenate(([0.0], params.z))
    dudv = -U[:, None, :] * U[None, 1:, :]
    for m in range(n):
        dudv[m + 1, m] += U[m + 1]
    zbar = np.einsum("i,ij->j", params.z, U[1:])
    dudPhi = U * (zbar[None, :] - zext[:, None])
    return dudv, dudPhi


def _reaction_and_derivative(U, params):
    """r(u) rows plus sparse derivative contributions (row, u-index, values)."""
    n = U.shape[0] - 1
    r = np.zeros((n, U.shape[1]))
    contribs = []
    model = params.reaction
    if isinstance(model, BinaryAnnihilation):
        a, b = model.i, model.j
        rate = -model.k * U[a] * U[b]
        d_a = -model.k * U[b]
        d_b = -model.k * U[a]
        for row in (a - 1, b - 1):
            r[row] += rate
            contribs.append((row, a, d_a))
            contribs.append((row, b, d_b))
    return r, contribs


class _Assembler:
    """Residual and banded Jacobian of the coupled step equations.

    Unknowns are interleaved per cell as [v_1 .. v_n, Phi(, phi)]; the phi
    block exists only for ell > 0, where the fourth-order potential solve
    splits into Poisson and Helmholtz stages.
    """

    def __init__(self, bd, params, mesh, opts, sources=None):
        self.bd = bd
        self.params = params
        self.mesh = mesh
        self.opts = opts
        self.sources = sources
        self.n = params.n
        self.N = mesh.n_cells
        self.split = params.ell > 0.0
        self.block = self.n + 2 if self.split else self.n + 1
        self.kl = self.block + self.n
        self.lap_lower, self.lap_main, self.lap_upper = laplacian_diagonals(mesh)
        self.pot_shift = dirichlet_shift(mesh, bd.PhiD_left, bd.PhiD_right)
        self.cells = np.arange(self.N)

    # -- packing ---------------------------------------------------------

    def pack(self, v, Phi, phi):
        x = np.empty(self.N * self.block)
        xm = x.reshape(self.N, self.block)
        xm[:, : self.n] = v.T
        xm[:, self.n] = Phi
        if self.split:
            xm[:, self.n + 1] = phi
        return x

    def unpack(self, x):
        xm = x.reshape(self.N, self.block)
        v = xm[:, : self.n].T.copy()
        Phi = xm[:, self.n].copy()
        phi = xm[:, self.n + 1].copy() if self.split else Phi
        return v, Phi, phi

    # -- shared pieces -----------------------------------------------------

    def _face_data(self, v, U):
        """Per-species face means, gradients of w = v + w^D, and v-gradients."""
        mesh, bd = self.mesh, self.bd
        w = v + bd.wD_field
        uhat = np.empty((self.n, self.N + 1))
        gradw = np.empty((self.n, self.N + 1))
        for i in range(self.n):
            wl = None if bd.wD_left is None else bd.wD_left[i]
            wr = None if bd.wD_right is None else bd.wD_right[i]
            gradw[i] = mesh.face_gradient(w[i], wl, wr)
            ul = None if bd.uD_left is None else bd.uD_left[i + 1]
            ur = None if bd.uD_right is None else bd.uD_right[i + 1]
            ui = U[i + 1]
            uhat[i, 1:-1] = 0.5 * (ui[:-1] + ui[1:])
            uhat[i, 0] = ui[0] if ul is None else 0.5 * (ul + ui[0])
            uhat[i, -1] = ui[-1] if ur is None else 0.5 * (ur + ui[-1])
        return w, uhat, gradw

    def _charge(self, U, t_new):
        rho = np.einsum("i,ij->j", self.params.z, U[1:]) + self.bd.f
        if self.sources is not None and self.sources.charge is not None:
            rho = rho + self.sources.charge(self.mesh.cell_centers, t_new)
        return rho

    def _lap(self, field, inhomogeneous):
        lower, main, upper = self.lap_lower, self.lap_main, self.lap_upper
        out = main * field
        out[:-1] += upper * field[1:]
        out[1:] += lower * field[:-1]
        if inhomogeneous:
            out = out + self.pot_shift
        return out

    # -- residual ----------------------------------------------------------

    def residual(self, x, prev, tau, t_new):
        params, mesh, bd = self.params, self.mesh, self.bd
        h = mesh.h
        v, Phi, phi = self.unpack(x)
        U = fermi_dirac(v + bd.wD_field, Phi, params)
        w, uhat, gradw = self._face_data(v, U)
        flux = -params.D[:, None] * uhat * gradw
        R = np.empty((self.N, self.block))

        r_react = reaction_rates(U, params)
        if self.sources is not None and self.sources.mass is not None:
            r_react = r_react + self.sources.mass(mesh.cell_centers, t_new)
        for i in range(self.n):
            Ri = (h / tau) * (U[i + 1] - prev.U[i + 1])
            Ri += flux[i, 1:] - flux[i, :-1]
            if self.opts.eps > 0.0:
                gv = mesh.face_gradient(
                    v[i],
                    0.0 if mesh.left_bc == DIRICHLET else None,
                    0.0 if mesh.right_bc == DIRICHLET else None,
                )
                Ri += self.opts.eps * (h * v[i] - np.diff(gv))
            Ri -= h * r_react[i]
            R[:, i] = Ri

        rho = self._charge(U, t_new)
        if self.split:
            ell2, lam2 = params.ell**2, params.lam**2
            R[:, self.n] = h * (-ell2 * self._lap(Phi, True) + Phi - phi)
            R[:, self.n + 1] = h * (-lam2 * self._lap(phi, True) - rho)
        else:
            R[:, self.n] = h * (-params.lam**2 * self._lap(Phi, True) - rho)
        return R.ravel()

    # -- Jacobian ---------------------------------------------------------

    def jacobian(self, x, prev, tau, t_new):
        params, mesh, bd = self.params, self.mesh, self.bd
        n, N, m = self.n, self.N, self.block
        h = mesh.h
        v, Phi, phi = self.unpack(x)
        U = fermi_dirac(v + bd.wD_field, Phi, params)
        w, uhat, gradw = self._face_data(v, U)
        dudv, dudPhi = _fermi_derivatives(U, params)
        _, react_contribs = _reaction_and_derivative(U, params)

        jac = BandedMatrix.zeros(N * m, self.kl, self.kl)
        base = self.cells * m
        add = jac.add_at

        # mass and reaction blocks, cell-local
        for i in range(n):
            rows = base + i
            for mm in range(n):
                val = (h / tau) * dudv[i + 1, mm]
                add(rows, base + mm, val)
            add(rows, base + n, (h / tau) * dudPhi[i + 1])
        for row, iu, dvals in react_contribs:
            rows = base + row
            for mm in range(n):
                add(rows, base + mm, -h * dvals * dudv[iu, mm])
            add(rows, base + n, -h * dvals * dudPhi[iu])

        # flux blocks: interior faces couple cells f-1 and f
        inv_h = 1.0 / h
        L = np.arange(0, N - 1)
        Rc = L + 1
        for i in range(n):
            D = params.D[i]
            dw = gradw[i, 1:-1] * h  # w_R - w_L on interior faces
            uh = uhat[i, 1:-1]
            rows_L = base[L] + i
            rows_R = base[Rc] + i
            for mm in range(n):
                dJ_L = -D * (0.5 * dudv[i + 1, mm, L] * dw * inv_h)
                dJ_R = -D * (0.5 * dudv[i + 1, mm, Rc] * dw * inv_h)
                if mm == i:
                    dJ_L += D * uh * inv_h
                    dJ_R -= D * uh * inv_h
                add(rows_L, base[L] + mm, dJ_L)
                add(rows_L, base[Rc] + mm, dJ_R)
                add(rows_R, base[L] + mm, -dJ_L)
                add(rows_R, base[Rc] + mm, -dJ_R)
            dJ_PL = -D * 0.5 * dudPhi[i + 1, L] * dw * inv_h
            dJ_PR = -D * 0.5 * dudPhi[i + 1, Rc] * dw * inv_h
            add(rows_L, base[L] + n, dJ_PL)
            add(rows_L, base[Rc] + n, dJ_PR)
            add(rows_R, base[L] + n, -dJ_PL)
            add(rows_R, base[Rc] + n, -dJ_PR)

            # Dirichlet boundary faces, half-cell differencing
            if mesh.left_bc == DIRICHLET:
                dw0 = w[i, 0] - bd.wD_left[i]
                uh0 = uhat[i, 0]
                for mm in range(n):
                    dJ = -D * dudv[i + 1, mm, 0] * dw0 * inv_h
                    if mm == i:
                        dJ += -D * uh0 * 2.0 * inv_h
                    add(np.array([i]), np.array([mm]), np.array([-dJ]))
                dJ = -D * dudPhi[i + 1, 0] * dw0 * inv_h
                add(np.array([i]), np.array([n]), np.array([-dJ]))
            if mesh.right_bc == DIRICHLET:
                j0 = N - 1
                dwN = bd.wD_right[i] - w[i, j0]
                uhN = uhat[i, -1]
                row = base[j0] + i
                for mm in range(n):
                    dJ = -D * dudv[i + 1, mm, j0] * dwN * inv_h
                    if mm == i:
                        dJ += D * uhN * 2.0 * inv_h
                    add(np.array([row]), np.array([base[j0] + mm]), np.array([dJ]))
                dJ = -D * dudPhi[i + 1, j0] * dwN * inv_h
                add(np.array([row]), np.array([base[j0] + n]), np.array([dJ]))

        # eps regularization: eps*h*(I - Lap_h) on each v block
        if self.opts.eps > 0.0:
            e = self.opts.eps
            for i in range(n):
                rows = base + i
                add(rows, rows, e * h * (1.0 - self.lap_main))
                add(rows[:-1], rows[1:], -e * h * self.lap_upper)
                add(rows[1:], rows[:-1], -e * h * self.lap_lower)

        # potential rows
        zext = np.concatenate(([0.0], params.z))
        drho_dv = np.einsum("a,amj->mj", zext, dudv)
        drho_dPhi = np.einsum("a,aj->j", zext, dudPhi)
        if self.split:
            ell2, lam2 = params.ell**2, params.lam**2
            rows = base + n
            add(rows, rows, h * (-ell2 * self.lap_main + 1.0))
            add(rows[:-1], rows[1:] , -h * ell2 * self.lap_upper)
            add(rows[1:], rows[:-1], -h * ell2 * self.lap_lower)
            add(rows, base + n + 1, np.full(N, -h))
            rows = base + n + 1
            add(rows, rows, -h * lam2 * self.lap_main)
            add(rows[:-1], rows[1:], -h * lam2 * self.lap_upper)
            add(rows[1:], rows[:-1], -h * lam2 * self.lap_lower)
            for mm in range(n):
                add(rows, base + mm, -h * drho_dv[mm])
            add(rows, base + n, -h * drho_dPhi)
        else:
            lam2 = params.lam**2
            rows = base + n
            add(rows, rows, -h * lam2 * self.lap_main - h * drho_dPhi)
            add(rows[:-1], rows[1:], -h * lam2 * self.lap_upper)
            add(rows[1:], rows[:-1], -h * lam2 * self.lap_lower)
            for mm in range(n):
                add(rows, base + mm, -h * drho_dv[mm])
        return jac


def assemble_residual(v, Phi, phi_split, prev, bd, params, mesh, opts,
                      t_new=None, sources=None):
    """Residual of the step equations at entropy increment v and potentials
    (Phi, phi_split), tested against cell indicators (one entry per cell
    and unknown).  ``prev`` supplies u^{k-1}."""
    asm = _Assembler(bd, params, mesh, opts, sources)
    x = asm.pack(np.asarray(v, dtype=float), np.asarray(Phi, dtype=float),
                 np.asarray(phi_split, dtype=float))
    if t_new is None:
        t_new = prev.time + opts.tau
    return asm.residual(x, prev, opts.tau, t_new)


def _potential_solve(w_field, bd, params, mesh, newton_opts,
                     charge_source=None, Phi0=None, phi0=None):
    """Newton solve of the potential block with u = fermi_dirac(w_field, Phi).

    This is the nonlinear Poisson-Fermi problem for a frozen entropy field;
    it also computes thermal equilibrium states (w_field = w^D)."""
    split = params.ell > 0.0
    blk = 2 if split else 1
    N = mesh.n_cells
    lower, main, upper = laplacian_diagonals(mesh)
    shift = dirichlet_shift(mesh, bd.PhiD_left, bd.PhiD_right)
    h = mesh.h
    lam2, ell2 = params.lam**2, params.ell**2

    def lap(field, inhom):
        out = main * field
        out[:-1] += upper * field[1:]
        out[1:] += lower * field[:-1]
        return out + shift if inhom else out

    def unpack(y):
        ym = y.reshape(N, blk)
        Phi = ym[:, 0]
        phi = ym[:, 1] if split else Phi
        return Phi, phi

    def charge(Phi):
        U = fermi_dirac(w_field, Phi, params)
        rho = np.einsum("i,ij->j", params.z, U[1:]) + bd.f
        if charge_source is not None:
            rho = rho + charge_source
        return U, rho

    def residual(y):
        Phi, phi = unpack(y)
        U, rho = charge(Phi)
        R = np.empty((N, blk))
        if split:
            R[:, 0] = h * (-ell2 * lap(Phi, True) + Phi - phi)
            R[:, 1] = h * (-lam2 * lap(phi, True) - rho)
        else:
            R[:, 0] = h * (-lam2 * lap(Phi, True) - rho)
        return R.ravel()

    def jacobian(y):
        Phi, phi = unpack(y)
        U, _ = charge(Phi)
        _, dudPhi = _fermi_derivatives(U, params)
        zext = np.concatenate(([0.0], params.z))
        drho = np.einsum("a,aj->j", zext, dudPhi)
        jac = BandedMatrix.zeros(N * blk, blk + 1, blk + 1)
        base = np.arange(N) * blk
        if split:
            jac.add_at(base, base, h * (-ell2 * main + 1.0))
            jac.add_at(base[:-1], base[1:], -h * ell2 * upper)
            jac.add_at(base[1:], base[:-1], -h * ell2 * lower)
            jac.add_at(base, base + 1, np.full(N, -h))
            jac.add_at(base + 1, base + 1, -h * lam2 * main)
            jac.add_at(base[:-1] + 1, base[1:] + 1, -h * lam2 * upper)
            jac.add_at(base[1:] + 1, base[:-1] + 1, -h * lam2 * lower)
            jac.add_at(base + 1, base, -h * drho)
        else:
            jac.add_at(base, base, -h * lam2 * main - h * drho)
            jac.add_at(base[:-1], base[1:], -h * lam2 * upper)
            jac.add_at(base[1:], base[:-1], -h * lam2 * lower)
        return jac

    y0 = np.empty(N * blk)
    ym = y0.reshape(N, blk)
    ym[:, 0] = bd.PhiD_field if Phi0 is None else Phi0
    if split:
        ym[:, 1] = bd.phiD_split if phi0 is None else phi0
    res = newton_solve(residual, jacobian, y0, newton_opts)
    Phi, phi = unpack(res.solution)
    return Phi.copy(), phi.copy(), res


def solve_equilibrium(bd, params, mesh, newton_opts=None):
    """Thermal equilibrium state: w = w^D with self-consistent potential.

    Requires spatially constant w^D (equilibrium boundary data); with the
    fluxes vanishing identically this is an exact steady state."""
    if newton_opts is None:
        newton_opts = NewtonOptions()
    Phi, phi, res = _potential_solve(bd.wD_field, bd, params, mesh, newton_opts)
    if not res.converged:
        raise StepFailureError("equilibrium potential solve did not converge")
    U = fermi_dirac(bd.wD_field, Phi, params)
    return State(U=U, w=bd.wD_field.copy(), Phi=Phi, phi_split=phi, time=0.0)


def initial_state(U0, bd, params, mesh, sources=None):
    """Clip initial data into the open simplex, renormalize, and solve the
    Poisson-Fermi problem to obtain the consistent initial potential."""
    U = np.array(U0, dtype=float)
    if U.shape != (params.n + 1, mesh.n_cells):
        raise ValueError("initial data must stack n+1 cell fields")
    if np.min(U) < -1e-9 or np.max(U) > 1.0 + 1e-9:
        raise ValueError("initial data leaves the closed simplex")
    sums = U.sum(axis=0)
    if np.max(np.abs(sums - 1.0)) > 1e-6:
        raise ValueError("initial data must sum to 1 per cell")
    U = np.clip(U, CLIP_MARGIN, 1.0 - CLIP_MARGIN)
    U /= U.sum(axis=0)[None, :]
    extra = None
    if sources is not None and sources.charge is not None:
        extra = sources.charge(mesh.cell_centers, 0.0)
    f = bd.f if extra is None else bd.f + extra
    pot = solve_poisson_fermi(U, f, params, mesh, bd.PhiD_left, bd.PhiD_right)
    w = entropy_variables(U, pot.Phi, params)
    return State(U=U, w=w, Phi=pot.Phi, phi_split=pot.phi, time=0.0)


def _newton_fully_coupled(asm, prev, tau, t_new, newton_opts):
    x0 = asm.pack(prev.w - asm.bd.wD_field, prev.Phi, prev.phi_split)
    return newton_solve(
        lambda x: asm.residual(x, prev, tau, t_new),
        lambda x: asm.jacobian(x, prev, tau, t_new),
        x0,
        newton_opts,
    )


def _fixed_point_decoupled(asm, prev, tau, t_new, newton_opts, max_outer=200):
    """Decoupled fallback: alternate potential and species solves until the
    joint residual meets the tolerance (mirrors the constructive proof)."""
    bd, params, mesh = asm.bd, asm.params, asm.mesh
    v = prev.w - bd.wD_field
    Phi, phi = prev.Phi.copy(), prev.phi_split.copy()
    inner = replace(newton_opts, abs_tol=max(0.1 * newton_opts.abs_tol, 1e-14))
    total_iters = 0
    charge_source = None
    if asm.sources is not None and asm.sources.charge is not None:
        charge_source = asm.sources.charge(mesh.cell_centers, t_new)
    for _ in range(max_outer):
        Phi, phi, pres = _potential_solve(
            v + bd.wD_field, bd, params, mesh, inner,
            charge_source=charge_source, Phi0=Phi, phi0=phi,
        )
        total_iters += pres.iterations

        sres = _species_solve(asm, v, Phi, phi, prev, tau, t_new, inner)
        v = sres.v
        total_iters += sres.result.iterations

        x = asm.pack(v, Phi, phi)
        joint = float(np.max(np.abs(asm.residual(x, prev, tau, t_new))))
        if joint <= newton_opts.abs_tol:
            return NewtonResult(x, total_iters, joint, True)
    x = asm.pack(v, Phi, phi)
    joint = float(np.max(np.abs(asm.residual(x, prev, tau, t_new))))
    return NewtonResult(x, total_iters, joint, joint <= newton_opts.abs_tol)


@dataclass
class _SpeciesSolve:
    v: np.ndarray
    result: NewtonResult


def _species_solve(asm, v0, Phi, phi, prev, tau, t_new, newton_opts):
    """Newton on the species rows with the potentials frozen."""
    n, N = asm.n, asm.N

    def to_full(xv):
        return asm.pack(xv.reshape(N, n).T, Phi, phi)

    def residual(xv):
        full = asm.residual(to_full(xv), prev, tau, t_new)
        return full.reshape(N, asm.block)[:, :n].ravel()

    def jacobian(xv):
        full = asm.jacobian(to_full(xv), prev, tau, t_new)
        bw = 2 * n - 1 if n > 1 else 1
        sub = BandedMatrix.zeros(N * n, bw, bw)
        cells = np.arange(N)
        for i in range(n):
            for mm in range(n):
                for d in (-1, 0, 1):
                    jj = cells + d
                    ok = (jj >= 0) & (jj < N)
                    rows_full = cells[ok] * asm.block + i
                    cols_full = jj[ok] * asm.block + mm
                    vals = full.bands[asm.kl + rows_full - cols_full, cols_full]
                    sub.add_at(cells[ok] * n + i, jj[ok] * n + mm, vals)
        return sub

    x0 = v0.T.ravel()
    res = newton_solve(residual, jacobian, x0, newton_opts)
    return _SpeciesSolve(res.solution.reshape(N, n).T.copy(), res)


def step(prev, bd, params, mesh, opts, sources=None):
    """Advance one implicit Euler step; halves tau on Newton failure.

    Returns the new state and a StepReport with the realized time step,
    Newton statistics, and the energy/dissipation bookkeeping.  Raises
    StepFailureError once the halvings are exhausted.
    """
    asm = _Assembler(bd, params, mesh, opts, sources)
    energy_before = free_energy(prev, bd, params, mesh)
    for halving in range(opts.max_step_halvings + 1):
        tau = opts.tau / 2.0**halving
        t_new = prev.time + tau
        if opts.coupling == FULLY_COUPLED:
            result = _newton_fully_coupled(asm, prev, tau, t_new, opts.newton)
        else:
            result = _fixed_point_decoupled(asm, prev, tau, t_new, opts.newton)
        if result.converged:
            v, Phi, phi = asm.unpack(result.solution)
            w = v + bd.wD_field
            U = fermi_dirac(w, Phi, params)
            state = State(U=U, w=w, Phi=Phi, phi_split=phi, time=t_new)
            report = StepReport(
                newton_iterations=result.iterations,
                residual_norm=result.residual_norm,
                tau_used=tau,
                energy_before=energy_before,
                energy_after=free_energy(state, bd, params, mesh),
                dissipation=entropy_dissipation(state, bd, params, mesh),
                accepted=True,
            )
            return state, report
    raise StepFailureError(
        f"Newton failed after {opts.max_step_halvings} time-step halvings "
        f"(residual {result.residual_norm:.3e})"
    )


def run(U0, bd, params, mesh, opts, t_end, sources=None):
    """March from clipped initial data to t_end.

    The working time step drops when a step needs halving and is doubled
    back toward the nominal tau after five consecutive full successes.
    """
    state = initial_state(U0, bd, params, mesh, sources)
    states = [state]
    reports = []
    if t_end <= 0.0:
        return Trajectory(states, reports)
    current_tau = opts.tau
    streak = 0
    t_eps = 1e-13 * max(1.0, abs(t_end))
    while state.time < t_end - t_eps:
        tau_target = min(current_tau, t_end - state.time)
        state, report = step(
            state, bd, params, mesh, replace(opts, tau=tau_target), sources
        )
        states.append(state)
        reports.append(report)
        if report.tau_used < tau_target * (1.0 - 1e-12):
            current_tau = report.tau_used
            streak = 0
        else:
            streak += 1
            if streak >= 5 and current_tau < opts.tau:
                current_tau = min(opts.tau, 2.0 * current_tau)
                streak = 0
    return Trajectory(states, reports)
