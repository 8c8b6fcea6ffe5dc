import numpy as np
import pytest

from pnpfermi.mesh import DIRICHLET, build_mesh
from pnpfermi.mms import (
    composed_case,
    composed_split_exact,
    fitted_order,
    helmholtz_case,
    observed_orders,
    parabolic_case,
    poisson_case,
)
from pnpfermi.model import SpeciesParams, make_boundary_data
from pnpfermi.stepper import StepperOptions, run


def test_order_helpers():
    hs = np.array([0.1, 0.05, 0.025])
    errors = 3.0 * hs**2
    assert np.allclose(observed_orders(errors, hs), 2.0)
    assert fitted_order(errors, hs) == pytest.approx(2.0, abs=1e-12)


def test_elliptic_cases_satisfy_their_equations():
    # manufactured right-hand sides match the stated operators analytically
    x = np.linspace(0.01, 0.99, 101)
    lam, ell = 1.2, 0.35
    # -lam^2 (cos(pi x))'' = lam^2 pi^2 cos(pi x)
    pc = poisson_case(lam)
    assert np.allclose(pc.rhs(x), lam**2 * np.pi**2 * pc.exact(x))
    # -ell^2 Phi'' + Phi with Phi = cos(pi x)
    hc = helmholtz_case(ell)
    assert np.allclose(hc.rhs(x), (1 + ell**2 * np.pi**2) * hc.exact(x))
    # lam^2 (ell^2 Lap - 1) Lap Phi for Phi = sin(k x), k = pi/2
    cc = composed_case(lam, ell)
    k = np.pi / 2
    lap = -(k**2) * np.sin(k * x)
    lap2 = k**4 * np.sin(k * x)
    assert np.allclose(cc.rhs(x), lam**2 * (ell**2 * lap2 - lap))
    phi_free = composed_split_exact(ell)
    assert np.allclose(phi_free(x), cc.exact(x) * (1 + ell**2 * k**2))


def test_composed_case_boundary_compatibility():
    lam, ell = 1.0, 0.5
    cc = composed_case(lam, ell)
    # Dirichlet end x=0: Phi = 0 and Lap Phi = 0; Neumann end x=1: both
    # normal derivatives vanish
    k = np.pi / 2
    assert cc.exact(np.array([0.0]))[0] == 0.0
    assert np.cos(k * 1.0) == pytest.approx(0.0, abs=1e-15)  # Phi'(1) ~ cos(k)


def test_parabolic_sources_vanish_for_exact_fields():
    # plugging the manufactured fields into the discrete operators on a
    # fine grid reproduces the sources to discretization accuracy
    params = SpeciesParams(n=2, D=np.array([1.0, 2.0]), z=np.array([1.0, -1.0]),
                           lam=0.1, ell=0.1)
    case = parabolic_case(params)
    n_cells = 400
    mesh = build_mesh(1.0, n_cells, DIRICHLET, DIRICHLET)
    x = mesh.cell_centers
    t = 0.013
    U = case.exact_u(x, t)
    Phi = case.exact_Phi(x, t)
    dt = 1e-6
    dudt = (case.exact_u(x, t + dt) - case.exact_u(x, t - dt)) / (2 * dt)
    # flux divergence via second-order differences of the analytic flux
    w1 = np.log(U[1] / U[0]) + params.z[0] * Phi
    J1 = -params.D[0] * U[1] * np.gradient(w1, x)
    divJ1 = np.gradient(J1, x)
    s = case.sources.mass(x, t)
    interior = slice(10, n_cells - 10)
    assert np.max(np.abs(dudt[1] + divJ1 - s[0])[interior]) < 5e-3


def test_parabolic_initial_data_is_consistent():
    params = SpeciesParams(n=2, D=np.array([1.0, 2.0]), z=np.array([1.0, -1.0]),
                           lam=0.1, ell=0.1)
    case = parabolic_case(params)
    x = np.linspace(0.0, 1.0, 64)
    U = case.exact_u(x, 0.0)
    assert np.allclose(U.sum(axis=0), 1.0, atol=1e-14)
    assert np.all(U > 0.0) and np.all(U < 1.0)
    assert np.allclose(case.exact_u(np.array([0.0, 1.0]), 0.3).T,
                       [case.u_boundary, case.u_boundary], atol=1e-14)


def test_zero_source_equilibrium_sanity():
    # a manufactured solution equal to equilibrium produces zero error:
    # constant-composition fields with no charge keep the scheme exact
    params = SpeciesParams(n=2, D=np.array([1.0, 2.0]), z=np.array([1.0, -1.0]),
                           lam=0.1, ell=0.1)
    mesh = build_mesh(1.0, 32, DIRICHLET, DIRICHLET)
    uD = [0.4, 0.3, 0.3]
    bd = make_boundary_data(mesh, params, u_left=uD, phi_left=0.0,
                            u_right=uD, phi_right=0.0)
    U0 = np.repeat(np.array(uD)[:, None], 32, axis=1)
    traj = run(U0, bd, params, mesh, StepperOptions(tau=1e-3, eps=0.0), 0.01)
    final = traj.states[-1]
    assert np.max(np.abs(final.U - U0)) <= 1e-10
    assert np.max(np.abs(final.Phi)) <= 1e-10
