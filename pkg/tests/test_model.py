import numpy as np
import pytest

from pnpfermi.linalg import NewtonOptions
from pnpfermi.mesh import DIRICHLET, NEUMANN, build_mesh
from pnpfermi.model import (
    BinaryAnnihilation,
    SpeciesParams,
    entropy_variables,
    face_flux,
    fermi_dirac,
    free_energy,
    make_boundary_data,
    mobility_B,
    reaction_rates,
)
from pnpfermi.stepper import initial_state, solve_equilibrium


def params_n1(z1=1.0, **kw):
    return SpeciesParams(n=1, D=np.array([1.0]), z=np.array([z1]), lam=1.0, ell=0.0, **kw)


def params_n2(**kw):
    kw.setdefault("lam", 0.1)
    kw.setdefault("ell", 0.1)
    return SpeciesParams(n=2, D=np.array([1.0, 2.0]), z=np.array([1.0, -1.0]), **kw)


def test_species_params_validation():
    with pytest.raises(ValueError):
        SpeciesParams(n=1, D=np.array([-1.0]), z=np.array([1.0]), lam=1.0, ell=0.0)
    with pytest.raises(ValueError):
        SpeciesParams(n=1, D=np.array([1.0]), z=np.array([1.0]), lam=0.0, ell=0.0)
    with pytest.raises(ValueError):
        SpeciesParams(n=1, D=np.array([1.0]), z=np.array([1.0]), lam=1.0, ell=-0.1)
    with pytest.raises(ValueError):
        SpeciesParams(
            n=1, D=np.array([1.0]), z=np.array([1.0]), lam=1.0, ell=0.0,
            reaction=BinaryAnnihilation(k=1.0, i=1, j=2),
        )


def test_fermi_dirac_symmetry():
    u = fermi_dirac(np.array([0.0]), 0.0, params_n1())
    assert np.allclose(u, [0.5, 0.5], atol=1e-15)
    u = fermi_dirac(np.zeros(2), 0.0, params_n2())
    assert np.allclose(u, [1 / 3, 1 / 3, 1 / 3], atol=1e-15)


def test_fermi_dirac_logistic_value():
    u = fermi_dirac(np.array([1.0]), 0.5, params_n1(z1=1.0))
    expect = np.exp(0.5) / (1.0 + np.exp(0.5))
    assert u[1] == pytest.approx(expect, abs=1e-12)
    assert u[1] == pytest.approx(0.622459, abs=1e-6)


def test_fermi_dirac_no_overflow():
    u = fermi_dirac(np.array([800.0]), 0.0, params_n1())
    assert np.all(np.isfinite(u))
    assert 0.0 < u[0] < 1e-12
    assert 1.0 - 1e-12 < u[1] < 1.0


def test_fermi_dirac_simplex_for_extreme_arguments():
    rng = np.random.default_rng(0)
    params = params_n2()
    w = rng.uniform(-1e3, 1e3, (2, 500))
    Phi = rng.uniform(-1e3, 1e3, 500)
    u = fermi_dirac(w, Phi, params)
    assert np.all(u > 0.0) and np.all(u < 1.0)
    assert np.max(np.abs(u.sum(axis=0) - 1.0)) <= 1e-15


def test_entropy_variables_example():
    w = entropy_variables(np.array([0.25, 0.75]), 0.1, params_n1(z1=2.0))
    assert w[0] == pytest.approx(np.log(3.0) + 0.2, abs=1e-12)
    assert w[0] == pytest.approx(1.298612, abs=1e-6)


def test_entropy_variables_rejects_boundary():
    with pytest.raises(ValueError):
        entropy_variables(np.array([0.0, 1.0]), 0.0, params_n1())


def test_roundtrip_identities():
    rng = np.random.default_rng(123)
    params = params_n2()
    # u -> w -> u on 10^4 random interior samples
    U = rng.dirichlet(np.ones(3), size=10_000).T
    U = np.clip(U, 1e-9, None)
    U /= U.sum(axis=0)
    Phi = rng.uniform(-3.0, 3.0, 10_000)
    w = entropy_variables(U, Phi, params)
    U2 = fermi_dirac(w, Phi, params)
    assert np.max(np.abs(U2 - U)) <= 1e-12
    # w -> u -> w
    w0 = rng.uniform(-5.0, 5.0, (2, 10_000))
    u0 = fermi_dirac(w0, Phi, params)
    w1 = entropy_variables(u0, Phi, params)
    assert np.max(np.abs(w1 - w0)) <= 1e-12


def test_mobility():
    params = SpeciesParams(n=2, D=np.array([2.0, 3.0]), z=np.array([1.0, -1.0]),
                           lam=1.0, ell=0.0)
    B = mobility_B(np.array([0.2, 0.5, 0.3]), params)
    assert np.allclose(B, [1.0, 0.9], atol=1e-15)
    assert np.all(mobility_B(np.array([0.7, 0.0, 0.3]), params) >= 0.0)
    rng = np.random.default_rng(5)
    U = rng.dirichlet(np.ones(3), size=100).T
    assert np.all(mobility_B(U, params) >= 0.0)


def test_reaction_rates():
    params = params_n2()
    assert np.all(reaction_rates(np.array([0.2, 0.3, 0.5]), params) == 0.0)

    params_r = params_n2(reaction=BinaryAnnihilation(k=1.0, i=1, j=2))
    r = reaction_rates(np.array([0.2, 0.3, 0.5]), params_r)
    assert np.allclose(r, [-0.15, -0.15], atol=1e-15)
    # quasi-positivity on the simplex boundary and nonpositive total rate
    rng = np.random.default_rng(9)
    U = rng.dirichlet(np.ones(3), size=200).T
    U[1, :50] = 0.0
    r = reaction_rates(U, params_r)
    assert np.all(r[0, :50] == 0.0)
    assert np.all(r.sum(axis=0) <= 0.0)


@pytest.fixture
def small_problem():
    params = params_n2()
    mesh = build_mesh(1.0, 8, DIRICHLET, DIRICHLET)
    uD = [0.4, 0.3, 0.3]
    bd = make_boundary_data(mesh, params, u_left=uD, phi_left=0.0,
                            u_right=uD, phi_right=0.0)
    return params, mesh, bd


def test_boundary_data_consistency(small_problem):
    params, mesh, bd = small_problem
    assert bd.equilibrium_flag
    # w_i^D = log(u_i^D/u_0^D) + z_i Phi^D per cell to 1e-12
    wd = np.log(bd.uD_field[1:] / bd.uD_field[0]) + params.z[:, None] * bd.PhiD_field
    assert np.max(np.abs(wd - bd.wD_field)) <= 1e-12


def test_boundary_data_validation():
    params = params_n2()
    mesh = build_mesh(1.0, 8, DIRICHLET, NEUMANN)
    with pytest.raises(ValueError):
        make_boundary_data(mesh, params)  # missing left data
    with pytest.raises(ValueError):
        make_boundary_data(mesh, params, u_left=[0.4, 0.3, 0.3], phi_left=0.0,
                           u_right=[0.4, 0.3, 0.3], phi_right=0.0)
    with pytest.raises(ValueError):
        make_boundary_data(mesh, params, u_left=[0.5, 0.3, 0.3], phi_left=0.0)
    with pytest.raises(ValueError):
        make_boundary_data(mesh, params, u_left=[1.0, -0.3, 0.3], phi_left=0.0)


def test_free_energy_zero_at_reference(small_problem):
    params, mesh, bd = small_problem
    eq = solve_equilibrium(bd, params, mesh)
    # equilibrium state is exactly the boundary reference here
    assert free_energy(eq, bd, params, mesh) == pytest.approx(0.0, abs=1e-13)


def test_free_energy_positive_off_reference(small_problem):
    params, mesh, bd = small_problem
    rng = np.random.default_rng(21)
    for _ in range(1000):
        U = rng.dirichlet(np.ones(3), size=mesh.n_cells).T
        U = np.clip(U, 1e-6, None)
        U /= U.sum(axis=0)
        st = initial_state(U, bd, params, mesh)
        H = free_energy(st, bd, params, mesh)
        assert H > 0.0


def test_free_energy_single_cell_value():
    # mixing part only: one species, u=(0.5,0.5) against uD=(0.25,0.75)
    params = SpeciesParams(n=1, D=np.array([1.0]), z=np.array([0.0]), lam=1.0, ell=0.0)
    mesh = build_mesh(1.0, 2, DIRICHLET, DIRICHLET)
    bd = make_boundary_data(mesh, params, u_left=[0.25, 0.75], phi_left=0.0,
                            u_right=[0.25, 0.75], phi_right=0.0)
    st = initial_state(np.full((2, 2), 0.5), bd, params, mesh)
    expect = 0.5 * np.log(2.0) + 0.5 * np.log(2.0 / 3.0)
    assert free_energy(st, bd, params, mesh) == pytest.approx(expect, abs=1e-12)
    assert expect == pytest.approx(0.143841, abs=1e-6)


def test_free_energy_gradient_is_entropy_variable_gap(small_problem):
    # full variational derivative (with the potential re-solved) equals
    # h (w_i - w_i^D); checked by central finite differences
    params, mesh, bd = small_problem
    rng = np.random.default_rng(4)
    U = rng.dirichlet(np.full(3, 5.0), size=mesh.n_cells).T
    st = initial_state(U, bd, params, mesh)
    delta = 1e-6
    for i in (1, 2):
        for j in (0, mesh.n_cells // 2):
            def energy_at(eps):
                U2 = st.U.copy()
                U2[i, j] += eps
                U2[0, j] -= eps
                pert = initial_state(U2, bd, params, mesh)
                return free_energy(pert, bd, params, mesh)

            fd = (energy_at(delta) - energy_at(-delta)) / (2.0 * delta)
            expect = mesh.h * (st.w[i - 1, j] - bd.wD_field[i - 1, j])
            assert fd == pytest.approx(expect, rel=1e-6, abs=1e-9)


def test_face_flux_zero_at_constant_w(small_problem):
    params, mesh, bd = small_problem
    eq = solve_equilibrium(bd, params, mesh)
    J = face_flux(eq, bd, params, mesh)
    assert np.max(np.abs(J)) <= 1e-12


def test_face_flux_neumann_faces_zero():
    params = params_n2()
    mesh = build_mesh(1.0, 8, DIRICHLET, NEUMANN)
    bd = make_boundary_data(mesh, params, u_left=[0.4, 0.3, 0.3], phi_left=0.0)
    rng = np.random.default_rng(2)
    U = rng.dirichlet(np.ones(3), size=8).T
    st = initial_state(U, bd, params, mesh)
    J = face_flux(st, bd, params, mesh)
    assert np.all(J[:, -1] == 0.0)


def test_reaction_entropy_production_diagnostic():
    # the growth-constant diagnostic equals int sum_i r_i (w_i - w_i^D) dx
    # and vanishes without reactions
    from pnpfermi.model import reaction_entropy_production

    params = params_n2(reaction=BinaryAnnihilation(k=1.0, i=1, j=2))
    mesh = build_mesh(1.0, 16, DIRICHLET, DIRICHLET)
    uD = [0.4, 0.3, 0.3]
    bd = make_boundary_data(mesh, params, u_left=uD, phi_left=0.0,
                            u_right=uD, phi_right=0.0)
    rng = np.random.default_rng(3)
    U = rng.dirichlet(np.full(3, 4.0), size=16).T
    st = initial_state(U, bd, params, mesh)
    value = reaction_entropy_production(st, bd, params, mesh)
    r = reaction_rates(st.U, params)
    expect = mesh.integrate(np.sum(r * (st.w - bd.wD_field), axis=0))
    assert value == pytest.approx(expect, rel=1e-12)

    params0 = params_n2()
    bd0 = make_boundary_data(mesh, params0, u_left=uD, phi_left=0.0,
                             u_right=uD, phi_right=0.0)
    st0 = initial_state(U, bd0, params0, mesh)
    assert reaction_entropy_production(st0, bd0, params0, mesh) == 0.0


def test_face_flux_dual_form_consistency():
    # entropy form -D u grad(w) against the primitive form
    # -D (grad u - u grad log u0 + u z grad Phi), same face means
    def flux_pair(n_cells):
        params = SpeciesParams(n=1, D=np.array([1.0]), z=np.array([1.0]),
                               lam=1.0, ell=0.0)
        mesh = build_mesh(1.0, n_cells, DIRICHLET, DIRICHLET)
        x = mesh.cell_centers
        u1 = 0.4 + 0.2 * x
        U = np.stack([1.0 - u1, u1])
        bd = make_boundary_data(mesh, params, u_left=[0.6, 0.4], phi_left=0.0,
                                u_right=[0.4, 0.6], phi_right=0.0)
        st = initial_state(U, bd, params, mesh)
        J = face_flux(st, bd, params, mesh)

        mid = n_cells // 2
        uhat = 0.5 * (U[1, mid - 1] + U[1, mid])
        grad_u = (U[1, mid] - U[1, mid - 1]) / mesh.h
        grad_logu0 = (np.log(U[0, mid]) - np.log(U[0, mid - 1])) / mesh.h
        grad_Phi = (st.Phi[mid] - st.Phi[mid - 1]) / mesh.h
        primitive = -(grad_u - uhat * grad_logu0 + uhat * grad_Phi)
        return J[0, mid], primitive

    j2, p2 = flux_pair(2)
    assert j2 == pytest.approx(p2, rel=0.1)
    errs = []
    for n_cells in (8, 16, 32):
        j, p = flux_pair(n_cells)
        errs.append(abs(j - p))
    order = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
    assert min(order) > 1.8
