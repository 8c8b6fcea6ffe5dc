"""
Manufactured solutions for convergence studies.

The elliptic cases exercise the two split stages and their composition;
they pick profiles compatible with every boundary condition the solver
imposes (the composed case needs Phi and Lap Phi to vanish where
Dirichlet data sits and both normal derivatives to vanish on the Neumann
side, which sin(pi x / 2) satisfies on (0, 1)).

The parabolic case drives the full scheme with analytic source terms:
the mass sources are s_i = d_t u_i + div J_i(u*, Phi*) and the charge
source makes the manufactured potential solve the fourth-order problem.
Sources are derived symbolically once and lambdified to numpy.
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import sympy as sp

from .mesh import DIRICHLET, NEUMANN, build_mesh
from .stepper import MmsSources


@dataclass
class EllipticCase:
    """One elliptic convergence case on (0, 1), Dirichlet left, Neumann right."""

    name: str
    rhs: Callable
    exact: Callable
    left_value: float


def poisson_case(lam):
    return EllipticCase(
        name="poisson",
        rhs=lambda x: lam**2 * np.pi**2 * np.cos(np.pi * x),
        exact=lambda x: np.cos(np.pi * x),
        left_value=1.0,
    )


def helmholtz_case(ell):
    return EllipticCase(
        name="helmholtz",
        rhs=lambda x: (1.0 + ell**2 * np.pi**2) * np.cos(np.pi * x),
        exact=lambda x: np.cos(np.pi * x),
        left_value=1.0,
    )


def composed_case(lam, ell):
    """Fourth-order case Phi* = sin(pi x / 2): satisfies Phi = 0 and
    Lap Phi = 0 at x = 0 and both normal derivatives zero at x = 1."""
    k = 0.5 * np.pi

    def rhs(x):
        return lam**2 * (k**2 + ell**2 * k**4) * np.sin(k * x)

    return EllipticCase(
        name="composed",
        rhs=rhs,
        exact=lambda x: np.sin(k * x),
        left_value=0.0,
    )


def composed_split_exact(ell):
    """Free-ion stage of the composed case: phi* = (1 + ell^2 k^2) Phi*."""
    k = 0.5 * np.pi
    return lambda x: (1.0 + ell**2 * k**2) * np.sin(k * x)


@dataclass
class ParabolicCase:
    """Coupled manufactured solution with its sources and boundary values."""

    exact_u: Callable  # (x, t) -> (n+1, len(x))
    exact_Phi: Callable
    exact_phi: Callable
    sources: MmsSources
    u_boundary: np.ndarray  # composition at both endpoints (time-independent)
    phi_boundary: float


_PARABOLIC_SHAPE = (0.3, 0.1, 0.3, -0.06, 0.2)  # a1, b1, a2, b2, c


@lru_cache(maxsize=8)
def _parabolic_symbolic(D1, D2, z1, z2, lam, ell):
    a1, b1, a2, b2, c = _PARABOLIC_SHAPE
    x, t = sp.symbols("x t", real=True)
    shape = sp.sin(sp.pi * x) * sp.exp(-t)
    u1 = a1 + b1 * shape
    u2 = a2 + b2 * shape
    u0 = 1 - u1 - u2
    Phi = c * shape

    sources = []
    for ui, Di, zi in ((u1, D1, z1), (u2, D2, z2)):
        w = sp.log(ui / u0) + zi * Phi
        J = -Di * ui * sp.diff(w, x)
        sources.append(sp.simplify(sp.diff(ui, t) + sp.diff(J, x)))

    pf_lhs = lam**2 * (ell**2 * sp.diff(Phi, x, 4) - sp.diff(Phi, x, 2))
    s_pf = sp.simplify(pf_lhs - (z1 * u1 + z2 * u2))
    phi_free = Phi - ell**2 * sp.diff(Phi, x, 2)

    def lam2(expr):
        return sp.lambdify((x, t), expr, modules="numpy")

    return (
        lam2(u0), lam2(u1), lam2(u2), lam2(Phi), lam2(phi_free),
        lam2(sources[0]), lam2(sources[1]), lam2(s_pf),
    )


def parabolic_case(params):
    """Build the coupled case for two-species parameters (n = 2 required)."""
    if params.n != 2:
        raise ValueError("the coupled manufactured case is built for n = 2")
    f_u0, f_u1, f_u2, f_Phi, f_phi, f_s1, f_s2, f_spf = _parabolic_symbolic(
        float(params.D[0]), float(params.D[1]),
        float(params.z[0]), float(params.z[1]),
        float(params.lam), float(params.ell),
    )

    def exact_u(x, t):
        return np.stack([f_u0(x, t), f_u1(x, t), f_u2(x, t)])

    def mass(x, t):
        return np.stack([f_s1(x, t), f_s2(x, t)])

    def charge(x, t):
        return np.asarray(f_spf(x, t), dtype=float)

    a1, b1, a2, b2, _ = _PARABOLIC_SHAPE
    u_bnd = np.array([1.0 - a1 - a2, a1, a2])
    return ParabolicCase(
        exact_u=exact_u,
        exact_Phi=lambda x, t: np.asarray(f_Phi(x, t), dtype=float),
        exact_phi=lambda x, t: np.asarray(f_phi(x, t), dtype=float),
        sources=MmsSources(mass=mass, charge=charge),
        u_boundary=u_bnd,
        phi_boundary=0.0,
    )


def elliptic_mesh(n_cells):
    return build_mesh(1.0, n_cells, DIRICHLET, NEUMANN)


def parabolic_mesh(n_cells):
    return build_mesh(1.0, n_cells, DIRICHLET, DIRICHLET)


def observed_orders(errors, spacings):
    """Pairwise orders log(e_k/e_{k+1}) / log(h_k/h_{k+1})."""
    errors = np.asarray(errors, dtype=float)
    spacings = np.asarray(spacings, dtype=float)
    return np.log(errors[:-1] / errors[1:]) / np.log(spacings[:-1] / spacings[1:])


def fitted_order(errors, spacings):
    """Least-squares slope of log(error) against log(spacing)."""
    loge = np.log(np.asarray(errors, dtype=float))
    logh = np.log(np.asarray(spacings, dtype=float))
    slope, _ = np.polyfit(logh, loge, 1)
    return float(slope)
