"""
Uniform 1D finite-volume mesh with mixed Dirichlet/Neumann endpoints.

Fields live either on cell centers (arrays of length ``n_cells``, here
called cell fields) or on faces including the two boundary faces
(arrays of length ``n_cells + 1``, face fields).  Dirichlet data is
attached at the physical endpoint and differenced over a half cell;
this convention makes the discrete summation-by-parts identity exact,
which the energy estimates rely on.
"""

from dataclasses import dataclass, field

import numpy as np

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

_BC_TAGS = (DIRICHLET, NEUMANN)


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh:
    """Uniform cell-centered grid on (0, length).

    Cell centers sit at (j + 1/2) h, faces at j h for j = 0 .. n_cells.
    At least one endpoint must be Dirichlet.
    """

    length: float
    n_cells: int
    left_bc: str
    right_bc: str
    h: float = field(init=False)

    def __post_init__(self):
        if self.n_cells < 2:
            raise MeshError(f"n_cells must be >= 2, got {self.n_cells}")
        if self.length <= 0.0:
            raise MeshError(f"length must be positive, got {self.length}")
        for tag in (self.left_bc, self.right_bc):
            if tag not in _BC_TAGS:
                raise MeshError(f"unknown boundary tag {tag!r}")
        if self.left_bc == NEUMANN and self.right_bc == NEUMANN:
            raise MeshError("at least one endpoint must be Dirichlet")
        object.__setattr__(self, "h", self.length / self.n_cells)

    @property
    def cell_centers(self):
        return (np.arange(self.n_cells) + 0.5) * self.h

    @property
    def face_positions(self):
        return np.arange(self.n_cells + 1) * self.h

    @property
    def face_weights(self):
        """Quadrature weights for face sums: h/2 at boundary faces, h inside."""
        w = np.full(self.n_cells + 1, self.h)
        w[0] = 0.5 * self.h
        w[-1] = 0.5 * self.h
        return w

    # -- discrete calculus -------------------------------------------------

    def _check_cell(self, f):
        f = np.asarray(f, dtype=float)
        if f.shape != (self.n_cells,):
            raise MeshError(f"cell field has shape {f.shape}, expected ({self.n_cells},)")
        return f

    def _check_face(self, g):
        g = np.asarray(g, dtype=float)
        if g.shape != (self.n_cells + 1,):
            raise MeshError(f"face field has shape {g.shape}, expected ({self.n_cells + 1},)")
        return g

    def face_gradient(self, f, left_value=None, right_value=None):
        """Face-centered gradient of a cell field.

        Interior face j carries (f_j - f_{j-1})/h.  A Dirichlet face uses a
        one-sided difference against the boundary value over h/2; a Neumann
        face carries 0.  Boundary values are required exactly at Dirichlet
        endpoints and rejected at Neumann endpoints.
        """
        f = self._check_cell(f)
        g = np.empty(self.n_cells + 1)
        g[1:-1] = np.diff(f) / self.h
        half = 0.5 * self.h
        if self.left_bc == DIRICHLET:
            if left_value is None:
                raise MeshError("missing Dirichlet value at left endpoint")
            g[0] = (f[0] - left_value) / half
        else:
            if left_value is not None:
                raise MeshError("boundary value supplied at Neumann left endpoint")
            g[0] = 0.0
        if self.right_bc == DIRICHLET:
            if right_value is None:
                raise MeshError("missing Dirichlet value at right endpoint")
            g[-1] = (right_value - f[-1]) / half
        else:
            if right_value is not None:
                raise MeshError("boundary value supplied at Neumann right endpoint")
            g[-1] = 0.0
        return g

    def cell_divergence(self, g):
        """Cell-centered divergence of a face field: (g_{j+1} - g_j)/h."""
        g = self._check_face(g)
        return np.diff(g) / self.h

    def integrate(self, f):
        """Midpoint quadrature h * sum(f)."""
        return self.h * float(np.sum(self._check_cell(f)))

    def l2_norm(self, f):
        return float(np.sqrt(self.h * np.sum(self._check_cell(f) ** 2)))

    def h1_seminorm(self, f, left_value=None, right_value=None):
        """Discrete H1 seminorm: face-weighted l2 norm of the face gradient."""
        g = self.face_gradient(f, left_value, right_value)
        return float(np.sqrt(np.sum(self.face_weights * g**2)))


def build_mesh(length, n_cells, left_bc=DIRICHLET, right_bc=DIRICHLET):
    """Build a uniform mesh; rejects n_cells < 2 and all-Neumann boundaries."""
    if int(n_cells) != n_cells:
        raise MeshError(f"n_cells must be an integer, got {n_cells!r}")
    return Mesh(float(length), int(n_cells), left_bc, right_bc)


def laplacian_diagonals(mesh):
    """Tridiagonal of the homogeneous-BC operator L = div(grad(.)).

    Returns (lower, main, upper) with the mesh's half-cell Dirichlet rows
    (-3, 1)/h^2 and Neumann rows (-1, 1)/h^2.  Inhomogeneous Dirichlet data
    b enters the residual through ``dirichlet_shift``.
    """
    n = mesh.n_cells
    h2 = mesh.h**2
    main = np.full(n, -2.0 / h2)
    lower = np.full(n - 1, 1.0 / h2)
    upper = np.full(n - 1, 1.0 / h2)
    if mesh.left_bc == DIRICHLET:
        main[0] = -3.0 / h2
    else:
        main[0] = -1.0 / h2
    if mesh.right_bc == DIRICHLET:
        main[-1] = -3.0 / h2
    else:
        main[-1] = -1.0 / h2
    return lower, main, upper


def dirichlet_shift(mesh, left_value=None, right_value=None):
    """Boundary contribution s with L(f; b) = L_0 f + s for Dirichlet data b."""
    s = np.zeros(mesh.n_cells)
    h2 = mesh.h**2
    if mesh.left_bc == DIRICHLET:
        s[0] = 2.0 * left_value / h2
    if mesh.right_bc == DIRICHLET:
        s[-1] = 2.0 * right_value / h2
    return s
