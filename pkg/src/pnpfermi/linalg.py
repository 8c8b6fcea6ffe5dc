"""
Banded direct solves and a damped Newton driver.

The banded storage follows the LAPACK ``ab`` layout used by
``scipy.linalg.solve_banded``: entry (i, j) of the matrix sits at
``bands[upper_bw + i - j, j]``.  Solves are deterministic, which keeps
whole trajectories bitwise reproducible.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg


class SingularMatrixError(np.linalg.LinAlgError):
    pass


@dataclass
class BandedMatrix:
    n: int
    lower_bw: int
    upper_bw: int
    bands: np.ndarray  # shape (lower_bw + upper_bw + 1, n)

    @classmethod
    def zeros(cls, n, lower_bw, upper_bw):
        return cls(n, lower_bw, upper_bw, np.zeros((lower_bw + upper_bw + 1, n)))

    @classmethod
    def from_diagonals(cls, main, lower=None, upper=None):
        """Tridiagonal (or diagonal) matrix from its diagonals."""
        main = np.asarray(main, dtype=float)
        n = main.size
        kl = 0 if lower is None else 1
        ku = 0 if upper is None else 1
        m = cls.zeros(n, kl, ku)
        m.bands[ku, :] = main
        if upper is not None:
            m.bands[0, 1:] = upper
        if lower is not None:
            m.bands[-1, :-1] = lower
        return m

    @classmethod
    def from_dense(cls, a, lower_bw=None, upper_bw=None):
        a = np.asarray(a, dtype=float)
        n = a.shape[0]
        if lower_bw is None or upper_bw is None:
            lower_bw = upper_bw = n - 1
        m = cls.zeros(n, lower_bw, upper_bw)
        for i in range(n):
            for j in range(max(0, i - lower_bw), min(n, i + upper_bw + 1)):
                m.bands[upper_bw + i - j, j] = a[i, j]
        return m

    def add_at(self, rows, cols, values):
        """Scatter-add entries; duplicate (row, col) pairs accumulate."""
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        np.add.at(self.bands, (self.upper_bw + rows - cols, cols), values)

    def to_dense(self):
        a = np.zeros((self.n, self.n))
        for d in range(-self.lower_bw, self.upper_bw + 1):
            a += np.diag(self.bands_diag(d), k=d)
        return a

    def bands_diag(self, d):
        """The d-th diagonal (d > 0 super, d < 0 sub) as a 1-D array."""
        if d >= 0:
            return self.bands[self.upper_bw - d, d:]
        return self.bands[self.upper_bw - d, : self.n + d]

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        y = np.zeros(self.n)
        for d in range(-self.lower_bw, self.upper_bw + 1):
            diag = self.bands_diag(d)
            if d >= 0:
                y[: self.n - d] += diag * x[d:]
            else:
                y[-d:] += diag * x[: self.n + d]
        return y

    def norm_inf(self):
        y = np.zeros(self.n)
        for d in range(-self.lower_bw, self.upper_bw + 1):
            diag = np.abs(self.bands_diag(d))
            if d >= 0:
                y[: self.n - d] += diag
            else:
                y[-d:] += diag
        return float(np.max(y)) if self.n else 0.0


def solve_banded(a, b):
    """Solve a x = b by banded LU; raises SingularMatrixError when the
    factorization fails or the residual exceeds 1e-12 (|a| |x| + |b|)."""
    b = np.asarray(b, dtype=float)
    try:
        x = scipy.linalg.solve_banded(
            (a.lower_bw, a.upper_bw), a.bands, b, check_finite=False
        )
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as err:
        raise SingularMatrixError(str(err)) from err
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("non-finite solution from banded solve")
    resid = np.max(np.abs(a.matvec(x) - b))
    bound = 1e-12 * (a.norm_inf() * np.max(np.abs(x), initial=0.0) + np.max(np.abs(b), initial=0.0))
    if resid > max(bound, 1e-300):
        raise SingularMatrixError(f"banded solve residual {resid:.3e} exceeds {bound:.3e}")
    return x


@dataclass
class NewtonOptions:
    abs_tol: float = 1e-10
    max_iter: int = 50
    damping: float = 0.5
    min_step: float = 2.0**-20

    def __post_init__(self):
        if self.abs_tol <= 0.0:
            raise ValueError("abs_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class NewtonResult:
    solution: np.ndarray
    iterations: int
    residual_norm: float
    converged: bool


def newton_solve(residual, jacobian, x0, opts=None):
    """Damped Newton with residual-norm backtracking.

    Non-convergence is reported through ``NewtonResult.converged``, never
    raised; the best iterate seen (smallest residual norm) is returned.
    """
    if opts is None:
        opts = NewtonOptions()
    x = np.array(x0, dtype=float)
    r = residual(x)
    norm = float(np.max(np.abs(r))) if r.size else 0.0
    if norm <= opts.abs_tol:
        return NewtonResult(x, 0, norm, True)
    best_x, best_norm = x.copy(), norm
    for it in range(1, opts.max_iter + 1):
        try:
            delta = solve_banded(jacobian(x), -r)
        except SingularMatrixError:
            break
        alpha = 1.0
        accepted = False
        while alpha >= opts.min_step:
            x_try = x + alpha * delta
            r_try = residual(x_try)
            norm_try = float(np.max(np.abs(r_try)))
            if np.isfinite(norm_try) and norm_try < norm:
                x, r, norm = x_try, r_try, norm_try
                accepted = True
                break
            alpha *= opts.damping
        if not accepted:
            break
        if norm < best_norm:
            best_x, best_norm = x.copy(), norm
        if norm <= opts.abs_tol:
            return NewtonResult(x, it, norm, True)
    return NewtonResult(best_x, opts.max_iter, best_norm, False)


def finite_difference_jacobian(residual, x, scale=None):
    """Dense central-difference Jacobian, the oracle for analytic Jacobians."""
    x = np.asarray(x, dtype=float)
    n = x.size
    jac = np.zeros((n, n))
    if scale is None:
        scale = np.maximum(np.abs(x), 1.0)
    step = np.cbrt(np.finfo(float).eps) * scale
    for j in range(n):
        dx = np.zeros(n)
        dx[j] = step[j]
        jac[:, j] = (residual(x + dx) - residual(x - dx)) / (2.0 * step[j])
    return jac
