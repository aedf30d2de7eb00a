"""Sparse assembly and linear-solver helpers for five-point systems."""

import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, SolverError

log = logging.getLogger(__name__)


def cell_index(nx, ny):
    return np.arange(nx * ny).reshape(nx, ny)


def assemble(a_p, a_w, a_e, a_s, a_n):
    """CSR matrix from five-point coefficient arrays of shape ``(nx, ny)``.

    Row ``(i, j)`` reads ``a_p*x[i,j] + a_w*x[i-1,j] + a_e*x[i+1,j] +
    a_s*x[i,j-1] + a_n*x[i,j+1]``; coefficients pointing outside the grid
    are ignored.  Cells are flattened in C order (``k = i*ny + j``).
    """
    nx, ny = a_p.shape
    idx = cell_index(nx, ny)
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [a_p.ravel()]
    for coef, (si, sj) in ((a_w, (-1, 0)), (a_e, (1, 0)), (a_s, (0, -1)), (a_n, (0, 1))):
        i0, i1 = max(0, -si), nx - max(0, si)
        j0, j1 = max(0, -sj), ny - max(0, sj)
        rows.append(idx[i0:i1, j0:j1].ravel())
        cols.append(idx[i0 + si:i1 + si, j0 + sj:j1 + sj].ravel())
        vals.append(coef[i0:i1, j0:j1].ravel())
    n = nx * ny
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )


def relative_residual(A, x, b):
    bn = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return r / bn if bn > 0 else r


def solve_bicgstab(A, b, x0=None, rtol=1e-8, maxiter=2000, what="linear system"):
    """BiCGStab with a Jacobi preconditioner and a direct fallback; raises SolverError on failure."""
    if not np.any(b):
        return np.zeros_like(b)
    diag = A.diagonal()
    if np.any(diag == 0):
        raise SolverError(f"{what}: zero on the diagonal")
    inv = 1.0 / diag
    M = spla.LinearOperator(A.shape, matvec=lambda r: inv * r, dtype=float)
    x, info = spla.bicgstab(A, b, x0=x0, rtol=rtol, atol=0.0, maxiter=maxiter, M=M)
    res = relative_residual(A, x, b)
    if info != 0 or not np.isfinite(res) or res > 10 * rtol:
        # breakdown or stagnation, typically at tolerances near round-off
        log.debug("%s: BiCGStab info=%d residual %.3e, using a direct solve", what, info, res)
        x = spla.spsolve(A.tocsc(), b)
        res = relative_residual(A, x, b)
        if not np.isfinite(res) or res > max(10 * rtol, 1e-12):
            raise SolverError(f"{what} did not converge (info={info})", residual=res)
    return x


class PoissonOperator:
    """Negative five-point Laplacian with Dirichlet data on selected sides.

    All remaining sides are Neumann.  The assembled matrix ``K`` is
    symmetric positive definite whenever at least one side is Dirichlet,
    and ``K @ x = -V * lap(x)`` for homogeneous boundary data.
    """

    def __init__(self, grid, dirichlet_sides, method="direct", rtol=1e-8):
        if not dirichlet_sides:
            raise ConfigError("pressure problem needs at least one Dirichlet side")
        if method not in ("direct", "cg"):
            raise ConfigError(f"unknown pressure solver {method!r}", key="[controls].pressure_solver")
        self.grid = grid
        self.dirichlet_sides = tuple(sorted(dirichlet_sides))
        self.method = method
        self.rtol = rtol
        g = grid
        nx, ny = g.shape
        tx = g.area_x / g.dx
        ty = g.area_y / g.dy
        a_w = np.full((nx, ny), -tx)
        a_e = np.full((nx, ny), -tx)
        a_s = np.full((nx, ny), -ty)
        a_n = np.full((nx, ny), -ty)
        a_w[0, :] = 0.0
        a_e[-1, :] = 0.0
        a_s[:, 0] = 0.0
        a_n[:, -1] = 0.0
        a_p = -(a_w + a_e + a_s + a_n)
        # Dirichlet faces sit half a spacing from the cell centre.
        self.boundary_coef = {"west": 2 * tx, "east": 2 * tx, "south": 2 * ty, "north": 2 * ty}
        for side in self.dirichlet_sides:
            sl = side_slice(side)
            a_p[sl] += self.boundary_coef[side]
        self.matrix = assemble(a_p, a_w, a_e, a_s, a_n).tocsc()
        self._lu = None
        self._amg = None

    def rhs(self, source, dirichlet=None, neumann=None):
        """Right-hand side for ``lap(x) = source`` with boundary data.

        ``dirichlet`` maps sides to boundary values; ``neumann`` maps sides
        to outward normal gradients.
        """
        g = self.grid
        b = -g.volume * np.asarray(source, dtype=float).copy()
        for side in self.dirichlet_sides:
            val = (dirichlet or {}).get(side, 0.0)
            b[side_slice(side)] += self.boundary_coef[side] * np.asarray(val)
        for side, grad in (neumann or {}).items():
            if side in self.dirichlet_sides:
                raise ConfigError(f"side {side} is already Dirichlet")
            area = g.area_x if side in ("west", "east") else g.area_y
            b[side_slice(side)] += area * np.asarray(grad)
        return b.ravel()

    def solve(self, b, x0=None):
        """Solve ``K x = b``; returns ``(x, relative_residual)``."""
        if not np.any(b):
            return np.zeros_like(b), 0.0
        if self.method == "direct":
            if self._lu is None:
                self._lu = spla.splu(self.matrix)
            x = self._lu.solve(b)
        else:
            if self._amg is None:
                import pyamg
                self._amg = pyamg.smoothed_aggregation_solver(self.matrix.tocsr()).aspreconditioner()
            x, info = spla.cg(self.matrix, b, x0=x0, rtol=self.rtol, atol=0.0,
                              maxiter=500, M=self._amg)
            if info != 0:
                raise SolverError("pressure CG did not converge",
                                  residual=relative_residual(self.matrix, x, b))
        res = relative_residual(self.matrix, x, b)
        # a direct solve is only held to round-off, not to tighter requests
        limit = max(self.rtol, 1e-10) if self.method == "direct" else self.rtol
        if res > limit:
            raise SolverError("pressure solve above tolerance", residual=res)
        return x, res


def side_slice(side):
    return {"west": np.s_[0, :], "east": np.s_[-1, :],
            "south": np.s_[:, 0], "north": np.s_[:, -1]}[side]


