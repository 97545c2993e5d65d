"""Bilinear (Q1) finite elements on structured rectangular grids.

Homogeneous Dirichlet nodes are eliminated, so every vector lives on interior
nodes only.  Multi-field problems stack fields: ``[field0 interior, field1
interior, ...]``.  The CSR pattern of a ``(grid, n_fields)`` pair is the full
union of all element couplings, so it never depends on parameters or state.
"""
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import splu

from . import kernels
from .errors import ContractError, SolverError

_G = 1.0 / np.sqrt(3.0)
# reference node signs (counter-clockwise from lower left) and 2x2 Gauss points
_NODE_XI = np.array([-1.0, 1.0, 1.0, -1.0])
_NODE_ETA = np.array([-1.0, -1.0, 1.0, 1.0])
_QP_XI = np.array([-_G, _G, _G, -_G])
_QP_ETA = np.array([-_G, -_G, _G, _G])


@dataclass(frozen=True)
class StructuredGrid:
    """``nx`` by ``ny`` rectangular elements on ``[x_lo, x_hi] x [y_lo, y_hi]``."""

    nx: int
    ny: int
    x_lo: float = 0.0
    x_hi: float = 1.0
    y_lo: float = 0.0
    y_hi: float = 1.0

    def __post_init__(self):
        # at least one interior node
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 2 or self.ny < 2:
            raise ContractError(f"element counts must be integers >= 2, got {self.nx}x{self.ny}")
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ContractError("grid bounds must satisfy lo < hi")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        for name in ("x_lo", "x_hi", "y_lo", "y_hi"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def parse(cls, text, bounds=(0.0, 1.0, 0.0, 1.0)):
        """Build from ``"128x128"``-style text."""
        try:
            nx, ny = (int(part) for part in text.lower().split("x"))
        except ValueError:
            raise ContractError(f"grid must look like '64x64', got {text!r}") from None
        return cls(nx, ny, *bounds)

    @property
    def hx(self):
        return (self.x_hi - self.x_lo) / self.nx

    @property
    def hy(self):
        return (self.y_hi - self.y_lo) / self.ny

    @property
    def n_interior(self):
        return (self.nx - 1) * (self.ny - 1)

    @property
    def n_elements(self):
        return self.nx * self.ny

    @property
    def bounds(self):
        return (self.x_lo, self.x_hi, self.y_lo, self.y_hi)

    def label(self):
        return f"{self.nx}x{self.ny}"

    def node_coordinates(self):
        x = np.linspace(self.x_lo, self.x_hi, self.nx + 1)
        y = np.linspace(self.y_lo, self.y_hi, self.ny + 1)
        return x, y

    def interior_coordinates(self):
        """``(x, y)`` of interior nodes in DOF order (x fastest)."""
        x, y = self.node_coordinates()
        X, Y = np.meshgrid(x[1:-1], y[1:-1])
        return X.ravel(), Y.ravel()


def _shape_tables(hx, hy):
    n = 0.25 * (1 + _QP_XI[:, None] * _NODE_XI) * (1 + _QP_ETA[:, None] * _NODE_ETA)
    gx = 0.25 * _NODE_XI * (1 + _QP_ETA[:, None] * _NODE_ETA) * (2.0 / hx)
    gy = 0.25 * _NODE_ETA * (1 + _QP_XI[:, None] * _NODE_XI) * (2.0 / hy)
    return n, gx, gy


class FemSpace:
    """Connectivity, quadrature data and the frozen CSR pattern of one grid.

    Obtain instances through :func:`fem_space` so the pattern is built once.
    """

    def __init__(self, grid, n_fields=1):
        self.grid = grid
        self.n_fields = n_fields
        nx, ny = grid.nx, grid.ny
        self.n_per_field = grid.n_interior
        self.ndof = n_fields * self.n_per_field

        self.weight = grid.hx * grid.hy / 4.0
        self.n_table, self.gx_table, self.gy_table = _shape_tables(grid.hx, grid.hy)
        w = self.weight
        self.bx = np.ascontiguousarray(w * self.gx_table[:, :, None] * self.gx_table[:, None, :])
        self.by = np.ascontiguousarray(w * self.gy_table[:, :, None] * self.gy_table[:, None, :])
        self.bm = np.ascontiguousarray(w * self.n_table[:, :, None] * self.n_table[:, None, :])
        self.nw = np.ascontiguousarray(w * self.n_table)

        ei, ej = np.meshgrid(np.arange(nx), np.arange(ny))
        ei, ej = ei.ravel(), ej.ravel()
        node_i = np.stack([ei, ei + 1, ei + 1, ei], axis=1)
        node_j = np.stack([ej, ej, ej + 1, ej + 1], axis=1)
        interior = (node_i > 0) & (node_i < nx) & (node_j > 0) & (node_j < ny)
        local = np.where(interior, (node_j - 1) * (nx - 1) + (node_i - 1), -1)
        dofmap = np.empty((grid.n_elements, 4 * n_fields), dtype=np.int64)
        for f in range(n_fields):
            dofmap[:, 4 * f : 4 * f + 4] = np.where(local >= 0, local + f * self.n_per_field, -1)
        self.dofmap = dofmap

        # quadrature point coordinates, (ne, nq)
        self.xq = grid.x_lo + (ei[:, None] + 0.5 * (1 + _QP_XI)) * grid.hx
        self.yq = grid.y_lo + (ej[:, None] + 0.5 * (1 + _QP_ETA)) * grid.hy
        self.element_index = (ei, ej)

        rows = np.broadcast_to(dofmap[:, :, None], (grid.n_elements,) + (4 * n_fields,) * 2)
        cols = np.broadcast_to(dofmap[:, None, :], rows.shape)
        mask = (rows >= 0) & (cols >= 0)
        keys = rows[mask] * self.ndof + cols[mask]
        uniq = np.unique(keys)
        self.indices = (uniq % self.ndof).astype(np.int32)
        counts = np.bincount(uniq // self.ndof, minlength=self.ndof)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
        scatter = np.full(rows.shape, -1, dtype=np.int64)
        scatter[mask] = np.searchsorted(uniq, keys)
        self.scatter = scatter
        self.nnz = len(uniq)

    def matrix(self, values):
        A = sp.csr_matrix((values, self.indices, self.indptr), shape=(self.ndof, self.ndof), copy=False)
        A.has_sorted_indices = True
        return A

    def at_quadrature(self, state):
        """Interpolate a DOF vector to quadrature points: ``(n_fields, ne, nq)``."""
        state = np.asarray(state, dtype=float)
        if state.shape != (self.ndof,):
            raise ContractError(f"state has shape {state.shape}, expected ({self.ndof},)")
        padded = np.append(state, 0.0)
        u_e = padded[self.dofmap].reshape(-1, self.n_fields, 4)
        return np.ascontiguousarray(np.einsum("efa,qa->feq", u_e, self.n_table))

    @cached_property
    def cell_samples(self):
        """Sub-cell midpoints for cell averaging of discontinuous coefficients.

        Returns ``(xs, ys)`` of shape ``(ne, s*s)`` with ``s`` chosen so that the
        sample spacing is at most 1/512 of the domain width.
        """
        g = self.grid
        s = max(1, int(np.ceil(512 / max(g.nx, g.ny))))
        t = (np.arange(s) + 0.5) / s
        tx, ty = np.meshgrid(t, t)
        ei, ej = self.element_index
        xs = g.x_lo + (ei[:, None] + tx.ravel()) * g.hx
        ys = g.y_lo + (ej[:, None] + ty.ravel()) * g.hy
        return xs, ys


@lru_cache(maxsize=64)
def fem_space(grid, n_fields=1):
    return FemSpace(grid, n_fields)


def _coefficient_array(value, shape):
    return np.ascontiguousarray(np.broadcast_to(np.asarray(value, dtype=float), shape))


def assemble(problem, grid, mu, state=None, linearization=None):
    """Assemble the interior operator and load vector of ``problem`` at ``mu``.

    For nonlinear problems ``state`` is the previous iterate and the result is
    the linearized pair ``(A(state; mu), g(state; mu))``; ``linearization``
    picks ``"picard"`` or ``"newton"`` (default: the problem's own method).
    """
    mu = problem.check_mu(mu)
    if problem.nonlinearity != "linear" and state is None:
        raise ContractError(f"problem {problem.id!r} is nonlinear; a state vector is required")
    space = fem_space(grid, problem.n_fields)
    u_q = None
    if problem.nonlinearity != "linear":
        u_q = space.at_quadrature(state)
    coef = problem.coefficients(mu, space, u_q, linearization or problem.nonlinearity)
    nf, ne = problem.n_fields, grid.n_elements
    dx = _coefficient_array(coef.dx, (nf, ne, 4))
    dy = _coefficient_array(coef.dy, (nf, ne, 4))
    react = _coefficient_array(coef.react, (nf, nf, ne, 4))
    source = _coefficient_array(coef.source, (nf, ne, 4))
    values = kernels.assemble_values(dx, dy, react, space.bx, space.by, space.bm, space.scatter, space.nnz)
    rhs = kernels.assemble_load(source, space.nw, space.dofmap, space.ndof)
    return space.matrix(values), rhs


def _rounding_floor(L, u, f):
    """Smallest residual norm a double-precision ``u`` can attain."""
    return 8 * np.finfo(float).eps * np.linalg.norm(abs(L) @ np.abs(u) + np.abs(f))


def solve_sparse(L, f, rtol=1e-12):
    """Direct sparse solve with up to three rounds of iterative refinement.

    The relative residual must reach ``rtol``, unless it is already at the
    rounding floor ``8 eps || |L||u| + |f| ||`` (high-contrast operators with
    floating channels cannot do better in double precision).  Raises
    :class:`SolverError` when the factorization is singular or neither
    bound is met.
    """
    f = np.asarray(f, dtype=float)
    if L.shape[0] != L.shape[1] or L.shape[0] != f.shape[0]:
        raise ContractError(f"shape mismatch: operator {L.shape}, rhs {f.shape}")
    fnorm = np.linalg.norm(f)
    if fnorm == 0.0:
        return np.zeros_like(f)
    try:
        lu = splu(sp.csc_matrix(L))
    except RuntimeError as exc:
        raise SolverError(f"sparse factorization failed: {exc}") from exc
    u = lu.solve(f)
    r = L @ u - f
    for _ in range(3):
        if np.linalg.norm(r) <= rtol * fnorm:
            break
        u = u + lu.solve(-r)
        r = L @ u - f
    rn = np.linalg.norm(r)
    if not np.isfinite(rn) or (rn > rtol * fnorm and rn > _rounding_floor(L, u, f)):
        raise SolverError(f"relative residual {rn / fnorm:.3e} exceeds {rtol:.1e}", residual=rn / fnorm)
    return u


def full_field(u, grid):
    """Nodal array ``(ny+1, nx+1)`` with zeros on the Dirichlet boundary."""
    out = np.zeros((grid.ny + 1, grid.nx + 1))
    out[1:-1, 1:-1] = np.asarray(u).reshape(grid.ny - 1, grid.nx - 1)
    return out


def prolongate(u, coarse, fine, n_fields=1):
    """Evaluate a coarse Q1 field at the interior nodes of ``fine``."""
    u = np.asarray(u, dtype=float).reshape(n_fields, -1)
    xc, yc = coarse.node_coordinates()
    xf, yf = fine.interior_coordinates()
    pts = np.column_stack([yf, xf])
    out = []
    for f in range(n_fields):
        interp = RegularGridInterpolator((yc, xc), full_field(u[f], coarse), method="linear")
        out.append(interp(pts))
    return np.concatenate(out)


def fem_error_norms(u_num, exact, grid):
    """Relative discrete l2 (interior nodes) and H1-seminorm errors.

    ``exact(x, y)`` is evaluated at the nodes; the H1 seminorm of the
    difference of nodal interpolants uses element-wise 2x2 Gauss quadrature.
    """
    space = fem_space(grid, 1)
    x, y = grid.interior_coordinates()
    u_ex = np.asarray(exact(x, y), dtype=float)
    u_num = np.asarray(u_num, dtype=float)
    ex_norm = np.linalg.norm(u_ex)
    if ex_norm == 0.0:
        raise ContractError("exact solution vanishes at all interior nodes")
    l2 = np.linalg.norm(u_num - u_ex) / ex_norm

    def h1(v):
        v_e = np.append(v, 0.0)[space.dofmap]
        gx = v_e @ space.gx_table.T
        gy = v_e @ space.gy_table.T
        return np.sqrt(space.weight * np.sum(gx**2 + gy**2))

    return l2, h1(u_num - u_ex) / h1(u_ex)
