"""Manufactured-solution convergence study for the FEM layer."""
from dataclasses import dataclass

import numpy as np

from .fem import fem_error_norms
from .nonlinear import solve_fidelity
from .problems import get_problem

__all__ = ["ConvergenceRow", "convergence_study"]


@dataclass
class ConvergenceRow:
    n: int
    h: float
    l2: float
    h1: float
    l2_order: float = float("nan")
    h1_order: float = float("nan")


def convergence_study(sizes=(8, 16, 32)):
    """Errors against ``sin(pi x) sin(pi y)`` on ``n x n`` grids, with observed
    orders ``log2(e_{coarse} / e_{fine}) / log2(h_{coarse} / h_{fine})``.

    The nodal interpolant of this solution is a discrete eigenvector of the
    Q1 Laplacian, so the FE solution is a scalar multiple of it and both
    relative columns coincide (and converge at second order).
    """
    p = get_problem("manufactured")
    rows = []
    for n in sizes:
        g = p.grid(n)
        u = solve_fidelity(p, g, [0.5]).solution
        l2, h1 = fem_error_norms(u, p.exact_solution, g)
        rows.append(ConvergenceRow(n, g.hx, float(l2), float(h1)))
    for a, b in zip(rows, rows[1:]):
        r = np.log(a.h / b.h)
        b.l2_order = float(np.log(a.l2 / b.l2) / r)
        b.h1_order = float(np.log(a.h1 / b.h1) / r)
    return rows
