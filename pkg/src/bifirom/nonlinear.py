"""Picard/Newton fixed-point driver returning the final linearized system."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ContractError, NonConvergenceError
from .fem import assemble, fem_space, solve_sparse

__all__ = ["IterationConfig", "LinearizedSystem", "solve_fidelity"]


@dataclass(frozen=True)
class IterationConfig:
    """Stopping rule: ``||u^k - u^{k-1}|| / ||u^k|| <= tol_rel``.

    ``method=None`` uses the problem's own linearization.  ``initial_guess``
    is ``None`` for a zero start or a full DOF vector.
    """

    method: Optional[str] = None
    tol_rel: float = 1e-10
    max_iter: int = 50
    initial_guess: Optional[np.ndarray] = field(default=None, compare=False, hash=False)

    def __post_init__(self):
        if not 0.0 < self.tol_rel < 1.0:
            raise ContractError(f"tol_rel must lie in (0, 1), got {self.tol_rel}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ContractError(f"max_iter must be a positive integer, got {self.max_iter}")
        if self.method not in (None, "picard", "newton"):
            raise ContractError(f"unknown iteration method {self.method!r}")

    def as_dict(self):
        return {"method": self.method, "tol_rel": self.tol_rel, "max_iter": self.max_iter}


@dataclass
class LinearizedSystem:
    """Final-iteration triple: ``operator @ solution ~= rhs``.

    For nonlinear problems ``operator`` and ``rhs`` are assembled at the
    second-to-last iterate; ``solution`` is the last one.
    """

    operator: object
    rhs: np.ndarray
    solution: np.ndarray
    iterations: int
    converged: bool
    residual_rel: float
    history: list = field(default_factory=list)


def _residual(A, u, f):
    fn = np.linalg.norm(f)
    r = np.linalg.norm(A @ u - f)
    return r / fn if fn > 0 else r


def solve_fidelity(problem, grid, mu, config=None):
    """Solve ``problem`` at ``mu`` on ``grid``; see :class:`LinearizedSystem`.

    Raises :class:`NonConvergenceError` (carrying the step history and the
    partial system) when ``max_iter`` is exhausted.
    """
    config = config or IterationConfig()
    mu = problem.check_mu(mu)
    if problem.nonlinearity == "linear":
        A, f = assemble(problem, grid, mu)
        u = solve_sparse(A, f)
        return LinearizedSystem(A, f, u, 1, True, _residual(A, u, f), [])

    method = config.method or problem.nonlinearity
    ndof = fem_space(grid, problem.n_fields).ndof
    if config.initial_guess is None:
        u = np.zeros(ndof)
    else:
        u = np.array(config.initial_guess, dtype=float)
        if u.shape != (ndof,):
            raise ContractError(f"initial guess has shape {u.shape}, expected ({ndof},)")

    history = []
    for k in range(1, config.max_iter + 1):
        A, g = assemble(problem, grid, mu, state=u, linearization=method)
        u_new = solve_sparse(A, g)
        unorm = np.linalg.norm(u_new)
        step = np.linalg.norm(u_new - u)
        step = step / unorm if unorm > 0 else step
        history.append(step)
        u = u_new
        if step <= config.tol_rel:
            return LinearizedSystem(A, g, u, k, True, _residual(A, u, g), history)

    partial = LinearizedSystem(A, g, u, config.max_iter, False, _residual(A, u, g), history)
    raise NonConvergenceError(
        f"{problem.id} at mu={mu.tolist()}: no convergence in {config.max_iter} {method} steps "
        f"(last step {history[-1]:.3e})",
        history=history,
        partial=partial,
    )
