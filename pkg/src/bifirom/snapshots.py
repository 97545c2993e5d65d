"""Parameter sets, operator vectorization and snapshot sweeps."""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, NonConvergenceError, StructuralError, SweepError
from .fem import fem_space
from .nonlinear import solve_fidelity

__all__ = [
    "ParameterSet",
    "SparsityPattern",
    "SnapshotSet",
    "sample_parameters",
    "vectorize_operator",
    "unvectorize_operator",
    "sweep",
    "dedup_union",
    "worker_count",
]


def worker_count(workers=None):
    """Worker pool size: explicit value, else ``BIFIROM_THREADS``, else CPU count."""
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("BIFIROM_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class ParameterSet:
    points: np.ndarray
    provenance: str = "candidate"
    seed: Optional[int] = None
    indices: Optional[np.ndarray] = None  # positions in the parent candidate set

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))

    def __len__(self):
        return self.points.shape[0]

    def subset(self, idx, provenance):
        idx = np.asarray(idx, dtype=np.int64)
        return ParameterSet(self.points[idx], provenance, self.seed, idx)


def sample_parameters(problem, n, seed, provenance="candidate"):
    """``n`` i.i.d. uniform points in the problem's parameter box."""
    b = problem.param_bounds
    rng = np.random.default_rng(seed)
    pts = b[:, 0] + (b[:, 1] - b[:, 0]) * rng.random((n, problem.param_dim))
    return ParameterSet(pts, provenance, seed)


@dataclass(frozen=True, eq=False)
class SparsityPattern:
    indptr: np.ndarray
    indices: np.ndarray
    shape: tuple

    @classmethod
    def of(cls, space):
        return cls(space.indptr, space.indices, (space.ndof, space.ndof))

    @property
    def nnz(self):
        return len(self.indices)

    def matches(self, L):
        return (
            L.shape == self.shape
            and len(L.indices) == len(self.indices)
            and np.array_equal(L.indptr, self.indptr)
            and np.array_equal(L.indices, self.indices)
        )


def vectorize_operator(L, pattern):
    """Nonzero values of ``L`` in canonical CSR order."""
    if not sp.isspmatrix_csr(L) or not pattern.matches(L):
        raise StructuralError("operator pattern differs from the reference sparsity pattern")
    return np.array(L.data, dtype=float)


def unvectorize_operator(values, pattern):
    values = np.asarray(values, dtype=float)
    if values.shape != (pattern.nnz,):
        raise StructuralError(f"expected {pattern.nnz} values, got {values.shape}")
    A = sp.csr_matrix((values.copy(), pattern.indices.copy(), pattern.indptr.copy()), shape=pattern.shape)
    A.has_sorted_indices = True
    return A


@dataclass
class SnapshotSet:
    """Column-stacked solutions ``U``, vectorized operators ``Lvec`` and rhs ``F``."""

    U: np.ndarray
    Lvec: np.ndarray
    F: np.ndarray
    params: ParameterSet
    fidelity: str
    grid: object
    pattern: SparsityPattern
    iterations: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    systems: Optional[list] = field(default=None, repr=False)

    @property
    def n(self):
        return self.U.shape[1]


def _solve_all(problem, grid, points, config, workers):
    def run(mu):
        try:
            return solve_fidelity(problem, grid, mu, config)
        except NonConvergenceError as exc:
            return exc

    n = worker_count(workers)
    if n == 1 or len(points) == 1:
        return [run(mu) for mu in points]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(run, points))


def sweep(problem, grid, params, config=None, fidelity="low", workers=None, keep_systems=False):
    """Solve at every point of ``params`` and stack the results column-wise.

    Any non-convergent point fails the whole sweep with a :class:`SweepError`
    listing the offending indices.
    """
    if len(params) == 0:
        raise ContractError("parameter set is empty")
    space = fem_space(grid, problem.n_fields)
    pattern = SparsityPattern.of(space)
    results = _solve_all(problem, grid, list(params.points), config, workers)
    bad = [i for i, r in enumerate(results) if isinstance(r, Exception)]
    if bad:
        raise SweepError(f"{len(bad)} of {len(params)} points failed to converge: {bad}", offenders=bad)
    U = np.column_stack([r.solution for r in results])
    F = np.column_stack([r.rhs for r in results])
    Lvec = np.column_stack([vectorize_operator(r.operator, pattern) for r in results])
    iters = np.array([r.iterations for r in results], dtype=np.int64)
    return SnapshotSet(U, Lvec, F, params, fidelity, grid, pattern, iters, results if keep_systems else None)


def dedup_union(*selections):
    """Union of index selections without duplicates, in first-seen order.

    Returns ``(union, maps)`` where ``maps[i][j]`` is the position in
    ``union`` of ``selections[i][j]``.
    """
    union, where = [], {}
    maps = []
    for sel in selections:
        m = []
        for idx in np.asarray(sel, dtype=np.int64).tolist():
            if idx not in where:
                where[idx] = len(union)
                union.append(idx)
            m.append(where[idx])
        maps.append(np.array(m, dtype=np.int64))
    return np.array(union, dtype=np.int64), maps
