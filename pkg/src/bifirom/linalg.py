"""Dense kernels: greedy column selection, orthogonalization, Gramian LS."""
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import ContractError, EmptyBasisError, IllConditionedGramianError

__all__ = [
    "SelectionResult",
    "RankDeficiencyWarning",
    "pivoted_cholesky_select",
    "gram_schmidt",
    "GramSolution",
    "GramFactor",
    "least_squares_gram",
    "least_squares_qr",
    "spectral_norm",
]


class RankDeficiencyWarning(RuntimeWarning):
    pass


@dataclass
class SelectionResult:
    pivot_indices: np.ndarray
    pivot_values: np.ndarray
    k: int
    rank_deficient: bool = False


def pivoted_cholesky_select(S, k, gram=None):
    """Greedy pivoted Cholesky on ``G = S^T S``; returns the first ``k`` pivots.

    Only the ``n x n`` Gramian is factored.  Ties go to the lowest index.  When
    the residual diagonal drops below ``1e-14 * max(diag G)`` before ``k``
    pivots, downdating stops, the result is flagged ``rank_deficient`` and the
    remaining pivots are taken in order of the last residual diagonal.
    """
    if gram is None:
        S = np.asarray(S, dtype=float)
        G = S.T @ S
    else:
        G = np.asarray(gram, dtype=float)
    n = G.shape[0]
    if not 1 <= k <= n:
        raise ContractError(f"need 1 <= k <= {n}, got k={k}")

    d = np.diag(G).copy()
    floor = 1e-14 * d.max() if d.max() > 0 else 0.0
    R = np.zeros((k, n))
    chosen = np.zeros(n, dtype=bool)
    pivots, values = [], []
    deficient = False
    for step in range(k):
        resid = np.where(chosen, -np.inf, d)
        j = int(np.argmax(resid))
        pivots.append(j)
        values.append(d[j])
        chosen[j] = True
        if deficient:
            continue
        if d[j] <= floor:
            deficient = True
            continue
        row = (G[j] - R[:step, j] @ R[:step]) / np.sqrt(d[j])
        R[step] = row
        d = d - row**2
        d[j] = 0.0
    if deficient:
        warnings.warn(
            f"selection became rank deficient before {k} pivots", RankDeficiencyWarning, stacklevel=2
        )
    return SelectionResult(np.array(pivots, dtype=np.int64), np.array(values), k, deficient)


def gram_schmidt(S, drop_tol=1e-12):
    """Modified Gram-Schmidt with one reorthogonalization pass.

    Columns whose norm after projection falls below ``drop_tol`` times their
    original norm are dropped.  Returns ``(Q, kept)`` with ``kept`` the
    indices of the retained input columns.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    if S.shape[1] < 1:
        raise ContractError("gram_schmidt needs at least one column")
    basis, kept = [], []
    for j in range(S.shape[1]):
        v = S[:, j].copy()
        norm0 = np.linalg.norm(v)
        if norm0 == 0.0:
            continue
        for _ in range(2):
            for q in basis:
                v -= (q @ v) * q
        nv = np.linalg.norm(v)
        if nv < drop_tol * norm0:
            continue
        basis.append(v / nv)
        kept.append(j)
    if not basis:
        raise EmptyBasisError("all columns were linearly dependent or zero")
    return np.column_stack(basis), np.array(kept, dtype=np.int64)


@dataclass
class GramSolution:
    coeffs: np.ndarray
    jitter: float = 0.0

    @property
    def regularized(self):
        return self.jitter > 0.0


class GramFactor:
    """Cholesky factor of a Gramian with escalating diagonal jitter.

    Jitter starts at ``1e-12 * trace/k`` and grows by 10x up to
    ``1e-6 * trace/k``; beyond that :class:`IllConditionedGramianError`.
    """

    def __init__(self, G):
        G = np.asarray(G, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ContractError(f"Gramian must be square, got {G.shape}")
        k = G.shape[0]
        scale = np.trace(G) / k
        self.jitter = 0.0
        try:
            self.c = sla.cho_factor(G, lower=True, check_finite=False)
            return
        except np.linalg.LinAlgError:
            pass
        if not scale > 0.0:
            raise IllConditionedGramianError(f"Gramian has non-positive trace {np.trace(G):.3e}")
        lam = 1e-12 * scale
        while lam <= 1e-6 * scale * (1 + 1e-9):
            try:
                self.c = sla.cho_factor(G + lam * np.eye(k), lower=True, check_finite=False)
                self.jitter = lam
                return
            except np.linalg.LinAlgError:
                lam *= 10.0
        raise IllConditionedGramianError(f"Gramian not positive definite even with jitter {1e-6 * scale:.3e}")

    def solve(self, g):
        return sla.cho_solve(self.c, g, check_finite=False)


def least_squares_gram(G, g):
    """Solve the normal equations ``G a = g``; see :class:`GramFactor`."""
    fac = GramFactor(G)
    return GramSolution(fac.solve(np.asarray(g, dtype=float)), fac.jitter)


def least_squares_qr(A, b):
    """Least squares via a thin QR of the tall matrix (conditioning reference)."""
    Qm, Rm = np.linalg.qr(np.asarray(A, dtype=float))
    return sla.solve_triangular(Rm, Qm.T @ b)


def spectral_norm(S, rtol=1e-8, max_iter=10_000, seed=0):
    """Largest singular value by power iteration on ``S^T S``."""
    S = np.asarray(S, dtype=float)
    if S.size == 0 or not np.any(S):
        return 0.0
    v = np.random.default_rng(seed).standard_normal(S.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = S.T @ (S @ v)
        lam_new = np.linalg.norm(w)
        if lam_new == 0.0:
            return 0.0
        v = w / lam_new
        if abs(lam_new - lam) <= rtol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    # Rayleigh quotient is more accurate than the iterate norm
    return float(np.sqrt(max(v @ (S.T @ (S @ v)), 0.0)))
