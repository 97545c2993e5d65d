"""Online stage: one coarse solve, two Gramian solves, one reduced solve."""
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import BifiromError, ContractError, ReducedSolveError
from .fem import prolongate
from .linalg import GramFactor, least_squares_qr
from .nonlinear import solve_fidelity
from .report import ErrorTable
from .snapshots import vectorize_operator, worker_count

__all__ = [
    "OnlineReport",
    "online_solve",
    "reference_bifidelity_solve",
    "reference_solutions",
    "evaluate",
    "ONLINE_CORE_STAGES",
]

ONLINE_CORE_STAGES = ("coefficients", "least_squares", "assembly", "reduced_solve")


@dataclass
class OnlineReport:
    mu: np.ndarray
    a_l: np.ndarray
    b_l: np.ndarray
    u_rb: np.ndarray
    u_r: np.ndarray
    u_l: np.ndarray
    lf_iterations: int
    timings: dict
    ls_residuals: dict
    reduced_residual: float
    condition: float
    flops: dict = field(default_factory=dict)

    @property
    def total_time(self):
        return sum(self.timings.values())

    def core_flops(self):
        return {k: self.flops[k] for k in ONLINE_CORE_STAGES}


def _flop_counts(art):
    n_L, n_f, N = art.n_L, art.n_f, art.N_rb
    return {
        "coefficients": 2 * art.lf_pattern.nnz * n_L + 2 * art.Flow_gamma.shape[0] * n_f,
        # two triangular solve pairs plus one residual correction per fit
        "least_squares": 4 * n_L**2 + 4 * n_f**2 + 4 * art.lf_pattern.nnz * n_L + 4 * art.Flow_gamma.shape[0] * n_f,
        "assembly": 2 * n_L * N**2 + 2 * n_f * N,
        "reduced_solve": (2 * N**3) // 3 + 2 * N**2,
        "reconstruction": 2 * art.N_h * N,
    }


def _refined_fit(fac, B, v):
    # normal equations square cond(B); one correction against the tall
    # matrix brings the coefficients back to QR accuracy
    x = fac.solve(B.T @ v)
    return x + fac.solve(B.T @ (v - B @ x))


def online_solve(artifact, mu, ls="gram"):
    """Approximate the high-fidelity solution at ``mu`` from ``artifact``.

    ``ls="gram"`` solves the precomputed normal equations plus one refinement
    step; ``ls="qr"`` solves the tall low-fidelity least-squares problems
    directly (for conditioning comparisons).
    """
    art = artifact
    problem = art.problem
    mu = problem.check_mu(mu)
    fac_L, fac_F = art.factors()

    t0 = time.perf_counter()
    lf = solve_fidelity(problem, art.lf_grid, mu, art.lf_iteration)
    vec_L = vectorize_operator(lf.operator, art.lf_pattern)
    t1 = time.perf_counter()
    if ls == "gram":
        a = _refined_fit(fac_L, art.Llow_gamma, vec_L)
        b = _refined_fit(fac_F, art.Flow_gamma, lf.rhs)
    elif ls == "qr":
        a = least_squares_qr(art.Llow_gamma, vec_L)
        b = least_squares_qr(art.Flow_gamma, lf.rhs)
    else:
        raise ContractError(f"unknown least-squares method {ls!r}")
    t2 = time.perf_counter()
    L_t = np.tensordot(a, art.L_rb_basis, axes=1)
    f_t = b @ art.f_rb_basis
    t3 = time.perf_counter()
    try:
        lu = sla.lu_factor(L_t, check_finite=True)
        u_rb = sla.lu_solve(lu, f_t)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise ReducedSolveError(f"reduced solve failed: {exc}", condition=np.inf) from exc
    t4 = time.perf_counter()
    u_r = art.Q @ u_rb
    t5 = time.perf_counter()

    cond = float(np.linalg.cond(L_t))
    if not np.all(np.isfinite(u_rb)) or cond > 1.0 / np.finfo(float).eps:
        raise ReducedSolveError(f"reduced operator is singular (condition {cond:.3e})", condition=cond)
    fn = np.linalg.norm(f_t)
    red_res = np.linalg.norm(L_t @ u_rb - f_t) / fn if fn > 0 else 0.0

    def rel(r, ref):
        n = np.linalg.norm(ref)
        return float(np.linalg.norm(r) / n) if n > 0 else float(np.linalg.norm(r))

    return OnlineReport(
        mu=mu,
        a_l=a,
        b_l=b,
        u_rb=u_rb,
        u_r=u_r,
        u_l=lf.solution,
        lf_iterations=lf.iterations,
        timings={
            "lf_solve": t1 - t0,
            "least_squares": t2 - t1,
            "assembly": t3 - t2,
            "reduced_solve": t4 - t3,
            "reconstruction": t5 - t4,
        },
        ls_residuals={
            "operator": rel(art.Llow_gamma @ a - vec_L, vec_L),
            "rhs": rel(art.Flow_gamma @ b - lf.rhs, lf.rhs),
        },
        reduced_residual=float(red_res),
        condition=cond,
        flops=_flop_counts(art),
    )


def reference_bifidelity_solve(Ulow_gamma, Uhigh_gamma, u_l):
    """Reference bi-fidelity approximation ``U_h(gamma) c`` where ``c`` fits
    ``u_l`` against ``U_l(gamma)`` in least squares.  No reduced equation."""
    # same refined normal-equation fit as the proposed method, for parity
    c = _refined_fit(GramFactor(Ulow_gamma.T @ Ulow_gamma), Ulow_gamma, u_l)
    return Uhigh_gamma @ c


def reference_solutions(problem, grid, test_set, config=None, workers=None):
    """High-fidelity solves at every test point: list of ``(solution, seconds)``
    (``None`` for failures)."""

    def run(mu):
        t0 = time.perf_counter()
        try:
            s = solve_fidelity(problem, grid, mu, config)
        except BifiromError:
            return None
        return s.solution, time.perf_counter() - t0

    n = worker_count(workers)
    pts = list(test_set.points)
    if n == 1:
        return [run(mu) for mu in pts]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(run, pts))


def _rel(x, ref):
    return float(np.linalg.norm(x - ref) / np.linalg.norm(ref))


def evaluate(artifact, test_set, hf_reference=None, hf_config=None, workers=None, ls="gram"):
    """Errors and timings of the proposed method, the reference bi-fidelity
    method and the plain low-fidelity model over ``test_set``."""
    art = artifact
    problem = art.problem
    if hf_reference is None:
        hf_reference = reference_solutions(problem, art.hf_grid, test_set, hf_config, workers)
    if len(hf_reference) != len(test_set):
        raise ContractError("hf_reference length differs from the test set")

    def run(i):
        ref = hf_reference[i]
        if ref is None:
            return None
        u_h, t_h = ref
        mu = test_set.points[i]
        try:
            rep = online_solve(art, mu, ls=ls)
            t0 = time.perf_counter()
            u_ref = reference_bifidelity_solve(art.Ulow_gamma_u, art.Uhigh_gamma_u, rep.u_l)
            t_ref = time.perf_counter() - t0 + rep.timings["lf_solve"]
        except BifiromError:
            return None
        u_lf = prolongate(rep.u_l, art.lf_grid, art.hf_grid, problem.n_fields)
        row = {f"mu_{j + 1}": float(v) for j, v in enumerate(mu)}
        row.update(
            N_rb=art.N_rb,
            e_u=_rel(rep.u_r, u_h),
            e_u_ref=_rel(u_ref, u_h),
            e_u_lf=_rel(u_lf, u_h),
            t_online=rep.total_time,
            t_lf=rep.timings["lf_solve"],
            t_hf=t_h,
            t_ref=t_ref,
        )
        return row

    n = worker_count(workers)
    if n == 1:
        rows = [run(i) for i in range(len(test_set))]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(run, range(len(test_set))))
    excluded = [i for i, r in enumerate(rows) if r is None]
    table = ErrorTable(
        rows=[r for r in rows if r is not None],
        param_dim=problem.param_dim,
        config={
            "problem": art.problem_id,
            "hf_grid": art.hf_grid.label(),
            "lf_grid": art.lf_grid.label(),
            "N_rb": art.N_rb,
            "n_L": art.n_L,
            "n_f": art.n_f,
        },
        excluded=excluded,
    )
    return table
