"""Offline stage: point selection, high-fidelity runs and precomputation."""
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import ContractError
from .fem import StructuredGrid, fem_space
from .linalg import GramFactor, gram_schmidt, pivoted_cholesky_select, spectral_norm
from .nonlinear import IterationConfig, solve_fidelity
from .problems import get_problem
from .snapshots import ParameterSet, SparsityPattern, dedup_union, sample_parameters, sweep, worker_count

__all__ = [
    "OfflineConfig",
    "RomArtifact",
    "HighFidelityRunner",
    "build_reduced_basis",
    "build_reduced_system_bases",
    "build_artifact",
    "lemma_diagnostics",
]


@dataclass(frozen=True)
class OfflineConfig:
    problem: str
    hf_grid: StructuredGrid
    lf_grid: StructuredGrid
    n_p: int
    N_rb: int
    n_L: int
    n_f: int
    seed: int = 0
    hf_iteration: IterationConfig = IterationConfig()
    lf_iteration: IterationConfig = IterationConfig()
    basis: str = "gram-schmidt"

    def __post_init__(self):
        for name in ("n_p", "N_rb", "n_L", "n_f"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1")
        for name in ("N_rb", "n_L", "n_f"):
            if getattr(self, name) > self.n_p:
                raise ContractError(f"{name}={getattr(self, name)} exceeds n_p={self.n_p}")
        if self.lf_grid.n_interior >= self.hf_grid.n_interior:
            raise ContractError("low-fidelity grid must have fewer DOFs than the high-fidelity grid")
        if self.basis not in ("gram-schmidt", "svd"):
            raise ContractError(f"unknown basis construction {self.basis!r}")

    @classmethod
    def for_problem(cls, problem, hf, lf, **kwargs):
        """Grids given as element counts are placed on the problem's domain."""
        p = get_problem(problem)
        hf = p.grid(hf) if isinstance(hf, int) else hf
        lf = p.grid(lf) if isinstance(lf, int) else lf
        return cls(problem, hf, lf, **kwargs)


@dataclass
class RomArtifact:
    """Everything the online stage needs; immutable after construction."""

    problem_id: str
    hf_grid: StructuredGrid
    lf_grid: StructuredGrid
    lf_iteration: IterationConfig
    Q: np.ndarray
    L_rb_basis: np.ndarray  # (n_L, N_rb, N_rb)
    f_rb_basis: np.ndarray  # (n_f, N_rb)
    G_L: np.ndarray
    G_F: np.ndarray
    Llow_gamma: np.ndarray  # (nnz_l, n_L)
    Flow_gamma: np.ndarray  # (N_l, n_f)
    gamma_u: ParameterSet
    gamma_L: ParameterSet
    gamma_f: ParameterSet
    lf_pattern: SparsityPattern
    Ulow_gamma_u: np.ndarray
    Uhigh_gamma_u: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def problem(self):
        return get_problem(self.problem_id)

    @property
    def N_rb(self):
        return self.Q.shape[1]

    @property
    def n_L(self):
        return self.L_rb_basis.shape[0]

    @property
    def n_f(self):
        return self.f_rb_basis.shape[0]

    @property
    def N_h(self):
        return self.Q.shape[0]

    def factors(self):
        """Cached Cholesky factors of the two Gramians (not persisted)."""
        fac = self.__dict__.get("_factors")
        if fac is None:
            fac = (GramFactor(self.G_L), GramFactor(self.G_F))
            self.__dict__["_factors"] = fac
        return fac

    def validation_errors(self, orth_tol=1e-10, gram_tol=1e-12):
        errs = []
        n = self.N_rb
        dev = np.abs(self.Q.T @ self.Q - np.eye(n)).max() if n else np.inf
        if not dev <= orth_tol:
            errs.append(f"Q^T Q deviates from identity by {dev:.3e}")
        for name, G, B in (("G_L", self.G_L, self.Llow_gamma), ("G_F", self.G_F, self.Flow_gamma)):
            ref = B.T @ B
            scale = max(np.abs(ref).max(), np.finfo(float).tiny)
            rel = np.abs(G - ref).max() / scale
            if not rel <= gram_tol:
                errs.append(f"{name} inconsistent with its low-fidelity basis (rel {rel:.3e})")
        shapes = {
            "L_rb_basis": (self.L_rb_basis.shape[1:], (n, n)),
            "f_rb_basis": (self.f_rb_basis.shape[1:], (n,)),
            "Llow_gamma": (self.Llow_gamma.shape, (self.lf_pattern.nnz, self.n_L)),
            "Flow_gamma": (self.Flow_gamma.shape[1:], (self.n_f,)),
            "G_L": (self.G_L.shape, (self.n_L, self.n_L)),
            "G_F": (self.G_F.shape, (self.n_f, self.n_f)),
        }
        for name, (got, want) in shapes.items():
            if tuple(got) != tuple(want):
                errs.append(f"{name} has shape {tuple(got)}, expected {tuple(want)}")
        return errs

    def validate(self):
        errs = self.validation_errors()
        if errs:
            raise ContractError("invalid artifact: " + "; ".join(errs))
        return self


class HighFidelityRunner:
    """Fine-grid solves keyed by candidate index, with a run counter.

    Shared between builds (e.g. a sweep over ``N_rb``) so that repeated
    points are never solved twice.
    """

    def __init__(self, problem, grid, candidates, config=None, workers=None):
        self.problem = problem
        self.grid = grid
        self.candidates = candidates
        self.config = config or IterationConfig()
        self.workers = workers
        self.cache = {}
        self.runs = 0
        self.seconds = 0.0

    def get(self, indices):
        indices = [int(i) for i in indices]
        missing = [i for i in dict.fromkeys(indices) if i not in self.cache]
        if missing:
            t0 = time.perf_counter()
            pts = [self.candidates.points[i] for i in missing]

            def run(mu):
                return solve_fidelity(self.problem, self.grid, mu, self.config)

            n = worker_count(self.workers)
            if n == 1 or len(pts) == 1:
                out = [run(mu) for mu in pts]
            else:
                with ThreadPoolExecutor(max_workers=n) as pool:
                    out = list(pool.map(run, pts))
            for i, sysm in zip(missing, out):
                self.cache[i] = sysm
            self.runs += len(missing)
            self.seconds += time.perf_counter() - t0
        return [self.cache[i] for i in indices]


def _basis_from_snapshots(U, method):
    if method == "svd":
        W, s, _ = np.linalg.svd(U, full_matrices=False)
        keep = s > 1e-12 * s[0]
        return W[:, keep], np.flatnonzero(keep)
    return gram_schmidt(U)


def build_reduced_basis(lf, N_rb, hf_runner, method="gram-schmidt"):
    """Select ``N_rb`` points from the low-fidelity solutions and build ``Q``.

    Returns ``(selection, U_h, Q, kept)``; ``Q`` may have fewer than ``N_rb``
    columns when high-fidelity snapshots are numerically dependent.
    """
    sel = pivoted_cholesky_select(lf.U, N_rb)
    U_h = np.column_stack([s.solution for s in hf_runner.get(sel.pivot_indices)])
    Q, kept = _basis_from_snapshots(U_h, method)
    return sel, U_h, Q, kept


def build_reduced_system_bases(lf, Q, n_L, n_f, hf_runner):
    """Select operator/rhs points and precompute the projected bases."""
    sel_L = pivoted_cholesky_select(lf.Lvec, n_L)
    sel_f = pivoted_cholesky_select(lf.F, n_f)
    hf_L = hf_runner.get(sel_L.pivot_indices)
    hf_f = hf_runner.get(sel_f.pivot_indices)
    L_rb = np.stack([Q.T @ (s.operator @ Q) for s in hf_L])
    f_rb = np.stack([Q.T @ s.rhs for s in hf_f])
    Llow = np.ascontiguousarray(lf.Lvec[:, sel_L.pivot_indices])
    Flow = np.ascontiguousarray(lf.F[:, sel_f.pivot_indices])
    return {
        "sel_L": sel_L,
        "sel_f": sel_f,
        "L_rb_basis": L_rb,
        "f_rb_basis": f_rb,
        "Llow_gamma": Llow,
        "Flow_gamma": Flow,
        "G_L": Llow.T @ Llow,
        "G_F": Flow.T @ Flow,
    }


def build_artifact(config, lf=None, hf_runner=None, candidates=None, workers=None):
    """Run the complete offline stage for ``config``.

    ``lf`` (low-fidelity sweep over the candidates) and ``hf_runner`` may be
    passed in to share work between builds of the same problem.
    """
    problem = get_problem(config.problem)
    timings = {}
    t_start = time.perf_counter()
    if candidates is None:
        candidates = lf.params if lf is not None else sample_parameters(problem, config.n_p, config.seed)
    if len(candidates) != config.n_p:
        raise ContractError(f"candidate set has {len(candidates)} points, config says n_p={config.n_p}")
    if lf is None:
        t0 = time.perf_counter()
        lf = sweep(problem, config.lf_grid, candidates, config.lf_iteration, "low", workers)
        timings["lf_sweep"] = time.perf_counter() - t0
    if hf_runner is None:
        hf_runner = HighFidelityRunner(problem, config.hf_grid, candidates, config.hf_iteration, workers)
    runs0, secs0 = hf_runner.runs, hf_runner.seconds

    t0 = time.perf_counter()
    sel_u, U_h, Q, kept = build_reduced_basis(lf, config.N_rb, hf_runner, config.basis)
    parts = build_reduced_system_bases(lf, Q, config.n_L, config.n_f, hf_runner)
    timings["hf_solves"] = hf_runner.seconds - secs0
    timings["selection_projection"] = time.perf_counter() - t0 - timings["hf_solves"]
    timings["total"] = time.perf_counter() - t_start

    union, _ = dedup_union(sel_u.pivot_indices, parts["sel_L"].pivot_indices, parts["sel_f"].pivot_indices)
    meta = {
        "tool_version": __version__,
        "problem": config.problem,
        "n_p": config.n_p,
        "seed": config.seed,
        "N_rb_requested": config.N_rb,
        "N_rb": int(Q.shape[1]),
        "n_L": config.n_L,
        "n_f": config.n_f,
        "basis": config.basis,
        "hf_runs": hf_runner.runs - runs0,
        "hf_union": int(len(union)),
        "kept_columns": kept.tolist(),
        "rank_deficient": {
            "u": sel_u.rank_deficient,
            "L": parts["sel_L"].rank_deficient,
            "f": parts["sel_f"].rank_deficient,
        },
        "pivot_values": {
            "u": sel_u.pivot_values.tolist(),
            "L": parts["sel_L"].pivot_values.tolist(),
            "f": parts["sel_f"].pivot_values.tolist(),
        },
        "hf_iteration": config.hf_iteration.as_dict(),
        "timings": timings,
    }
    art = RomArtifact(
        problem_id=config.problem,
        hf_grid=config.hf_grid,
        lf_grid=config.lf_grid,
        lf_iteration=config.lf_iteration,
        Q=Q,
        L_rb_basis=parts["L_rb_basis"],
        f_rb_basis=parts["f_rb_basis"],
        G_L=parts["G_L"],
        G_F=parts["G_F"],
        Llow_gamma=parts["Llow_gamma"],
        Flow_gamma=parts["Flow_gamma"],
        gamma_u=candidates.subset(sel_u.pivot_indices, "gamma_u"),
        gamma_L=candidates.subset(parts["sel_L"].pivot_indices, "gamma_L"),
        gamma_f=candidates.subset(parts["sel_f"].pivot_indices, "gamma_f"),
        lf_pattern=lf.pattern,
        Ulow_gamma_u=np.ascontiguousarray(lf.U[:, sel_u.pivot_indices]),
        Uhigh_gamma_u=U_h,
        metadata=meta,
    )
    return art.validate()


@dataclass
class LemmaCheck:
    name: str
    k: int
    n_p: int
    rows: int
    factor: float
    coeff_norm: float
    residual: float
    sigma_next: float
    applicable: bool
    scale: float = 0.0

    @property
    def coeff_bound_holds(self):
        return self.coeff_norm <= self.factor * (1 + 1e-12)

    @property
    def residual_bound(self):
        return self.factor * self.sigma_next

    @property
    def residual_bound_holds(self):
        # roundoff floor: the bound is an exact-arithmetic statement
        return self.residual <= self.residual_bound * (1 + 1e-12) + self.n_p * np.finfo(float).eps * self.scale

    def lines(self):
        flag = "" if self.coeff_bound_holds else "  [flagged: exceeds bound]"
        out = [
            f"{self.name}: k={self.k} n_p={self.n_p} sqrt(k(n_p-k)+1)={self.factor:.6g}",
            f"  ||coeffs||_2 = {self.coeff_norm:.6g}{flag}",
            f"  ||S - S_k C||_2 = {self.residual:.6g} vs bound {self.residual_bound:.6g} "
            f"(sigma_k+1 = {self.sigma_next:.6g}) -> {'holds' if self.residual_bound_holds else 'VIOLATED'}",
        ]
        if not self.applicable:
            out.append("  (k >= min(n_p, rows): exact reproduction expected)")
        return out


@dataclass
class LemmaReport:
    operator: LemmaCheck
    rhs: LemmaCheck

    def lines(self):
        return self.operator.lines() + self.rhs.lines()


def _lemma_check(name, S, sel):
    S = np.asarray(S, dtype=float)
    n_p = S.shape[1]
    k = len(sel)
    B = S[:, sel]
    fac = GramFactor(B.T @ B)
    C = fac.solve(B.T @ S)
    resid = spectral_norm(S - B @ C)
    evals = np.linalg.eigvalsh(S.T @ S)[::-1]
    sig = np.sqrt(np.clip(evals, 0.0, None))
    sigma_next = float(sig[k]) if k < len(sig) else 0.0
    return LemmaCheck(
        name=name,
        k=k,
        n_p=n_p,
        rows=S.shape[0],
        factor=float(np.sqrt(k * (n_p - k) + 1)),
        coeff_norm=spectral_norm(C),
        residual=resid,
        sigma_next=sigma_next,
        applicable=k < min(n_p, S.shape[0]),
        scale=float(sig[0]) if len(sig) else 0.0,
    )


def lemma_diagnostics(lf, gamma_L, gamma_f):
    """Compare expansion-coefficient norms and residuals against the
    interpolative-decomposition bounds ``sqrt(k(n_p-k)+1)`` and
    ``sqrt(k(n_p-k)+1) * sigma_{k+1}``.  Violations are reported, not raised.
    """
    return LemmaReport(
        _lemma_check("operator", lf.Lvec, np.asarray(gamma_L, dtype=np.int64)),
        _lemma_check("rhs", lf.F, np.asarray(gamma_f, dtype=np.int64)),
    )
