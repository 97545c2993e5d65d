import numpy as np
import pytest

from bifirom.errors import ContractError
from bifirom.fem import StructuredGrid
from bifirom.offline import (
    HighFidelityRunner,
    OfflineConfig,
    build_artifact,
    lemma_diagnostics,
)
from bifirom.problems import get_problem
from bifirom.snapshots import sample_parameters, sweep


def _config(problem="wavespeed", hf=16, lf=4, n_p=30, N_rb=6, n_L=3, n_f=1, **kw):
    return OfflineConfig.for_problem(problem, hf, lf, n_p=n_p, N_rb=N_rb, n_L=n_L, n_f=n_f, **kw)


def test_config_validation():
    with pytest.raises(ContractError):
        _config(N_rb=0)
    with pytest.raises(ContractError):
        _config(n_p=5, N_rb=6)
    with pytest.raises(ContractError):
        _config(hf=4, lf=4)
    with pytest.raises(ContractError):
        _config(basis="pod")


def test_artifact_shapes_and_invariants():
    art = build_artifact(_config())
    assert art.Q.shape == (15 * 15, 6)
    assert art.L_rb_basis.shape == (3, 6, 6)
    assert art.f_rb_basis.shape == (1, 6)
    assert art.Llow_gamma.shape == (art.lf_pattern.nnz, 3)
    assert art.Flow_gamma.shape == (9, 1)
    assert np.abs(art.Q.T @ art.Q - np.eye(6)).max() <= 1e-10
    assert art.validation_errors() == []
    assert len(art.gamma_u) == 6 and len(art.gamma_L) == 3 and len(art.gamma_f) == 1


def test_hf_budget_bounded_by_union():
    cfg = _config(problem="nl-elliptic", hf=16, lf=4, n_p=40, N_rb=5, n_L=4, n_f=2)
    art = build_artifact(cfg)
    assert art.metadata["hf_runs"] == art.metadata["hf_union"] <= 5 + 4 + 2


def test_runner_cache_shared_between_builds():
    cfg = _config(n_p=30, N_rb=6)
    p = get_problem(cfg.problem)
    cand = sample_parameters(p, cfg.n_p, cfg.seed)
    lf = sweep(p, cfg.lf_grid, cand)
    runner = HighFidelityRunner(p, cfg.hf_grid, cand)
    build_artifact(cfg, lf=lf, hf_runner=runner)
    first = runner.runs
    small = _config(n_p=30, N_rb=4)
    art = build_artifact(small, lf=lf, hf_runner=runner)
    # the N_rb=4 pivots are a prefix of the N_rb=6 pivots
    assert runner.runs == first and art.metadata["hf_runs"] == 0


def test_full_basis_reproduces_candidate_snapshots():
    # N_rb = n_p: every high-fidelity candidate solution lies in span(Q)
    cfg = _config(n_p=8, N_rb=8, n_L=3)
    art = build_artifact(cfg)
    p = get_problem(cfg.problem)
    runner = HighFidelityRunner(p, cfg.hf_grid, sample_parameters(p, 8, cfg.seed))
    for s in runner.get(range(8)):
        u = s.solution
        assert np.linalg.norm(u - art.Q @ (art.Q.T @ u)) <= 1e-10 * np.linalg.norm(u)


def test_wavespeed_operator_is_affine_in_three_terms():
    # L(mu) = K_x + mu_1 K_y - mu_2 M: three snapshots span the operator manifold
    p = get_problem("wavespeed")
    lf = sweep(p, p.grid(8), sample_parameters(p, 40, 0))
    art = build_artifact(_config(hf=16, lf=8, n_p=40, N_rb=4, n_L=3), lf=lf)
    B = art.Llow_gamma
    coeffs = np.linalg.solve(art.G_L, B.T @ lf.Lvec)
    res = np.linalg.norm(lf.Lvec - B @ coeffs, axis=0) / np.linalg.norm(lf.Lvec, axis=0)
    assert res.max() <= 1e-10


def test_svd_basis_option_spans_same_space():
    a = build_artifact(_config(N_rb=5))
    b = build_artifact(_config(N_rb=5, basis="svd"))
    P = a.Q @ a.Q.T
    assert np.linalg.norm(b.Q - P @ b.Q) <= 1e-8


def test_validate_flags_corruption():
    art = build_artifact(_config())
    art.G_L = art.G_L * 2
    with pytest.raises(ContractError):
        art.validate()


def test_lemma_bounds_hold_on_random_low_rank_family():
    p = get_problem("high-contrast")
    lf = sweep(p, p.grid(4), sample_parameters(p, 64, 0))
    art = build_artifact(_config("high-contrast", hf=16, lf=4, n_p=64, N_rb=4, n_L=5, n_f=1), lf=lf)
    rep = lemma_diagnostics(lf, art.gamma_L.indices, art.gamma_f.indices)
    for chk in (rep.operator, rep.rhs):
        assert chk.coeff_bound_holds
        assert chk.residual_bound_holds
    text = "\n".join(rep.lines())
    assert "operator" in text and "rhs" in text


def test_grids_must_nest_in_size():
    with pytest.raises(ContractError):
        OfflineConfig("wavespeed", StructuredGrid(4, 4), StructuredGrid(8, 8), 10, 2, 2, 1)
