import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bifirom.errors import ContractError, EmptyBasisError, IllConditionedGramianError
from bifirom.linalg import (
    GramFactor,
    RankDeficiencyWarning,
    gram_schmidt,
    least_squares_gram,
    least_squares_qr,
    pivoted_cholesky_select,
    spectral_norm,
)
from oracles import dense_pivoted_qr, jacobi_singular_values, qr_least_squares

shapes = st.tuples(st.integers(8, 60), st.integers(1, 8)).filter(lambda s: s[0] >= s[1])
seeds = st.integers(0, 2**32 - 1)


def _gauss(shape, seed):
    return np.random.default_rng(seed).standard_normal(shape)


# --- oracles themselves ---------------------------------------------------


def test_pivoted_qr_oracle_examples():
    assert list(dense_pivoted_qr(np.eye(3))) == [0, 1, 2]
    assert list(dense_pivoted_qr(np.diag([1.0, 3.0, 2.0]))) == [1, 2, 0]


def test_jacobi_svd_oracle_matches_lapack():
    A = _gauss((12, 5), 1)
    assert np.allclose(jacobi_singular_values(A), np.linalg.svd(A, compute_uv=False), rtol=1e-12)


def test_qr_ls_oracle_matches_lapack():
    A, b = _gauss((20, 4), 2), _gauss(20, 3)
    assert np.allclose(qr_least_squares(A, b), np.linalg.lstsq(A, b, rcond=None)[0], rtol=1e-10)


# --- pivoted Cholesky selection --------------------------------------------


@settings(max_examples=150, deadline=None)
@given(shape=shapes, seed=seeds)
def test_cholesky_pivots_equal_column_pivoted_qr(shape, seed):
    S = _gauss(shape, seed)
    k = shape[1]
    sel = pivoted_cholesky_select(S, k)
    assert list(sel.pivot_indices) == list(dense_pivoted_qr(S)[:k])


@settings(max_examples=150, deadline=None)
@given(shape=shapes, seed=seeds, scale=st.floats(1e-6, 1e6))
def test_selection_scale_invariant(shape, seed, scale):
    S = _gauss(shape, seed)
    k = max(1, shape[1] - 1)
    a = pivoted_cholesky_select(S, k).pivot_indices
    b = pivoted_cholesky_select(scale * S, k).pivot_indices
    assert list(a) == list(b)


def test_selection_exact_rank_reproduces_all_columns():
    rng = np.random.default_rng(4)
    S = rng.standard_normal((40, 3)) @ rng.standard_normal((3, 8))
    sel = pivoted_cholesky_select(S, 3)
    B = S[:, sel.pivot_indices]
    P = B @ np.linalg.lstsq(B, S, rcond=None)[0]
    assert np.linalg.norm(S - P, 2) <= 1e-10 * np.linalg.norm(S, 2)


def test_selection_rank_deficiency_warns_but_returns_k():
    rng = np.random.default_rng(5)
    S = rng.standard_normal((30, 2)) @ rng.standard_normal((2, 6))
    with pytest.warns(RankDeficiencyWarning):
        sel = pivoted_cholesky_select(S, 4)
    assert sel.rank_deficient and len(sel.pivot_indices) == 4
    assert len(set(sel.pivot_indices.tolist())) == 4


def test_selection_ties_go_to_lowest_index():
    S = np.eye(4)
    assert list(pivoted_cholesky_select(S, 4).pivot_indices) == [0, 1, 2, 3]


def test_selection_k_out_of_range():
    with pytest.raises(ContractError):
        pivoted_cholesky_select(np.eye(3), 4)
    with pytest.raises(ContractError):
        pivoted_cholesky_select(np.eye(3), 0)


def test_selection_accepts_precomputed_gramian():
    S = _gauss((20, 6), 9)
    a = pivoted_cholesky_select(S, 4)
    b = pivoted_cholesky_select(None, 4, gram=S.T @ S)
    assert list(a.pivot_indices) == list(b.pivot_indices)


# --- Gram-Schmidt -----------------------------------------------------------


@settings(max_examples=150, deadline=None)
@given(shape=shapes, seed=seeds)
def test_gram_schmidt_orthonormal_and_span_preserving(shape, seed):
    S = _gauss(shape, seed)
    Q, kept = gram_schmidt(S)
    assert Q.shape[1] == len(kept) == shape[1]
    assert np.abs(Q.T @ Q - np.eye(Q.shape[1])).max() <= 1e-12
    R = S - Q @ (Q.T @ S)
    assert np.linalg.norm(R) <= 1e-10 * np.linalg.norm(S)


def test_gram_schmidt_drops_dependent_columns():
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal((2, 30))
    S = np.column_stack([a, b, a + 2 * b, np.zeros(30)])
    Q, kept = gram_schmidt(S)
    assert list(kept) == [0, 1]
    with pytest.raises(EmptyBasisError):
        gram_schmidt(np.zeros((5, 2)))


# --- least squares ----------------------------------------------------------


@settings(max_examples=150, deadline=None)
@given(shape=shapes, seed=seeds)
def test_gram_least_squares_orthogonality_and_oracle(shape, seed):
    S = _gauss(shape, seed)
    t = _gauss(shape[0], seed + 1)
    sol = least_squares_gram(S.T @ S, S.T @ t)
    r = S @ sol.coeffs - t
    assert np.abs(S.T @ r).max() <= 1e-10 * np.linalg.norm(t)
    ref = qr_least_squares(S, t)
    assert np.allclose(sol.coeffs, ref, rtol=1e-8, atol=1e-10 * np.linalg.norm(ref))
    assert np.allclose(least_squares_qr(S, t), ref, rtol=1e-10, atol=1e-12 * np.linalg.norm(ref))


def test_gram_factor_jitter_for_singular_gramian():
    v = np.ones((10, 1))
    S = np.hstack([v, v])
    fac = GramFactor(S.T @ S)
    assert fac.jitter > 0
    with pytest.raises(ContractError):
        GramFactor(np.ones((2, 3)))


def test_gram_factor_gives_up_on_indefinite():
    with pytest.raises(IllConditionedGramianError):
        GramFactor(np.diag([1.0, -1.0]))


def test_spectral_norm_matches_oracle():
    for seed in range(5):
        A = _gauss((30, 7), seed)
        assert spectral_norm(A) == pytest.approx(jacobi_singular_values(A)[0], rel=1e-7)
    assert spectral_norm(np.zeros((3, 3))) == 0.0


def test_no_warning_when_full_rank():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        pivoted_cholesky_select(_gauss((20, 5), 0), 5)
