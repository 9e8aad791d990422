import math

import numpy as np
import pytest
from pydantic import ValidationError

from spectral_lab.ensembles import (
    DenseHermitian,
    SparseHermitian,
    SparsePauliSum,
    draw_pauli_terms,
    pauli_sum_from_draws,
    sample_complete_klocal,
    sample_complex_signed_permutation,
    sample_gue,
    sample_instance,
    sample_pauli_string_ensemble,
    sample_signed_perm_sum,
)
from spectral_lab.errors import DomainError, ResourceError
from spectral_lab.models import EnsembleSpec, EnsembleVariant
from spectral_lab.montecarlo import SEED_MAX, derive_seed, generator
from spectral_lab.pauli_algebra import weight
from spectral_lab.spectral import eigenvalues


def normalized_square_trace(matrix: np.ndarray) -> float:
    return float(np.real(np.trace(matrix @ matrix))) / matrix.shape[0]


# --- Pauli string ensemble ---

def test_single_term_instance():
    h = sample_pauli_string_ensemble(1, 1, seed=3)
    assert h.m == 1 and h.n == 1, "one term on one site"
    assert abs(h.coefficients[0]) == 1.0, "coefficient must be +-1 for m=1"
    assert h.strings[0].letters() in {"I", "X", "Y", "Z"}, "string must be a single-site letter"


def test_same_seed_gives_identical_instances():
    a = sample_pauli_string_ensemble(5, 40, seed=123)
    b = sample_pauli_string_ensemble(5, 40, seed=123)
    assert np.array_equal(a.coefficients, b.coefficients), "coefficients differ between identical draws"
    assert a.strings == b.strings, "strings differ between identical draws"
    c = sample_pauli_string_ensemble(5, 40, seed=124)
    assert a.strings != c.strings, "different seeds should give different instances"


def test_coefficients_are_exactly_plus_minus_inverse_root_m():
    m = 37
    h = sample_pauli_string_ensemble(4, m, seed=9)
    assert set(np.abs(h.coefficients).tolist()) == {1.0 / math.sqrt(m)}, "coefficients must be +-1/sqrt(m)"


def test_prefix_instances_share_terms():
    draws = draw_pauli_terms(6, 40, generator(1, 0))
    full = pauli_sum_from_draws(6, draws)
    prefix = pauli_sum_from_draws(6, draws, m=10)
    assert prefix.strings == full.strings[:10], "prefix instance must reuse the first terms"
    assert np.allclose(prefix.coefficients * math.sqrt(10), full.coefficients[:10] * math.sqrt(40)), "signs reused"


def test_pauli_second_moment_is_one_on_average():
    n, m, trials = 6, 200, 500
    values = [normalized_square_trace(sample_pauli_string_ensemble(n, m, derive_seed(42, 0, t)).to_dense())
              for t in range(trials)]
    assert abs(np.mean(values) - 1.0) <= 0.02, f"E Tr H^2 = {np.mean(values)}"


def test_pauli_spectrum_is_symmetric_on_average():
    n, m, trials = 5, 20, 400
    skews = np.array([eigenvalues(sample_pauli_string_ensemble(n, m, derive_seed(43, 0, t))).moment(3)
                      for t in range(trials)])
    standard_error = skews.std(ddof=1) / math.sqrt(trials)
    assert abs(skews.mean()) <= 4 * standard_error + 1e-12, f"mean third moment {skews.mean()} is not near zero"


def test_pauli_sum_apply_matches_dense():
    h = sample_pauli_string_ensemble(5, 30, seed=2)
    v = generator(2, 9).standard_normal(32) + 0j
    assert np.allclose(h.apply(v), h.to_dense() @ v), "matrix-free apply disagrees with dense"


def test_from_text_builds_terms():
    h = SparsePauliSum.from_text([(0.5, "+XZ"), (-1.0, "-YY")])
    assert h.n == 2 and h.m == 2, "two terms on two sites"
    expected = 0.5 * np.kron([[0, 1], [1, 0]], [[1, 0], [0, -1]]) + np.kron([[0, -1j], [1j, 0]], [[0, -1j], [1j, 0]])
    assert np.allclose(h.to_dense(), expected), "from_text matrix"


def test_mismatched_term_width_is_rejected():
    with pytest.raises(DomainError):
        SparsePauliSum.from_text([(1.0, "XZ"), (1.0, "X")])


# --- GUE ---

def test_gue_is_hermitian():
    h = sample_gue(16, seed=5).matrix
    assert np.array_equal(h, h.conj().T), "GUE sample must be exactly Hermitian"


def test_gue_off_diagonal_variance():
    N, draws = 4, 10000
    values = np.array([abs(sample_gue(N, derive_seed(7, 1, t)).matrix[0, 1]) ** 2 for t in range(draws)])
    standard_error = values.std(ddof=1) / math.sqrt(draws)
    assert abs(values.mean() - 1.0 / N) <= 3 * standard_error, f"E|H_01|^2 = {values.mean()}"


def test_gue_second_moment():
    values = [normalized_square_trace(sample_gue(64, derive_seed(8, 1, t)).matrix) for t in range(200)]
    assert abs(np.mean(values) - 1.0) <= 0.03, f"E Tr H^2 = {np.mean(values)}"


def test_gue_respects_dense_budget(dense_budget):
    dense_budget(8)
    with pytest.raises(ResourceError):
        sample_gue(16, seed=1)


# --- Signed permutations ---

def test_complex_signed_permutation_structure():
    q = sample_complex_signed_permutation(12, seed=4).toarray()
    assert all(np.count_nonzero(row) == 1 for row in q), "one nonzero per row"
    assert np.allclose(np.abs(q[q != 0]), 1.0), "unit-modulus entries"
    assert np.allclose(q @ q.conj().T, np.eye(12)), "Q Q^dagger = I"


def test_single_permutation_sum_is_sparse_and_hermitian():
    h = sample_signed_perm_sum(10, 1, seed=6).matrix
    assert np.array_equal(h, h.conj().T), "Hermitian"
    assert max(np.count_nonzero(row) for row in h) <= 2, "at most two nonzeros per row for m=1"


def test_signed_perm_sum_second_moment():
    values = [normalized_square_trace(sample_signed_perm_sum(32, 8, derive_seed(10, 2, t)).matrix)
              for t in range(500)]
    assert abs(np.mean(values) - 1.0) <= 0.05, f"E Tr H^2 = {np.mean(values)}"


def test_large_signed_perm_sum_stays_in_triplet_form():
    h = sample_signed_perm_sum(600, 2, seed=3)
    assert isinstance(h, SparseHermitian), "large sums come back in triplet form"
    assert h.max_row_nonzeros <= 4, "at most 2m nonzeros per row"
    dense = h.to_dense()
    assert np.allclose(dense, dense.conj().T), "Hermitian"
    v = generator(3, 3).standard_normal(600)
    assert np.allclose(h.apply(v), dense @ v), "triplet apply matches dense"


# --- Complete k-local and dispatch ---

def test_complete_klocal_terms_and_normalization():
    h = sample_complete_klocal(4, 2, seed=1)
    assert h.m == 6 * 9, "C(4,2) 3^2 strings"
    assert all(weight(s) == 2 for s in h.strings), "every string has weight k"
    assert normalized_square_trace(h.to_dense()) == pytest.approx(1.0, abs=1e-12), "Tr H^2 = 1"


def test_complete_klocal_rejects_bad_k():
    with pytest.raises(DomainError):
        sample_complete_klocal(3, 4, seed=0)


def test_sample_instance_dispatch():
    pauli = sample_instance(EnsembleSpec(variant="pauli", n=3, m=5, seed=1))
    gue = sample_instance(EnsembleSpec(variant=EnsembleVariant.GUE, N=6, seed=1))
    perm = sample_instance(EnsembleSpec(variant="real_signed_perm_sum", N=6, m=3, seed=1))
    assert isinstance(pauli, SparsePauliSum) and pauli.m == 5, "pauli dispatch"
    assert isinstance(gue, DenseHermitian) and gue.dim == 6, "gue dispatch"
    assert isinstance(perm, DenseHermitian) and np.allclose(perm.matrix.imag, 0), "real variant is real"


def test_sample_instance_requires_seed():
    with pytest.raises(DomainError):
        sample_instance(EnsembleSpec(variant="gue", N=4))


def test_ensemble_spec_validation():
    with pytest.raises(ValidationError):
        EnsembleSpec(variant="pauli", n=3)
    with pytest.raises(ValidationError):
        EnsembleSpec(variant="complete_klocal", n=2, k=3)
    with pytest.raises(ValidationError):
        EnsembleSpec(variant="gue", N=4, seed=-1)
    with pytest.raises(ValidationError):
        EnsembleSpec(variant="gue", N=4, seed=SEED_MAX + 1)
    assert EnsembleSpec(variant="gue", N=4, seed=SEED_MAX).seed == SEED_MAX, "largest seed accepted"
