import math

import numpy as np
import pytest
from scipy import optimize

from spectral_lab.ensembles import SparsePauliSum, sample_gue, sample_pauli_string_ensemble
from spectral_lab.errors import DomainError, NumericError
from spectral_lab.models import ResolventQuery
from spectral_lab.montecarlo import derive_seed
from spectral_lab.spectral import (
    Spectrum,
    eigensystem,
    eigenvalues,
    empirical_cdf_distance,
    gue_moment_bound,
    low_energy_fraction,
    resolvent_norm,
    resolvent_trace_moment,
    schatten_p_norm,
    semicircle_cdf,
    semicircle_density,
    semicircle_mass,
    semicircle_resolvent_moment,
    spectral_norm_estimate,
    window_fraction,
)


def semicircle_quadrature_oracle(omega: float, eta: float, p: int, points: int = 200001) -> float:
    """Trapezoid rule after x = 2 sin(theta), which removes the endpoint square roots."""
    theta = np.linspace(-math.pi / 2, math.pi / 2, points)
    x = 2.0 * np.sin(theta)
    integrand = 2.0 * np.cos(theta) ** 2 / math.pi * ((x - omega) ** 2 + eta ** 2) ** (-p / 2)
    return float(np.trapezoid(integrand, theta))


def semicircle_quantiles(N: int) -> np.ndarray:
    return np.array([optimize.brentq(lambda e: semicircle_cdf(e) - (k + 0.5) / N, -2.0, 2.0) for k in range(N)])


# --- Exact diagonalization ---

def test_eigenvalues_are_sorted():
    assert np.allclose(eigenvalues(np.diag([3.0, 1.0, 2.0])).eigenvalues, [1.0, 2.0, 3.0]), "sorted spectrum"


def test_pauli_x_spectrum():
    s = eigenvalues(SparsePauliSum.from_text([(1.0, "X")]))
    assert np.allclose(s.eigenvalues, [-1.0, 1.0]), "X has eigenvalues -1, +1"


def test_two_site_spectrum_matches_closed_form():
    s = eigenvalues(SparsePauliSum.from_text([(1.0, "ZZ"), (1.0, "XI")]))
    root2 = math.sqrt(2.0)
    assert np.allclose(s.eigenvalues, [-root2, -root2, root2, root2]), "ZZ + XI has eigenvalues +-sqrt(2) twice"


def test_non_hermitian_input_is_rejected():
    with pytest.raises(DomainError):
        eigenvalues(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(DomainError):
        eigenvalues(SparsePauliSum.from_text([(1.0, "iX")]))


def test_eigensystem_reconstructs_matrix():
    h = sample_gue(12, seed=3)
    s, vectors = eigensystem(h)
    assert np.allclose(vectors @ np.diag(s.eigenvalues) @ vectors.conj().T, h.matrix), "V diag V^dagger = H"


# --- Schatten norms ---

def test_schatten_examples():
    assert schatten_p_norm(Spectrum(np.ones(5)), 6) == pytest.approx(1.0), "identity has unit norm"
    assert schatten_p_norm(Spectrum([2.0, 0.0, 0.0, 0.0]), 2) == pytest.approx(1.0), "(4/4)^(1/2)"
    assert schatten_p_norm(Spectrum([-3.0, 1.0]), "inf") == 3.0, "p = inf is the operator norm"
    assert schatten_p_norm(Spectrum([0.0, 0.0]), 4) == 0.0, "zero spectrum"


def test_schatten_rejects_small_p():
    with pytest.raises(DomainError):
        schatten_p_norm(Spectrum([1.0]), 0.5)


@pytest.mark.parametrize("s", [
    eigenvalues(sample_gue(64, seed=5)),
    eigenvalues(sample_pauli_string_ensemble(5, 20, seed=5)),
    Spectrum([-3.0, 0.0, 0.1, 2.5]),
])
def test_schatten_norm_is_nondecreasing_in_p(s):
    norms = [schatten_p_norm(s, p) for p in (1, 1.5, 2, 3, 4, 6, 8, 16, 64)] + [schatten_p_norm(s, "inf")]
    assert all(b >= a * (1 - 1e-12) for a, b in zip(norms, norms[1:])), f"norms not monotone in p: {norms}"


def test_gue_two_norm_is_one_on_average():
    values = [schatten_p_norm(eigenvalues(sample_gue(128, derive_seed(1, 1, t))), 2) for t in range(100)]
    assert abs(np.mean(values) - 1.0) <= 0.02, f"GUE p=2 norm mean {np.mean(values)}"


@pytest.mark.slow
def test_gue_two_norm_at_full_size():
    values = [schatten_p_norm(eigenvalues(sample_gue(512, derive_seed(1, 1, t))), 2) for t in range(100)]
    assert abs(np.mean(values) - 1.0) <= 0.02, f"GUE p=2 norm mean {np.mean(values)}"


def test_gue_moment_bound():
    assert gue_moment_bound(16, 2) == pytest.approx(2.5), "2(1 + 1/4)"


# --- Resolvent moments ---

def test_resolvent_examples():
    assert resolvent_trace_moment(Spectrum([0.3]), ResolventQuery(omega=0.3, eta=1.0, p=2)) == pytest.approx(1.0)
    assert resolvent_trace_moment(Spectrum([-1.0, 1.0]), ResolventQuery(omega=0.0, eta=1.0, p=2)) == pytest.approx(0.5)
    far = Spectrum([5.0, 6.0, -4.0])
    q = ResolventQuery(omega=0.0, eta=0.4, p=4)
    assert resolvent_trace_moment(far, q) <= (10 * q.eta) ** -q.p, "pointwise bound far from the spectrum"


def test_resolvent_norm_is_bounded_by_inverse_eta():
    s = eigenvalues(sample_gue(32, seed=2))
    for omega in (-1.0, 0.0, 0.5):
        q = ResolventQuery(omega=omega, eta=0.2, p=6)
        assert resolvent_norm(s, q) <= 1.0 / q.eta + 1e-12, "|||R|||_p <= 1/eta"


def test_resolvent_query_rejects_odd_p():
    with pytest.raises(ValueError):
        ResolventQuery(omega=0.0, eta=1.0, p=3)
    with pytest.raises(ValueError):
        ResolventQuery(omega=0.0, eta=0.0, p=2)


# --- Semicircle reference ---

def test_semicircle_density_and_mass():
    assert semicircle_density(0.0) == pytest.approx(1 / math.pi), "rho(0) = 1/pi"
    assert semicircle_density(2.5) == 0.0, "zero outside the support"
    assert semicircle_mass(-2.0, 2.0) == pytest.approx(1.0), "unit mass"
    assert semicircle_mass(-2.0, -1.6) == pytest.approx(0.05203, abs=2e-5), "low-energy mass at eps=0.2"


def test_semicircle_resolvent_closed_form():
    value = semicircle_resolvent_moment(ResolventQuery(omega=0.0, eta=1.0, p=2))
    assert value == pytest.approx((math.sqrt(5.0) - 1.0) / 2.0, rel=1e-7), "closed form at omega=0, eta=1, p=2"


def test_semicircle_resolvent_limits():
    assert semicircle_resolvent_moment(ResolventQuery(omega=0.0, eta=100.0, p=2)) == pytest.approx(1e-4, rel=0.01)
    assert semicircle_resolvent_moment(ResolventQuery(omega=0.7, eta=0.2, p=0)) == pytest.approx(1.0, rel=1e-8)


@pytest.mark.parametrize("omega, eta, p", [(0.5, 0.3, 6), (3.0, 0.5, 4), (-1.9, 0.1, 2), (1.2, 0.13, 20)])
def test_semicircle_resolvent_matches_independent_quadrature(omega, eta, p):
    expected = semicircle_quadrature_oracle(omega, eta, p)
    value = semicircle_resolvent_moment(ResolventQuery(omega=omega, eta=eta, p=p))
    assert value == pytest.approx(expected, rel=1e-6), f"S({omega}, {eta}, {p})"


# --- CDF distance ---

def test_cdf_distance_of_semicircle_quantiles():
    assert empirical_cdf_distance(Spectrum(semicircle_quantiles(4))) <= 0.25 + 1e-12, "step granularity 1/N"


def test_cdf_distance_to_itself_is_zero():
    s = eigenvalues(sample_gue(20, seed=1))
    assert empirical_cdf_distance(s, s) == 0.0, "a spectrum has zero distance to itself"


def test_cdf_distance_against_callable_reference():
    def uniform(e):
        return np.clip(np.asarray(e) / 2.0 + 0.5, 0.0, 1.0)

    assert empirical_cdf_distance(Spectrum([0.0, 1.0]), uniform) == pytest.approx(0.5), "jump at 0 from 0 to 1/2 against F(0)=1/2"


def _mean_distance(N: int, draws: int) -> float:
    return float(np.mean([empirical_cdf_distance(eigenvalues(sample_gue(N, derive_seed(17, 1, N, t))))
                          for t in range(draws)]))


def test_cdf_distance_decays_with_dimension():
    small, large = _mean_distance(64, 10), _mean_distance(256, 10)
    assert small / large >= 1.3, f"distance should shrink with N: {small} -> {large}"


@pytest.mark.slow
def test_cdf_distance_scaling_at_full_size():
    distances = [_mean_distance(N, 20) for N in (256, 1024, 4096)]
    for before, after in zip(distances, distances[1:]):
        assert before / after >= 1.3, f"distance ratio {before / after} per 4x in N"


# --- Lanczos norm estimate ---

def test_norm_estimate_examples():
    assert spectral_norm_estimate(SparsePauliSum.from_text([(1.0, "+ZZ")])).value == pytest.approx(1.0, abs=1e-10)
    h = SparsePauliSum.from_text([(1 / math.sqrt(2), "X"), (1 / math.sqrt(2), "Z")])
    assert spectral_norm_estimate(h).value == pytest.approx(1.0, abs=1e-10), "(X + Z)/sqrt(2) has norm 1"


def test_norm_estimate_matches_dense_spectrum():
    h = sample_pauli_string_ensemble(8, 300, seed=21)
    s = eigenvalues(h)
    estimate = spectral_norm_estimate(h)
    assert abs(estimate.value - max(abs(s.lambda_min), abs(s.lambda_max))) <= 1e-6, "Lanczos vs dense norm"
    assert estimate.lambda_min == pytest.approx(s.lambda_min, abs=1e-6), "lowest Ritz value"


def test_norm_estimate_reports_non_convergence():
    h = sample_pauli_string_ensemble(8, 300, seed=21)
    with pytest.raises(NumericError) as info:
        spectral_norm_estimate(h, max_iters=2)
    assert info.value.best_estimate is not None and info.value.best_estimate > 0, "best estimate is reported"


# --- Spectrum fractions ---

def test_low_energy_fraction_examples():
    assert low_energy_fraction(Spectrum([-1.0, 1.0]), 0.1) == 0.0, "threshold below lambda_min"
    assert low_energy_fraction(Spectrum([-1.0, -0.5, 0.5, 1.0]), 1.0) == 0.5, "eps = 1 splits a symmetric spectrum"
    with pytest.raises(DomainError):
        low_energy_fraction(Spectrum([0.0]), 0.0)


def test_window_fraction():
    s = Spectrum([-1.0, -0.1, 0.0, 0.2, 1.5])
    assert window_fraction(s, -0.1, 0.2) == pytest.approx(0.6), "closed window"


def _pooled_low_energy_fraction(n: int, m: int, instances: int) -> float:
    pooled = np.concatenate([eigenvalues(sample_pauli_string_ensemble(n, m, derive_seed(31, 0, t))).eigenvalues
                             for t in range(instances)])
    return low_energy_fraction(Spectrum(pooled), 0.2)


def test_pooled_low_energy_fraction_near_semicircle():
    fraction = _pooled_low_energy_fraction(8, 1000, 20)
    assert 0.026 <= fraction <= 0.104, f"pooled fraction {fraction} outside factor 2 of 0.05203"


@pytest.mark.slow
def test_pooled_low_energy_fraction_at_full_size():
    fraction = _pooled_low_energy_fraction(10, 5000, 50)
    assert 0.026 <= fraction <= 0.104, f"pooled fraction {fraction} outside factor 2 of 0.05203"
