"""
Low-Energy Algorithms

This module provides simulations of the low-energy state procedures: phase
estimation on the maximally mixed state with repeat-until-success, the
resolvent proxy for the density of low-energy states, the Chebyshev witness
state, the circuit-size lower-bound calculators and a product-state baseline.

Lower-bound constants are set to 1 and use natural logarithms; the outputs
are labeled "normalized" units.
"""

import logging
import math
from typing import List, NamedTuple, Optional, Tuple, Union

import numpy as np
from numpy.polynomial import Chebyshev

from .ensembles import DenseHermitian, SparsePauliSum, sample_pauli_string_ensemble
from .errors import DomainError, NumericError
from .models import (
    BaselineResult,
    DOSProxyQuery,
    LowerBoundResult,
    QPEExperimentResult,
    QPEKernel,
    QPEModel,
    RepeatResult,
    ResolventQuery,
    WitnessConfig,
    WitnessResult,
    WitnessSpec,
)
from .montecarlo import (
    STREAM_PAULI,
    STREAM_QPE,
    STREAM_RESTART,
    MeanEstimate,
    binomial_interval,
    derive_seed,
    estimate_mean,
    generator,
    map_trials,
)
from .spectral import (
    Spectrum,
    eigensystem,
    eigenvalues,
    resolvent_weights,
    semicircle_resolvent_moment,
    spectral_norm_estimate,
)

logger = logging.getLogger(__name__)

# Cauchy-proposal envelope constant for the sinc^2 kernel: sinc^2(x) <= 2*pi*cauchy(x).
_SINC2_ENVELOPE = 2.0 * math.pi


# --- Phase estimation ---

class QPEOutcome(NamedTuple):
    index: int
    estimate: float


def _sinc2_deviate(rng: np.random.Generator) -> float:
    """Draw from the density sinc^2(x) = (sin(pi x)/(pi x))^2 by rejection."""
    while True:
        x = rng.standard_cauchy()
        proposal = 1.0 / (math.pi * (1.0 + x * x))
        if rng.random() * _SINC2_ENVELOPE * proposal <= np.sinc(x) ** 2:
            return float(x)


def qpe_sample(s: Spectrum, model: QPEModel, rng: Optional[np.random.Generator] = None) -> QPEOutcome:
    """
    One phase-estimation shot on the maximally mixed state.

    The eigenstate index is uniform over 0..N-1 and the estimate is the eigenvalue
    plus resolution times a kernel deviate (Gaussian or sinc^2).

    Args:
        s: Spectrum of the instance
        model: Resolution, kernel and seed
        rng: Generator to draw from (defaults to the model's seed stream)

    Returns:
        QPEOutcome(index, estimate)
    """
    rng = generator(model.seed, STREAM_QPE) if rng is None else rng
    index = int(rng.integers(0, s.N))
    if model.kernel == QPEKernel.SINC2:
        deviate = _sinc2_deviate(rng)
    else:
        deviate = float(rng.standard_normal())
    return QPEOutcome(index, float(s.eigenvalues[index]) + model.resolution * deviate)


def is_degenerate(s: Spectrum) -> bool:
    """A ratio target (1 - eps) lambda_min is ill-posed when lambda_min >= 0."""
    return s.lambda_min >= 0


def _success_threshold(s: Spectrum, epsilon: float) -> float:
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    if is_degenerate(s):
        return s.lambda_min
    return (1.0 - epsilon) * s.lambda_min


def low_energy_success_probability(s: Spectrum, epsilon: float) -> float:
    """
    Fraction of eigenvalues at or below (1 - epsilon) lambda_min.

    For lambda_min >= 0 the instance is flagged degenerate (logged) and the
    fraction at lambda_min is returned.
    """
    threshold = _success_threshold(s, epsilon)
    if is_degenerate(s):
        logger.warning(f"Degenerate instance {s.source}: lambda_min={s.lambda_min:.6f} >= 0")
    return np.count_nonzero(s.eigenvalues <= threshold) / s.N


def amplification_repeats(epsilon: float, m: int) -> int:
    """Repeat budget ceil(eps^(-3/2) ln(sqrt(m)/eps))."""
    if not 0 < epsilon < 1 or m < 1:
        raise DomainError(f"Need 0 < epsilon < 1 and m >= 1, got epsilon={epsilon}, m={m}")
    return max(1, int(math.ceil(epsilon ** -1.5 * math.log(math.sqrt(m) / epsilon))))


def repeat_until_success(s: Spectrum, epsilon: float, model: QPEModel,
                         rng: Optional[np.random.Generator] = None) -> RepeatResult:
    """
    Repeat phase estimation until the estimate falls below the target.

    The target is (1 - epsilon) lambda_min plus the model's resolution allowance.
    When the repeat budget runs out the maximally mixed state is kept, whose
    energy is the mean eigenvalue.
    """
    rng = generator(model.seed, STREAM_QPE) if rng is None else rng
    threshold = _success_threshold(s, epsilon) + model.allowance
    for attempt in range(1, model.repeats + 1):
        outcome = qpe_sample(s, model, rng)
        if outcome.estimate <= threshold:
            return RepeatResult(success=True, trials_used=attempt, energy=float(s.eigenvalues[outcome.index]),
                                index=outcome.index, degenerate=is_degenerate(s))
    return RepeatResult(success=False, trials_used=model.repeats, energy=s.mean, degenerate=is_degenerate(s))


def qpe_success_experiment(s: Spectrum, epsilon: float, model: QPEModel, shots: int,
                           instance_hash: str = "", threads: int = 1) -> QPEExperimentResult:
    """
    Run repeat_until_success for many independent shots and compare the success
    rate with the prediction 1 - (1 - q)^repeats, q the eigenvalue fraction.
    """
    def run_shot(shot: int) -> bool:
        return repeat_until_success(s, epsilon, model, generator(model.seed, STREAM_QPE, shot)).success

    successes = sum(map_trials(run_shot, shots, threads))
    q = low_energy_success_probability(s, epsilon)
    predicted = 1.0 - (1.0 - q) ** model.repeats
    low, high = binomial_interval(successes, shots)
    logger.info(f"QPE eps={epsilon}: {successes}/{shots} successes, predicted rate {predicted:.4f}")
    return QPEExperimentResult(instance_hash=instance_hash, epsilon=epsilon, shots=shots, successes=successes,
                               success_rate=successes / shots, ci95_low=low, ci95_high=high,
                               predicted=predicted, degenerate=is_degenerate(s))


# --- Density-of-states proxy ---

def dos_proxy_profile(s: Spectrum, q: DOSProxyQuery) -> List[Tuple[float, float]]:
    """(center, eta^p Tr̄|R_{center,eta}|^p) for each grid center anchored at -2."""
    return [(center, float(np.mean(resolvent_weights(s.eigenvalues, center, q.eta, q.p))) * q.eta ** q.p)
            for center in q.grid()]


def dos_proxy(s: Spectrum, q: DOSProxyQuery) -> float:
    """Sum over grid centers in [-2, e0] of eta^p Tr̄|R_{center,eta}|^p."""
    return math.fsum(value for _, value in dos_proxy_profile(s, q))


def semicircle_dos_proxy(q: DOSProxyQuery) -> float:
    """The same grid sum with Tr̄|R|^p replaced by the semicircle integral."""
    return math.fsum(q.eta ** q.p * semicircle_resolvent_moment(ResolventQuery(omega=center, eta=q.eta, p=q.p))
                     for center in q.grid())


# --- Chebyshev witness ---

def gibbs_energy(s: Spectrum, beta: float) -> float:
    """Exact Gibbs energy sum(lambda e^(-beta lambda)) / sum(e^(-beta lambda))."""
    weights = np.exp(-beta * (s.eigenvalues - s.lambda_min))
    return float(np.dot(weights, s.eigenvalues) / weights.sum())


def _witness_polynomial(beta: float, radius: float, degree: int) -> Chebyshev:
    # shifted by the value at -radius so the interpolant stays O(1)
    return Chebyshev.interpolate(lambda x: np.exp(-beta * (x + radius) / 2.0), deg=degree,
                                 domain=[-radius, radius])


def chebyshev_witness(h: Union[DenseHermitian, SparsePauliSum], epsilon: float,
                      config: Optional[WitnessConfig] = None) -> WitnessResult:
    """
    Build rho proportional to p_d(H)^2, with p_d a degree-d Chebyshev interpolant of
    exp(-beta x/2) on [-a, a], and report its energy ratio against lambda_min.

    beta doubles from config.beta0 until the witness reaches ratio >= 1 - epsilon
    or beta exceeds config.beta_max; a failure is returned as a record with
    success=False and logged.

    Args:
        h: Instance (dense spectral calculus is used for the energy)
        epsilon: Target accuracy in (0, 1)
        config: Degree constant, margin and beta schedule

    Returns:
        WitnessResult with the witness spec, achieved energy and state checks

    Raises:
        DomainError: If epsilon is out of range or lambda_min >= 0
        NumericError: If the constructed state fails the PSD / unit-trace check
    """
    config = config or WitnessConfig()
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")
    spectrum, vectors = eigensystem(h)
    lam = spectrum.eigenvalues
    lambda_min = spectrum.lambda_min
    if lambda_min >= 0:
        raise DomainError(f"Witness ratio is ill-posed for lambda_min={lambda_min:.6f} >= 0")

    if isinstance(h, SparsePauliSum):
        norm = spectral_norm_estimate(h).value
    else:
        norm = float(np.max(np.abs(lam)))
    radius = norm * (1.0 + config.margin)
    degree = config.degree_for(epsilon)

    beta = config.beta0
    escalations = 0
    best = None
    history = []
    while True:
        polynomial = _witness_polynomial(beta, radius, degree)
        weights = polynomial(lam) ** 2
        energy = float(np.dot(weights, lam) / weights.sum())
        ratio = energy / lambda_min
        gibbs_ratio = gibbs_energy(spectrum, beta) / lambda_min
        history.append({"beta": beta, "ratio": ratio, "gibbs_ratio": gibbs_ratio})
        if best is None or ratio > best[0]:
            best = (ratio, beta, polynomial, weights, escalations)
        logger.info(f"witness beta={beta}: ratio={ratio:.4f} gibbs_ratio={gibbs_ratio:.4f}")
        if ratio >= 1.0 - epsilon:
            if gibbs_ratio < 1.0 - epsilon / 2.0:
                logger.info(f"witness reached {1 - epsilon:.3f} at beta={beta} before the Gibbs ratio "
                            f"cleared {1 - epsilon / 2:.3f}")
            break
        if beta * 2.0 > config.beta_max:
            break
        beta *= 2.0
        escalations += 1

    _, beta, polynomial, weights, steps = best
    matrix = h.to_dense()
    rho = (vectors * (weights / weights.sum())) @ vectors.conj().T
    trace_error = abs(float(np.trace(rho).real) - 1.0)
    min_state_eigenvalue = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2.0).min())
    if trace_error > config.state_tolerance or min_state_eigenvalue < -config.state_tolerance:
        raise NumericError("Witness state failed the PSD / unit-trace check",
                           diagnostics={"trace_error": trace_error, "min_eigenvalue": min_state_eigenvalue})
    energy = float(np.sum(rho * matrix.T).real)
    ratio = energy / lambda_min
    gibbs = gibbs_energy(spectrum, beta)
    success = ratio >= 1.0 - epsilon
    if not success:
        logger.warning(f"Chebyshev witness missed ratio {1 - epsilon:.3f}: best {ratio:.4f} at beta={beta}")

    cost = None
    if isinstance(h, SparsePauliSum):
        cost = 2 * degree * math.log10(degree * h.m) + math.log10(h.n * degree)
    spec = WitnessSpec(epsilon=epsilon, degree=degree, beta=beta, domain_radius=radius,
                       coefficients=[float(c) for c in polynomial.coef])
    return WitnessResult(spec=spec, energy=energy, lambda_min=lambda_min, ratio=ratio,
                         gibbs_energy=gibbs, gibbs_ratio=gibbs / lambda_min, success=success,
                         trace_error=trace_error, min_state_eigenvalue=min_state_eigenvalue,
                         escalations=steps, verification_cost_log10=cost, history=history)


# --- Circuit lower bound ---

def circuit_lower_bound(epsilon: float, m: int, n: int) -> LowerBoundResult:
    """
    Gate-count threshold G = eps sqrt(m)/ln(m) and failure bound exp(-eps sqrt(m)).

    The result is flagged invalid when m > eps^2 4^n. The general form replaces
    sqrt(m) by min(sqrt(m), eps 2^n).
    """
    if epsilon < 0:
        raise DomainError(f"epsilon must be non-negative, got {epsilon}")
    if m < 2:
        raise DomainError(f"m must be at least 2, got {m}")
    root_m = math.sqrt(m)
    log_m = math.log(m)
    valid = epsilon > 0 and log_m <= 2.0 * math.log(epsilon) + 2.0 * n * math.log(2.0)
    if epsilon > 0 and math.log(epsilon) + n * math.log(2.0) < 0.5 * log_m:
        scale = epsilon * 2.0 ** n
    else:
        scale = root_m
    if not valid:
        logger.info(f"Lower bound precondition m <= eps^2 4^n fails for eps={epsilon}, m={m}, n={n}")
    return LowerBoundResult(
        epsilon=epsilon, m=m, n=n,
        g_threshold=epsilon * root_m / log_m,
        failure_probability_bound=math.exp(-epsilon * root_m),
        valid=valid,
        general_g_threshold=epsilon * scale / log_m,
        general_failure_probability_bound=math.exp(-epsilon * scale),
    )


def bernstein_tail(t: float, N: int, m: int) -> float:
    """Tail exp(-(t^2/2)/(1/N + t/(3 sqrt(m)))) for one fixed state's energy."""
    return math.exp(-(t * t / 2.0) / (1.0 / N + t / (3.0 * math.sqrt(m))))


def mean_ground_energy_check(n: int, m: int, trials: int, seed: int, threads: int = 1) -> MeanEstimate:
    """Monte Carlo E lambda_min(H_PS); the ensemble guarantees at most -1/2."""
    def run_trial(trial: int) -> float:
        return eigenvalues(sample_pauli_string_ensemble(n, m, derive_seed(seed, STREAM_PAULI, trial))).lambda_min

    estimate = estimate_mean(map_trials(run_trial, trials, threads))
    logger.info(f"E lambda_min(n={n}, m={m}) = {estimate.mean:.4f} +- {estimate.standard_error:.4f}")
    return estimate


# --- Product-state baseline ---

def _term_expectations(bloch: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Per-term, per-site single-qubit expectations for letter codes 0=I, 1=X, 2=Y, 3=Z."""
    table = np.concatenate([np.ones((bloch.shape[0], 1)), bloch], axis=1)
    return table[np.arange(bloch.shape[0])[None, :], codes]


def _product_energy(weights: np.ndarray, expectations: np.ndarray) -> float:
    return float(np.dot(weights, np.prod(expectations, axis=1)))


def _descend(weights: np.ndarray, codes: np.ndarray, bloch: np.ndarray, max_sweeps: int,
             tolerance: float) -> Tuple[float, np.ndarray, bool, int]:
    n = bloch.shape[0]
    expectations = _term_expectations(bloch, codes)
    energy = _product_energy(weights, expectations)
    for sweep in range(1, max_sweeps + 1):
        previous = energy
        for site in range(n):
            others = np.prod(np.delete(expectations, site, axis=1), axis=1)
            field = np.bincount(codes[:, site], weights=weights * others, minlength=4)[1:]
            strength = float(np.linalg.norm(field))
            if strength > 0:
                bloch[site] = -field / strength
                expectations[:, site] = np.concatenate([[1.0], bloch[site]])[codes[:, site]]
        energy = _product_energy(weights, expectations)
        if previous - energy <= tolerance * max(1.0, abs(energy)):
            return energy, bloch, True, sweep
    return energy, bloch, False, max_sweeps


def product_state_baseline(h: SparsePauliSum, restarts: int = 8, seed: int = 0, max_sweeps: int = 200,
                           tolerance: float = 1e-12) -> BaselineResult:
    """
    Lowest product-state energy found by site-wise exact updates.

    Each site is set to the ground state of its effective 2x2 field given the
    other sites' Bloch vectors; sweeps repeat until the energy stops decreasing.
    The best of several random restarts is returned.

    Args:
        h: Pauli-sum instance with Hermitian terms
        restarts: Number of random initial product states
        seed: Seed of the restart stream
        max_sweeps: Sweep cap per restart
        tolerance: Relative energy decrease that counts as converged

    Returns:
        BaselineResult; converged is False if the best restart hit the sweep cap
    """
    if restarts < 1:
        raise DomainError(f"restarts must be at least 1, got {restarts}")
    weights = h.hermitian_weights
    codes = np.stack([s.letter_codes() for s in h.strings]).astype(np.intp)

    best = None
    for restart in range(restarts):
        rng = generator(seed, STREAM_RESTART, restart)
        start = rng.standard_normal((h.n, 3))
        start /= np.linalg.norm(start, axis=1, keepdims=True)
        result = _descend(weights, codes, start, max_sweeps, tolerance)
        if best is None or result[0] < best[0]:
            best = result
    energy, bloch, converged, sweeps = best
    if not converged:
        logger.warning(f"Product-state descent hit the sweep cap ({max_sweeps}) at energy {energy:.6f}")
    return BaselineResult(energy=energy, bloch_vectors=bloch.tolist(), converged=converged,
                          sweeps=sweeps, restarts=restarts)
