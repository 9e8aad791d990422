"""
Universality Experiments

This module provides the experiment drivers that measure how closely sparse
Pauli-sum Hamiltonians reproduce GUE spectral statistics (p-norms, resolvent
moments, norm tails, Lindeberg swaps, concentration, moment matching), and the
calculators for the corresponding bound formulas.

Constants policy: every bound formula is evaluated with its suppressed absolute
constants set to 1. The values are reported as envelopes next to the
measurements and are never asserted as hard inequalities.
"""

import itertools
import logging
import math
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import pauli_algebra
from .ensembles import (
    SparsePauliSum,
    draw_pauli_terms,
    draw_signed_permutation,
    pauli_sum_from_draws,
    sample_gue,
    sample_pauli_string_ensemble,
    signed_permutation_matrix,
)
from .errors import DomainError, ResourceError
from .models import (
    ClosenessRecord,
    ComparisonRecord,
    EnsembleSpec,
    EnsembleVariant,
    ResolventQuery,
    TailRecord,
    TelescopeStep,
    UniversalityBoundInputs,
    VariabilityRecord,
)
from .montecarlo import (
    STREAM_GUE,
    STREAM_PAULI,
    STREAM_PERMUTATION,
    binomial_interval,
    derive_seed,
    estimate_mean,
    generator,
    map_trials,
    root_estimate,
    sample_std,
)
from .spectral import (
    eigenvalues,
    resolvent_trace_moment,
    schatten_p_norm,
    semicircle_resolvent_moment,
)

logger = logging.getLogger(__name__)

EXHAUSTIVE_MAX_DIM = 4


# --- Bound formulas ---

def pauli_moment_envelope(n: int, m: int, p: float) -> float:
    """(p^(3/4)/m^(1/4) + p/sqrt(m)) (1 + p^(3/4)/2^(n/2))."""
    return (p ** 0.75 / m ** 0.25 + p / math.sqrt(m)) * (1.0 + p ** 0.75 / 2.0 ** (n / 2.0))


def pauli_resolvent_envelope(n: int, m: int, p: float, eta: float) -> float:
    """(p^4/(eta^5 m^2) + p^3/(eta^5 m)) (1 + p^3/2^(2n))."""
    return (p ** 4 / (eta ** 5 * m * m) + p ** 3 / (eta ** 5 * m)) * (1.0 + p ** 3 / 2.0 ** (2 * n))


def concentration_terms(b: UniversalityBoundInputs) -> Tuple[float, float, float]:
    """
    The three resolvent-concentration terms, each to be multiplied by |||R|||_p:
    fourth-moment term, weak-variance term and tail term.
    """
    root_q = math.sqrt(b.q)
    fourth = root_q * b.p ** 2 / b.eta ** 2 * math.sqrt(b.sum_norm4)
    weak = root_q * b.p / b.eta ** 2 * math.sqrt(b.m * b.sigma_star_sq)
    tail = b.q * b.p / b.eta * b.sum_norm_q_root
    return fourth, weak, tail


def _require(value, name: str, which: str):
    if value is None:
        raise DomainError(f"Bound {which!r} needs {name}")
    return value


def _power(b: UniversalityBoundInputs) -> float:
    return b.t / (b.t + 1.0)


BOUND_FORMULAS: Dict[str, Callable[[UniversalityBoundInputs], float]] = {
    "moment_universality": lambda b: 2 * b.p ** _power(b) * b.l_p_t1 + 2 * b.p * b.l_p_p,
    "moment_universality_variance": lambda b: (
        2 * b.p ** _power(b) * (b.sigma_sq * b.l_inf_inf ** (b.t - 1)) ** (1.0 / (b.t + 1))
        + 2 * b.p * b.l_p_p),
    "moment_universality_simplified": lambda b: (1 + b.m / b.p) ** (1.0 / (b.t + 1)) * b.p * b.l_p_inf,
    "resolvent_universality": lambda b: (1 + b.m / b.p) / b.eta * (b.p * b.l_3p_inf / b.eta) ** (b.t + 1),
    "gaussian_moments": lambda b: (b.p ** 2 * b.v * b.l_inf) ** (1.0 / 3.0) + b.p * b.l_inf,
    "gaussian_resolvent": lambda b: (b.p ** 2 * b.v * b.l_inf + b.p ** 3 * b.l_inf ** 3) / b.eta ** 4,
    "expected_resolvent": lambda b: (1 + b.m / (b.p * b.q)) / b.eta * (b.p * b.q * b.l_3pq_inf / b.eta) ** (b.t + 1),
    "pauli_moments": lambda b: pauli_moment_envelope(_require(b.n, "n", "pauli_moments"), b.m, b.p),
    "pauli_resolvent": lambda b: pauli_resolvent_envelope(_require(b.n, "n", "pauli_resolvent"), b.m, b.p, b.eta),
    "gue_moments": lambda b: 2.0 * (1.0 + (b.p / 2.0) ** 0.75 / math.sqrt(_require(b.N, "N", "gue_moments"))),
    "resolvent_concentration": lambda b: math.fsum(concentration_terms(b)),
    "gaussian_resolvent_concentration": lambda b: (
        math.sqrt(b.q) * b.p / b.eta ** (b.p + 1) / math.sqrt(_require(b.N, "N", "gaussian_resolvent_concentration"))),
}


def evaluate_bounds(inputs: UniversalityBoundInputs, which: str) -> float:
    """
    Evaluate one bound formula with unit constants.

    Args:
        inputs: Summand statistics
        which: Key of BOUND_FORMULAS

    Returns:
        The formula value (normalized units)

    Raises:
        DomainError: For an unknown key or missing dimension parameters
    """
    if which not in BOUND_FORMULAS:
        raise DomainError(f"Unknown bound {which!r}; choose from {sorted(BOUND_FORMULAS)}")
    return float(BOUND_FORMULAS[which](inputs))


def pauli_bound_inputs(n: int, m: int, p: int, t: int = 3, eta: float = 1.0, q: int = 2) -> UniversalityBoundInputs:
    """Summand statistics of the Pauli string ensemble, where every ||A_j|| = 1/sqrt(m)."""
    N = 1 << n
    unit = 1.0 / math.sqrt(m)
    return UniversalityBoundInputs(
        p=p, t=t, m=m, eta=eta, n=n, N=N, q=q,
        l_p_t1=m ** (1.0 / (t + 1)) * unit,
        l_p_p=m ** (1.0 / p) * unit,
        l_p_inf=unit, l_3p_inf=unit, l_3pq_inf=unit, l_inf=unit, l_inf_inf=unit,
        sigma_sq=1.0, v=1.0,
        sigma_star_sq=1.0 / (m * N),
        sum_norm4=1.0 / m,
        sum_norm_q_root=m ** (1.0 / q) * unit,
    )


def summand_statistics(instance: SparsePauliSum, p: int, t: int = 3, eta: float = 1.0, q: int = 2) -> UniversalityBoundInputs:
    """
    Summand statistics measured on one Pauli-sum instance.

    Each summand A_j = c_j sigma_j has |||A_j|||_p = ||A_j|| = |c_j| and
    E A_j^2 = c_j^2 I, so every aggregate follows from the coefficients.
    """
    norms = np.abs(instance.coefficients)
    N = instance.dim

    def aggregate(k: float) -> float:
        return float(np.sum(norms ** k) ** (1.0 / k))

    largest = float(norms.max())
    squares = float(np.sum(norms ** 2))
    return UniversalityBoundInputs(
        p=p, t=t, m=instance.m, eta=eta, n=instance.n, N=N, q=q,
        l_p_t1=aggregate(t + 1), l_p_p=aggregate(p),
        l_p_inf=largest, l_3p_inf=largest, l_3pq_inf=largest, l_inf=largest, l_inf_inf=largest,
        sigma_sq=squares, v=squares,
        sigma_star_sq=largest ** 2 / N,
        sum_norm4=float(np.sum(norms ** 4)),
        sum_norm_q_root=aggregate(q),
    )


# --- Moment and resolvent comparisons ---

def _check_even(p: int) -> None:
    if p < 2 or p % 2:
        raise DomainError(f"p must be an even integer >= 2, got {p}")


def _pauli_draws(n: int, m: int, seed: int, trial: int) -> np.ndarray:
    return draw_pauli_terms(n, m, generator(seed, STREAM_PAULI, trial))


def _warn(estimate_se: float, trials: int, target: Optional[float]) -> bool:
    return trials < 2 or (target is not None and estimate_se > target)


def moment_comparison_experiment(n: int, p: int, m_grid: Sequence[int], trials: int, seed: int,
                                 threads: int = 1, target_standard_error: Optional[float] = None) -> List[ComparisonRecord]:
    """
    Compare |||H_PS|||_p with |||H_GUE|||_p over an m-grid.

    Trial t draws max(m_grid) Pauli terms once and uses prefixes for smaller m,
    and one GUE matrix shared by every grid point (common random numbers).

    Args:
        n: Number of sites (dense-reachable)
        p: Even moment order
        m_grid: Term counts
        trials: Monte Carlo trials per grid point
        seed: Master seed
        threads: Worker count
        target_standard_error: Flag records whose standard error exceeds this

    Returns:
        One ComparisonRecord per m, ascending in m
    """
    _check_even(p)
    grid = sorted(set(int(m) for m in m_grid))
    N = 1 << n
    started = time.perf_counter()

    def run_trial(trial: int):
        draws = _pauli_draws(n, grid[-1], seed, trial)
        pauli_moments = [eigenvalues(pauli_sum_from_draws(n, draws, m)).moment(p) for m in grid]
        gue_moment = eigenvalues(sample_gue(N, derive_seed(seed, STREAM_GUE, trial))).moment(p)
        return pauli_moments, gue_moment

    results = map_trials(run_trial, trials, threads)
    gue = root_estimate(estimate_mean(r[1] for r in results), p)
    records = []
    for index, m in enumerate(grid):
        pauli = root_estimate(estimate_mean(r[0][index] for r in results), p)
        se = math.hypot(pauli.standard_error, gue.standard_error)
        records.append(ComparisonRecord(
            experiment="moments", n=n, N=N, m=m, p=p,
            measured_ps=pauli.mean, measured_reference=gue.mean,
            measured_lhs=abs(pauli.mean - gue.mean), standard_error=se,
            rhs_bound=pauli_moment_envelope(n, m, p), trials=trials,
            warning=_warn(se, trials, target_standard_error),
        ))
        logger.info(f"moments n={n} p={p} m={m}: PS={pauli.mean:.6f} GUE={gue.mean:.6f} +- {se:.2e}")
    logger.info(f"Moment comparison finished in {time.perf_counter() - started:.1f}s")
    return records


def norm_tail_experiment(n: int, epsilon: float, trials: int, seed: int, m: Optional[int] = None,
                         threads: int = 1) -> TailRecord:
    """
    Frequency of ||H_PS|| >= 2(1 + epsilon) with exact dense norms.

    m defaults to ceil(n^3/epsilon^4) (unit constant).
    """
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if epsilon > 0.5:
        logger.warning(f"epsilon={epsilon} lies outside (0, 1/2]; the tail estimate is still computed")
    m = int(math.ceil(n ** 3 / epsilon ** 4)) if m is None else int(m)
    threshold = 2.0 * (1.0 + epsilon)

    def run_trial(trial: int) -> float:
        instance = sample_pauli_string_ensemble(n, m, derive_seed(seed, STREAM_PAULI, trial))
        return schatten_p_norm(eigenvalues(instance), math.inf)

    norms = map_trials(run_trial, trials, threads)
    exceed = sum(1 for value in norms if value >= threshold)
    low, high = binomial_interval(exceed, trials)
    logger.info(f"norm tail n={n} m={m} eps={epsilon}: {exceed}/{trials} above {threshold}")
    return TailRecord(n=n, m=m, epsilon=epsilon, threshold=threshold, trials=trials,
                      exceed_count=exceed, frequency=exceed / trials, ci95_low=low, ci95_high=high,
                      mean_norm=estimate_mean(norms).mean, max_norm=max(norms))


def resolvent_comparison_experiment(n: int, p: int, eta: float, omega_grid: Sequence[float], m_grid: Sequence[int],
                                    trials: int, seed: int, threads: int = 1,
                                    target_standard_error: Optional[float] = None) -> List[ComparisonRecord]:
    """
    Compare |||R_PS|||_p with |||R_GUE|||_p over (omega, m), with the semicircle
    reference S^(1/p) in every record.

    Records are ordered by omega, then m. Spectra are computed once per trial and m
    and reused across omega.
    """
    _check_even(p)
    if eta <= 0:
        raise DomainError(f"eta must be positive, got {eta}")
    grid = sorted(set(int(m) for m in m_grid))
    omegas = sorted(set(float(w) for w in omega_grid))
    N = 1 << n

    def run_trial(trial: int):
        draws = _pauli_draws(n, grid[-1], seed, trial)
        spectra = [eigenvalues(pauli_sum_from_draws(n, draws, m)) for m in grid]
        gue = eigenvalues(sample_gue(N, derive_seed(seed, STREAM_GUE, trial)))
        pauli_values = [[resolvent_trace_moment(s, ResolventQuery(omega=w, eta=eta, p=p)) for s in spectra]
                        for w in omegas]
        gue_values = [resolvent_trace_moment(gue, ResolventQuery(omega=w, eta=eta, p=p)) for w in omegas]
        return pauli_values, gue_values

    results = map_trials(run_trial, trials, threads)
    records = []
    for w_index, omega in enumerate(omegas):
        reference = semicircle_resolvent_moment(ResolventQuery(omega=omega, eta=eta, p=p)) ** (1.0 / p)
        gue = root_estimate(estimate_mean(r[1][w_index] for r in results), p)
        for m_index, m in enumerate(grid):
            pauli = root_estimate(estimate_mean(r[0][w_index][m_index] for r in results), p)
            se = math.hypot(pauli.standard_error, gue.standard_error)
            records.append(ComparisonRecord(
                experiment="resolvent", n=n, N=N, m=m, p=p, eta=eta, omega=omega,
                measured_ps=pauli.mean, measured_reference=gue.mean,
                measured_lhs=abs(pauli.mean - gue.mean), standard_error=se,
                rhs_bound=pauli_resolvent_envelope(n, m, p, eta), semicircle_reference=reference,
                trials=trials, warning=_warn(se, trials, target_standard_error),
            ))
            logger.info(f"resolvent n={n} p={p} eta={eta} omega={omega} m={m}: "
                        f"PS={pauli.mean:.6f} GUE={gue.mean:.6f} S={reference:.6f}")
    return records


# --- Moment matching ---

def _swap_tensor(N: int) -> np.ndarray:
    eye = np.eye(N)
    return np.einsum("il,jk->ijkl", eye, eye) / N


def _tensor_power(a: np.ndarray, k: int) -> np.ndarray:
    if k == 1:
        return a
    if k == 2:
        return np.einsum("ij,kl->ijkl", a, a)
    return np.einsum("ij,kl,mn->ijklmn", a, a, a)


def _hermitized_permutation(perm, diagonal) -> np.ndarray:
    q = signed_permutation_matrix(perm, diagonal).toarray()
    return (q + q.conj().T) / math.sqrt(2.0)


def _exhaustive_summands(spec: EnsembleSpec):
    variant = spec.variant
    if variant == EnsembleVariant.PAULI:
        if spec.dim > EXHAUSTIVE_MAX_DIM:
            raise ResourceError(f"Exhaustive moment check supports N <= {EXHAUSTIVE_MAX_DIM}, got N={spec.dim}")
        for string in pauli_algebra.all_paulis(spec.n):
            dense = pauli_algebra.to_dense(string)
            yield dense
            yield -dense
        return
    N = spec.N
    if N > EXHAUSTIVE_MAX_DIM:
        raise ResourceError(f"Exhaustive moment check supports N <= {EXHAUSTIVE_MAX_DIM}, got N={N}")
    complex_signs = variant == EnsembleVariant.COMPLEX_SIGNED_PERM_SUM
    sign_bits = 2 * N if complex_signs else N
    for perm in itertools.permutations(range(N)):
        for pattern in range(1 << sign_bits):
            bits = [(pattern >> b) & 1 for b in range(sign_bits)]
            r = np.array([1.0 - 2.0 * b for b in bits[:N]])
            if complex_signs:
                r_prime = np.array([1.0 - 2.0 * b for b in bits[N:]])
                diagonal = (r + 1j * r_prime) / math.sqrt(2.0)
            else:
                diagonal = r.astype(np.complex128)
            yield _hermitized_permutation(perm, diagonal)


def _random_summand(spec: EnsembleSpec, seed: int, trial: int) -> np.ndarray:
    if spec.variant == EnsembleVariant.PAULI:
        rng = generator(seed, STREAM_PAULI, trial)
        string = pauli_algebra.random_pauli(spec.n, rng)
        sign = 1.0 - 2.0 * rng.integers(0, 2)
        return sign * pauli_algebra.to_dense(string)
    variant = "complex" if spec.variant == EnsembleVariant.COMPLEX_SIGNED_PERM_SUM else "real"
    rng = generator(seed, STREAM_PERMUTATION, trial)
    return _hermitized_permutation(*draw_signed_permutation(spec.N, rng, variant))


def moment_matching_check(spec: EnsembleSpec, k: int, mode: str = "exhaustive", trials: int = 10000,
                          reference: str = "gue") -> float:
    """
    Max-entry deviation of E A^(x)k from the GUE summand moment.

    The summand A is (Q + Q^dagger)/sqrt(2) for signed-permutation variants and
    r*sigma for the Pauli variant. The reference moments are 0 for k = 1 and 3
    and swap/N for k = 2.

    Args:
        spec: Ensemble whose summand is checked (variant, N or n, seed for Monte Carlo)
        k: Tensor order 1..3
        mode: "exhaustive" (all instances, N <= 4) or "monte_carlo"
        trials: Monte Carlo draws
        reference: Only "gue"

    Raises:
        ResourceError: Exhaustive mode beyond N = 4
    """
    if reference != "gue":
        raise DomainError(f"Unknown reference summand {reference!r}")
    if k not in (1, 2, 3):
        raise DomainError(f"k must be 1, 2 or 3, got {k}")
    if spec.variant not in (EnsembleVariant.PAULI, EnsembleVariant.COMPLEX_SIGNED_PERM_SUM,
                            EnsembleVariant.REAL_SIGNED_PERM_SUM):
        raise DomainError(f"No summand defined for variant {spec.variant.value}")
    N = spec.dim

    if mode == "exhaustive":
        summands = _exhaustive_summands(spec)
    elif mode == "monte_carlo":
        seed = spec.seed if spec.seed is not None else 0
        summands = (_random_summand(spec, seed, trial) for trial in range(trials))
    else:
        raise DomainError(f"Unknown mode {mode!r}")

    total = np.zeros((N,) * (2 * k), dtype=np.complex128)
    count = 0
    for summand in summands:
        total += _tensor_power(summand, k)
        count += 1
    moment = total / count
    target = _swap_tensor(N) if k == 2 else np.zeros_like(moment)
    deviation = float(np.max(np.abs(moment - target)))
    logger.info(f"moment matching {spec.variant.value} N={N} k={k} {mode}: {count} instances, deviation={deviation:.3e}")
    return deviation


# --- Lindeberg exchange ---

def lindeberg_telescope_experiment(n: int, m: int, p: int, trials: int, seed: int, threads: int = 1) -> List[TelescopeStep]:
    """
    Swap Pauli summands for GUE/sqrt(m) summands one at a time.

    S_j holds GUE-like summands 1..j and Pauli terms j+1..m; the table reports
    E Tr̄ S_j^p for j = 0..m and the increments between consecutive j. The same
    sample paths are used for every j, so the increments telescope to the
    endpoint difference.
    """
    _check_even(p)
    N = 1 << n

    def run_trial(trial: int) -> List[float]:
        instance = pauli_sum_from_draws(n, _pauli_draws(n, m, seed, trial), m)
        pauli_terms = [c * pauli_algebra.to_dense(s) for c, s in instance.terms]
        total = np.zeros((N, N), dtype=np.complex128)
        for term in pauli_terms:
            total += term
        values = [eigenvalues(total).moment(p)]
        for j in range(m):
            gaussian = sample_gue(N, derive_seed(seed, STREAM_GUE, trial, j)).matrix / math.sqrt(m)
            total = total + gaussian - pauli_terms[j]
            values.append(eigenvalues(total).moment(p))
        return values

    paths = map_trials(run_trial, trials, threads)
    steps = []
    previous = None
    for j in range(m + 1):
        estimate = estimate_mean(path[j] for path in paths)
        if previous is None:
            increment, increment_se = 0.0, 0.0
        else:
            increment = estimate.mean - previous.mean
            increment_se = estimate_mean(path[j] - path[j - 1] for path in paths).standard_error
        steps.append(TelescopeStep(j=j, estimate=estimate.mean, standard_error=estimate.standard_error,
                                   increment=increment, increment_standard_error=increment_se))
        previous = estimate
    logger.info(f"telescope n={n} m={m} p={p}: endpoints {steps[0].estimate:.6f} -> {steps[-1].estimate:.6f}")
    return steps


# --- Concentration ---

def resolvent_concentration_experiment(n: int, m: int, p: int, omega: float, eta: float, trials: int, seed: int,
                                       q: int = 2, threads: int = 1) -> VariabilityRecord:
    """
    Instance-to-instance fluctuation of Tr̄|R_PS|^p, next to the concentration
    bound terms evaluated for the Pauli ensemble.
    """
    _check_even(p)
    N = 1 << n
    query = ResolventQuery(omega=omega, eta=eta, p=p)

    def run_trial(trial: int) -> float:
        instance = sample_pauli_string_ensemble(n, m, derive_seed(seed, STREAM_PAULI, trial))
        return resolvent_trace_moment(eigenvalues(instance), query)

    values = map_trials(run_trial, trials, threads)
    mean = estimate_mean(values).mean
    std = sample_std(values)
    inputs = pauli_bound_inputs(n, m, p, eta=eta, q=q)
    fourth, weak, tail = concentration_terms(inputs)
    logger.info(f"concentration n={n} m={m} p={p}: mean={mean:.6f} std={std:.3e}")
    return VariabilityRecord(n=n, N=N, m=m, p=p, omega=omega, eta=eta, q=q, trials=trials,
                             mean=mean, std=std, relative_fluctuation=std / mean if mean else 0.0,
                             sigma_star_sq=inputs.sigma_star_sq, fourth_moment_term=fourth,
                             weak_variance_term=weak, tail_term=tail, bound_total=fourth + weak + tail)


def gue_resolvent_closeness(N: int, omega: float, eta: float, p: int, trials: int, seed: int,
                            threads: int = 1) -> ClosenessRecord:
    """|E Tr̄|R_GUE|^p - S_{omega,eta,p}| with the eta^(-p)/sqrt(N) envelope."""
    _check_even(p)
    query = ResolventQuery(omega=omega, eta=eta, p=p)

    def run_trial(trial: int) -> float:
        return resolvent_trace_moment(eigenvalues(sample_gue(N, derive_seed(seed, STREAM_GUE, trial))), query)

    estimate = estimate_mean(map_trials(run_trial, trials, threads))
    semicircle = semicircle_resolvent_moment(query)
    return ClosenessRecord(N=N, p=p, omega=omega, eta=eta, trials=trials, measured=estimate.mean,
                           standard_error=estimate.standard_error, semicircle=semicircle,
                           difference=abs(estimate.mean - semicircle),
                           envelope=1.0 / (eta ** p * math.sqrt(N)))
