"""
Spectral Statistics

This module provides exact diagonalization, normalized Schatten p-norms,
resolvent trace moments, the semicircle reference law and a matrix-free
Lanczos estimate of the operator norm.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import integrate, linalg

from .ensembles import Instance, dense_matrix
from .errors import DomainError, NumericError
from .models import ResolventQuery
from .montecarlo import STREAM_LANCZOS, generator

logger = logging.getLogger(__name__)

HERMITIAN_TOLERANCE = 1e-10
SEMICIRCLE_RADIUS = 2.0


@dataclass(frozen=True, eq=False)
class Spectrum:
    """
    Ascending real eigenvalues of an N x N Hermitian matrix.

    Attributes:
        eigenvalues: Sorted eigenvalues (read-only)
        source: Where the spectrum came from
    """

    eigenvalues: np.ndarray
    source: str = "custom"

    def __post_init__(self):
        values = np.sort(np.asarray(self.eigenvalues, dtype=np.float64).ravel())
        if values.size == 0:
            raise DomainError("A spectrum needs at least one eigenvalue")
        if not np.all(np.isfinite(values)):
            raise DomainError("Eigenvalues must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "eigenvalues", values)

    @property
    def N(self) -> int:
        return self.eigenvalues.size

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def mean(self) -> float:
        return math.fsum(self.eigenvalues.tolist()) / self.N

    def moment(self, p: int) -> float:
        """Normalized trace Tr̄ H^p."""
        return float(np.mean(self.eigenvalues ** p))


# --- Exact diagonalization ---

def _hermitian_matrix(h: Union[Instance, np.ndarray]) -> np.ndarray:
    matrix = dense_matrix(h)
    deviation = float(np.max(np.abs(matrix - matrix.conj().T))) if matrix.size else 0.0
    scale = max(1.0, float(np.max(np.abs(matrix))))
    if deviation > HERMITIAN_TOLERANCE * scale:
        raise DomainError(f"Matrix is not Hermitian: max |H - H^dagger| = {deviation:.3e}")
    return matrix


def eigenvalues(h: Union[Instance, np.ndarray]) -> Spectrum:
    """
    Full spectrum of a Hermitian instance by dense diagonalization.

    Args:
        h: DenseHermitian, SparsePauliSum, SparseHermitian or a square array

    Returns:
        Spectrum sorted ascending

    Raises:
        DomainError: If the matrix is not Hermitian within tolerance
        ResourceError: If the dimension exceeds the dense budget
    """
    matrix = _hermitian_matrix(h)
    values = linalg.eigh(matrix, eigvals_only=True)
    return Spectrum(values, source=getattr(h, "source", "array"))


def eigensystem(h: Union[Instance, np.ndarray], residual_tolerance: float = 1e-8) -> Tuple[Spectrum, np.ndarray]:
    """
    Eigenvalues and orthonormal eigenvectors (columns), with a reconstruction check.

    Raises:
        NumericError: If ||HV - V Lambda|| exceeds residual_tolerance * max(1, ||H||)
    """
    matrix = _hermitian_matrix(h)
    values, vectors = linalg.eigh(matrix)
    residual = float(np.linalg.norm(matrix @ vectors - vectors * values))
    scale = max(1.0, float(np.linalg.norm(matrix)))
    if residual > residual_tolerance * scale:
        raise NumericError(f"Eigendecomposition residual {residual:.3e} too large",
                           diagnostics={"residual": residual, "scale": scale})
    return Spectrum(values, source=getattr(h, "source", "array")), vectors


# --- Norms and resolvents ---

def schatten_p_norm(s: Spectrum, p: Union[float, str]) -> float:
    """
    Normalized Schatten norm ((1/N) sum |lambda_i|^p)^(1/p); p = inf gives max |lambda_i|.

    Computed as M * (mean (|lambda|/M)^p)^(1/p) with M = max |lambda| to avoid overflow.
    """
    p = math.inf if p in ("inf", "infinity") else float(p)
    if p < 1:
        raise DomainError(f"Schatten norm needs p >= 1, got {p}")
    magnitudes = np.abs(s.eigenvalues)
    largest = float(magnitudes.max())
    if math.isinf(p) or largest == 0.0:
        return largest
    return largest * float(np.mean((magnitudes / largest) ** p)) ** (1.0 / p)


def resolvent_weights(values: np.ndarray, omega: float, eta: float, p: float) -> np.ndarray:
    """|x - omega + i eta|^(-p) for each x."""
    return ((np.asarray(values) - omega) ** 2 + eta * eta) ** (-p / 2.0)


def resolvent_trace_moment(s: Spectrum, q: ResolventQuery) -> float:
    """Tr̄ |R_{omega,eta}|^p = (1/N) sum_i |lambda_i - omega + i eta|^(-p)."""
    return float(np.mean(resolvent_weights(s.eigenvalues, q.omega, q.eta, q.p)))


def resolvent_norm(s: Spectrum, q: ResolventQuery) -> float:
    """(Tr̄ |R|^p)^(1/p) for one spectrum; always at most 1/eta."""
    return resolvent_trace_moment(s, q) ** (1.0 / q.p) if q.p else 1.0


# --- Semicircle reference ---

def semicircle_density(x):
    """rho(x) = sqrt(4 - x^2) / 2pi on [-2, 2], zero outside."""
    x = np.asarray(x, dtype=np.float64)
    inside = np.clip(4.0 - x * x, 0.0, None)
    density = np.sqrt(inside) / (2.0 * math.pi)
    return float(density) if density.ndim == 0 else density


def semicircle_cdf(e):
    """Closed-form distribution function of the semicircle."""
    x = np.clip(np.asarray(e, dtype=np.float64), -SEMICIRCLE_RADIUS, SEMICIRCLE_RADIUS)
    value = x * np.sqrt(4.0 - x * x) / (4.0 * math.pi) + np.arcsin(x / 2.0) / math.pi + 0.5
    value = np.clip(value, 0.0, 1.0)
    return float(value) if value.ndim == 0 else value


def semicircle_mass(a: float, b: float) -> float:
    """Semicircle probability of [a, b]."""
    return semicircle_cdf(b) - semicircle_cdf(a)


def _quad_piece(func: Callable[[float], float], lower: float, upper: float, wvar: Tuple[float, float],
                epsrel: float, limit: int):
    result = integrate.quad(func, lower, upper, weight="alg", wvar=wvar,
                            epsabs=0.0, epsrel=epsrel, limit=limit, full_output=1)
    value, abserr = result[0], result[1]
    converged = len(result) == 3
    return value, abserr, converged, (result[3] if not converged else "")


def semicircle_resolvent_moment(q: ResolventQuery, epsrel: float = 1e-8, limit: int = 500) -> float:
    """
    S_{omega,eta,p} = integral of rho(x) |x - omega + i eta|^(-p) over [-2, 2].

    The square-root endpoint factors are handled as QUADPACK algebraic weights.
    When omega lies inside the support the interval is split at omega so that
    the filter peak sits on a breakpoint.

    Raises:
        NumericError: If quadrature does not reach the requested relative tolerance
    """
    omega, eta, p = q.omega, q.eta, q.p
    scale = 1.0 / (2.0 * math.pi)

    def kernel(x: float) -> float:
        return scale * ((x - omega) ** 2 + eta * eta) ** (-p / 2.0)

    if -SEMICIRCLE_RADIUS < omega < SEMICIRCLE_RADIUS:
        pieces = [
            _quad_piece(lambda x: kernel(x) * math.sqrt(2.0 - x), -2.0, omega, (0.5, 0.0), epsrel, limit),
            _quad_piece(lambda x: kernel(x) * math.sqrt(2.0 + x), omega, 2.0, (0.0, 0.5), epsrel, limit),
        ]
    else:
        pieces = [_quad_piece(kernel, -2.0, 2.0, (0.5, 0.5), epsrel, limit)]

    value = math.fsum(piece[0] for piece in pieces)
    abserr = math.fsum(piece[1] for piece in pieces)
    if not all(piece[2] for piece in pieces) or abserr > max(epsrel * abs(value) * 10.0, 1e-300):
        messages = [piece[3] for piece in pieces if piece[3]]
        logger.error(f"Semicircle resolvent quadrature failed for {q}: abserr={abserr:.3e}")
        raise NumericError(f"Quadrature did not converge for omega={omega}, eta={eta}, p={p}",
                           best_estimate=value,
                           diagnostics={"abserr": abserr, "messages": messages})
    return value


def empirical_cdf_distance(s: Spectrum, reference: Optional[Union[Spectrum, Callable]] = None) -> float:
    """
    Kolmogorov distance sup_E |F_s(E) - F_ref(E)|.

    The reference is the semicircle by default, any continuous CDF callable, or a
    second Spectrum (two-sample distance). The supremum is evaluated exactly at
    the jump points, using left and right limits.
    """
    values = s.eigenvalues
    N = s.N
    if isinstance(reference, Spectrum):
        points = np.union1d(values, reference.eigenvalues)
        right = np.searchsorted(values, points, side="right") / N
        right_ref = np.searchsorted(reference.eigenvalues, points, side="right") / reference.N
        left = np.searchsorted(values, points, side="left") / N
        left_ref = np.searchsorted(reference.eigenvalues, points, side="left") / reference.N
        return float(max(np.max(np.abs(right - right_ref)), np.max(np.abs(left - left_ref))))

    cdf = semicircle_cdf if reference is None else reference
    jumps, counts = np.unique(values, return_counts=True)
    after = np.cumsum(counts) / N
    before = after - counts / N
    target = np.asarray(cdf(jumps), dtype=np.float64)
    return float(max(np.max(np.abs(after - target)), np.max(np.abs(before - target))))


# --- Matrix-free norm estimate ---

@dataclass(frozen=True)
class NormEstimate:
    value: float
    residual: float
    iterations: int
    lambda_min: float
    lambda_max: float


def spectral_norm_estimate(h, tolerance: float = 1e-8, max_iters: int = 300, seed: int = 0) -> NormEstimate:
    """
    Operator norm max(|lambda_min|, |lambda_max|) by Lanczos with full reorthogonalization.

    Only h.apply is used, so SparsePauliSum instances stay matrix-free.

    Args:
        h: Instance exposing apply(v) and dim
        tolerance: Relative Ritz residual required at both spectral ends
        max_iters: Iteration cap (also capped by the dimension)
        seed: Seed of the random start vector

    Returns:
        NormEstimate with the value and the larger of the two end residuals

    Raises:
        NumericError: If the ends do not converge within max_iters
    """
    N = h.dim
    steps = min(max_iters, N)
    rng = generator(seed, STREAM_LANCZOS)
    v = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    v /= np.linalg.norm(v)

    basis = np.zeros((steps, N), dtype=np.complex128)
    alphas, betas = [], []
    theta = np.zeros(1)
    residual = math.inf
    for k in range(steps):
        basis[k] = v
        w = np.asarray(h.apply(v), dtype=np.complex128)
        alpha = float(np.vdot(v, w).real)
        w = w - alpha * v
        if k > 0:
            w = w - betas[-1] * basis[k - 1]
        for _ in range(2):
            w = w - basis[:k + 1].T @ (basis[:k + 1].conj() @ w)
        beta = float(np.linalg.norm(w))
        alphas.append(alpha)

        if k == 0:
            theta, ritz = np.array([alpha]), np.ones((1, 1))
        else:
            theta, ritz = linalg.eigh_tridiagonal(np.array(alphas), np.array(betas))
        ends = [0, len(theta) - 1]
        scale = max(1.0, float(np.max(np.abs(theta))))
        residual = max(beta * abs(ritz[-1, idx]) for idx in ends) / scale
        if residual <= tolerance or beta <= 1e-13 * scale:
            value = float(max(abs(theta[0]), abs(theta[-1])))
            logger.debug(f"Lanczos converged after {k + 1} steps: norm={value:.12f}, residual={residual:.2e}")
            return NormEstimate(value, residual, k + 1, float(theta[0]), float(theta[-1]))
        betas.append(beta)
        v = w / beta

    best = float(max(abs(theta[0]), abs(theta[-1])))
    raise NumericError(f"Lanczos did not converge in {steps} steps (residual {residual:.2e})",
                       best_estimate=best, diagnostics={"residual": residual, "iterations": steps})


# --- Spectrum fractions ---

def low_energy_fraction(s: Spectrum, epsilon: float) -> float:
    """Fraction of eigenvalues at or below -2(1 - epsilon)."""
    if not 0 < epsilon <= 1:
        raise DomainError(f"epsilon must lie in (0, 1], got {epsilon}")
    threshold = -SEMICIRCLE_RADIUS * (1.0 - epsilon)
    return np.count_nonzero(s.eigenvalues <= threshold) / s.N


def window_fraction(s: Spectrum, a: float, b: float) -> float:
    """Fraction of eigenvalues in [a, b]."""
    return np.count_nonzero((s.eigenvalues >= a) & (s.eigenvalues <= b)) / s.N


def gue_moment_bound(N: int, p: float) -> float:
    """Upper bound 2(1 + (p/2)^(3/4)/sqrt(N)) on the GUE p-norm."""
    return 2.0 * (1.0 + (p / 2.0) ** 0.75 / math.sqrt(N))
