"""
Ensembles

This module provides seeded samplers for the random matrix ensembles compared by
the laboratory: sums of random Pauli strings, the GUE, sums of Hermitized signed
permutations and the complete k-local ensemble.

Every sampler is a pure function of its parameters and seed. Randomness comes
from the counter-based seed tree in montecarlo.py.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse

from . import pauli_algebra
from .config import ensure_dense_budget
from .errors import DomainError
from .models import EnsembleSpec, EnsembleVariant
from .montecarlo import STREAM_GUE, STREAM_KLOCAL, STREAM_PAULI, STREAM_PERMUTATION, generator
from .pauli_algebra import PauliString

logger = logging.getLogger(__name__)

# Signed-permutation sums above this dimension come back in triplet form.
DENSE_PERMUTATION_LIMIT = 512


# --- Instance types ---

@dataclass(frozen=True, eq=False)
class SparsePauliSum:
    """
    Hamiltonian H = sum_j c_j sigma_j with real coefficients.

    Attributes:
        n: Number of sites
        coefficients: Real coefficient per term
        strings: Pauli string per term (repeats allowed)
    """

    n: int
    coefficients: np.ndarray
    strings: Tuple[PauliString, ...]
    source: str = "custom"

    def __post_init__(self):
        coefficients = np.array(self.coefficients, dtype=np.float64)
        if coefficients.shape != (len(self.strings),):
            raise DomainError(f"{coefficients.shape[0]} coefficients for {len(self.strings)} strings")
        if not np.all(np.isfinite(coefficients)):
            raise DomainError("Coefficients must be finite")
        for string in self.strings:
            if string.n != self.n:
                raise DomainError(f"Term width {string.n} does not match n={self.n}")
        coefficients.setflags(write=False)
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "strings", tuple(self.strings))

    @classmethod
    def from_terms(cls, n: int, terms: Sequence[Tuple[float, PauliString]], source: str = "custom") -> "SparsePauliSum":
        coefficients = np.array([float(c) for c, _ in terms], dtype=np.float64)
        return cls(n, coefficients, tuple(s for _, s in terms), source)

    @classmethod
    def from_text(cls, terms: Sequence[Tuple[float, str]], source: str = "custom") -> "SparsePauliSum":
        parsed = [(c, PauliString.parse(text)) for c, text in terms]
        if not parsed:
            raise DomainError("A Pauli sum needs at least one term")
        return cls.from_terms(parsed[0][1].n, parsed, source)

    @property
    def m(self) -> int:
        return len(self.strings)

    @property
    def dim(self) -> int:
        return 1 << self.n

    @property
    def terms(self) -> List[Tuple[float, PauliString]]:
        return list(zip(self.coefficients.tolist(), self.strings))

    @property
    def is_hermitian(self) -> bool:
        return all(s.is_hermitian for s in self.strings)

    @cached_property
    def hermitian_weights(self) -> np.ndarray:
        """c_j times the real phase of sigma_j; requires Hermitian strings."""
        if not self.is_hermitian:
            raise DomainError("Pauli sum contains a non-Hermitian (imaginary phase) term")
        return self.coefficients * np.array([s.phase_value.real for s in self.strings])

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Matrix-free H @ v."""
        v = np.asarray(v)
        out = np.zeros(v.shape, dtype=np.complex128)
        for coefficient, string in zip(self.coefficients, self.strings):
            out += coefficient * pauli_algebra.apply(string, v)
        return out

    def to_dense(self) -> np.ndarray:
        """
        Explicit matrix, accumulated term by term in O(m 2^n).

        Raises:
            ResourceError: If 2^n exceeds the dense budget
        """
        ensure_dense_budget(self.dim, "Pauli sum")
        rows = pauli_algebra.basis_indices(self.n)
        matrix = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for coefficient, string in zip(self.coefficients, self.strings):
            source, factor = pauli_algebra.row_action(string)
            matrix[rows, source] += coefficient * factor
        return matrix


@dataclass(frozen=True, eq=False)
class DenseHermitian:
    """Explicit N x N Hermitian matrix."""

    matrix: np.ndarray
    source: str = "custom"

    def __post_init__(self):
        matrix = np.asarray(self.matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DomainError(f"Expected a square matrix, got shape {matrix.shape}")
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, source: str = "custom") -> "DenseHermitian":
        """Symmetrize (H + H^dagger)/2 so the result is Hermitian exactly."""
        matrix = np.asarray(matrix, dtype=np.complex128)
        return cls((matrix + matrix.conj().T) / 2, source)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def to_dense(self) -> np.ndarray:
        return self.matrix

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v


@dataclass(frozen=True, eq=False)
class SparseHermitian:
    """Hermitian matrix kept in triplet (COO) form."""

    matrix: sparse.coo_array
    source: str = "custom"

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def to_dense(self) -> np.ndarray:
        ensure_dense_budget(self.dim, "sparse Hermitian")
        return self.matrix.toarray()

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    @property
    def max_row_nonzeros(self) -> int:
        counts = np.bincount(self.matrix.row, minlength=self.dim)
        return int(counts.max())


Instance = Union[SparsePauliSum, DenseHermitian, SparseHermitian]


# --- Pauli string ensemble ---

def draw_pauli_terms(n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """
    One row per term: n X-bits, n Z-bits and a sign bit.

    Rows are independent, so any prefix of the draw is a valid smaller instance
    (used for common random numbers across an m-grid).
    """
    return rng.integers(0, 2, size=(m, 2 * n + 1), dtype=np.int8)


def pauli_sum_from_draws(n: int, draws: np.ndarray, m: Optional[int] = None, source: str = "pauli") -> SparsePauliSum:
    """Build the instance made of the first m rows of draw_pauli_terms output."""
    m = draws.shape[0] if m is None else m
    rows = draws[:m]
    if n <= 62:
        x_masks = pauli_algebra.pack_rows(rows[:, :n]).tolist()
        z_masks = pauli_algebra.pack_rows(rows[:, n:2 * n]).tolist()
    else:
        x_masks = [pauli_algebra.pack_bits(row[:n]) for row in rows]
        z_masks = [pauli_algebra.pack_bits(row[n:2 * n]) for row in rows]
    strings = tuple(PauliString(n, x, z) for x, z in zip(x_masks, z_masks))
    signs = 1.0 - 2.0 * rows[:, 2 * n].astype(np.float64)
    return SparsePauliSum(n, signs / math.sqrt(m), strings, source)


def sample_pauli_string_ensemble(n: int, m: int, seed: int) -> SparsePauliSum:
    """
    m i.i.d. uniform strings from {I, X, Y, Z}^n with coefficients +-1/sqrt(m).

    The identity is part of the sampling set and repeated strings are kept.

    Args:
        n: Number of sites (>= 1)
        m: Number of terms (>= 1)
        seed: 64-bit seed

    Returns:
        SparsePauliSum with exactly m terms
    """
    if n < 1 or m < 1:
        raise DomainError(f"Pauli ensemble needs n >= 1 and m >= 1, got n={n}, m={m}")
    rng = generator(seed, STREAM_PAULI)
    return pauli_sum_from_draws(n, draw_pauli_terms(n, m, rng), source=f"pauli(n={n},m={m},seed={seed})")


def sample_complete_klocal(n: int, k: int, seed: int, normalized: bool = True) -> SparsePauliSum:
    """
    Every weight-k string with an independent uniform sign.

    With normalized=True coefficients are 1/sqrt(C(n,k) 3^k) so that Tr̄ H^2 = 1.
    """
    if not 1 <= k <= n:
        raise DomainError(f"k must lie in [1, n], got k={k}, n={n}")
    strings = []
    for support in itertools.combinations(range(n), k):
        for letters in itertools.product("XYZ", repeat=k):
            word = ["I"] * n
            for site, letter in zip(support, letters):
                word[site] = letter
            strings.append(PauliString.from_letters("".join(word)))
    rng = generator(seed, STREAM_KLOCAL)
    signs = 1.0 - 2.0 * rng.integers(0, 2, size=len(strings)).astype(np.float64)
    scale = 1.0 / math.sqrt(len(strings)) if normalized else 1.0
    logger.debug(f"Complete {k}-local ensemble on {n} sites: {len(strings)} terms")
    return SparsePauliSum(n, signs * scale, tuple(strings), f"klocal(n={n},k={k},seed={seed})")


# --- GUE ---

def sample_gue(N: int, seed: int) -> DenseHermitian:
    """
    GUE(N) normalized to the unit-variance semicircle.

    Off-diagonal entries are (g + i g')/sqrt(2N), diagonal entries g/sqrt(N).
    """
    if N < 2:
        raise DomainError(f"GUE needs N >= 2, got {N}")
    ensure_dense_budget(N, "GUE matrix")
    rng = generator(seed, STREAM_GUE)
    g = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    return DenseHermitian.from_matrix(g / math.sqrt(N), source=f"gue(N={N},seed={seed})")


# --- Signed permutations ---

def draw_signed_permutation(N: int, rng: np.random.Generator, variant: str = "complex") -> Tuple[np.ndarray, np.ndarray]:
    """Uniform permutation (Fisher-Yates) and the diagonal of D."""
    perm = rng.permutation(N)
    r = 1.0 - 2.0 * rng.integers(0, 2, size=N)
    if variant == "real":
        return perm, r.astype(np.complex128)
    if variant != "complex":
        raise DomainError(f"Unknown signed permutation variant {variant!r}")
    r_prime = 1.0 - 2.0 * rng.integers(0, 2, size=N)
    return perm, (r + 1j * r_prime) / math.sqrt(2.0)


def signed_permutation_matrix(perm: Sequence[int], diagonal: Sequence[complex]) -> sparse.csr_array:
    """Q = D P, i.e. Q[a, perm[a]] = diagonal[a]."""
    perm = np.asarray(perm)
    N = perm.shape[0]
    return sparse.csr_array((np.asarray(diagonal, dtype=np.complex128), (np.arange(N), perm)), shape=(N, N))


def sample_complex_signed_permutation(N: int, seed: int) -> sparse.csr_array:
    """Q = D P with D entries (r + i r')/sqrt(2): one unit-modulus entry per row and column."""
    if N < 2:
        raise DomainError(f"Signed permutation needs N >= 2, got {N}")
    rng = generator(seed, STREAM_PERMUTATION)
    return signed_permutation_matrix(*draw_signed_permutation(N, rng, "complex"))


def sample_signed_perm_sum(N: int, m: int, seed: int, variant: str = "complex") -> Union[DenseHermitian, SparseHermitian]:
    """
    sum_i (Q_i + Q_i^dagger)/sqrt(2m) over m independent signed permutations.

    Returns a DenseHermitian up to DENSE_PERMUTATION_LIMIT and a triplet-form
    SparseHermitian above it.
    """
    if N < 2 or m < 1:
        raise DomainError(f"Signed permutation sum needs N >= 2 and m >= 1, got N={N}, m={m}")
    rng = generator(seed, STREAM_PERMUTATION)
    rows, cols, values = [], [], []
    arange = np.arange(N)
    for _ in range(m):
        perm, diagonal = draw_signed_permutation(N, rng, variant)
        rows.extend([arange, perm])
        cols.extend([perm, arange])
        values.extend([diagonal, diagonal.conj()])
    scale = 1.0 / math.sqrt(2.0 * m)
    triplets = sparse.coo_array((np.concatenate(values) * scale, (np.concatenate(rows), np.concatenate(cols))),
                                shape=(N, N))
    triplets.sum_duplicates()
    source = f"{variant}_signed_perm_sum(N={N},m={m},seed={seed})"
    if N <= DENSE_PERMUTATION_LIMIT:
        return DenseHermitian.from_matrix(triplets.toarray(), source=source)
    hermitian = ((triplets + triplets.conj().T) / 2).tocoo()
    return SparseHermitian(hermitian, source=source)


# --- Dispatch ---

def sample_instance(spec: EnsembleSpec) -> Instance:
    """
    Draw the instance described by spec.

    Raises:
        DomainError: If the spec carries no seed
    """
    if spec.seed is None:
        raise DomainError("Ensemble spec has no seed")
    variant = spec.variant
    if variant == EnsembleVariant.PAULI:
        return sample_pauli_string_ensemble(spec.n, spec.m, spec.seed)
    if variant == EnsembleVariant.GUE:
        return sample_gue(spec.N, spec.seed)
    if variant == EnsembleVariant.COMPLEX_SIGNED_PERM_SUM:
        return sample_signed_perm_sum(spec.N, spec.m, spec.seed, "complex")
    if variant == EnsembleVariant.REAL_SIGNED_PERM_SUM:
        return sample_signed_perm_sum(spec.N, spec.m, spec.seed, "real")
    if variant == EnsembleVariant.COMPLETE_KLOCAL:
        return sample_complete_klocal(spec.n, spec.k, spec.seed)
    raise DomainError(f"Unknown ensemble variant {variant}")


def dense_matrix(h: Instance) -> np.ndarray:
    """Dense realization of any instance type."""
    if isinstance(h, np.ndarray):
        ensure_dense_budget(h.shape[0])
        return h
    return h.to_dense()
