"""
Pauli Algebra

This module provides exact n-qubit Pauli group arithmetic on a bit-packed
symplectic representation, plus matrix-free application to state vectors.

Conventions:
    - A PauliString stores an X-mask, a Z-mask and a phase exponent e, and denotes
      the operator i^e * (P_0 (x) P_1 (x) ... (x) P_{n-1}) with letters I, X, Y, Z.
    - Site k lives on bit (n - 1 - k) of the masks, so site 0 is the most
      significant Kronecker factor and "+XIYZ" reads left to right.
    - Y = i * X * Z. On the masks a site with both bits set is the letter Y.
"""

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Tuple

import numpy as np

from .config import ensure_dense_budget
from .errors import DomainError

logger = logging.getLogger(__name__)

_PHASE_VALUES = (1.0 + 0.0j, 1j, -1.0 + 0.0j, -1j)
_PHASE_TEXT = {0: "+", 1: "+i", 2: "-", 3: "-i"}
_TEXT_PHASE = {"": 0, "+": 0, "i": 1, "+i": 1, "-": 2, "-i": 3}
_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}

# letter codes used by vectorized consumers: 0=I, 1=X, 2=Y, 3=Z
_CODE_OF_BITS = {(0, 0): 0, (1, 0): 1, (1, 1): 2, (0, 1): 3}


def _popcount(value: int) -> int:
    return value.bit_count()


@dataclass(frozen=True)
class PauliString:
    """
    Immutable n-qubit Pauli operator with a phase from {+1, +i, -1, -i}.

    Attributes:
        n: Number of sites (n >= 1)
        x: X-part bitmask
        z: Z-part bitmask
        phase: Exponent e of the prefactor i^e, in 0..3
    """

    n: int
    x: int = 0
    z: int = 0
    phase: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"Pauli string needs at least one site, got n={self.n}")
        limit = 1 << self.n
        if not (0 <= self.x < limit and 0 <= self.z < limit):
            raise DomainError(f"Bitmasks do not fit in {self.n} sites")
        object.__setattr__(self, "x", int(self.x))
        object.__setattr__(self, "z", int(self.z))
        object.__setattr__(self, "phase", int(self.phase) % 4)

    # --- Construction ---

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n)

    @classmethod
    def from_letters(cls, letters: str, phase: int = 0) -> "PauliString":
        """Build from a letter word such as "XIYZ" (no phase prefix)."""
        n = len(letters)
        x = z = 0
        for site, letter in enumerate(letters.upper()):
            if letter not in _LETTER_BITS:
                raise DomainError(f"Unknown Pauli letter {letter!r} in {letters!r}")
            xb, zb = _LETTER_BITS[letter]
            bit = n - 1 - site
            x |= xb << bit
            z |= zb << bit
        return cls(n, x, z, phase)

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        """
        Parse the text form "+XIYZ", "-iZZ", "+iX", ... into a PauliString.

        Raises:
            DomainError: If the prefix or a letter is not recognised
        """
        text = text.strip()
        split = len(text) - len(text.lstrip("+-i"))
        prefix, letters = text[:split], text[split:]
        if prefix not in _TEXT_PHASE:
            raise DomainError(f"Unknown phase prefix {prefix!r} in {text!r}")
        if not letters:
            raise DomainError(f"Pauli string {text!r} has no sites")
        return cls.from_letters(letters, _TEXT_PHASE[prefix])

    # --- Views ---

    def letters(self) -> str:
        return "".join("IXYZ"[code] for code in self.letter_codes())

    def letter_codes(self) -> np.ndarray:
        """Per-site letter codes (0=I, 1=X, 2=Y, 3=Z), site 0 first."""
        codes = np.empty(self.n, dtype=np.int8)
        for site in range(self.n):
            bit = self.n - 1 - site
            codes[site] = _CODE_OF_BITS[((self.x >> bit) & 1, (self.z >> bit) & 1)]
        return codes

    @property
    def phase_value(self) -> complex:
        return _PHASE_VALUES[self.phase]

    @property
    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    def __str__(self) -> str:
        return f"{_PHASE_TEXT[self.phase]}{self.letters()}"

    def __mul__(self, other: "PauliString") -> "PauliString":
        return mul(self, other)

    def with_phase(self, phase: int) -> "PauliString":
        return PauliString(self.n, self.x, self.z, phase)


def _check_widths(a: PauliString, b: PauliString) -> None:
    if a.n != b.n:
        raise DomainError(f"Pauli width mismatch: {a.n} vs {b.n}")


def mul(a: PauliString, b: PauliString) -> PauliString:
    """
    Group product a*b with the accumulated phase.

    Writing each factor as i^(e + |x&z|) X^x Z^z, moving Z^{z_a} past X^{x_b} costs
    (-1)^{|z_a & x_b|}, and the result is folded back into letter form.
    """
    _check_widths(a, b)
    x = a.x ^ b.x
    z = a.z ^ b.z
    phase = (a.phase + b.phase
             + _popcount(a.x & a.z) + _popcount(b.x & b.z)
             + 2 * _popcount(a.z & b.x)
             - _popcount(x & z))
    return PauliString(a.n, x, z, phase)


def commutes(a: PauliString, b: PauliString) -> bool:
    """True iff a*b == b*a, from the parity of the symplectic inner product."""
    _check_widths(a, b)
    return (_popcount(a.x & b.z) + _popcount(a.z & b.x)) % 2 == 0


def weight(p: PauliString) -> int:
    """Number of sites carrying a non-identity letter."""
    return _popcount(p.x | p.z)


@lru_cache(maxsize=32)
def basis_indices(n: int) -> np.ndarray:
    """Read-only arange(2**n) shared by the matrix-free kernels."""
    indices = np.arange(1 << n, dtype=np.int64)
    indices.setflags(write=False)
    return indices


def parity(values: np.ndarray) -> np.ndarray:
    """Elementwise parity (0/1) of the set bits of a non-negative integer array."""
    return np.bitwise_count(values) & 1


def row_action(p: PauliString) -> Tuple[np.ndarray, np.ndarray]:
    """Source indices and row factors so that (p v)[b] = factor[b] * v[source[b]]."""
    source = basis_indices(p.n) ^ p.x
    signs = 1 - 2 * parity(source & p.z).astype(np.int8)
    prefactor = _PHASE_VALUES[(p.phase + _popcount(p.x & p.z)) % 4]
    if prefactor.imag == 0:
        return source, signs * prefactor.real
    return source, signs * prefactor


def apply(p: PauliString, v: np.ndarray) -> np.ndarray:
    """
    Apply p to a state vector (or to the columns of a 2^n x k block) without
    building the matrix.

    Args:
        p: Pauli string on n sites
        v: Array whose first axis has length 2^n

    Returns:
        p @ v, in O(2^n) arithmetic

    Raises:
        DomainError: If the leading dimension is not 2^n
    """
    v = np.asarray(v)
    if v.ndim == 0 or v.shape[0] != (1 << p.n):
        raise DomainError(f"State length {v.shape[0] if v.ndim else 0} does not match 2^{p.n}")
    source, factor = row_action(p)
    if v.ndim > 1:
        factor = factor.reshape((-1,) + (1,) * (v.ndim - 1))
    return factor * v[source]


def to_dense(p: PauliString) -> np.ndarray:
    """
    Explicit 2^n x 2^n matrix of p (phase folded in).

    Raises:
        ResourceError: If 2^n exceeds the dense budget
    """
    dim = 1 << p.n
    ensure_dense_budget(dim, "Pauli string")
    source, factor = row_action(p)
    matrix = np.zeros((dim, dim), dtype=np.complex128)
    matrix[basis_indices(p.n), source] = factor
    return matrix


def random_pauli(n: int, rng: np.random.Generator) -> PauliString:
    """Uniform element of {I, X, Y, Z}^n with phase +1."""
    bits = rng.integers(0, 2, size=2 * n)
    return PauliString(n, pack_bits(bits[:n]), pack_bits(bits[n:]))


def pack_bits(bits) -> int:
    """Pack a site-ordered 0/1 vector into a mask (site 0 -> most significant bit)."""
    value = 0
    for bit in bits:
        value = (value << 1) | int(bit)
    return value


def pack_rows(bits: np.ndarray) -> np.ndarray:
    """Pack each row of an (m, n) 0/1 array into a mask (n <= 62)."""
    m, n = bits.shape
    if n > 62:
        raise DomainError(f"Vectorized masks support at most 62 sites, got {n}")
    weights = np.left_shift(np.int64(1), np.arange(n - 1, -1, -1, dtype=np.int64))
    return (bits.astype(np.int64) * weights).sum(axis=1)


def all_paulis(n: int) -> Iterator[PauliString]:
    """Every phase-free string on n sites, in lexicographic I<X<Y<Z order."""
    for word in itertools.product("IXYZ", repeat=n):
        yield PauliString.from_letters("".join(word))
