"""
Models

This module provides the pydantic request and record models shared by the
experiment drivers and the command-line harness: ensemble specifications, filter
queries, algorithm settings, result records and the run manifest.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .montecarlo import SEED_MAX


# --- Ensembles ---

class EnsembleVariant(str, Enum):
    PAULI = "pauli"
    GUE = "gue"
    COMPLEX_SIGNED_PERM_SUM = "complex_signed_perm_sum"
    REAL_SIGNED_PERM_SUM = "real_signed_perm_sum"
    COMPLETE_KLOCAL = "complete_klocal"


class EnsembleSpec(BaseModel):
    """
    Which ensemble to draw from and with which seed.

    Pauli and k-local variants take n (sites); GUE and signed-permutation sums take
    N (dimension); m counts summands where it applies.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    variant: EnsembleVariant
    n: Optional[int] = Field(default=None, ge=1)
    N: Optional[int] = Field(default=None, ge=2)
    m: Optional[int] = Field(default=None, ge=1)
    k: Optional[int] = Field(default=None, ge=1)
    seed: Optional[int] = Field(default=None, ge=0, le=SEED_MAX)

    @model_validator(mode="after")
    def _check_parameters(self) -> "EnsembleSpec":
        variant = self.variant
        if variant == EnsembleVariant.PAULI and (self.n is None or self.m is None):
            raise ValueError("pauli ensemble needs n and m")
        if variant == EnsembleVariant.GUE and self.N is None:
            raise ValueError("gue ensemble needs N")
        if variant in (EnsembleVariant.COMPLEX_SIGNED_PERM_SUM, EnsembleVariant.REAL_SIGNED_PERM_SUM) \
                and (self.N is None or self.m is None):
            raise ValueError(f"{variant.value} ensemble needs N and m")
        if variant == EnsembleVariant.COMPLETE_KLOCAL:
            if self.n is None or self.k is None:
                raise ValueError("complete_klocal ensemble needs n and k")
            if self.k > self.n:
                raise ValueError(f"k={self.k} exceeds n={self.n}")
        return self

    @property
    def dim(self) -> int:
        if self.variant in (EnsembleVariant.PAULI, EnsembleVariant.COMPLETE_KLOCAL):
            return 1 << self.n
        return self.N

    def with_seed(self, seed: int) -> "EnsembleSpec":
        return self.model_copy(update={"seed": seed})


# --- Spectral queries ---

def _check_even(p: int) -> int:
    if p % 2:
        raise ValueError(f"p must be even, got {p}")
    return p


class ResolventQuery(BaseModel):
    """Filter parameters (omega, eta, p) for Tr̄|R_{omega,eta}|^p."""

    model_config = ConfigDict(frozen=True)

    omega: float
    eta: float = Field(gt=0)
    p: int = Field(ge=0)

    @field_validator("p")
    @classmethod
    def _p_even(cls, p: int) -> int:
        return _check_even(p)


class DOSProxyQuery(BaseModel):
    """Grid-summed resolvent proxy for the fraction of states below e0."""

    model_config = ConfigDict(frozen=True)

    e0: float
    eta: float = Field(gt=0)
    omega_bar: float = Field(gt=0)
    p: int = Field(ge=2)

    @field_validator("p")
    @classmethod
    def _p_even(cls, p: int) -> int:
        return _check_even(p)

    @classmethod
    def from_accuracy(cls, epsilon: float, p: int) -> "DOSProxyQuery":
        """Grid spacing 2eps/sqrt(p), width 2eps/3 and cutoff -2(1 - eps/3)."""
        if not 0 < epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
        return cls(e0=-2.0 * (1.0 - epsilon / 3.0), eta=2.0 * epsilon / 3.0,
                   omega_bar=2.0 * epsilon / math.sqrt(p), p=p)

    def grid(self, anchor: float = -2.0) -> List[float]:
        """Grid centers anchor + l*omega_bar for l = 0, 1, ... up to e0."""
        if self.e0 < anchor:
            return []
        count = int(math.floor((self.e0 - anchor) / self.omega_bar + 1e-12)) + 1
        return [anchor + index * self.omega_bar for index in range(count)]


# --- Low-energy algorithms ---

class QPEKernel(str, Enum):
    GAUSSIAN = "gaussian"
    SINC2 = "sinc2"


class QPEModel(BaseModel):
    """Black-box phase estimation: uniform eigenstate plus a resolution-scaled error."""

    model_config = ConfigDict(frozen=True)

    resolution: float = Field(default=0.0, ge=0)
    repeats: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0, le=SEED_MAX)
    kernel: QPEKernel = QPEKernel.GAUSSIAN
    allowance_factor: float = Field(default=1.0, ge=0)

    @property
    def allowance(self) -> float:
        return self.allowance_factor * self.resolution


class WitnessConfig(BaseModel):
    degree_constant: float = Field(default=4.0, gt=0)
    degree: Optional[int] = Field(default=None, ge=1)
    margin: float = Field(default=0.05, ge=0)
    beta0: float = Field(default=1.0, gt=0)
    beta_max: float = Field(default=1024.0, gt=0)
    state_tolerance: float = Field(default=1e-8, gt=0)

    def degree_for(self, epsilon: float) -> int:
        if self.degree is not None:
            return self.degree
        return int(math.ceil(self.degree_constant / math.sqrt(epsilon)))


class WitnessSpec(BaseModel):
    epsilon: float
    degree: int
    beta: float
    domain_radius: float
    coefficients: List[float]


class WitnessResult(BaseModel):
    spec: WitnessSpec
    energy: float
    lambda_min: float
    ratio: float
    gibbs_energy: float
    gibbs_ratio: float
    success: bool
    trace_error: float
    min_state_eigenvalue: float
    escalations: int
    verification_cost_log10: Optional[float] = None
    history: List[Dict[str, float]] = Field(default_factory=list)


class LowerBoundResult(BaseModel):
    """Gate-count scale below which a circuit misses energy ratio epsilon (normalized units)."""

    epsilon: float
    m: int
    n: int
    g_threshold: float
    failure_probability_bound: float
    valid: bool
    general_g_threshold: float
    general_failure_probability_bound: float
    units: str = "normalized"


class RepeatResult(BaseModel):
    success: bool
    trials_used: int
    energy: float
    index: Optional[int] = None
    degenerate: bool = False


class QPEExperimentResult(BaseModel):
    instance_hash: str
    epsilon: float
    shots: int
    successes: int
    success_rate: float
    ci95_low: float
    ci95_high: float
    predicted: float
    degenerate: bool = False


class BaselineResult(BaseModel):
    energy: float
    bloch_vectors: List[List[float]]
    converged: bool
    sweeps: int
    restarts: int


# --- Universality ---

class UniversalityBoundInputs(BaseModel):
    """
    Summand statistics entering the universality and concentration bounds.

    Naming: l_p_k is L_{p,k} = (sum_i |||A_i|||_p^k)^{1/k}; l_p_t1 uses k = t+1;
    l_inf is max_i ||A_i||; sigma_sq is sum_i ||E A_i^2||; v is ||sum_i E A_i^2||;
    sigma_star_sq is the per-summand weak variance.
    """

    p: int = Field(ge=2)
    t: int = Field(default=3, ge=2)
    m: int = Field(ge=1)
    eta: float = Field(default=1.0, gt=0)
    n: Optional[int] = None
    N: Optional[int] = None
    q: int = Field(default=2, ge=1)
    l_p_t1: float = Field(default=0.0, ge=0)
    l_p_p: float = Field(default=0.0, ge=0)
    l_p_inf: float = Field(default=0.0, ge=0)
    l_3p_inf: float = Field(default=0.0, ge=0)
    l_3pq_inf: float = Field(default=0.0, ge=0)
    l_inf: float = Field(default=0.0, ge=0)
    l_inf_inf: float = Field(default=0.0, ge=0)
    sigma_sq: float = Field(default=0.0, ge=0)
    v: float = Field(default=0.0, ge=0)
    sigma_star_sq: float = Field(default=0.0, ge=0)
    sum_norm4: float = Field(default=0.0, ge=0)
    sum_norm_q_root: float = Field(default=0.0, ge=0)

    @field_validator("p")
    @classmethod
    def _p_even(cls, p: int) -> int:
        return _check_even(p)


class ComparisonRecord(BaseModel):
    experiment: str
    n: int
    N: int
    m: int
    p: int
    eta: Optional[float] = None
    omega: Optional[float] = None
    measured_ps: float
    measured_reference: float
    measured_lhs: float
    standard_error: float
    rhs_bound: float
    semicircle_reference: Optional[float] = None
    trials: int
    warning: bool = False


class TailRecord(BaseModel):
    n: int
    m: int
    epsilon: float
    threshold: float
    trials: int
    exceed_count: int
    frequency: float
    ci95_low: float
    ci95_high: float
    mean_norm: float
    max_norm: float


class TelescopeStep(BaseModel):
    j: int
    estimate: float
    standard_error: float
    increment: float
    increment_standard_error: float


class VariabilityRecord(BaseModel):
    n: int
    N: int
    m: int
    p: int
    omega: float
    eta: float
    q: int
    trials: int
    mean: float
    std: float
    relative_fluctuation: float
    sigma_star_sq: float
    fourth_moment_term: float
    weak_variance_term: float
    tail_term: float
    bound_total: float


class ClosenessRecord(BaseModel):
    N: int
    p: int
    omega: float
    eta: float
    trials: int
    measured: float
    standard_error: float
    semicircle: float
    difference: float
    envelope: float


# --- Harness ---

class ExperimentConfig(BaseModel):
    """One run of the command-line harness. The master seed has no default."""

    model_config = ConfigDict(extra="forbid")

    experiment: str = "run"
    seed: int = Field(ge=0, le=SEED_MAX)
    ensemble: Optional[EnsembleSpec] = None
    instance_path: Optional[str] = None
    n: Optional[int] = Field(default=None, ge=1)
    m_grid: List[int] = Field(default_factory=list)
    p_grid: List[int] = Field(default_factory=list)
    eta_grid: List[float] = Field(default_factory=list)
    omega_grid: List[float] = Field(default_factory=list)
    epsilon_grid: List[float] = Field(default_factory=list)
    trials: int = Field(default=1, ge=1)
    epsilon: Optional[float] = None
    output_dir: Optional[str] = None
    threads: int = Field(default=1, ge=1)
    params: Dict[str, Any] = Field(default_factory=dict)

    def hashed_payload(self) -> Dict[str, Any]:
        """Config fields that determine results (output location and threads excluded)."""
        return self.model_dump(mode="json", exclude={"output_dir", "threads"})


class ManifestEntry(BaseModel):
    name: str
    sha1: str
    bytes: int


class Manifest(BaseModel):
    experiment: str
    subcommand: str
    seed: int
    config_hash: str
    config: Dict[str, Any]
    tool_version: str
    created_at: str
    wall_time_seconds: float
    outputs: List[ManifestEntry] = Field(default_factory=list)
    provenance: Dict[str, str] = Field(default_factory=dict)
