"""
Monte Carlo plumbing

This module provides the splittable seed tree, the ordered trial worker pool and
the compensated aggregation used by every experiment. A trial's random stream
depends only on (master seed, stream tag, trial key), never on the thread that
runs it, so results are independent of the parallelism degree.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Sequence, TypeVar

import numpy as np

logger = logging.getLogger(__name__)

T = TypeVar("T")

# Stream tags keep independent families of draws apart under one master seed.
STREAM_PAULI = 0
STREAM_GUE = 1
STREAM_PERMUTATION = 2
STREAM_QPE = 3
STREAM_RESTART = 4
STREAM_KLOCAL = 5
STREAM_LANCZOS = 6

SEED_MAX = 2**64 - 1


def _check_seed(seed: int) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"Seed must be an integer, got {type(seed).__name__}")
    if not 0 <= int(seed) <= SEED_MAX:
        raise ValueError(f"Seed must be a 64-bit unsigned integer, got {seed}")
    return int(seed)


def generator(seed: int, *key: int) -> np.random.Generator:
    """
    Counter-based generator for a node of the seed tree.

    Args:
        seed: Master seed (64-bit unsigned)
        *key: Path below the master seed, e.g. (stream, trial)

    Returns:
        A numpy Generator backed by Philox
    """
    sequence = np.random.SeedSequence(_check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed: int, *key: int) -> int:
    """Derive a child 64-bit seed for the node (seed, *key)."""
    sequence = np.random.SeedSequence(_check_seed(seed), spawn_key=tuple(int(k) for k in key))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def map_trials(fn: Callable[[int], T], count: int, threads: int = 1) -> List[T]:
    """
    Run fn(trial) for trial in range(count) and collect results in trial order.

    Args:
        fn: Pure per-trial function
        count: Number of trials
        threads: Worker count; 1 runs inline

    Returns:
        List of per-trial results ordered by trial index
    """
    if threads <= 1 or count <= 1:
        return [fn(trial) for trial in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    standard_error: float
    count: int


def estimate_mean(values: Iterable[float]) -> MeanEstimate:
    """
    Mean and standard error of the mean with compensated summation.

    A single value gets standard error +inf (no spread information).
    """
    data = [float(v) for v in values]
    count = len(data)
    if count == 0:
        raise ValueError("Cannot estimate a mean from zero samples")
    mean = math.fsum(data) / count
    if count == 1:
        return MeanEstimate(mean, math.inf, 1)
    variance = math.fsum((x - mean) ** 2 for x in data) / (count - 1)
    return MeanEstimate(mean, math.sqrt(variance / count), count)


def sample_std(values: Sequence[float]) -> float:
    """Sample standard deviation (ddof=1); 0 for fewer than two values."""
    data = [float(v) for v in values]
    if len(data) < 2:
        return 0.0
    mean = math.fsum(data) / len(data)
    return math.sqrt(math.fsum((x - mean) ** 2 for x in data) / (len(data) - 1))


def root_estimate(estimate: MeanEstimate, p: float) -> MeanEstimate:
    """
    Propagate a mean estimate of E X through x -> x**(1/p) (delta method).

    Used to turn E Tr̄ H^p estimates into p-norm estimates.
    """
    if estimate.mean <= 0:
        return MeanEstimate(0.0, math.inf if estimate.count < 2 else 0.0, estimate.count)
    value = estimate.mean ** (1.0 / p)
    slope = value / (p * estimate.mean)
    return MeanEstimate(value, slope * estimate.standard_error, estimate.count)


def binomial_interval(successes: int, shots: int, z: float = 1.96) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if shots <= 0:
        raise ValueError("shots must be positive")
    phat = successes / shots
    denom = 1 + z * z / shots
    center = (phat + z * z / (2 * shots)) / denom
    half = z * math.sqrt(phat * (1 - phat) / shots + z * z / (4 * shots * shots)) / denom
    return max(0.0, center - half), min(1.0, center + half)
