"""Fading laws, block-fading sequence generation and typicality machinery.

Discrete laws keep their support sorted by magnitude (negatives first on
ties) so that channel-ordering logic downstream is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class FadingError(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteFadingDistribution:
    support: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if support.ndim != 1 or support.shape != probs.shape or support.size < 1:
            raise FadingError("support and probs must be matching 1-D arrays")
        if np.any(probs < 0):
            raise FadingError("negative probability")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise FadingError(f"probabilities sum to {probs.sum()}, not 1")
        if len(np.unique(support)) != support.size:
            raise FadingError("support values must be distinct")
        # ascending |value|, negative first on magnitude ties
        order = np.lexsort((support, np.abs(support)))
        object.__setattr__(self, "support", support[order])
        object.__setattr__(self, "probs", probs[order])

    @property
    def size(self) -> int:
        return int(self.support.size)

    @property
    def min_prob(self) -> float:
        """Smallest nonzero state probability (the typicality exponent mu)."""
        nz = self.probs[self.probs > 0]
        return float(nz.min())

    def entropy_rate(self) -> float:
        """Marginal entropy in bits per coefficient."""
        p = self.probs[self.probs > 0]
        return float(-(p @ np.log2(p)))

    def state_index(self, values) -> np.ndarray:
        """Map coefficient values to support indices; rejects out-of-support."""
        values = np.asarray(values, dtype=float)
        by_value = np.argsort(self.support)
        srt = self.support[by_value]
        pos = np.clip(np.searchsorted(srt, values), 0, self.size - 1)
        if np.any(srt[pos] != values):
            raise FadingError("value outside the declared support")
        return by_value[pos]


@dataclass(frozen=True)
class RayleighFading:
    """Magnitude law |h| with |h|^2 exponential; parametrized by E[|h|^2]."""

    mean_square_gain: float = 1.0

    def __post_init__(self):
        if self.mean_square_gain <= 0:
            raise FadingError("mean square gain must be positive")

    def cdf_abs(self, x):
        x = np.asarray(x, dtype=float)
        return 1.0 - np.exp(-x * x / self.mean_square_gain)

    def inv_cdf_abs(self, p):
        p = np.asarray(p, dtype=float)
        return np.sqrt(-self.mean_square_gain * np.log1p(-p))

    def tail_prob(self, x) -> float:
        return float(np.exp(-x * x / self.mean_square_gain))

    def sample_abs(self, rng, size=None):
        # inverse-CDF of the magnitude; phase/sign omitted in the real model
        return np.sqrt(-self.mean_square_gain * np.log(rng.random(size)))


@dataclass(frozen=True)
class BlockFadingProcess:
    distribution: object            # DiscreteFadingDistribution or RayleighFading
    b: int = 1                      # coherence length
    dims: tuple = (1, 1)            # (M, N); (1, 1) for SISO

    def __post_init__(self):
        if self.b < 1:
            raise FadingError("coherence length must be positive")
        M, N = self.dims
        if M < 1 or N < 1:
            raise FadingError("antenna counts must be positive")


@dataclass(frozen=True)
class ChannelRealization:
    coeffs: np.ndarray              # (n,) for SISO, (n, N, M) for MIMO
    b: int


def _check_blocks(process, n):
    if n % process.b:
        raise FadingError(f"coherence length {process.b} does not divide n={n}")
    return n // process.b


def _draw(distribution, rng, size):
    if isinstance(distribution, DiscreteFadingDistribution):
        return rng.choice(distribution.support, size=size, p=distribution.probs)
    if isinstance(distribution, RayleighFading):
        return distribution.sample_abs(rng, size)
    raise FadingError(f"unsupported distribution {type(distribution).__name__}")


def sample_block_fading(process: BlockFadingProcess, n: int, seed) -> ChannelRealization:
    """n/b independent draws, each held for b consecutive symbols."""
    n_blocks = _check_blocks(process, n)
    rng = np.random.default_rng(seed)
    draws = _draw(process.distribution, rng, n_blocks)
    return ChannelRealization(coeffs=np.repeat(draws, process.b), b=process.b)


def sample_mimo_block_fading(process: BlockFadingProcess, n: int, seed) -> ChannelRealization:
    """Per-block i.i.d. N x M coefficient matrices, block-constant in time."""
    n_blocks = _check_blocks(process, n)
    M, N = process.dims
    rng = np.random.default_rng(seed)
    draws = _draw(process.distribution, rng, (n_blocks, N, M))
    return ChannelRealization(coeffs=np.repeat(draws, process.b, axis=0), b=process.b)


def sample_random_location(dist: DiscreteFadingDistribution, n: int, seed) -> ChannelRealization:
    """Sequence whose state composition matches the law exactly, in random order."""
    counts = n * dist.probs
    if np.any(np.abs(counts - np.rint(counts)) > 1e-9):
        raise FadingError(f"n={n} gives a non-integral composition {counts}")
    counts = np.rint(counts).astype(int)
    seq = np.repeat(dist.support, counts)
    rng = np.random.default_rng(seed)
    rng.shuffle(seq)
    return ChannelRealization(coeffs=seq, b=1)


@dataclass(frozen=True)
class TypicalityReport:
    is_typical: bool
    deviations: np.ndarray          # |n_k - n p_k| per state
    n_out: float                    # sum of deviations


def robust_typicality_check(seq, dist: DiscreteFadingDistribution, delta) -> TypicalityReport:
    """Per-state count deviations against the delta-robust typicality condition."""
    seq = np.asarray(seq, dtype=float)
    idx = dist.state_index(seq)
    n = seq.size
    counts = np.bincount(idx, minlength=dist.size).astype(float)
    expected = n * dist.probs
    dev = np.abs(counts - expected)
    ok = bool(np.all(dev <= delta * expected + 1e-12))
    return TypicalityReport(is_typical=ok, deviations=dev, n_out=float(dev.sum()))


def robust_typicality_prob_bound(chi, delta, mu, n, clamp=True) -> float:
    """Upper bound 2*chi*exp(-delta^2 mu n / 3) on the atypicality probability."""
    if chi < 1 or delta < 0 or not (0 < mu <= 1) or n < 1:
        raise FadingError("invalid typicality-bound parameters")
    bound = 2.0 * chi * np.exp(-delta * delta * mu * n / 3.0)
    return float(min(bound, 1.0)) if clamp else float(bound)


def weak_typical_cardinality_bound(entropy_rate, eps, n) -> float:
    """log2 cardinality bound n*(entropy + eps) for the weakly typical set."""
    if entropy_rate < 0 or eps < 0:
        raise FadingError("entropy rate and slack must be nonnegative")
    return float(n * (entropy_rate + eps))


def entropy_rate(dist) -> float:
    """Bits per coefficient for a discrete law; continuous laws must be quantized first."""
    if not isinstance(dist, DiscreteFadingDistribution):
        raise FadingError("entropy rate is defined for discrete laws; quantize first")
    return dist.entropy_rate()


def delta_schedule(n, delta_prime=1.0, gamma=0.5) -> float:
    """Typicality slack delta' * n^{-(1-gamma)/2}; shrinks while n*delta grows."""
    if not (0 < gamma < 1) or delta_prime <= 0:
        raise FadingError("need delta' > 0 and 0 < gamma < 1")
    return float(delta_prime * n ** (-(1.0 - gamma) / 2.0))


def uniform_support(num_states, lo=-5.0, hi=5.0) -> DiscreteFadingDistribution:
    """Uniform law over evenly spaced values in [lo, hi]."""
    support = np.linspace(lo, hi, num_states)
    probs = np.full(num_states, 1.0 / num_states)
    return DiscreteFadingDistribution(support=support, probs=probs)


def distribution_from_dict(table: dict):
    """Build a fading law from a config table (type, support/probs or gain)."""
    kind = table.get("type")
    if kind == "discrete":
        if "support" not in table or "probs" not in table:
            raise FadingError("discrete law needs 'support' and 'probs'")
        return DiscreteFadingDistribution(support=np.asarray(table["support"], dtype=float),
                                          probs=np.asarray(table["probs"], dtype=float))
    if kind == "rayleigh":
        return RayleighFading(mean_square_gain=float(table.get("mean_square_gain", 1.0)))
    if kind == "uniform_grid":
        return uniform_support(int(table["states"]),
                               float(table.get("low", -5.0)), float(table.get("high", 5.0)))
    raise FadingError(f"unknown distribution type {kind!r}")
