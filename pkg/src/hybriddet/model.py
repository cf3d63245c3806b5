"""Sensor-side data plane: observation synthesis, multi-bit quantization,
codeword mapping, and binary-symmetric-channel transport.

The network watches for a weak nonnegative amplitude that arrives through a
unit-mean Gaussian multiplicative gain on top of additive Gaussian noise.
Low-rate sensors quantize each sample into one of ``2**q`` levels, encode
the level as a ``q``-bit codeword, and report it over an error-prone binary
symmetric channel.  Full-precision sensors report the raw sample over a
reliable link.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import special

__all__ = [
    "NATURAL",
    "GRAY",
    "DEFAULT_MAPPING",
    "Hypothesis",
    "SignalParams",
    "QuantizerSpec",
    "ChannelSpec",
    "QuantizedSensor",
    "FullPrecisionSensor",
    "SensorSpec",
    "NetworkConfig",
    "Codeword",
    "gaussian_upper_tail",
    "gaussian_pdf",
    "level_to_codeword",
    "codeword_to_level",
    "hamming_distance",
    "distance_matrix",
    "simulate_observations",
    "quantize",
    "quantize_batch",
    "bsc_transmit",
    "bsc_corrupt_levels",
    "trial_rng",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

#: Level-to-codeword assignments.  ``natural`` encodes level ``i`` as the
#: plain binary representation of ``i - 1``; ``gray`` reflects it so that
#: adjacent levels differ in a single bit.
NATURAL = "natural"
GRAY = "gray"

#: Assignment used when callers do not pick one explicitly.  Natural binary
#: is the default; the reflected code is kept as a selectable alternative.
DEFAULT_MAPPING = NATURAL


def gaussian_upper_tail(x):
    """Upper-tail probability ``P(X > x)`` of a standard normal variable.

    Strictly decreasing, 1 at ``-inf`` and 0 at ``+inf``.  Accepts floats or
    ndarrays.  All tail probabilities in this package use this convention,
    not the CDF.
    """
    return 0.5 * special.erfc(x / _SQRT2)


def gaussian_pdf(x):
    """Standard normal density; even, and 0 at ``+/-inf``."""
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(x))


class Hypothesis(Enum):
    """Truth state of a simulated trial: noise only, or signal present."""

    H0 = "h0"
    H1 = "h1"


@dataclass(frozen=True)
class SignalParams:
    """Amplitude and noise parameters shared by every sensor.

    ``theta`` is the (weak, nonnegative) amplitude under the alternative,
    ``sigma_n2`` the additive-noise variance, and ``sigma_h2`` the variance
    of the unit-mean multiplicative gain.
    """

    theta: float
    sigma_n2: float
    sigma_h2: float

    def __post_init__(self):
        if not self.sigma_n2 > 0:
            raise ValueError("sigma_n2 must be positive")
        if self.sigma_h2 < 0:
            raise ValueError("sigma_h2 must be nonnegative")
        if self.theta < 0:
            raise ValueError("theta must be nonnegative (one-sided test)")

    @property
    def sigma_n(self) -> float:
        return math.sqrt(self.sigma_n2)


@dataclass(frozen=True)
class QuantizerSpec:
    """A ``bits``-bit scalar quantizer defined by its interior thresholds.

    The ``2**bits - 1`` thresholds must be strictly increasing; together
    with the implicit sentinels at ``-inf`` and ``+inf`` they partition the
    real line into half-open cells ``[t[i-1], t[i])``.
    """

    bits: int
    thresholds: tuple[float, ...]

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("bits must be >= 1")
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))
        if len(self.thresholds) != 2**self.bits - 1:
            raise ValueError(
                f"expected {2**self.bits - 1} thresholds for {self.bits} bits, "
                f"got {len(self.thresholds)}"
            )
        diffs = np.diff(self.thresholds)
        if len(diffs) and not np.all(diffs > 0):
            raise ValueError("thresholds must be strictly increasing")
        if not np.all(np.isfinite(self.thresholds)):
            raise ValueError("thresholds must be finite")

    @property
    def levels(self) -> int:
        return 2**self.bits

    def edges(self) -> np.ndarray:
        """Cell edges including the infinite sentinels."""
        return np.concatenate(([-np.inf], self.thresholds, [np.inf]))


@dataclass(frozen=True)
class ChannelSpec:
    """Binary symmetric channel with per-bit crossover probability."""

    crossover: float

    def __post_init__(self):
        if not 0.0 <= self.crossover <= 0.5:
            raise ValueError("crossover must lie in [0, 0.5]")


@dataclass(frozen=True)
class QuantizedSensor:
    quantizer: QuantizerSpec
    channel: ChannelSpec


@dataclass(frozen=True)
class FullPrecisionSensor:
    """Analog reporter; assumed to reach the fusion center error-free."""


SensorSpec = Union[QuantizedSensor, FullPrecisionSensor]


@dataclass(frozen=True)
class NetworkConfig:
    """Roster of sensors plus shared signal parameters.

    Quantized sensors must precede full-precision ones.  ``l0`` is the bit
    width charged for one full-precision report; it only matters for
    bandwidth accounting, the analog samples themselves are treated as
    exact reals.
    """

    params: SignalParams
    sensors: tuple[SensorSpec, ...]
    l0: int = 32
    budget_q: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        seen_full = False
        for s in self.sensors:
            if isinstance(s, FullPrecisionSensor):
                seen_full = True
            elif seen_full:
                raise ValueError("quantized sensors must precede full-precision ones")
        if self.l0 < 1:
            raise ValueError("l0 must be a positive integer")
        if self.budget_q is not None and self.budget_q < 1:
            raise ValueError("budget_q must be positive when given")

    @property
    def quantized(self) -> tuple[QuantizedSensor, ...]:
        return tuple(s for s in self.sensors if isinstance(s, QuantizedSensor))

    @property
    def m_q(self) -> int:
        return len(self.quantized)

    @property
    def m_u(self) -> int:
        return len(self.sensors) - self.m_q

    @property
    def m_total(self) -> int:
        return len(self.sensors)


@dataclass(frozen=True)
class Codeword:
    """Fixed-length bit sequence, most significant bit first."""

    bits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))
        if not self.bits:
            raise ValueError("codeword must contain at least one bit")
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("codeword bits must be 0 or 1")

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)


def _gray_encode(v: int) -> int:
    return v ^ (v >> 1)


def _gray_decode(g: int) -> int:
    b = 0
    while g:
        b ^= g
        g >>= 1
    return b


def _code_index(level: int, bits: int, mapping: str) -> int:
    if not 1 <= level <= 2**bits:
        raise ValueError(f"level {level} out of range 1..{2**bits}")
    v = level - 1
    if mapping == GRAY:
        return _gray_encode(v)
    if mapping == NATURAL:
        return v
    raise ValueError(f"unknown codeword mapping {mapping!r}")


def level_to_codeword(level: int, bits: int, mapping: str = DEFAULT_MAPPING) -> Codeword:
    """Bijective map from quantizer level ``1..2**bits`` to a codeword."""
    v = _code_index(level, bits, mapping)
    return Codeword(tuple((v >> k) & 1 for k in range(bits - 1, -1, -1)))


def codeword_to_level(code: Codeword, mapping: str = DEFAULT_MAPPING) -> int:
    """Inverse of :func:`level_to_codeword`."""
    v = 0
    for b in code.bits:
        v = (v << 1) | b
    if mapping == GRAY:
        v = _gray_decode(v)
    elif mapping != NATURAL:
        raise ValueError(f"unknown codeword mapping {mapping!r}")
    return v + 1


def hamming_distance(a: Codeword, b: Codeword) -> int:
    """Number of differing bit positions between two equal-length codewords."""
    if len(a) != len(b):
        raise ValueError("codeword length mismatch")
    return sum(x != y for x, y in zip(a.bits, b.bits))


@lru_cache(maxsize=None)
def _level_codes(bits: int, mapping: str) -> np.ndarray:
    """Integer codeword per level, indexed by ``level - 1``."""
    return np.array([_code_index(lv, bits, mapping) for lv in range(1, 2**bits + 1)])


@lru_cache(maxsize=None)
def _code_levels(bits: int, mapping: str) -> np.ndarray:
    """Level per integer codeword; inverse permutation of ``_level_codes``."""
    codes = _level_codes(bits, mapping)
    inv = np.empty_like(codes)
    inv[codes] = np.arange(1, 2**bits + 1)
    return inv


@lru_cache(maxsize=None)
def distance_matrix(bits: int, mapping: str = DEFAULT_MAPPING) -> np.ndarray:
    """Pairwise Hamming distances between the codewords of all levels."""
    codes = _level_codes(bits, mapping)
    xor = codes[:, None] ^ codes[None, :]
    return np.vectorize(lambda v: bin(v).count("1"))(xor)


def quantize(y: float, spec: QuantizerSpec) -> int:
    """Level ``i`` with ``t[i-1] <= y < t[i]``; values on a threshold go up."""
    return bisect_right(spec.thresholds, y) + 1


def quantize_batch(y, spec: QuantizerSpec) -> np.ndarray:
    """Vectorized :func:`quantize`."""
    return np.searchsorted(spec.thresholds, np.asarray(y), side="right") + 1


def simulate_observations(
    params: SignalParams,
    hypothesis: Hypothesis,
    count: int,
    rng,
) -> np.ndarray:
    """Draw ``count`` independent sensor observations under one hypothesis.

    Under the null each sample is pure additive noise; under the
    alternative the amplitude is scaled by an independent unit-mean gain
    before the noise is added.  ``rng`` may be an integer seed or a numpy
    ``Generator``; identical seeds give identical sequences.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(rng)
    if hypothesis is Hypothesis.H0:
        return rng.normal(0.0, params.sigma_n, count)
    gain = rng.normal(1.0, math.sqrt(params.sigma_h2), count)
    noise = rng.normal(0.0, params.sigma_n, count)
    return gain * params.theta + noise


def bsc_transmit(code: Codeword, channel: ChannelSpec, rng) -> Codeword:
    """Flip each bit of ``code`` independently with the crossover probability."""
    rng = np.random.default_rng(rng)
    flips = rng.random(len(code)) < channel.crossover
    return Codeword(tuple(int(b) ^ int(f) for b, f in zip(code.bits, flips)))


def bsc_corrupt_levels(
    levels,
    bits: int,
    crossover: float,
    rng,
    mapping: str = DEFAULT_MAPPING,
) -> np.ndarray:
    """Send an array of levels through the channel; returns received levels.

    Encodes each level, flips bits independently, and decodes the corrupted
    codeword back to a level index.  With ``crossover == 0`` no randomness
    is consumed.
    """
    levels = np.asarray(levels)
    codes = _level_codes(bits, mapping)[levels - 1]
    if crossover > 0:
        rng = np.random.default_rng(rng)
        flip_bits = rng.random(levels.shape + (bits,)) < crossover
        weights = 1 << np.arange(bits)
        codes = codes ^ (flip_bits @ weights).astype(codes.dtype)
    return _code_levels(bits, mapping)[codes]


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent, reproducible stream for one unit of Monte Carlo work.

    The stream is a pure function of ``(seed, key)``; distinct keys give
    statistically independent generators.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
