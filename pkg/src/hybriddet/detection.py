"""Fusion-center side: likelihood kernels, Fisher information, the hybrid
weak-signal test statistic, its asymptotic ROC theory, and the reference
detectors used for comparison.

All kernels are evaluated at amplitude zero, where the locally optimal
statistic lives.  The quantized-sensor score divides by ``sigma_n**3`` (and
the information sum by ``sigma_n**6``) so that the unnormalized score has
variance exactly equal to the Fisher information for any noise level; see
the variance-identity tests.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from .model import (
    DEFAULT_MAPPING,
    Codeword,
    FullPrecisionSensor,
    NetworkConfig,
    QuantizedSensor,
    QuantizerSpec,
    ChannelSpec,
    codeword_to_level,
    distance_matrix,
    gaussian_pdf,
    gaussian_upper_tail,
)

__all__ = [
    "LikelihoodKernels",
    "DetectorOutput",
    "ReceivedData",
    "NetworkKernels",
    "bin_prob",
    "bin_probs",
    "bin_score",
    "bin_scores",
    "bsc_kernel",
    "likelihood_kernels",
    "fisher_information",
    "network_kernels",
    "lmpt_statistic",
    "threshold_for_pfa",
    "theoretical_pd",
    "reconstruction_table",
    "baseline_statistic",
    "BASELINE_KINDS",
]

logger = logging.getLogger(__name__)


def bin_probs(spec: QuantizerSpec, sigma_n: float) -> np.ndarray:
    """Noise-only probability of each quantizer cell; sums to 1."""
    z = spec.edges() / sigma_n
    tails = gaussian_upper_tail(z)
    return tails[:-1] - tails[1:]


def bin_scores(spec: QuantizerSpec, sigma_n: float) -> np.ndarray:
    """Per-cell score weights ``sigma_n**2 * (pdf(z[j-1]) - pdf(z[j]))``.

    Telescoping makes them sum to zero; dividing by ``sigma_n**3`` turns
    them into the amplitude-derivative of the log cell probability at zero.
    """
    z = spec.edges() / sigma_n
    dens = gaussian_pdf(z)
    return sigma_n**2 * (dens[:-1] - dens[1:])


def bin_prob(level: int, spec: QuantizerSpec, sigma_n: float) -> float:
    """Noise-only probability of cell ``level`` (1-indexed)."""
    if not 1 <= level <= spec.levels:
        raise ValueError(f"level {level} out of range 1..{spec.levels}")
    return float(bin_probs(spec, sigma_n)[level - 1])


def bin_score(level: int, spec: QuantizerSpec, sigma_n: float) -> float:
    """Score weight of cell ``level`` (1-indexed)."""
    if not 1 <= level <= spec.levels:
        raise ValueError(f"level {level} out of range 1..{spec.levels}")
    return float(bin_scores(spec, sigma_n)[level - 1])


def bsc_kernel(bits: int, p_e: float, mapping: str = DEFAULT_MAPPING) -> np.ndarray:
    """Level transition matrix of the binary symmetric channel.

    Entry ``(i, j)`` is the probability of receiving the codeword of level
    ``i`` when level ``j`` was sent: ``p_e**D * (1 - p_e)**(bits - D)`` with
    ``D`` the Hamming distance between the two codewords.  Doubly
    stochastic for any bijective mapping.
    """
    if not 0.0 <= p_e <= 0.5:
        raise ValueError("p_e must lie in [0, 0.5]")
    dist = distance_matrix(bits, mapping)
    return np.power(p_e, dist) * np.power(1.0 - p_e, bits - dist)


@dataclass(frozen=True)
class LikelihoodKernels:
    """Precomputed per-sensor tables for one quantizer/channel pair.

    ``received_probs`` and ``score_numerators`` are indexed by received
    level; ``score_table`` is the per-received-level contribution to the
    unnormalized statistic and ``fi_contribution`` the sensor's share of
    the Fisher information.
    """

    bin_probs: np.ndarray
    bin_scores: np.ndarray
    bsc_matrix: np.ndarray
    received_probs: np.ndarray
    score_numerators: np.ndarray
    score_table: np.ndarray
    fi_contribution: float


def likelihood_kernels(
    quantizer: QuantizerSpec,
    channel: ChannelSpec,
    sigma_n: float,
    mapping: str = DEFAULT_MAPPING,
) -> LikelihoodKernels:
    """Build all zero-amplitude tables for one quantized sensor."""
    probs = bin_probs(quantizer, sigma_n)
    scores = bin_scores(quantizer, sigma_n)
    kernel = bsc_kernel(quantizer.bits, channel.crossover, mapping)
    received = kernel @ probs
    numerators = kernel @ scores
    live = received > 0.0
    if not np.all(live):
        logger.warning(
            "quantizer has %d received levels with zero probability; "
            "their score contribution is defined as 0",
            int(np.count_nonzero(~live)),
        )
    score_table = np.where(live, numerators / np.where(live, received, 1.0), 0.0)
    score_table = score_table / sigma_n**3
    fi = float(np.sum(np.where(live, numerators**2 / np.where(live, received, 1.0), 0.0)))
    fi /= sigma_n**6
    return LikelihoodKernels(
        bin_probs=probs,
        bin_scores=scores,
        bsc_matrix=kernel,
        received_probs=received,
        score_numerators=numerators,
        score_table=score_table,
        fi_contribution=fi,
    )


@dataclass(frozen=True)
class ReceivedData:
    """One trial's inputs at the fusion center.

    ``codewords`` holds the received codeword of each quantized sensor in
    roster order; ``analog`` the raw samples of the full-precision sensors.
    """

    codewords: tuple[Codeword, ...]
    analog: tuple[float, ...]


@dataclass(frozen=True)
class DetectorOutput:
    statistic: float
    fisher_info: float
    noncentrality: float


class NetworkKernels:
    """Per-configuration tables shared read-only across Monte Carlo trials.

    Sensors with identical quantizer/channel pairs share one score table;
    ``unnormalized_scores`` accepts either a single trial (1-D levels) or a
    batch (levels with a leading trial axis).
    """

    def __init__(self, config: NetworkConfig, mapping: str = DEFAULT_MAPPING):
        sigma_n = config.params.sigma_n
        groups: dict[tuple, list[int]] = {}
        table_for: dict[tuple, LikelihoodKernels] = {}
        for pos, sensor in enumerate(config.quantized):
            key = (
                sensor.quantizer.bits,
                sensor.quantizer.thresholds,
                sensor.channel.crossover,
            )
            if key not in table_for:
                table_for[key] = likelihood_kernels(
                    sensor.quantizer, sensor.channel, sigma_n, mapping
                )
            groups.setdefault(key, []).append(pos)
        self.config = config
        self.mapping = mapping
        self.sigma_n = sigma_n
        self.groups = tuple(
            (np.array(idx), table_for[key].score_table) for key, idx in groups.items()
        )
        self.kernels = tuple(table_for.values())
        quantized_fi = sum(
            table_for[key].fi_contribution * len(idx) for key, idx in groups.items()
        )
        self.fisher_info = quantized_fi + config.m_u / config.params.sigma_n2

    def unnormalized_scores(self, levels, analog) -> np.ndarray | float:
        """Zero-amplitude score; ``levels``/``analog`` may carry a batch axis."""
        levels = np.asarray(levels)
        analog = np.asarray(analog, dtype=float)
        total = 0.0
        for idx, table in self.groups:
            total = total + table[levels[..., idx] - 1].sum(axis=-1)
        if analog.size:
            total = total + analog.sum(axis=-1) / self.config.params.sigma_n2
        return total

    def statistic(self, levels, analog) -> np.ndarray | float:
        """Normalized statistic; asymptotically standard normal under the null."""
        if self.fisher_info <= 0.0:
            raise ValueError("Fisher information is zero; statistic undefined")
        return self.unnormalized_scores(levels, analog) / math.sqrt(self.fisher_info)


def network_kernels(config: NetworkConfig, mapping: str = DEFAULT_MAPPING) -> NetworkKernels:
    return NetworkKernels(config, mapping)


def fisher_information(config: NetworkConfig, mapping: str = DEFAULT_MAPPING) -> float:
    """Zero-amplitude Fisher information of the whole network.

    Additive over sensors: quantized sensors contribute their kernel sum,
    each full-precision sensor contributes ``1 / sigma_n2``.
    """
    return network_kernels(config, mapping).fisher_info


def lmpt_statistic(
    config: NetworkConfig,
    data: ReceivedData,
    mapping: str = DEFAULT_MAPPING,
) -> DetectorOutput:
    """Locally optimal hybrid test statistic for one trial.

    The unnormalized score sums each quantized sensor's table entry at its
    received level plus ``v / sigma_n2`` for each analog sample, and is
    divided by the square root of the Fisher information.
    """
    if len(data.codewords) != config.m_q or len(data.analog) != config.m_u:
        raise ValueError("received data does not match the sensor roster")
    kernels = network_kernels(config, mapping)
    if kernels.fisher_info <= 0.0:
        raise ValueError("Fisher information is zero; statistic undefined")
    levels = np.array(
        [codeword_to_level(cw, mapping) for cw in data.codewords], dtype=int
    )
    score = kernels.unnormalized_scores(levels, np.asarray(data.analog, dtype=float))
    fi = kernels.fisher_info
    return DetectorOutput(
        statistic=float(score / math.sqrt(fi)),
        fisher_info=fi,
        noncentrality=config.params.theta * math.sqrt(fi),
    )


def threshold_for_pfa(p_fa: float) -> float:
    """Decision threshold whose upper-tail probability equals ``p_fa``."""
    if not 0.0 < p_fa < 1.0:
        raise ValueError("p_fa must lie strictly inside (0, 1)")
    return float(-special.ndtri(p_fa))


def theoretical_pd(lam: float, eta: float) -> float:
    """Asymptotic detection probability at threshold ``eta``.

    The statistic is asymptotically normal with unit variance and mean
    ``lam`` under the alternative, so this is the upper tail of
    ``N(lam, 1)`` above ``eta``.
    """
    return float(gaussian_upper_tail(eta - lam))


def reconstruction_table(quantizer: QuantizerSpec, sigma_n: float) -> np.ndarray:
    """Noise-only conditional cell centroids, indexed by level.

    ``E[y | level, noise only] = sigma_n * (pdf(z[j-1]) - pdf(z[j])) / P(cell)``.
    Used by the reconstruction baseline, which decodes each received level
    to its centroid without attempting any channel correction.
    """
    probs = bin_probs(quantizer, sigma_n)
    return bin_scores(quantizer, sigma_n) / (sigma_n * probs)


BASELINE_KINDS = ("clairvoyant", "quantized_only", "fp_only", "reconstruction_hybrid")


def _subnetwork(config: NetworkConfig, keep_quantized: bool, keep_full: bool) -> NetworkConfig:
    sensors: list = []
    if keep_quantized:
        sensors.extend(config.quantized)
    if keep_full:
        sensors.extend(s for s in config.sensors if isinstance(s, FullPrecisionSensor))
    if not sensors:
        raise ValueError("requested baseline has an empty sensor subset")
    return replace(config, sensors=tuple(sensors))


def baseline_statistic(
    kind: str,
    config: NetworkConfig,
    observations=None,
    data: ReceivedData | None = None,
    mapping: str = DEFAULT_MAPPING,
) -> float:
    """Reference detectors used alongside the hybrid statistic.

    ``clairvoyant`` averages raw analog samples from every sensor;
    ``quantized_only`` and ``fp_only`` apply the locally optimal statistic
    to the respective roster subset; ``reconstruction_hybrid`` replaces
    each received level by its noise-only centroid and averages those with
    the analog samples.  The averaging baselines divide by
    ``sigma_n * sqrt(M)``, which bounds the null variance by one; only the
    threshold sweep (ROC) behavior matters for comparisons.
    """
    sigma_n = config.params.sigma_n
    if kind == "clairvoyant":
        if observations is None or len(observations) == 0:
            raise ValueError("clairvoyant baseline needs raw observations")
        y = np.asarray(observations, dtype=float)
        return float(y.sum() / (sigma_n * math.sqrt(y.size)))
    if kind == "quantized_only":
        if data is None:
            raise ValueError("quantized_only baseline needs received data")
        sub = _subnetwork(config, keep_quantized=True, keep_full=False)
        return lmpt_statistic(sub, ReceivedData(data.codewords, ()), mapping).statistic
    if kind == "fp_only":
        if data is None:
            raise ValueError("fp_only baseline needs received data")
        sub = _subnetwork(config, keep_quantized=False, keep_full=True)
        return lmpt_statistic(sub, ReceivedData((), data.analog), mapping).statistic
    if kind == "reconstruction_hybrid":
        if data is None:
            raise ValueError("reconstruction_hybrid baseline needs received data")
        if config.m_q == 0:
            raise ValueError("reconstruction_hybrid needs at least one quantized sensor")
        values = []
        for sensor, cw in zip(config.quantized, data.codewords):
            table = reconstruction_table(sensor.quantizer, sigma_n)
            values.append(table[codeword_to_level(cw, mapping) - 1])
        values.extend(float(v) for v in data.analog)
        total = float(np.sum(values))
        return total / (sigma_n * math.sqrt(config.m_total))
    raise ValueError(f"unknown baseline kind {kind!r}; expected one of {BASELINE_KINDS}")
