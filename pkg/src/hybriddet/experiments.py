"""Experiment runners and table emission.

Everything here is deterministic given the master seed: per-trial streams
derive from ``(seed, hypothesis, trial)``, threshold designs derive their
swarm seeds from the same master seed, and emitted files are byte-stable
across runs.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass

import numpy as np

from . import allocation as alloc
from .design import DesignProblem, PsoSettings, design_bgda, design_pso, fi_landscape, optimized_thresholds
from .detection import (
    network_kernels,
    reconstruction_table,
    theoretical_pd,
    threshold_for_pfa,
)
from .model import (
    DEFAULT_MAPPING,
    ChannelSpec,
    FullPrecisionSensor,
    Hypothesis,
    NetworkConfig,
    QuantizedSensor,
    QuantizerSpec,
    SignalParams,
    bsc_corrupt_levels,
    quantize_batch,
    simulate_observations,
    trial_rng,
)

__all__ = [
    "Table",
    "emit",
    "load_table",
    "RocScenario",
    "RocPoint",
    "run_roc",
    "roc_transmission_bits",
    "score_samples_h0",
    "SweepCase",
    "SweepScenario",
    "run_sweep",
    "LandscapeScenario",
    "run_landscape",
    "DesignScenario",
    "run_design",
    "AllocateScenario",
    "run_allocate",
]

ROC_COLUMNS = ("detector", "pfa_target", "eta", "pd_theory", "pfa_mc", "pd_mc", "stderr_mc")


@dataclass
class Table:
    """Ordered columns plus rows of plain Python scalars (or ``None``)."""

    columns: tuple[str, ...]
    rows: list[tuple]

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.rows = [tuple(r) for r in self.rows]
        for r in self.rows:
            if len(r) != len(self.columns):
                raise ValueError("row width does not match column count")


_INT_RE = re.compile(r"^[+-]?\d+$")


def _cell_to_text(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        raise TypeError("boolean cells are not supported")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _text_to_cell(text: str):
    if text == "":
        return None
    if _INT_RE.match(text):
        return int(text)
    try:
        return float(text)
    except ValueError:
        return text


def emit(table: Table, fmt: str, path) -> None:
    """Write a table as CSV (header row) or JSON (versioned envelope).

    Output bytes are a pure function of the table contents; floats use
    shortest round-trip formatting and ``None`` becomes an empty cell or
    ``null``.
    """
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(table.columns)
            for row in table.rows:
                writer.writerow([_cell_to_text(v) for v in row])
        return
    if fmt == "json":
        payload = {
            "schema_version": 1,
            "columns": list(table.columns),
            "rows": [
                [None if v is None else (int(v) if isinstance(v, (int, np.integer)) else (float(v) if isinstance(v, (float, np.floating)) else str(v))) for v in row]
                for row in table.rows
            ],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, allow_nan=False)
            fh.write("\n")
        return
    raise ValueError(f"unknown format {fmt!r}; expected 'csv' or 'json'")


def load_table(path, fmt: str) -> Table:
    """Inverse of :func:`emit`."""
    if fmt == "csv":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [tuple(_text_to_cell(c) for c in row) for row in reader]
        return Table(tuple(header), rows)
    if fmt == "json":
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("schema_version") != 1:
            raise ValueError("unsupported schema version")
        return Table(tuple(payload["columns"]), [tuple(r) for r in payload["rows"]])
    raise ValueError(f"unknown format {fmt!r}; expected 'csv' or 'json'")


# ---------------------------------------------------------------------------
# ROC experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RocPoint:
    detector: str
    pfa_target: float
    eta: float
    pd_theory: float | None
    pfa_mc: float
    pd_mc: float
    stderr_mc: float

    def row(self) -> tuple:
        return (
            self.detector,
            self.pfa_target,
            self.eta,
            self.pd_theory,
            self.pfa_mc,
            self.pd_mc,
            self.stderr_mc,
        )


@dataclass(frozen=True)
class RocScenario:
    """One ROC comparison run over a fixed sensor fleet.

    The fleet has ``m_quantized`` low-rate sensors (observed through
    ``bits_hybrid``- or ``bits_low``-bit quantizers depending on the
    detector) and ``m_full`` analog sensors.  Thresholds default to
    swarm-optimized designs for the scenario's channel quality.
    """

    theta: float = 0.25
    sigma_n2: float = 1.0
    sigma_h2: float = 0.5
    m_quantized: int = 80
    m_full: int = 20
    p_e: float = 0.0
    bits_hybrid: int = 3
    bits_low: int = 1
    l0: int = 32
    trials: int = 5000
    seed: int = 20260810
    pfa_grid: tuple[float, ...] = (0.01, 0.05, 0.1, 0.2, 0.3, 0.5)
    detectors: tuple[str, ...] = ()
    thresholds_hybrid: tuple[float, ...] | None = None
    thresholds_low: tuple[float, ...] | None = None
    mapping: str = DEFAULT_MAPPING

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        grid = tuple(self.pfa_grid)
        if any(not 0.0 < p < 1.0 for p in grid):
            raise ValueError("pfa_grid values must lie in (0, 1)")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("pfa_grid must be strictly increasing")
        if not self.detectors:
            object.__setattr__(self, "detectors", self.default_detectors())
        unknown = set(self.detectors) - set(self.default_detectors())
        if unknown:
            raise ValueError(f"unknown detectors {sorted(unknown)}")
        if self.m_quantized < 0 or self.m_full < 0 or self.m_quantized + self.m_full < 1:
            raise ValueError("the fleet must contain at least one sensor")
        if self.bits_low == self.bits_hybrid:
            raise ValueError("bits_low and bits_hybrid must differ (labels collide)")
        needs_q = {self.label_low, self.label_hybrid_q, self.label_hybrid, self.label_reconstruction}
        if self.m_quantized == 0 and needs_q & set(self.detectors):
            raise ValueError("quantized detectors need m_quantized >= 1")
        if self.m_full == 0 and {"fp", self.label_hybrid, self.label_reconstruction} & set(self.detectors):
            raise ValueError("full-precision detectors need m_full >= 1")

    @property
    def label_low(self) -> str:
        return f"{self.bits_low}b"

    @property
    def label_hybrid_q(self) -> str:
        return f"{self.bits_hybrid}b"

    @property
    def label_hybrid(self) -> str:
        return f"{self.bits_hybrid}b-fp"

    @property
    def label_reconstruction(self) -> str:
        return f"r-{self.bits_hybrid}b-fp"

    def default_detectors(self) -> tuple[str, ...]:
        return (
            "clairvoyant",
            self.label_low,
            self.label_hybrid_q,
            "fp",
            self.label_hybrid,
            self.label_reconstruction,
        )

    @property
    def m_total(self) -> int:
        return self.m_quantized + self.m_full


def _scenario_thresholds(scenario: RocScenario) -> tuple[tuple[float, ...], tuple[float, ...]]:
    settings = PsoSettings(seed=scenario.seed)
    if scenario.thresholds_hybrid is not None:
        hybrid = tuple(scenario.thresholds_hybrid)
    else:
        hybrid = optimized_thresholds(
            scenario.bits_hybrid, scenario.p_e, scenario.sigma_n2, settings,
            mapping=scenario.mapping,
        ).thresholds
    if scenario.thresholds_low is not None:
        low = tuple(scenario.thresholds_low)
    else:
        low = optimized_thresholds(
            scenario.bits_low, scenario.p_e, scenario.sigma_n2, settings,
            mapping=scenario.mapping,
        ).thresholds
    return hybrid, low


def _fleet_config(
    scenario: RocScenario,
    bits: int,
    thresholds: tuple[float, ...],
    n_quantized: int,
    n_full: int,
) -> NetworkConfig:
    params = SignalParams(scenario.theta, scenario.sigma_n2, scenario.sigma_h2)
    quantizer = QuantizerSpec(bits, thresholds)
    channel = ChannelSpec(scenario.p_e)
    sensors = tuple(QuantizedSensor(quantizer, channel) for _ in range(n_quantized))
    sensors += tuple(FullPrecisionSensor() for _ in range(n_full))
    return NetworkConfig(params, sensors, l0=scenario.l0)


def run_roc(scenario: RocScenario) -> Table:
    """Monte Carlo ROC table for the scenario's detector roster.

    Decision thresholds come from the asymptotic theory; the empirical
    false-alarm rate is reported next to the target to expose asymptotic
    error.  Theory detection probabilities are filled for the locally
    optimal detectors (the reconstruction baseline has none).
    """
    thr_hybrid, thr_low = _scenario_thresholds(scenario)
    sigma_n = math.sqrt(scenario.sigma_n2)
    params = SignalParams(scenario.theta, scenario.sigma_n2, scenario.sigma_h2)
    m_q, m_u = scenario.m_quantized, scenario.m_full
    want = set(scenario.detectors)

    kernels = {}
    lam = {}
    if {scenario.label_hybrid_q, scenario.label_hybrid, scenario.label_reconstruction} & want and m_q:
        hybrid_cfg = _fleet_config(scenario, scenario.bits_hybrid, thr_hybrid, m_q, m_u)
        kernels["hybrid_full"] = network_kernels(hybrid_cfg, scenario.mapping)
        quantized_cfg = _fleet_config(scenario, scenario.bits_hybrid, thr_hybrid, m_q, 0)
        kernels["hybrid_q"] = network_kernels(quantized_cfg, scenario.mapping)
    if scenario.label_low in want and m_q:
        low_cfg = _fleet_config(scenario, scenario.bits_low, thr_low, m_q, 0)
        kernels["low"] = network_kernels(low_cfg, scenario.mapping)
    lam["clairvoyant"] = params.theta * math.sqrt(scenario.m_total / scenario.sigma_n2)
    lam["fp"] = params.theta * math.sqrt(m_u / scenario.sigma_n2) if m_u else None
    if "hybrid_full" in kernels:
        lam[scenario.label_hybrid] = params.theta * math.sqrt(kernels["hybrid_full"].fisher_info)
        lam[scenario.label_hybrid_q] = params.theta * math.sqrt(kernels["hybrid_q"].fisher_info)
    if "low" in kernels:
        lam[scenario.label_low] = params.theta * math.sqrt(kernels["low"].fisher_info)

    recon = None
    if scenario.label_reconstruction in want:
        recon = reconstruction_table(QuantizerSpec(scenario.bits_hybrid, thr_hybrid), sigma_n)

    stats = {
        hyp: {d: np.empty(scenario.trials) for d in scenario.detectors}
        for hyp in (Hypothesis.H0, Hypothesis.H1)
    }
    empty = np.zeros(0)
    for hyp_idx, hyp in enumerate((Hypothesis.H0, Hypothesis.H1)):
        for t in range(scenario.trials):
            rng = trial_rng(scenario.seed, hyp_idx, t)
            y = simulate_observations(params, hyp, scenario.m_total, rng)
            y_q, y_u = y[:m_q], y[m_q:]
            levels_hybrid = levels_low = None
            if "hybrid_full" in kernels or recon is not None:
                sent = quantize_batch(y_q, QuantizerSpec(scenario.bits_hybrid, thr_hybrid))
                levels_hybrid = bsc_corrupt_levels(
                    sent, scenario.bits_hybrid, scenario.p_e, rng, scenario.mapping
                )
            if "low" in kernels:
                sent = quantize_batch(y_q, QuantizerSpec(scenario.bits_low, thr_low))
                levels_low = bsc_corrupt_levels(
                    sent, scenario.bits_low, scenario.p_e, rng, scenario.mapping
                )
            row = stats[hyp]
            for det in scenario.detectors:
                if det == "clairvoyant":
                    row[det][t] = y.sum() / (sigma_n * math.sqrt(scenario.m_total))
                elif det == "fp":
                    row[det][t] = float(kernels_fp_statistic(y_u, scenario))
                elif det == scenario.label_low:
                    row[det][t] = float(kernels["low"].statistic(levels_low, empty))
                elif det == scenario.label_hybrid_q:
                    row[det][t] = float(kernels["hybrid_q"].statistic(levels_hybrid, empty))
                elif det == scenario.label_hybrid:
                    row[det][t] = float(kernels["hybrid_full"].statistic(levels_hybrid, y_u))
                elif det == scenario.label_reconstruction:
                    restored = recon[levels_hybrid - 1].sum() + y_u.sum()
                    row[det][t] = restored / (sigma_n * math.sqrt(scenario.m_total))

    rows = []
    for det in scenario.detectors:
        lam_det = lam.get(det)
        for pfa in scenario.pfa_grid:
            eta = threshold_for_pfa(pfa)
            pfa_mc = float(np.mean(stats[Hypothesis.H0][det] > eta))
            pd_mc = float(np.mean(stats[Hypothesis.H1][det] > eta))
            stderr = math.sqrt(max(pd_mc * (1.0 - pd_mc), 0.0) / scenario.trials)
            pd_theory = theoretical_pd(lam_det, eta) if lam_det is not None else None
            rows.append(
                RocPoint(det, float(pfa), float(eta), pd_theory, pfa_mc, pd_mc, stderr).row()
            )
    return Table(ROC_COLUMNS, rows)


def kernels_fp_statistic(y_u: np.ndarray, scenario: RocScenario) -> float:
    """Analog-only statistic: scaled sample sum with unit null variance."""
    sigma_n = math.sqrt(scenario.sigma_n2)
    return float(y_u.sum() / (sigma_n * math.sqrt(y_u.size)))


def roc_transmission_bits(scenario: RocScenario) -> dict[str, int | None]:
    """Bits sent to the fusion center per trial, by detector.

    The clairvoyant reference is an idealized analog feed with no digital
    budget, reported as ``None``.
    """
    m_q, m_u, l0 = scenario.m_quantized, scenario.m_full, scenario.l0
    hybrid_bits = m_q * scenario.bits_hybrid + m_u * l0
    return {
        "clairvoyant": None,
        scenario.label_low: m_q * scenario.bits_low,
        scenario.label_hybrid_q: m_q * scenario.bits_hybrid,
        "fp": m_u * l0,
        scenario.label_hybrid: hybrid_bits,
        scenario.label_reconstruction: hybrid_bits,
    }


def score_samples_h0(
    config: NetworkConfig,
    trials: int,
    seed: int,
    block_size: int = 20000,
    mapping: str = DEFAULT_MAPPING,
) -> np.ndarray:
    """Unnormalized null-hypothesis scores, simulated in vectorized blocks.

    Used for moment checks (the score has zero mean and variance equal to
    the Fisher information).  Per-block streams derive from the seed, so
    results are reproducible for a fixed block size.
    """
    kernels = network_kernels(config, mapping)
    sigma_n = config.params.sigma_n
    m_q, m_u = config.m_q, config.m_u
    quantized = config.quantized
    out = np.empty(trials)
    done = 0
    block_idx = 0
    while done < trials:
        n = min(block_size, trials - done)
        rng = trial_rng(seed, block_idx)
        y = rng.normal(0.0, sigma_n, (n, m_q + m_u))
        levels = np.empty((n, m_q), dtype=np.int64)
        for pos, sensor in enumerate(quantized):
            sent = quantize_batch(y[:, pos], sensor.quantizer)
            levels[:, pos] = bsc_corrupt_levels(
                sent, sensor.quantizer.bits, sensor.channel.crossover, rng, mapping
            )
        out[done : done + n] = kernels.unnormalized_scores(levels, y[:, m_q:])
        done += n
        block_idx += 1
    return out


# ---------------------------------------------------------------------------
# Allocation sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepCase:
    name: str
    freqs: tuple[float, ...]


@dataclass(frozen=True)
class SweepScenario:
    """Detection probability versus fleet size under a fixed bit budget."""

    cases: tuple[SweepCase, ...]
    epsilons: tuple[float, ...] = (0.0, 0.01, 0.1, 0.2)
    m_values: tuple[int, ...] = tuple(range(20, 101, 10))
    budget: int = 500
    l0: int = 32
    max_bits: int = 3
    theta: float = 0.25
    sigma_n2: float = 1.0
    pfa: float = 0.1
    budget_mode: alloc.BudgetMode = alloc.BudgetMode.AT_MOST
    senses: tuple[alloc.Sense, ...] = (alloc.Sense.MAXIMIZE_FI, alloc.Sense.MINIMIZE_FI)
    seed: int = 20260810
    mapping: str = DEFAULT_MAPPING


SWEEP_COLUMNS = ("case", "m_total", "sense", "status", "total_fi", "noncentrality", "pd_theory", "bits_used")
DISTRIBUTION_COLUMNS = ("case", "m_total", "sense", "level", "epsilon", "count")


def run_sweep(scenario: SweepScenario) -> tuple[Table, Table]:
    """Solve the allocation at every (case, fleet size, sense) point.

    Returns a summary table and the per-level sensor distribution table.
    Infeasible points are reported with status ``infeasible`` rather than
    aborting the sweep.
    """
    settings = PsoSettings(seed=scenario.seed)
    dummy_hist = alloc.ErrorHistogram(
        scenario.epsilons,
        tuple(1.0 / len(scenario.epsilons) for _ in scenario.epsilons),
        len(scenario.epsilons),
    )
    table = alloc.build_fi_table(
        dummy_hist, scenario.max_bits, scenario.sigma_n2, settings, scenario.mapping
    )
    eta = threshold_for_pfa(scenario.pfa)
    summary_rows = []
    dist_rows = []
    for case in scenario.cases:
        for m in scenario.m_values:
            hist = alloc.ErrorHistogram(scenario.epsilons, case.freqs, m)
            for sense in scenario.senses:
                try:
                    result = alloc.allocate(
                        hist, table, scenario.budget, scenario.l0,
                        scenario.budget_mode, sense,
                    )
                except alloc.AllocationInfeasibleError:
                    summary_rows.append(
                        (case.name, m, sense.value, "infeasible", None, None, None, None)
                    )
                    continue
                lam = scenario.theta * math.sqrt(result.total_fi)
                summary_rows.append(
                    (
                        case.name,
                        m,
                        sense.value,
                        "optimal",
                        result.total_fi,
                        lam,
                        theoretical_pd(lam, eta),
                        result.bits_used,
                    )
                )
                for li in range(scenario.max_bits):
                    for n, eps in enumerate(scenario.epsilons):
                        dist_rows.append(
                            (case.name, m, sense.value, li + 1, eps, int(result.x_matrix[li, n]))
                        )
                for n, eps in enumerate(scenario.epsilons):
                    dist_rows.append(
                        (case.name, m, sense.value, "fp", eps, int(result.promotions[n]))
                    )
    return Table(SWEEP_COLUMNS, summary_rows), Table(DISTRIBUTION_COLUMNS, dist_rows)


# ---------------------------------------------------------------------------
# Landscape and design runners
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LandscapeScenario:
    bits: int = 2
    p_e: float = 0.2
    sigma_n2: float = 1.0
    tau_lo: float = -5.0
    tau_hi: float = 5.0
    points: int = 201
    tau2: float = 0.0
    mapping: str = DEFAULT_MAPPING


LANDSCAPE_COLUMNS = ("tau1", "tau3", "objective")


def run_landscape(scenario: LandscapeScenario) -> Table:
    """Tidy (tau1, tau3, objective) table; invalid cells carry ``None``."""
    problem = DesignProblem(
        bits=scenario.bits,
        p_e=scenario.p_e,
        sigma_n2=scenario.sigma_n2,
        tau_max=max(abs(scenario.tau_lo), abs(scenario.tau_hi)),
        mapping=scenario.mapping,
    )
    axis = np.linspace(scenario.tau_lo, scenario.tau_hi, scenario.points)
    grid = fi_landscape(problem, axis, axis, scenario.tau2)
    rows = []
    for i, t1 in enumerate(axis):
        for j, t3 in enumerate(axis):
            v = grid[i, j]
            rows.append((float(t1), float(t3), float(v) if np.isfinite(v) else None))
    return Table(LANDSCAPE_COLUMNS, rows)


@dataclass(frozen=True)
class DesignScenario:
    bits: int = 2
    p_e: float = 0.0
    sigma_n2: float = 1.0
    tau_max: float = 5.0
    methods: tuple[str, ...] = ("bgda", "pso")
    bgda_init: tuple[float, ...] | None = None
    bgda_step: float = 0.5
    seed: int = 20260810
    mapping: str = DEFAULT_MAPPING


def run_design(scenario: DesignScenario) -> Table:
    """Run the requested designers and tabulate thresholds and objectives."""
    problem = DesignProblem(
        bits=scenario.bits,
        p_e=scenario.p_e,
        sigma_n2=scenario.sigma_n2,
        tau_max=scenario.tau_max,
        mapping=scenario.mapping,
    )
    n_thr = problem.n_thresholds
    columns = ("method", "bits", "p_e", "sigma_n2", "objective", "iterations") + tuple(
        f"thr_{k+1}" for k in range(n_thr)
    )
    rows = []
    for method in scenario.methods:
        if method == "bgda":
            if problem.p_e != 0.0:
                raise ValueError("bgda requires an error-free channel (p_e = 0)")
            init = scenario.bgda_init
            if init is None:
                init = tuple(np.linspace(-1.0, 1.0, n_thr + 2)[1:-1] * problem.sigma_n)
                if n_thr == 1:
                    init = (0.0,)
            result = design_bgda(problem, init, step=scenario.bgda_step)
        elif method == "pso":
            result = design_pso(problem, PsoSettings(seed=scenario.seed))
        else:
            raise ValueError(f"unknown design method {method!r}")
        rows.append(
            (method, scenario.bits, scenario.p_e, scenario.sigma_n2,
             result.objective, len(result.trace) - 1) + tuple(result.thresholds)
        )
    return Table(columns, rows)


# ---------------------------------------------------------------------------
# One-shot allocation runner
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AllocateScenario:
    epsilons: tuple[float, ...] = (0.0, 0.01, 0.1, 0.2)
    freqs: tuple[float, ...] = (0.6, 0.2, 0.1, 0.1)
    m_total: int = 60
    budget: int = 500
    l0: int = 32
    max_bits: int = 3
    sigma_n2: float = 1.0
    budget_mode: alloc.BudgetMode = alloc.BudgetMode.AT_MOST
    sense: alloc.Sense = alloc.Sense.MAXIMIZE_FI
    seed: int = 20260810
    mapping: str = DEFAULT_MAPPING


ALLOCATE_COLUMNS = ("level", "epsilon", "count", "total_fi", "bits_used")


def run_allocate(scenario: AllocateScenario) -> Table:
    """Solve one allocation instance and emit the assignment tidily."""
    hist = alloc.ErrorHistogram(scenario.epsilons, scenario.freqs, scenario.m_total)
    settings = PsoSettings(seed=scenario.seed)
    table = alloc.build_fi_table(
        hist, scenario.max_bits, scenario.sigma_n2, settings, scenario.mapping
    )
    result = alloc.allocate(
        hist, table, scenario.budget, scenario.l0, scenario.budget_mode, scenario.sense
    )
    rows = []
    for li in range(scenario.max_bits):
        for n, eps in enumerate(scenario.epsilons):
            rows.append((li + 1, eps, int(result.x_matrix[li, n]), result.total_fi, result.bits_used))
    for n, eps in enumerate(scenario.epsilons):
        rows.append(("fp", eps, int(result.promotions[n]), result.total_fi, result.bits_used))
    return Table(ALLOCATE_COLUMNS, rows)
