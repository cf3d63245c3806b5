"""Distributed weak-signal detection with hybrid quantized and
full-precision sensor reporting.

Subpackages cover the data plane (:mod:`hybriddet.model`), fusion-center
detection kernels (:mod:`hybriddet.detection`), per-sensor quantizer
design (:mod:`hybriddet.design`), a small integer programming solver
(:mod:`hybriddet.ilp`), network bandwidth allocation
(:mod:`hybriddet.allocation`), and reproducible experiment runners with a
CLI (:mod:`hybriddet.experiments`, :mod:`hybriddet.cli`).
"""

from .model import (
    DEFAULT_MAPPING,
    GRAY,
    NATURAL,
    ChannelSpec,
    Codeword,
    FullPrecisionSensor,
    Hypothesis,
    NetworkConfig,
    QuantizedSensor,
    QuantizerSpec,
    SensorSpec,
    SignalParams,
    bsc_corrupt_levels,
    bsc_transmit,
    codeword_to_level,
    gaussian_pdf,
    gaussian_upper_tail,
    hamming_distance,
    level_to_codeword,
    quantize,
    quantize_batch,
    simulate_observations,
    trial_rng,
)
from .detection import (
    DetectorOutput,
    LikelihoodKernels,
    ReceivedData,
    baseline_statistic,
    bin_prob,
    bin_score,
    bsc_kernel,
    fisher_information,
    likelihood_kernels,
    lmpt_statistic,
    network_kernels,
    theoretical_pd,
    threshold_for_pfa,
)
from .design import (
    DesignProblem,
    DesignResult,
    PsoSettings,
    design_bgda,
    design_objective,
    design_pso,
    fi_landscape,
    find_local_maxima,
    objective_gradient,
    optimized_thresholds,
)
from .ilp import IlpProblem, IlpSolution, LpResult, SolveStatus, solve_ilp, solve_lp_relaxation
from .allocation import (
    AllocationInfeasibleError,
    AllocationResult,
    BudgetMode,
    ErrorHistogram,
    FiTable,
    Sense,
    allocate,
    allocate_dp_oracle,
    build_fi_table,
    build_ilp,
    categorize_errors,
    validate_allocation,
)

__version__ = "0.1.0"
