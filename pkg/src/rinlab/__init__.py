"""Simulation and information-rate analysis of intensity-noise-limited
optical links with direct detection."""

from .constellation import (
    Constellation,
    SymbolSequence,
    build_constellation,
    db_to_linear,
    dbm_to_watts,
    draw_symbols,
    watts_to_dbm,
)
from .filters import (
    OverlapKernel,
    PulsePair,
    cascade_response,
    design_rrc,
    overlap_kernel,
    rect_pair,
    verify_nyquist,
)
from .gmi import (
    ChannelSamples,
    GmiEstimate,
    GmiReport,
    MetricSpec,
    estimate_gmi,
    log_metric,
    optimize_s,
    sample_channel,
)
from .rin_variance import (
    EmpiricalVariance,
    MemorySweep,
    VarianceModel,
    conditional_variance,
    genie_variance,
    legacy_model,
    legacy_variance,
    polynomial_coeffs,
    variance_vs_memory,
)
from .waveform import (
    LinkConfig,
    NoiseSwitches,
    ReceivedBlock,
    mzm_transfer,
    predistort,
    simulate_link,
    white_noise_sample_std,
)

__version__ = "0.1.0"

__all__ = [
    "Constellation",
    "SymbolSequence",
    "build_constellation",
    "db_to_linear",
    "dbm_to_watts",
    "draw_symbols",
    "watts_to_dbm",
    "OverlapKernel",
    "PulsePair",
    "cascade_response",
    "design_rrc",
    "overlap_kernel",
    "rect_pair",
    "verify_nyquist",
    "ChannelSamples",
    "GmiEstimate",
    "GmiReport",
    "MetricSpec",
    "estimate_gmi",
    "log_metric",
    "optimize_s",
    "sample_channel",
    "EmpiricalVariance",
    "MemorySweep",
    "VarianceModel",
    "conditional_variance",
    "genie_variance",
    "legacy_model",
    "legacy_variance",
    "polynomial_coeffs",
    "variance_vs_memory",
    "LinkConfig",
    "NoiseSwitches",
    "ReceivedBlock",
    "mzm_transfer",
    "predistort",
    "simulate_link",
    "white_noise_sample_std",
]
