"""Heart-sound beat classification: preprocessing, features, models and metrics."""

from ._pcgcls import (
    ConfigError,
    DataError,
    Model,
    NumericError,
    PcgError,
    bandpass_response,
    evaluate_counts,
    filter_zero_phase,
    fuse_scores,
    levinson,
    mfcc,
    preprocess,
    run,
    segment,
    synth,
    tvar,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Model",
    "NumericError",
    "PcgError",
    "bandpass_response",
    "evaluate_counts",
    "filter_zero_phase",
    "fuse_scores",
    "levinson",
    "mfcc",
    "preprocess",
    "run",
    "segment",
    "synth",
    "tvar",
]
