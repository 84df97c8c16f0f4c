"""Python bindings for the d-vector speaker verification core."""

from ._core import (
    ConfigError,
    DataError,
    Error,
    FrontendConfig,
    Network,
    NetworkSpec,
    NumericError,
    SynthConfig,
    TrainConfig,
    average_pool,
    compute_eer,
    cosine,
    dtw_align,
    dtw_score,
    fbank,
    fuse,
    generate,
    oracle_posteriors,
    read_archive,
    read_wav,
    segment_pool,
    segment_score,
    stack_context,
    sweep_alpha,
    train,
    write_archive,
)

__all__ = [name for name in dir() if not name.startswith("_")]
