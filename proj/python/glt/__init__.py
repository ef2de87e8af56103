"""Global-local transformer for age regression from image slices."""

from ._core import (
    ContractError,
    DimensionError,
    FormatError,
    IoError,
    Model,
    NumericalError,
    cumulative_score,
    evaluate,
    fuse_planes,
    gradcheck,
    load_tensor,
    mae,
    multi_head_attention,
    pearson_r,
    sample_multisize,
    save_tensor,
    slice_indices,
    sliding_window,
    subject_heatmap,
    synthetic_cohort,
)

__all__ = [
    "ContractError",
    "DimensionError",
    "FormatError",
    "IoError",
    "Model",
    "NumericalError",
    "cumulative_score",
    "evaluate",
    "fuse_planes",
    "gradcheck",
    "load_tensor",
    "mae",
    "multi_head_attention",
    "pearson_r",
    "sample_multisize",
    "save_tensor",
    "slice_indices",
    "sliding_window",
    "subject_heatmap",
    "synthetic_cohort",
]
