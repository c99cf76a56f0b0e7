"""Image-free single-pixel segmentation: python bindings for the C++ core."""

from spixseg._core import (
    ConfigError,
    DataError,
    Model,
    ShapeError,
    __version__,
    apply_noise,
    default_config_json,
    dice,
    hadamard_row_for_sequency,
    lr_at,
    make_hadamard_patterns,
    make_random_patterns,
    pixel_accuracy,
    run_cell,
    sampling_count,
    simulate_measurements,
    synth_natural,
    synth_wbc,
    tv_reconstruct,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Model",
    "ShapeError",
    "__version__",
    "apply_noise",
    "default_config_json",
    "dice",
    "hadamard_row_for_sequency",
    "lr_at",
    "make_hadamard_patterns",
    "make_random_patterns",
    "pixel_accuracy",
    "run_cell",
    "sampling_count",
    "simulate_measurements",
    "synth_natural",
    "synth_wbc",
    "tv_reconstruct",
]
