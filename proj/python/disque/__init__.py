"""Python bindings for the disque toolkit.

The extension links libtorch from the torch wheel, so torch must be imported
first to bring its shared libraries into the process.
"""

import torch  # noqa: F401  (loads libtorch before the extension)

from ._core import (  # noqa: F401
    DisqueError,
    Model,
    distort,
    fr_feature,
    linear_to_pq,
    linear_to_srgb,
    metrics,
    pq_eotf,
    pq_oetf,
    pq_to_linear,
    sample_transform,
    screen_image,
    srgb_eotf,
    srgb_oetf,
    srgb_to_linear,
    synth_image,
    tone_map,
    train,
)

__all__ = [
    "DisqueError",
    "Model",
    "distort",
    "fr_feature",
    "linear_to_pq",
    "linear_to_srgb",
    "metrics",
    "pq_eotf",
    "pq_oetf",
    "pq_to_linear",
    "sample_transform",
    "screen_image",
    "srgb_eotf",
    "srgb_oetf",
    "srgb_to_linear",
    "synth_image",
    "tone_map",
    "train",
]
