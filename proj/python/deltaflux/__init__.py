"""Sparse CNN inference on video frame differences.

The C++ core processes only per-pixel frame deltas across a video
sequence, persisting features in wrapped spherical tile buffers so the
camera can pan indefinitely. See the package README for the file formats
and the network description schema.
"""

from deltaflux._core import (
    ConvParams,
    DeltaEngine,
    DeltafluxError,
    EngineConfig,
    NetworkSpec,
    dense_avgpool,
    dense_conv2d,
    dense_maxpool,
    dense_relu,
    dense_upsample_nearest,
    identity_homography,
    load_frame,
    load_network,
    load_tensor,
    run_dense,
    save_ppm,
    save_tensor,
    translation_homography,
    wrap_tile,
)

__all__ = [
    "ConvParams",
    "DeltaEngine",
    "DeltafluxError",
    "EngineConfig",
    "NetworkSpec",
    "dense_avgpool",
    "dense_conv2d",
    "dense_maxpool",
    "dense_relu",
    "dense_upsample_nearest",
    "identity_homography",
    "load_frame",
    "load_network",
    "load_tensor",
    "run_dense",
    "save_ppm",
    "save_tensor",
    "translation_homography",
    "wrap_tile",
]
