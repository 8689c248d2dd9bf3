"""Point cloud color restoration.

A multi-scale graph attention network that removes compression artifacts
from point cloud color attributes, plus the surrounding toolkit: PLY and
quantization-step I/O, synthetic degradation, block partitioning, training,
checkpoints, and rate-distortion metrics. Everything heavy runs in the C++
core; arrays cross the boundary as numpy float32.
"""

from ._core import (
    Block,
    LayerKind,
    Model,
    ModelConfig,
    RunConfig,
    TrainConfig,
    bd_rate,
    build_model,
    combine,
    farthest_point_sample,
    format_run_config,
    gradient_check,
    knn,
    load_checkpoint,
    parse_run_config,
    partition,
    psnr,
    qp_step,
    read_ply,
    read_qsteps,
    restore,
    rgb_to_yuv,
    save_checkpoint,
    synth_degrade,
    train,
    write_ply,
    write_qsteps,
    yuv_psnr,
    yuv_to_rgb,
)

__all__ = [
    "Block",
    "LayerKind",
    "Model",
    "ModelConfig",
    "RunConfig",
    "TrainConfig",
    "bd_rate",
    "build_model",
    "combine",
    "farthest_point_sample",
    "format_run_config",
    "gradient_check",
    "knn",
    "load_checkpoint",
    "parse_run_config",
    "partition",
    "psnr",
    "qp_step",
    "read_ply",
    "read_qsteps",
    "restore",
    "rgb_to_yuv",
    "save_checkpoint",
    "synth_degrade",
    "train",
    "write_ply",
    "write_qsteps",
    "yuv_psnr",
    "yuv_to_rgb",
]

__version__ = "0.1.0"
