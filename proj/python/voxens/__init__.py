"""Voxel radiance field ensembles with density uncertainty."""

from ._core import (
    VoxensError,
    default_config,
    ensemble_stats,
    euler_xyz_from_matrix,
    load_ensemble,
    load_image,
    matrix_from_euler_xyz,
    percent_of_circumference,
    percentile,
    percentile_filter,
    psnr,
    read_ply,
    read_report,
    run,
    sweep,
    synth,
    write_ply,
)

__all__ = [
    "VoxensError",
    "default_config",
    "ensemble_stats",
    "euler_xyz_from_matrix",
    "load_ensemble",
    "load_image",
    "matrix_from_euler_xyz",
    "percent_of_circumference",
    "percentile",
    "percentile_filter",
    "psnr",
    "read_ply",
    "read_report",
    "run",
    "sweep",
    "synth",
    "write_ply",
]
