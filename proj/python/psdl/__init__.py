"""Photometric stereo with adaptive dictionary learning.

Thin numpy-facing wrapper around the C++ core. Images live in (m1, m2, d)
arrays, normal fields in (m1, m2, 3) arrays, masks in boolean (m1, m2)
arrays.
"""

from ._psdl import (
    CalibrationError,
    ContractError,
    DictLearnConfig,
    IllPosedError,
    ImageStack,
    IoError,
    LightSet,
    Mask,
    NormalField,
    SolveReport,
    SolverConfig,
    adjoint_patches,
    angular_error_map,
    apply_poisson,
    calibrate_scale,
    dlnv,
    dlpi,
    dlpi_preprocess,
    empirical_snr_db,
    extract_patches,
    generate_sphere,
    gram_diagonal,
    least_squares,
    load_dataset,
    mean_angular_error,
    select_light_subset,
    well_spread_lights,
)

__version__ = "0.1.0"

__all__ = [
    "CalibrationError",
    "ContractError",
    "DictLearnConfig",
    "IllPosedError",
    "ImageStack",
    "IoError",
    "LightSet",
    "Mask",
    "NormalField",
    "SolveReport",
    "SolverConfig",
    "adjoint_patches",
    "angular_error_map",
    "apply_poisson",
    "calibrate_scale",
    "dlnv",
    "dlpi",
    "dlpi_preprocess",
    "empirical_snr_db",
    "extract_patches",
    "generate_sphere",
    "gram_diagonal",
    "least_squares",
    "load_dataset",
    "mean_angular_error",
    "select_light_subset",
    "well_spread_lights",
]
