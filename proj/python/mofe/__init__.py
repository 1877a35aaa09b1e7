# Copyright 2026 The mofe-restore Authors
# SPDX-License-Identifier: Apache-2.0
"""Python bindings for the mofe-restore C++ core.

Images are float32 numpy arrays shaped [C, H, W] with values in [0, 1].
"""

from ._mofe import (
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    EmbeddingStore,
    GuidanceTriplet,
    Model,
    degrade,
    dft2,
    dwt_haar,
    idwt_haar,
    parse_combo,
    procedural_image,
    psnr,
    read_ppm,
    ssim,
    standard_combos,
    write_ppm,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DataError",
    "DimensionError",
    "EmbeddingStore",
    "GuidanceTriplet",
    "Model",
    "degrade",
    "dft2",
    "dwt_haar",
    "idwt_haar",
    "parse_combo",
    "procedural_image",
    "psnr",
    "read_ppm",
    "ssim",
    "standard_combos",
    "write_ppm",
]
