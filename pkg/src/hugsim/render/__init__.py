from .api import (ALL_MODES, ExposureAffine, FlowContext, RenderOutput, Splat2D,
                  apply_exposure, fit_exposure_lstsq, flow_vectors,
                  project_gaussian, rasterize, render_reference)
from .core import (CUTOFF_SIGMA, DEFAULT_TERMINATE_EPS, LOWPASS, NEAR_PLANE,
                   TILE, CameraTensors, SplatParams, covariance_3d_torch,
                   project_splats, rasterize_full, rasterize_tiled)
from .export import (read_pfm, read_pgm, read_ppm, write_pfm, write_pgm_labels,
                     write_ppm)
from .sh import eval_sh_basis, num_coeffs, rgb_to_sh, sh_to_rgb

__all__ = [
    "ALL_MODES", "ExposureAffine", "FlowContext", "RenderOutput", "Splat2D",
    "apply_exposure", "fit_exposure_lstsq", "flow_vectors", "project_gaussian",
    "rasterize", "render_reference", "CUTOFF_SIGMA", "DEFAULT_TERMINATE_EPS",
    "LOWPASS", "NEAR_PLANE", "TILE", "CameraTensors", "SplatParams",
    "covariance_3d_torch", "project_splats", "rasterize_full",
    "rasterize_tiled", "read_pfm", "read_pgm", "read_ppm", "write_pfm",
    "write_pgm_labels", "write_ppm", "eval_sh_basis", "num_coeffs",
    "rgb_to_sh", "sh_to_rgb",
]
