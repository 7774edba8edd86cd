"""User-facing rendering operations over scene-level types."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from ..errors import ConfigError
from ..scene.camera import Camera
from ..scene.gaussians import Gaussian, GaussianSet
from .core import (DEFAULT_TERMINATE_EPS, NEAR_PLANE, CameraTensors,
                   PreparedSplats, SplatParams, project_splats,
                   rasterize_full, rasterize_tiled)

ALL_MODES = ("color", "semantic", "depth", "flow", "alpha")


@dataclass
class Splat2D:
    """A projected Gaussian: pixel center, 2x2 covariance, camera depth."""

    mu2d: np.ndarray
    cov2d: np.ndarray
    depth: float
    source: int


@dataclass
class FlowContext:
    """Second-timestamp camera and per-Gaussian positions for flow rendering."""

    cam_t2: Camera
    mu_t2: np.ndarray  # (N, 3) world positions of the same Gaussians at t2


@dataclass
class RenderOutput:
    """Per-modality images; absent modalities are None."""

    color: np.ndarray | None
    semantic: np.ndarray | None
    depth: np.ndarray | None
    flow: np.ndarray | None
    alpha: np.ndarray
    counts: np.ndarray


@dataclass
class ExposureAffine:
    """Per-frame linear color correction C' = A C + b."""

    A: np.ndarray = field(default_factory=lambda: np.eye(3))
    b: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def to_dict(self):
        return {"A": np.asarray(self.A).tolist(), "b": np.asarray(self.b).tolist()}

    @staticmethod
    def from_dict(d):
        return ExposureAffine(np.array(d["A"]), np.array(d["b"]))


def project_gaussian(g: Gaussian, cam: Camera) -> Splat2D | None:
    """EWA-project one Gaussian; None when culled."""
    gs = GaussianSet(g.mu, g.quat, g.scale, np.atleast_1d(g.opacity),
                     g.sh[None], g.sem_logits[None], validate=False)
    params = SplatParams.from_set(gs)
    ct = CameraTensors.from_camera(cam)
    prep = project_splats(params, ct, modes=())
    if prep.idx.numel() == 0:
        return None
    conic = prep.conic[0].numpy()
    a, b, c = conic
    det = a * c - b * b
    cov2d = np.array([[c / det, -b / det], [-b / det, a / det]])
    return Splat2D(mu2d=prep.mu2d[0].numpy(), cov2d=cov2d,
                   depth=float(prep.depth[0]), source=0)


def _modes_tuple(modes, semantic_mode: str):
    modes = tuple(modes)
    bad = set(modes) - set(ALL_MODES)
    if bad:
        raise ConfigError(f"unknown render modes: {sorted(bad)}")
    internal = [m for m in modes if m not in ("semantic", "alpha")]
    if "semantic" in modes:
        internal.append("semantic" if semantic_mode == "3d" else "semantic2d")
    return tuple(internal)


def _prepare(gaussians: GaussianSet, cam: Camera, internal_modes,
             flow_context: FlowContext | None, dtype) -> PreparedSplats:
    params = SplatParams.from_set(gaussians, dtype=dtype)
    ct = CameraTensors.from_camera(cam, dtype=dtype)
    flow_target = flow_cam = None
    if "flow" in internal_modes:
        if flow_context is None:
            raise ConfigError("flow mode requires a flow_context")
        if np.asarray(flow_context.mu_t2).shape[0] != len(gaussians):
            raise ConfigError("flow context position count mismatch")
        flow_target = torch.as_tensor(flow_context.mu_t2, dtype=dtype)
        flow_cam = CameraTensors.from_camera(flow_context.cam_t2, dtype=dtype)
    return project_splats(params, ct, modes=internal_modes,
                          flow_target=flow_target, flow_cam=flow_cam)


def _to_output(out: dict, modes) -> RenderOutput:
    def np_(key):
        return out[key].numpy() if key in out else None

    return RenderOutput(
        color=np_("color") if "color" in modes else None,
        semantic=np_("semantic") if "semantic" in modes else None,
        depth=np_("depth") if "depth" in modes else None,
        flow=np_("flow") if "flow" in modes else None,
        alpha=out["alpha"].numpy(),
        counts=out["count"].numpy(),
    )


def rasterize(gaussians: GaussianSet, cam: Camera, modes=("color",),
              flow_context: FlowContext | None = None,
              semantic_mode: str = "3d",
              terminate_eps: float = DEFAULT_TERMINATE_EPS,
              dtype=torch.float64) -> RenderOutput:
    """Tile-based sorted alpha blending for all requested modalities."""
    internal = _modes_tuple(modes, semantic_mode)
    with torch.no_grad():
        prep = _prepare(gaussians, cam, internal, flow_context, dtype)
        out = rasterize_tiled(prep, cam.height, cam.width, internal,
                              terminate_eps=terminate_eps)
    return _to_output(out, modes)


def render_reference(gaussians: GaussianSet, cam: Camera, modes=("color",),
                     flow_context: FlowContext | None = None,
                     semantic_mode: str = "3d") -> RenderOutput:
    """Per-pixel full sort over all splats; ground truth for `rasterize`."""
    internal = _modes_tuple(modes, semantic_mode)
    with torch.no_grad():
        prep = _prepare(gaussians, cam, internal, flow_context, torch.float64)
        out = rasterize_full(prep, cam.height, cam.width, internal)
    return _to_output(out, modes)


def flow_vectors(mu_t1: np.ndarray, mu_t2: np.ndarray,
                 cam_t1: Camera, cam_t2: Camera) -> np.ndarray:
    """Per-Gaussian image-space motion mu'_2 - mu'_1 for index-aligned positions."""
    mu_t1 = np.asarray(mu_t1, dtype=np.float64).reshape(-1, 3)
    mu_t2 = np.asarray(mu_t2, dtype=np.float64).reshape(-1, 3)
    if mu_t1.shape != mu_t2.shape:
        raise ConfigError("flow_vectors requires index-aligned position lists")
    return cam_t2.project(mu_t2) - cam_t1.project(mu_t1)


def apply_exposure(image: np.ndarray, aff: ExposureAffine) -> np.ndarray:
    """Linear-space per-pixel affine correction, no clamping."""
    return image @ np.asarray(aff.A, dtype=np.float64).T + np.asarray(aff.b)


def fit_exposure_lstsq(image: np.ndarray, target: np.ndarray) -> ExposureAffine:
    """Closed-form least squares for (A, b) mapping image -> target."""
    X = image.reshape(-1, 3)
    Y = target.reshape(-1, 3)
    Xa = np.hstack([X, np.ones((X.shape[0], 1))])
    sol, *_ = np.linalg.lstsq(Xa, Y, rcond=None)
    return ExposureAffine(A=sol[:3].T, b=sol[3])
