"""Standalone vehicle assets: reconstruction, placement, shadows."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, InvariantViolation
from ..fit.config import FitConfig
from ..fit.losses import LossWeights
from ..fit.optimize import FitFrame, optimize_scene
from ..render.sh import rgb_to_sh
from ..scene.gaussians import GaussianSet
from ..scene.graph import actor_rotation

EXTENT_MARGIN = 1.10
SHADOW_GRID = 0.15  # meters between shadow Gaussians
SHADOW_STRENGTH = 0.6
SHADOW_SHADE = 0.02
MIN_VIEWS = 12


@dataclass
class VehicleAsset:
    """A reconstructed vehicle in its canonical object frame.

    Canonical axes: x right (width), y down (height), z forward (length),
    origin at the box center; the underside sits at y = h/2.
    """

    asset_id: str
    gaussians: GaussianSet
    extents: tuple[float, float, float]  # (l, w, h)
    shadow: GaussianSet | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.extents = tuple(float(e) for e in self.extents)
        self.validate()

    def validate(self) -> None:
        l, w, h = self.extents
        half = EXTENT_MARGIN * 0.5 * np.array([w, h, l])
        outside = np.nonzero(np.any(np.abs(self.gaussians.mu) > half, axis=1))[0]
        if outside.size:
            raise InvariantViolation(
                f"asset {self.asset_id!r}: gaussian {outside[0]} outside "
                f"extents + 10% margin")
        if self.shadow is not None and len(self.shadow):
            if not np.allclose(self.shadow.mu[:, 1], h / 2):
                raise InvariantViolation(
                    f"asset {self.asset_id!r}: shadow not at ground level")

    def all_gaussians(self) -> GaussianSet:
        """Body plus shadow, shadow last so it never occludes the body from above."""
        if self.shadow is None or len(self.shadow) == 0:
            return self.gaussians
        return GaussianSet.concat([self.gaussians, self.shadow])

    def placed(self, pose, surface) -> GaussianSet:
        """World-frame Gaussians for a BEV pose (x, z, theta) on a ground surface."""
        return place_actor(self, pose, surface)


def place_actor(asset: VehicleAsset, pose, surface) -> GaussianSet:
    """Rigidly place body and shadow; height comes from the ground query."""
    x, z, theta = float(pose[0]), float(pose[1]), float(pose[2])
    R = actor_rotation(theta)
    y_center = surface.height(x, z) - 0.5 * asset.extents[2]
    return asset.all_gaussians().transformed(R, np.array([x, y_center, z]))


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def add_shadow(asset: VehicleAsset, strength: float = SHADOW_STRENGTH,
               grid: float = SHADOW_GRID,
               corner_radius: float | None = None) -> VehicleAsset:
    """Attach flat dark Gaussians under the body, imitating overhead sun.

    The footprint is the l x w rounded rectangle (corner radius defaults to
    0.3 min(l, w)); opacity falls off with a smoothstep of distance from the
    bottom center.
    """
    l, w, h = asset.extents
    r = 0.3 * min(l, w) if corner_radius is None else float(corner_radius)
    xs = np.arange(-w / 2 + grid / 2, w / 2, grid)
    zs = np.arange(-l / 2 + grid / 2, l / 2, grid)
    gx, gz = np.meshgrid(xs, zs, indexing="ij")
    gx, gz = gx.ravel(), gz.ravel()
    # signed distance to the rounded rectangle: keep interior points
    qx = np.abs(gx) - (w / 2 - r)
    qz = np.abs(gz) - (l / 2 - r)
    dist = np.hypot(np.maximum(qx, 0.0), np.maximum(qz, 0.0)) + \
        np.minimum(np.maximum(qx, qz), 0.0) - r
    keep = dist <= 0.0
    gx, gz = gx[keep], gz[keep]
    n = gx.size

    r_max = float(np.hypot(w / 2, l / 2))
    d = np.hypot(gx, gz)
    opacity = strength * _smoothstep(1.0 - d / r_max)

    n_coeffs = asset.gaussians.sh_coeffs
    n_classes = asset.gaussians.num_classes
    sh = np.zeros((n, n_coeffs, 3))
    sh[:, 0, :] = rgb_to_sh(np.full((n, 3), SHADOW_SHADE))
    mu = np.stack([gx, np.full(n, h / 2), gz], axis=1)
    shadow = GaussianSet(
        mu, np.tile([1.0, 0.0, 0.0, 0.0], (n, 1)),
        np.tile([grid * 0.8, 0.005, grid * 0.8], (n, 1)),
        np.clip(opacity, 1e-4, 1.0), sh, np.zeros((n, n_classes)),
        validate=False,
    )
    return VehicleAsset(asset.asset_id, asset.gaussians, asset.extents,
                        shadow=shadow, meta=dict(asset.meta))


def _azimuth_coverage_ok(frames: list[FitFrame], min_views: int) -> bool:
    centers = np.array([f.camera.center for f in frames])
    az = np.arctan2(centers[:, 2], centers[:, 0])
    az = np.sort(np.mod(az, 2 * np.pi))
    gaps = np.diff(np.concatenate([az, [az[0] + 2 * np.pi]]))
    return len(frames) >= min_views and gaps.max() <= 2 * np.pi / 6


def default_vehicle_init(extents, n: int = 80, seed: int = 0,
                         n_coeffs: int = 1, n_classes: int = 5,
                         sem_class: int = 3) -> GaussianSet:
    """Random Gaussians filling the canonical box, a generic starting point."""
    rng = np.random.default_rng(seed)
    l, w, h = extents
    mu = rng.uniform(-0.5, 0.5, (n, 3)) * np.array([w, h, l]) * 0.9
    sh = np.zeros((n, n_coeffs, 3))
    sh[:, 0, :] = rgb_to_sh(rng.uniform(0.3, 0.7, (n, 3)))
    sem = np.full((n, n_classes), -2.0)
    sem[:, sem_class] = 4.0
    scale = np.full((n, 3), 0.3 * (l * w * h / n) ** (1 / 3) + 0.08)
    return GaussianSet(mu, np.tile([1.0, 0, 0, 0], (n, 1)), scale,
                       np.full(n, 0.5), sh, sem, validate=False)


def reconstruct_vehicle(frames: list[FitFrame], extents,
                        init: GaussianSet | None = None,
                        weights: LossWeights | None = None,
                        config: FitConfig | None = None,
                        asset_id: str = "vehicle",
                        dtype=None) -> VehicleAsset:
    """Fit a canonical-frame vehicle from posed, masked captures.

    Image supervision applies inside the mask (targets are premultiplied so
    the background is black) and the alpha loss pushes accumulated opacity
    toward the silhouette, forcing background alpha to zero.
    """
    if not frames:
        raise ConfigError("vehicle reconstruction needs posed masked views")
    for f in frames:
        if f.mask is None:
            raise ConfigError("every reconstruction view needs a mask")
        if f.mask.shape != f.color.shape[:2]:
            raise ConfigError(
                f"mask shape {f.mask.shape} does not match image {f.color.shape[:2]}")
    if not _azimuth_coverage_ok(frames, MIN_VIEWS):
        warnings.warn("views do not cover 360 degrees of azimuth; "
                      "reconstruction may be one-sided", stacklevel=2)

    masked = [FitFrame(camera=f.camera,
                       color=np.asarray(f.color) * np.asarray(f.mask)[:, :, None],
                       semantic=f.semantic, mask=f.mask)
              for f in frames]
    weights = weights or LossWeights(lambda_ssim=0.2, lambda_alpha=1.0)
    config = config or FitConfig(iterations=800)
    init = init if init is not None else default_vehicle_init(extents, seed=config.seed)
    extra = {} if dtype is None else {"dtype": dtype}
    half = 0.5 * np.array([extents[1], extents[2], extents[0]])
    fitted, _, log, _ = optimize_scene(init, masked, weights, config,
                                       mu_bounds=(-half, half), **extra)
    # anything still fully transparent is clutter
    fitted = fitted[fitted.opacity >= 0.01]
    return VehicleAsset(asset_id, fitted, tuple(extents),
                        meta={"views": len(frames), "log_tail": log[-1] if log else None})
