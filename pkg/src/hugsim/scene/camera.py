"""Pinhole camera with OpenCV axis conventions (x right, y down, z forward)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvariantViolation


@dataclass
class Camera:
    """Intrinsics K plus world-to-camera extrinsics (R, t)."""

    K: np.ndarray
    R: np.ndarray
    t: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        self.K = np.asarray(self.K, dtype=np.float64).reshape(3, 3)
        self.R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        self.t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if self.K[0, 0] <= 0 or self.K[1, 1] <= 0:
            raise InvariantViolation("focal lengths must be positive")

    @property
    def fx(self) -> float:
        return float(self.K[0, 0])

    @property
    def fy(self) -> float:
        return float(self.K[1, 1])

    @property
    def cx(self) -> float:
        return float(self.K[0, 2])

    @property
    def cy(self) -> float:
        return float(self.K[1, 2])

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.R.T @ self.t

    def world_to_cam(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return pts @ self.R.T + self.t

    def project(self, pts: np.ndarray) -> np.ndarray:
        """World points to pixel coordinates (no culling)."""
        pc = np.atleast_2d(self.world_to_cam(pts))
        u = self.fx * pc[:, 0] / pc[:, 2] + self.cx
        v = self.fy * pc[:, 1] / pc[:, 2] + self.cy
        return np.stack([u, v], axis=1)

    def to_dict(self) -> dict:
        return {
            "K": self.K.tolist(), "R": self.R.tolist(), "t": self.t.tolist(),
            "width": self.width, "height": self.height,
        }

    @staticmethod
    def from_dict(d: dict) -> "Camera":
        return Camera(K=np.array(d["K"]), R=np.array(d["R"]), t=np.array(d["t"]),
                      width=int(d["width"]), height=int(d["height"]))


def look_at_camera(eye, target, width, height, f=None, up=(0.0, -1.0, 0.0)) -> Camera:
    """Camera at `eye` looking toward `target` (world y points down)."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    z = target - eye
    z = z / np.linalg.norm(z)
    up = np.asarray(up, dtype=np.float64)
    x = np.cross(-up, z)
    if np.linalg.norm(x) < 1e-9:
        x = np.array([1.0, 0.0, 0.0])
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.stack([x, y, z], axis=0)
    t = -R @ eye
    if f is None:
        f = 0.8 * max(width, height)
    K = np.array([[f, 0, width / 2.0], [0, f, height / 2.0], [0, 0, 1.0]])
    return Camera(K=K, R=R, t=t, width=width, height=height)
