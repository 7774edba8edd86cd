"""Multi-plane ground model: camera-anchored overlapping depth windows."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree


@dataclass
class GroundWindow:
    """One local plane: an anchor camera pose and its member ground Gaussians."""

    anchor_R: np.ndarray  # world->camera
    anchor_t: np.ndarray
    members: np.ndarray  # indices into the ground Gaussian set

    def heights(self, mu_world: np.ndarray) -> np.ndarray:
        """Camera-frame y (height axis) of member Gaussians."""
        pts = mu_world[self.members].astype(np.float64)
        cam = pts @ np.asarray(self.anchor_R, dtype=np.float64).T + np.asarray(self.anchor_t)
        return cam[:, 1]


@dataclass
class GroundPlaneSet:
    """Overlapping windows of depth extent delta_z anchored at camera poses."""

    windows: list[GroundWindow]
    delta_z: float = 10.0

    def to_dict(self) -> dict:
        return {
            "delta_z": self.delta_z,
            "windows": [
                {"anchor_R": w.anchor_R.tolist(), "anchor_t": w.anchor_t.tolist(),
                 "members": np.asarray(w.members).tolist()}
                for w in self.windows
            ],
        }

    @staticmethod
    def from_dict(d: dict) -> "GroundPlaneSet":
        return GroundPlaneSet(
            windows=[
                GroundWindow(np.array(w["anchor_R"]), np.array(w["anchor_t"]),
                             np.array(w["members"], dtype=np.int64))
                for w in d["windows"]
            ],
            delta_z=float(d["delta_z"]),
        )


def build_ground_planes(mu_world, camera_poses, delta_z=10.0) -> GroundPlaneSet:
    """Assign ground Gaussians to overlapping per-camera windows.

    camera_poses: list of (R, t) world->camera. A Gaussian joins the window of
    every camera whose frame sees it at 0 <= z < delta_z, so neighbouring
    windows overlap. Gaussians not covered join the nearest camera's window.
    """
    mu_world = np.asarray(mu_world, dtype=np.float64)
    n = mu_world.shape[0]
    windows = []
    covered = np.zeros(n, dtype=bool)
    for R, t in camera_poses:
        cam = mu_world @ np.asarray(R, dtype=np.float64).T + np.asarray(t, dtype=np.float64)
        mask = (cam[:, 2] >= -0.5 * delta_z) & (cam[:, 2] < delta_z)
        members = np.nonzero(mask)[0]
        covered[members] = True
        windows.append(GroundWindow(np.asarray(R, dtype=np.float64),
                                    np.asarray(t, dtype=np.float64), members))
    leftovers = np.nonzero(~covered)[0]
    if leftovers.size and windows:
        centers = np.array([-np.asarray(R).T @ np.asarray(t) for R, t in camera_poses])
        nearest = np.argmin(
            np.linalg.norm(mu_world[leftovers, None, :] - centers[None], axis=2), axis=1)
        for wi, w in enumerate(windows):
            extra = leftovers[nearest == wi]
            if extra.size:
                w.members = np.concatenate([w.members, extra])
    return GroundPlaneSet(windows=windows, delta_z=delta_z)


class GroundSurface:
    """Height lookup y(x, z) from ground Gaussian centers (k-NN average)."""

    def __init__(self, mu_world: np.ndarray, k: int = 8):
        self._mu = np.asarray(mu_world, dtype=np.float64)
        self._tree = cKDTree(self._mu[:, [0, 2]])
        self._k = min(k, self._mu.shape[0])

    def height(self, x: float, z: float) -> float:
        _, idx = self._tree.query([x, z], k=self._k)
        return float(np.mean(self._mu[np.atleast_1d(idx), 1]))
