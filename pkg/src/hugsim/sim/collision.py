"""Collision checks: oriented BEV rectangles and background Gaussian counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BG_ALPHA_MIN = 0.3
BG_COUNT_MIN = 20


@dataclass(frozen=True)
class BEVBox:
    """Oriented rectangle in the BEV (x, z) plane."""

    x: float
    z: float
    theta: float
    length: float  # along heading
    width: float

    def corners(self) -> np.ndarray:
        c, s = np.cos(self.theta), np.sin(self.theta)
        fwd = np.array([c, s])
        left = np.array([-s, c])
        ctr = np.array([self.x, self.z])
        hl, hw = self.length / 2, self.width / 2
        return np.array([
            ctr + hl * fwd + hw * left,
            ctr + hl * fwd - hw * left,
            ctr - hl * fwd - hw * left,
            ctr - hl * fwd + hw * left,
        ])


def _axes(box: BEVBox) -> np.ndarray:
    c, s = np.cos(box.theta), np.sin(box.theta)
    return np.array([[c, s], [-s, c]])


def boxes_overlap(a: BEVBox, b: BEVBox) -> bool:
    """Separating-axis test for two oriented rectangles (touching counts)."""
    ca, cb = a.corners(), b.corners()
    for axis in np.vstack([_axes(a), _axes(b)]):
        pa = ca @ axis
        pb = cb @ axis
        if pa.max() < pb.min() or pb.max() < pa.min():
            return False
    return True


def detect_collision_fg(ego_box: BEVBox, actor_boxes) -> list[bool]:
    return [boxes_overlap(ego_box, b) for b in actor_boxes]


def points_in_box_3d(points: np.ndarray, box: BEVBox,
                     y_center: float, height: float) -> np.ndarray:
    """Boolean mask of 3D points inside an upright oriented box (y is down)."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    rel = pts[:, [0, 2]] - np.array([box.x, box.z])
    local = rel @ _axes(box).T
    inside_bev = (np.abs(local[:, 0]) <= box.length / 2) & \
                 (np.abs(local[:, 1]) <= box.width / 2)
    inside_y = np.abs(pts[:, 1] - y_center) <= height / 2
    return inside_bev & inside_y


def detect_collision_bg(ego_box: BEVBox, y_center: float, height: float,
                        mu: np.ndarray, opacity: np.ndarray,
                        sem_class: np.ndarray | None = None,
                        ground_classes=(), alpha_min: float = BG_ALPHA_MIN,
                        count_min: int = BG_COUNT_MIN) -> bool:
    """True when enough solid non-ground Gaussians sit inside the ego box."""
    mu = np.asarray(mu, dtype=np.float64).reshape(-1, 3)
    keep = np.asarray(opacity, dtype=np.float64) >= alpha_min
    if sem_class is not None and len(ground_classes):
        keep &= ~np.isin(np.asarray(sem_class), list(ground_classes))
    if not keep.any():
        return False
    inside = points_in_box_3d(mu[keep], ego_box, y_center, height)
    return int(inside.sum()) > count_min
