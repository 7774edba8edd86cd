"""Reconstruction-quality metrics: PSNR/SSIM, pose error, chamfer, depth."""

from __future__ import annotations

import numpy as np
import torch
from scipy.spatial import cKDTree

from ..fit.losses import ssim as _ssim_torch

PSNR_CAP = 99.0


def psnr(img: np.ndarray, ref: np.ndarray, peak: float = 1.0) -> float:
    mse = float(np.mean((np.asarray(img, dtype=np.float64)
                         - np.asarray(ref, dtype=np.float64)) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(10.0 * np.log10(peak ** 2 / mse), PSNR_CAP)


def ssim(img: np.ndarray, ref: np.ndarray) -> float:
    a = torch.as_tensor(np.asarray(img), dtype=torch.float64)
    b = torch.as_tensor(np.asarray(ref), dtype=torch.float64)
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    return float(_ssim_torch(a, b))


def pose_error(r_hat: np.ndarray, t_hat: np.ndarray,
               r_ref: np.ndarray, t_ref: np.ndarray) -> tuple[float, float]:
    """(geodesic rotation error, translation L2 error)."""
    rel = np.asarray(r_hat, dtype=np.float64) @ np.asarray(r_ref, dtype=np.float64).T
    arg = np.clip((np.trace(rel) - 1.0) / 2.0, -1.0, 1.0)
    e_r = float(np.arccos(arg))
    e_t = float(np.linalg.norm(np.asarray(t_hat, dtype=np.float64)
                               - np.asarray(t_ref, dtype=np.float64)))
    return e_r, e_t


def chamfer_semantic(pred_pts, pred_labels, ref_pts, ref_labels):
    """(accuracy, completeness, mIoU) between labeled point clouds.

    accuracy = mean NN distance pred->ref, completeness = ref->pred; labels
    are transferred to reference points from their nearest predicted point
    and scored with per-class IoU.
    """
    pred_pts = np.asarray(pred_pts, dtype=np.float64)
    ref_pts = np.asarray(ref_pts, dtype=np.float64)
    pred_labels = np.asarray(pred_labels)
    ref_labels = np.asarray(ref_labels)

    ref_tree = cKDTree(ref_pts)
    pred_tree = cKDTree(pred_pts)
    acc = float(ref_tree.query(pred_pts)[0].mean())
    d_ref, nn = pred_tree.query(ref_pts)
    comp = float(d_ref.mean())

    transferred = pred_labels[nn]
    ious = []
    for cls in np.unique(np.concatenate([ref_labels, transferred])):
        inter = np.sum((transferred == cls) & (ref_labels == cls))
        union = np.sum((transferred == cls) | (ref_labels == cls))
        if union:
            ious.append(inter / union)
    miou = float(np.mean(ious)) if ious else 1.0
    return acc, comp, miou


def depth_rmse(rendered: np.ndarray, reference: np.ndarray,
               valid: np.ndarray) -> float:
    """RMSE over pixels flagged valid in the sparse reference."""
    valid = np.asarray(valid, dtype=bool)
    if not valid.any():
        return 0.0
    diff = np.asarray(rendered, dtype=np.float64)[valid] \
        - np.asarray(reference, dtype=np.float64)[valid]
    return float(np.sqrt(np.mean(diff ** 2)))
