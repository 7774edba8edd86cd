"""Real spherical-harmonic color basis, degrees 0..3."""

from __future__ import annotations

import numpy as np

C0 = 0.28209479177387814
C1 = 0.4886025119029199
C2 = [1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
      -1.0925484305920792, 0.5462742152960396]
C3 = [-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
      0.3731763325901154, -0.4570457994644658, 1.445305721320277,
      -0.5900435899266435]


def num_coeffs(degree: int) -> int:
    return (degree + 1) ** 2


def rgb_to_sh(rgb):
    """Linear color to the degree-0 coefficient (inverse of the +0.5 shift)."""
    return (np.asarray(rgb, dtype=np.float64) - 0.5) / C0


def sh_to_rgb(sh0):
    return np.asarray(sh0, dtype=np.float64) * C0 + 0.5


def eval_sh_basis(dirs, degree: int):
    """SH basis values for unit directions; dirs (N, 3) -> (N, num_coeffs).

    Works on numpy arrays and torch tensors alike.
    """
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    cols = [C0 * (x * 0 + 1.0)]
    if degree >= 1:
        cols += [-C1 * y, C1 * z, -C1 * x]
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        xy, yz, xz = x * y, y * z, x * z
        cols += [C2[0] * xy, C2[1] * yz, C2[2] * (2.0 * zz - xx - yy),
                 C2[3] * xz, C2[4] * (xx - yy)]
    if degree >= 3:
        xx, yy, zz = x * x, y * y, z * z
        xy, xz = x * y, x * z
        cols += [C3[0] * y * (3 * xx - yy), C3[1] * xy * z,
                 C3[2] * y * (4 * zz - xx - yy),
                 C3[3] * z * (2 * zz - 3 * xx - 3 * yy),
                 C3[4] * x * (4 * zz - xx - yy),
                 C3[5] * z * (xx - yy), C3[6] * x * (xx - 3 * yy)]
    if hasattr(dirs, "new_tensor"):  # torch path
        import torch

        return torch.stack(cols, dim=1)
    return np.stack(cols, axis=1)
