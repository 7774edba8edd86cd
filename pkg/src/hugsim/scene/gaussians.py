"""Anisotropic Gaussian primitives and batched containers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvariantViolation

QUAT_NORM_TOL = 1e-6


def quat_to_rotmat(quat: np.ndarray) -> np.ndarray:
    """Unit quaternion(s) (w, x, y, z) to rotation matrix/matrices.

    Accepts shape (4,) or (N, 4); returns (3, 3) or (N, 3, 3).
    """
    q = np.asarray(quat, dtype=np.float64)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    q = q / np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    R = np.empty((q.shape[0], 3, 3), dtype=np.float64)
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R[0] if single else R


def yaw_quat(theta: float) -> np.ndarray:
    """Quaternion for a rotation of `theta` about the +y axis."""
    return np.array([np.cos(theta / 2.0), 0.0, np.sin(theta / 2.0), 0.0])


@dataclass
class Gaussian:
    """A single splatting primitive.

    mu: world/object-frame position (m); quat: unit (w, x, y, z);
    scale: per-axis std-dev (m), positive; opacity in [0, 1];
    sh: (C, 3) spherical-harmonic coefficients, C = (degree+1)^2;
    sem_logits: (S,) semantic logits.
    """

    mu: np.ndarray
    quat: np.ndarray
    scale: np.ndarray
    opacity: float
    sh: np.ndarray
    sem_logits: np.ndarray

    def validate(self) -> None:
        if abs(np.linalg.norm(self.quat) - 1.0) > QUAT_NORM_TOL:
            raise InvariantViolation(f"quaternion norm {np.linalg.norm(self.quat):.6g} != 1")
        if np.any(np.asarray(self.scale) <= 0):
            raise InvariantViolation(f"non-positive scale {self.scale}")
        if not (0.0 <= self.opacity <= 1.0):
            raise InvariantViolation(f"opacity {self.opacity} outside [0, 1]")


def covariance_3d(g: Gaussian) -> np.ndarray:
    """3D covariance R S S^T R^T of a single Gaussian."""
    R = quat_to_rotmat(g.quat)
    S = np.diag(np.asarray(g.scale, dtype=np.float64))
    M = R @ S
    return M @ M.T


class GaussianSet:
    """Struct-of-arrays batch of Gaussians (float32 storage).

    Arrays: mu (N,3), quat (N,4), scale (N,3), opacity (N,),
    sh (N,C,3), sem_logits (N,S).
    """

    def __init__(self, mu, quat, scale, opacity, sh, sem_logits, validate: bool = True):
        self.mu = np.ascontiguousarray(mu, dtype=np.float32).reshape(-1, 3)
        n = self.mu.shape[0]
        self.quat = np.ascontiguousarray(quat, dtype=np.float32).reshape(n, 4)
        self.scale = np.ascontiguousarray(scale, dtype=np.float32).reshape(n, 3)
        self.opacity = np.ascontiguousarray(opacity, dtype=np.float32).reshape(n)
        sh = np.ascontiguousarray(sh, dtype=np.float32)
        self.sh = sh.reshape(n, -1, 3) if n else sh.reshape(0, sh.shape[1] if sh.ndim == 3 else 1, 3)
        sem = np.ascontiguousarray(sem_logits, dtype=np.float32)
        self.sem_logits = sem.reshape(n, -1) if n else sem.reshape(0, sem.shape[1] if sem.ndim == 2 else 1)
        if validate:
            self.validate()

    def __len__(self) -> int:
        return self.mu.shape[0]

    @property
    def sh_coeffs(self) -> int:
        return self.sh.shape[1]

    @property
    def num_classes(self) -> int:
        return self.sem_logits.shape[1]

    def validate(self) -> None:
        norms = np.linalg.norm(self.quat.astype(np.float64), axis=1)
        bad = np.nonzero(np.abs(norms - 1.0) > QUAT_NORM_TOL)[0]
        if bad.size:
            raise InvariantViolation(
                f"gaussian {bad[0]}: quaternion norm {norms[bad[0]]:.6g} != 1"
            )
        bad = np.nonzero(np.any(self.scale <= 0, axis=1))[0]
        if bad.size:
            raise InvariantViolation(f"gaussian {bad[0]}: non-positive scale")
        bad = np.nonzero((self.opacity < 0) | (self.opacity > 1))[0]
        if bad.size:
            raise InvariantViolation(f"gaussian {bad[0]}: opacity outside [0, 1]")

    def __getitem__(self, idx) -> "GaussianSet":
        return GaussianSet(
            self.mu[idx], self.quat[idx], self.scale[idx], self.opacity[idx],
            self.sh[idx], self.sem_logits[idx], validate=False,
        )

    def gaussian(self, i: int) -> Gaussian:
        return Gaussian(
            mu=self.mu[i].astype(np.float64),
            quat=self.quat[i].astype(np.float64),
            scale=self.scale[i].astype(np.float64),
            opacity=float(self.opacity[i]),
            sh=self.sh[i].astype(np.float64),
            sem_logits=self.sem_logits[i].astype(np.float64),
        )

    def copy(self) -> "GaussianSet":
        return GaussianSet(
            self.mu.copy(), self.quat.copy(), self.scale.copy(),
            self.opacity.copy(), self.sh.copy(), self.sem_logits.copy(),
            validate=False,
        )

    def transformed(self, R: np.ndarray, t: np.ndarray) -> "GaussianSet":
        """Rigidly transform all Gaussians by x -> R x + t."""
        mu = self.mu.astype(np.float64) @ R.T + np.asarray(t, dtype=np.float64)
        quat = _quat_mul(_rotmat_to_quat(R), self.quat.astype(np.float64))
        return GaussianSet(mu, quat, self.scale, self.opacity, self.sh,
                           self.sem_logits, validate=False)

    @staticmethod
    def concat(sets: list["GaussianSet"]) -> "GaussianSet":
        sets = [s for s in sets if len(s) > 0]
        if not sets:
            return GaussianSet.empty(1, 1)
        return GaussianSet(
            np.concatenate([s.mu for s in sets]),
            np.concatenate([s.quat for s in sets]),
            np.concatenate([s.scale for s in sets]),
            np.concatenate([s.opacity for s in sets]),
            np.concatenate([s.sh for s in sets]),
            np.concatenate([s.sem_logits for s in sets]),
            validate=False,
        )

    @staticmethod
    def empty(sh_coeffs: int, num_classes: int) -> "GaussianSet":
        return GaussianSet(
            np.zeros((0, 3)), np.zeros((0, 4)), np.zeros((0, 3)),
            np.zeros((0,)), np.zeros((0, sh_coeffs, 3)), np.zeros((0, num_classes)),
            validate=False,
        )

    def allclose(self, other: "GaussianSet") -> bool:
        return (
            np.array_equal(self.mu, other.mu)
            and np.array_equal(self.quat, other.quat)
            and np.array_equal(self.scale, other.scale)
            and np.array_equal(self.opacity, other.opacity)
            and np.array_equal(self.sh, other.sh)
            and np.array_equal(self.sem_logits, other.sem_logits)
        )


def _rotmat_to_quat(R: np.ndarray) -> np.ndarray:
    """Rotation matrix to quaternion (w, x, y, z)."""
    R = np.asarray(R, dtype=np.float64)
    t = np.trace(R)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        w = 0.25 * s
        x = (R[2, 1] - R[1, 2]) / s
        y = (R[0, 2] - R[2, 0]) / s
        z = (R[1, 0] - R[0, 1]) / s
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(R[i, i] - R[j, j] - R[k, k] + 1.0) * 2
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[i + 1] = 0.25 * s
        q[j + 1] = (R[j, i] + R[i, j]) / s
        q[k + 1] = (R[k, i] + R[i, k]) / s
        w, x, y, z = q
    q = np.array([w, x, y, z])
    return q / np.linalg.norm(q)


def _quat_mul(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Hamilton product q * p; p may be batched (N, 4)."""
    p = np.atleast_2d(p)
    w1, x1, y1, z1 = q
    w2, x2, y2, z2 = p[:, 0], p[:, 1], p[:, 2], p[:, 3]
    out = np.stack([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ], axis=1)
    return out / np.linalg.norm(out, axis=1, keepdims=True)
