"""Loss terms for scene and trajectory fitting.

All losses are torch-differentiable scalars; inputs may be numpy arrays or
torch tensors.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch
from scipy.spatial import cKDTree

from ..errors import ConfigError
from ..unicycle import OMEGA_EPS, UnicycleTrajectory

PROB_FLOOR = 1e-8
SSIM_SIGMA = 1.5
SSIM_RADIUS = 5  # truncated at 3.5 sigma -> 11x11 window


@dataclass
class LossWeights:
    """Scalar weights for the fitting objective."""

    lambda_ssim: float = 0.2
    lambda_sem: float = 0.1
    lambda_alpha: float = 0.1
    lambda_ground: float = 1.0
    lambda_track: float = 1.0
    lambda_uni: float = 1.0
    lambda_reg: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.lambda_ssim <= 1.0:
            raise ConfigError("lambda_ssim must lie in [0, 1]")
        for name in ("lambda_sem", "lambda_alpha", "lambda_ground",
                     "lambda_track", "lambda_uni", "lambda_reg"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")

    def to_dict(self) -> dict:
        return {k: float(v) for k, v in self.__dict__.items()}

    @staticmethod
    def from_dict(d: dict) -> "LossWeights":
        return LossWeights(**d)


def _as_tensor(x, dtype=torch.float64) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(np.asarray(x), dtype=dtype)


def _gaussian_window(dtype) -> torch.Tensor:
    x = torch.arange(-SSIM_RADIUS, SSIM_RADIUS + 1, dtype=dtype)
    g = torch.exp(-0.5 * (x / SSIM_SIGMA) ** 2)
    g = g / g.sum()
    return g[:, None] * g[None, :]


def ssim(img1, img2, data_range: float = 1.0) -> torch.Tensor:
    """Structural similarity with an 11x11 Gaussian window (sigma 1.5).

    Images are (H, W) or (H, W, C); windows are applied per channel with
    valid padding and the per-channel maps averaged.
    """
    a = _as_tensor(img1)
    b = _as_tensor(img2).to(a.dtype)
    if a.shape != b.shape:
        raise ConfigError(f"image shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
    if a.dim() == 2:
        a, b = a[:, :, None], b[:, :, None]
    c = a.shape[2]
    win = _gaussian_window(a.dtype)[None, None].expand(c, 1, -1, -1)
    x = a.permute(2, 0, 1)[None]  # (1, C, H, W)
    y = b.permute(2, 0, 1)[None]

    def filt(img):
        return torch.nn.functional.conv2d(img, win, groups=c)

    ux, uy = filt(x), filt(y)
    vx = filt(x * x) - ux * ux
    vy = filt(y * y) - uy * uy
    vxy = filt(x * y) - ux * uy
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    s = ((2 * ux * uy + c1) * (2 * vxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
    return s.mean()


def loss_image(rendered, target, lambda_ssim: float) -> torch.Tensor:
    """(1 - lambda) L1 + lambda (1 - SSIM)."""
    a = _as_tensor(rendered)
    b = _as_tensor(target).to(a.dtype)
    if a.shape != b.shape:
        raise ConfigError(f"image shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
    l1 = (a - b).abs().mean()
    if lambda_ssim == 0.0:
        return l1
    return (1.0 - lambda_ssim) * l1 + lambda_ssim * (1.0 - ssim(a, b))


def loss_semantic(rendered_probs, target_labels) -> torch.Tensor:
    """Pixel-mean cross-entropy against integer labels, probability floored."""
    p = _as_tensor(rendered_probs)
    labels = torch.as_tensor(np.asarray(target_labels), dtype=torch.long)
    n_classes = p.shape[-1]
    if int(labels.max()) >= n_classes or int(labels.min()) < 0:
        raise ConfigError(f"semantic label outside [0, {n_classes})")
    picked = p.reshape(-1, n_classes).gather(1, labels.reshape(-1, 1))
    return -(picked.clamp(min=PROB_FLOOR).log()).mean()


def loss_alpha(rendered_alpha, mask) -> torch.Tensor:
    """Mean squared error between accumulated alpha and a coverage mask."""
    a = _as_tensor(rendered_alpha)
    m = _as_tensor(mask).to(a.dtype)
    if a.shape != m.shape:
        raise ConfigError(f"alpha/mask shapes differ: {tuple(a.shape)} vs {tuple(m.shape)}")
    return ((a - m) ** 2).mean()


@dataclass
class GroundPatchSampler:
    """Draws small neighbourhoods of ground Gaussians within each window.

    A patch is the ``patch_size`` nearest members (in the ground plane)
    around a randomly chosen member; ``patches_per_window`` patches are drawn
    per window per call.
    """

    plane_set: object  # GroundPlaneSet
    mu_init: np.ndarray  # (N, 3) positions used to build the neighbour index
    patches_per_window: int = 32
    patch_size: int = 16
    _trees: list = field(default_factory=list, init=False)

    def __post_init__(self):
        mu = np.asarray(self.mu_init, dtype=np.float64)
        for w in self.plane_set.windows:
            if len(w.members) >= 2:
                self._trees.append(cKDTree(mu[w.members][:, [0, 2]]))
            else:
                self._trees.append(None)

    def sample(self, rng: np.random.Generator) -> list[tuple[object, np.ndarray]]:
        """Per window: (window, (patches, k) index array into the ground set)."""
        out = []
        for w, tree in zip(self.plane_set.windows, self._trees):
            if tree is None:
                continue
            members = np.asarray(w.members)
            k = min(self.patch_size, members.size)
            seeds = rng.integers(0, members.size, size=self.patches_per_window)
            _, nn = tree.query(tree.data[seeds], k=k)
            out.append((w, members[np.atleast_2d(nn)]))
        return out


def loss_ground(mu, plane_set, sampler: GroundPatchSampler,
                rng: np.random.Generator) -> torch.Tensor:
    """Mean per-patch variance of camera-frame heights of ground Gaussians.

    ``mu`` is the (N, 3) tensor of ground Gaussian centers; heights are taken
    in each window's anchor camera frame. Windows with fewer than two members
    contribute nothing.
    """
    mu_t = _as_tensor(mu)
    terms = []
    for w, idx in sampler.sample(rng):
        if idx.shape[1] < 2:
            continue
        ry = torch.as_tensor(np.asarray(w.anchor_R)[1], dtype=mu_t.dtype)
        ty = float(np.asarray(w.anchor_t)[1])
        heights = mu_t[idx.reshape(-1)] @ ry + ty  # (patches * k,)
        heights = heights.reshape(idx.shape)
        terms.append(heights.var(dim=1, unbiased=True).mean())
    if not terms:
        return mu_t.sum() * 0.0
    return torch.stack(terms).mean()


def _unpack_traj(traj, states, velocities, times):
    if isinstance(traj, UnicycleTrajectory):
        return (_as_tensor(traj.states), _as_tensor(traj.velocities),
                np.asarray(traj.times, dtype=np.float64))
    return _as_tensor(states), _as_tensor(velocities), np.asarray(times, dtype=np.float64)


def unicycle_predict(states: torch.Tensor, velocities: torch.Tensor,
                     times: np.ndarray) -> torch.Tensor:
    """One-interval unicycle prediction of each successor knot state."""
    dt = torch.as_tensor(np.diff(times), dtype=states.dtype)
    x, z, th = states[:-1, 0], states[:-1, 1], states[:-1, 2]
    disp = velocities[:, 0] * dt
    rot = velocities[:, 1] * dt
    th_next = th + rot
    straight = rot.abs() < OMEGA_EPS
    safe_rot = torch.where(straight, torch.ones_like(rot), rot)
    ratio = disp / safe_rot
    x_next = torch.where(straight, x + disp * torch.cos(th),
                         x + ratio * (torch.sin(th_next) - torch.sin(th)))
    z_next = torch.where(straight, z + disp * torch.sin(th),
                         z - ratio * (torch.cos(th_next) - torch.cos(th)))
    return torch.stack([x_next, z_next, th_next], dim=1)


def loss_unicycle(traj=None, states=None, velocities=None, times=None) -> torch.Tensor:
    """Sum of per-interval |x|, |z|, |theta| unicycle-consistency residuals."""
    st, vel, tm = _unpack_traj(traj, states, velocities, times)
    pred = unicycle_predict(st, vel, tm)
    return (st[1:] - pred).abs().sum()


def loss_track(states, target_states) -> torch.Tensor:
    """Per-knot |x - x_hat| + |z - z_hat| against noisy track observations."""
    st = _as_tensor(states)
    tgt = _as_tensor(target_states).to(st.dtype)
    return (st[:, :2] - tgt[:, :2]).abs().sum()


def loss_smooth(traj=None, states=None, velocities=None, times=None) -> torch.Tensor:
    """Second-difference smoothness of velocities and headings."""
    st, vel, _ = _unpack_traj(traj, states, velocities, times)
    total = st.sum() * 0.0
    if vel.shape[0] >= 3:
        dd_v = vel[2:] + vel[:-2] - 2.0 * vel[1:-1]
        total = total + dd_v.norm(dim=1).sum()
    if st.shape[0] >= 3:
        dd_th = st[2:, 2] + st[:-2, 2] - 2.0 * st[1:-1, 2]
        total = total + dd_th.abs().sum()
    return total
