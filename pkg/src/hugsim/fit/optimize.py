"""Gradient-descent scene fitting with density control and exposure."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import torch

from ..errors import InvariantViolation
from ..render.api import ExposureAffine
from ..render.core import CameraTensors, SplatParams, project_splats, rasterize_tiled
from ..scene.gaussians import GaussianSet
from .config import FitConfig
from .losses import (GroundPatchSampler, LossWeights, loss_alpha, loss_ground,
                     loss_image, loss_semantic)


@dataclass
class FitFrame:
    """One posed observation: camera plus target images."""

    camera: object
    color: np.ndarray                 # (H, W, 3) in [0, 1]
    semantic: np.ndarray | None = None  # (H, W) integer labels
    mask: np.ndarray | None = None      # (H, W) coverage target for alpha


class _Params:
    """Unconstrained torch parameters with activation mappings."""

    def __init__(self, gs: GaussianSet, ground_mask: np.ndarray,
                 dtype=torch.float64):
        def t(a, grad=True):
            x = torch.as_tensor(np.asarray(a, dtype=np.float64)).to(dtype).clone()
            return x.requires_grad_(grad)

        self.mu = t(gs.mu)
        self.quat = t(gs.quat)
        self.log_scale = t(np.log(gs.scale))
        op = np.clip(gs.opacity, 1e-4, 1.0 - 1e-4)
        self.opacity_logit = t(np.log(op / (1.0 - op)))
        self.sh = t(gs.sh)
        self.sem_logits = t(gs.sem_logits)
        self.ground_mask = torch.as_tensor(ground_mask, dtype=torch.bool)

    def tensors(self) -> list[torch.Tensor]:
        return [self.mu, self.quat, self.log_scale, self.opacity_logit,
                self.sh, self.sem_logits]

    def splats(self) -> SplatParams:
        return SplatParams(
            mu=self.mu,
            quat=self.quat / self.quat.norm(dim=1, keepdim=True),
            scale=self.log_scale.exp(),
            opacity=torch.sigmoid(self.opacity_logit),
            sh=self.sh,
            sem_logits=self.sem_logits,
        )

    def freeze_ground_shape(self):
        """Ground Gaussians keep orientation and height extent fixed."""
        g = self.ground_mask
        if self.quat.grad is not None:
            self.quat.grad[g] = 0.0
        if self.log_scale.grad is not None:
            self.log_scale.grad[g, 1] = 0.0

    def to_set(self) -> GaussianSet:
        s = self.splats()
        return GaussianSet(
            s.mu.detach().numpy(), s.quat.detach().numpy(),
            s.scale.detach().numpy(), s.opacity.detach().numpy(),
            s.sh.detach().numpy(), s.sem_logits.detach().numpy(),
        )


def _render(params: _Params, cam_t: CameraTensors, modes: tuple,
            terminate_eps: float) -> dict:
    prep = project_splats(params.splats(), cam_t, modes=modes)
    return rasterize_tiled(prep, cam_t.height, cam_t.width, modes=modes,
                           terminate_eps=terminate_eps)


def _psnr(a: np.ndarray, b: np.ndarray) -> float:
    mse = float(np.mean((np.asarray(a, dtype=np.float64) - b) ** 2))
    if mse == 0:
        return 99.0
    return min(99.0, 10.0 * np.log10(1.0 / mse))


def _split_merge_opacity(op: torch.Tensor) -> torch.Tensor:
    # two stacked copies with opacity a' composite to 1-(1-a')^2 = a
    return 1.0 - torch.sqrt((1.0 - op).clamp(min=0.0))


def _densify(gs: GaussianSet, grad_avg: np.ndarray, ground_mask: np.ndarray,
             config: FitConfig, extent: float,
             rng: np.random.Generator) -> tuple[GaussianSet, np.ndarray]:
    """Clone/split high-gradient Gaussians, prune nearly transparent ones.

    Ground Gaussians are structural and exempt. Clone/split children adopt
    opacities such that the stacked pair matches the parent's footprint.
    """
    keep = (gs.opacity >= config.prune_opacity) | ground_mask
    hot = (grad_avg > config.densify_grad_threshold) & ~ground_mask & keep
    big = gs.scale.max(axis=1) > 0.05 * extent
    split_idx = np.nonzero(hot & big)[0]
    clone_idx = np.nonzero(hot & ~big)[0]

    parts = [gs[keep]]
    masks = [ground_mask[keep]]
    merged_op = 1.0 - np.sqrt(np.clip(1.0 - gs.opacity, 0.0, None))
    for idx, shrink in ((clone_idx, 1.0), (split_idx, 1.6)):
        if idx.size == 0:
            continue
        base = gs[idx]
        # overwrite the surviving parent too, so the pair composites like it
        parent_rows = np.nonzero(np.isin(np.nonzero(keep)[0], idx))[0]
        parts[0].opacity[parent_rows] = merged_op[idx]
        parts[0].scale[parent_rows] = (gs.scale[idx] / shrink).astype(np.float32)
        child = GaussianSet(
            base.mu + rng.normal(0.0, 1.0, base.mu.shape) * base.scale * (0.5 if shrink > 1 else 0.05),
            base.quat, base.scale / shrink, merged_op[idx],
            base.sh, base.sem_logits, validate=False,
        )
        parts.append(child)
        masks.append(np.zeros(len(child), dtype=bool))
    out = GaussianSet.concat(parts)
    return out, np.concatenate(masks)


def optimize_scene(gaussians: GaussianSet, frames: list[FitFrame],
                   weights: LossWeights | None = None,
                   config: FitConfig | None = None, *,
                   ground_mask: np.ndarray | None = None,
                   plane_set=None,
                   fit_exposure: bool = False,
                   terminate_eps: float = 1e-4,
                   dtype=torch.float64,
                   log_every: int = 25,
                   mu_bounds=None):
    """Fit Gaussian parameters (and optionally exposure) to posed frames.

    Returns (fitted GaussianSet, per-frame ExposureAffine list, log records,
    final ground mask). Aborts when the loss stays above 10x its initial
    value for 100 consecutive iterations. `mu_bounds=(lo, hi)` projects
    centers back into an axis-aligned box after every step.
    """
    weights = weights or LossWeights()
    config = config or FitConfig()
    if not frames:
        raise InvariantViolation("optimize_scene needs at least one frame")
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)

    if ground_mask is None:
        ground_mask = np.zeros(len(gaussians), dtype=bool)
    ground_mask = np.asarray(ground_mask, dtype=bool).copy()
    params = _Params(gaussians, ground_mask, dtype=dtype)
    extent = float(np.linalg.norm(gaussians.mu.max(axis=0) - gaussians.mu.min(axis=0)))

    sampler = None
    if plane_set is not None and weights.lambda_ground > 0:
        ground_mu = gaussians.mu[ground_mask]
        sampler = GroundPatchSampler(plane_set, ground_mu)

    modes = ["color", "alpha"]
    if any(f.semantic is not None for f in frames):
        modes.append("semantic")
    modes = tuple(modes)

    n_frames = len(frames)
    exp_A = torch.eye(3, dtype=dtype).repeat(n_frames, 1, 1)
    exp_b = torch.zeros(n_frames, 3, dtype=dtype)
    if fit_exposure:
        exp_A.requires_grad_(True)
        exp_b.requires_grad_(True)

    cams = [CameraTensors.from_camera(f.camera, dtype) for f in frames]
    targets = [
        (torch.as_tensor(f.color, dtype=dtype),
         f.semantic,
         None if f.mask is None else torch.as_tensor(f.mask, dtype=dtype))
        for f in frames
    ]

    lrs = config.learning_rates

    def build_optimizer():
        groups = [
            {"params": [params.mu], "lr": lrs["mu"]},
            {"params": [params.quat], "lr": lrs["quat"]},
            {"params": [params.log_scale], "lr": lrs["scale"]},
            {"params": [params.opacity_logit], "lr": lrs["opacity"]},
            {"params": [params.sh], "lr": lrs["sh"]},
            {"params": [params.sem_logits], "lr": lrs["sem_logits"]},
        ]
        if fit_exposure:
            groups.append({"params": [exp_A, exp_b], "lr": lrs["exposure"]})
        return torch.optim.Adam(groups)

    opt = build_optimizer()
    mu_decay = config.mu_lr_decay ** (1.0 / config.iterations)
    if mu_bounds is not None:
        mu_lo = torch.as_tensor(mu_bounds[0], dtype=dtype)
        mu_hi = torch.as_tensor(mu_bounds[1], dtype=dtype)

    grad_accum = np.zeros(len(gaussians))
    grad_count = 0
    initial_loss = None
    over_budget = 0
    log: list[dict] = []

    for it in range(config.iterations):
        fi = it % n_frames
        opt.zero_grad()
        out = _render(params, cams[fi], modes, terminate_eps)
        color = out["color"] @ exp_A[fi].T + exp_b[fi] if fit_exposure else out["color"]
        tgt_color, tgt_sem, tgt_mask = targets[fi]
        terms = {"image": loss_image(color, tgt_color, weights.lambda_ssim)}
        if tgt_sem is not None and "semantic" in modes:
            terms["semantic"] = weights.lambda_sem * loss_semantic(out["semantic"], tgt_sem)
        if tgt_mask is not None:
            # penalize opacity accumulated outside the mask; inside, the
            # image term decides how much alpha is right
            bg_alpha = out["alpha"] * (1.0 - tgt_mask)
            terms["alpha"] = weights.lambda_alpha * loss_alpha(
                bg_alpha, torch.zeros_like(bg_alpha))
        if sampler is not None:
            terms["ground"] = weights.lambda_ground * loss_ground(
                params.mu[params.ground_mask], plane_set, sampler, rng)
        loss = sum(terms.values())
        if not torch.isfinite(loss):
            raise InvariantViolation(f"non-finite fitting loss at iteration {it}")
        loss.backward()
        params.freeze_ground_shape()

        lv = float(loss.detach())
        if initial_loss is None:
            initial_loss = lv
        over_budget = over_budget + 1 if lv > 10.0 * initial_loss else 0
        if over_budget >= 100:
            raise InvariantViolation(
                f"fitting diverged: loss {lv:.4g} stayed above 10x initial "
                f"({initial_loss:.4g}) for 100 iterations (iteration {it})")

        if params.mu.grad is not None:
            grad_accum += params.mu.grad.detach().norm(dim=1).numpy()
            grad_count += 1
        opt.step()
        if mu_bounds is not None:
            with torch.no_grad():
                params.mu.clamp_(mu_lo, mu_hi)
        for group in opt.param_groups[:1]:
            group["lr"] *= mu_decay

        if it % log_every == 0 or it == config.iterations - 1:
            psnr = _psnr(color.detach().numpy(), tgt_color.numpy())
            rec = {"iteration": it, "loss": lv, "psnr": psnr}
            rec.update({k: float(v.detach()) for k, v in terms.items()})
            log.append(rec)

        densify_due = (config.densify_interval > 0 and it < config.densify_until
                       and it > 0 and it % config.densify_interval == 0)
        if densify_due:
            gs_now = params.to_set()
            avg = grad_accum / max(grad_count, 1)
            gs_new, gm_new = _densify(gs_now, avg, params.ground_mask.numpy(),
                                      config, extent, rng)
            params = _Params(gs_new, gm_new, dtype=dtype)
            opt = build_optimizer()
            # keep the decayed mu learning rate across rebuilds
            opt.param_groups[0]["lr"] = lrs["mu"] * (mu_decay ** it)
            grad_accum = np.zeros(len(gs_new))
            grad_count = 0

    exposures = [ExposureAffine(exp_A[i].detach().numpy(), exp_b[i].detach().numpy())
                 for i in range(n_frames)]
    return params.to_set(), exposures, log, params.ground_mask.numpy()


def write_log(path: str, records: list[dict]) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
