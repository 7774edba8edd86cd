"""Central finite-difference validation of autograd gradients."""

from __future__ import annotations

import numpy as np
import torch


def gradient_check(loss_fn, params: list[torch.Tensor], eps: float = 1e-5,
                   max_coords: int = 50, rng: np.random.Generator | None = None) -> float:
    """Max relative error between analytic and finite-difference gradients.

    ``loss_fn`` maps the parameter list to a scalar tensor. Up to
    ``max_coords`` coordinates are sampled per parameter; relative error is
    |analytic - fd| / max(|analytic|, |fd|, 1e-8).
    """
    rng = rng or np.random.default_rng(0)
    params = [p.detach().clone().double().requires_grad_(True) for p in params]
    loss = loss_fn(params)
    grads = torch.autograd.grad(loss, params, allow_unused=True)

    worst = 0.0
    for p, g in zip(params, grads):
        if g is None:
            continue
        flat = p.detach().reshape(-1)
        n = flat.numel()
        coords = (np.arange(n) if n <= max_coords
                  else rng.choice(n, size=max_coords, replace=False))
        g_flat = g.reshape(-1)
        for c in coords:
            orig = flat[c].item()
            with torch.no_grad():
                flat[c] = orig + eps
                hi = float(loss_fn(params))
                flat[c] = orig - eps
                lo = float(loss_fn(params))
                flat[c] = orig
            fd = (hi - lo) / (2.0 * eps)
            an = float(g_flat[c])
            denom = max(abs(an), abs(fd), 1e-8)
            worst = max(worst, abs(an - fd) / denom)
    return worst
