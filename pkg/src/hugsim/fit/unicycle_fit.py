"""Fitting noisy track observations with a unicycle-regularized trajectory."""

from __future__ import annotations

import numpy as np
import torch

from ..errors import InvariantViolation
from ..unicycle import UnicycleTrajectory, wrap_angle
from .config import FitConfig
from .losses import LossWeights, loss_smooth, loss_track, loss_unicycle


def noisy_boxes(traj: UnicycleTrajectory, trans_sigma: float, rot_sigma_deg: float,
                rng: np.random.Generator) -> np.ndarray:
    """Perturbed (x, z, theta) knot states imitating noisy 3D box tracks."""
    states = traj.states.copy()
    states[:, :2] += rng.normal(0.0, trans_sigma, size=(len(traj), 2))
    states[:, 2] += rng.normal(0.0, np.deg2rad(rot_sigma_deg), size=len(traj))
    return states


def velocities_from_states(times: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Finite-difference (v, omega) initialization per interval."""
    times = np.asarray(times, dtype=np.float64)
    states = np.asarray(states, dtype=np.float64)
    dt = np.diff(times)
    dpos = np.diff(states[:, :2], axis=0)
    v = np.linalg.norm(dpos, axis=1) / dt
    omega = wrap_angle(np.diff(states[:, 2])) / dt
    return np.stack([v, omega], axis=1)


def trajectory_errors(states: np.ndarray, truth: np.ndarray) -> tuple[float, float]:
    """Mean translation error (m) and mean absolute heading error (rad)."""
    states = np.asarray(states, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    e_t = float(np.linalg.norm(states[:, :2] - truth[:, :2], axis=1).mean())
    e_r = float(np.abs(wrap_angle(states[:, 2] - truth[:, 2])).mean())
    return e_t, e_r


def fit_unicycle(times, box_states, weights: LossWeights | None = None,
                 config: FitConfig | None = None) -> UnicycleTrajectory:
    """Gradient descent on knot states and velocities against noisy tracks.

    The objective balances staying near the observed boxes against
    unicycle-model consistency and acceleration smoothness.
    """
    times = np.asarray(times, dtype=np.float64)
    box_states = np.asarray(box_states, dtype=np.float64)
    if times.size < 3:
        raise InvariantViolation("unicycle fitting needs at least 3 knots")
    weights = weights or LossWeights(lambda_track=1.0, lambda_uni=100.0, lambda_reg=20.0)
    config = config or FitConfig(iterations=1000)

    torch.manual_seed(config.seed)
    states = torch.tensor(box_states, dtype=torch.float64, requires_grad=True)
    vel0 = velocities_from_states(times, box_states)
    velocities = torch.tensor(vel0, dtype=torch.float64, requires_grad=True)
    opt = torch.optim.Adam([states, velocities],
                           lr=config.learning_rates["trajectory"])
    sched = torch.optim.lr_scheduler.ExponentialLR(
        opt, gamma=config.mu_lr_decay ** (1.0 / config.iterations))
    target = torch.tensor(box_states, dtype=torch.float64)

    for it in range(config.iterations):
        opt.zero_grad()
        loss = (weights.lambda_track * loss_track(states, target)
                + weights.lambda_uni * loss_unicycle(states=states, velocities=velocities, times=times)
                + weights.lambda_reg * loss_smooth(states=states, velocities=velocities, times=times))
        if not torch.isfinite(loss):
            raise InvariantViolation(
                f"non-finite unicycle fitting loss at iteration {it}: {loss.item()!r}")
        loss.backward()
        opt.step()
        sched.step()

    return UnicycleTrajectory(times, states.detach().numpy(),
                              velocities.detach().numpy())
