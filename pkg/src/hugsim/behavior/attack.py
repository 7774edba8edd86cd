"""Adversarial actor planning: spline candidates and attack selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from .models import ActorState, predict_trajectory


@dataclass(frozen=True)
class AttackConfig:
    horizon: float = 3.0
    dt: float = 0.1
    lateral_offsets: tuple = (-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0)
    longitudinal_distances: tuple = (5.0, 10.0, 15.0, 20.0, 25.0)
    top_k: int = 1
    replan_period: float = 0.5
    lambda_collision: float = 100.0
    tolerance: float = 2.0        # m, counts as hitting another actor
    max_curvature: float = 0.3    # 1/m
    max_accel: float = 6.0        # m/s^2

    def __post_init__(self):
        if self.top_k < 1:
            raise ConfigError("attack top_k must be >= 1")
        if self.replan_period < self.dt:
            raise ConfigError("attack replan period must be >= dt")


@dataclass
class CandidateTrajectory:
    """A feasible dt-sampled maneuver ending at one terminal grid cell."""

    states: np.ndarray   # (T, 4) rows (x, z, theta, v)
    grid_index: int
    feasible: bool = True
    cost: float = field(default=math.inf)


def _cubic_lateral(offset: float, s_end: float, s: np.ndarray) -> np.ndarray:
    """Lateral profile y(s) with y(0)=y'(0)=0, y(s_end)=offset, y'(s_end)=0."""
    u = s / s_end
    return offset * (3.0 * u ** 2 - 2.0 * u ** 3)


def spline_candidates(state: ActorState, config: AttackConfig) -> list[CandidateTrajectory]:
    """Terminal-grid maneuvers in the actor's heading frame.

    Each candidate runs a cubic lateral offset along arc length, resampled
    at dt; candidates breaking the curvature or acceleration bound are
    dropped. Ordering follows the (longitudinal, lateral) grid and is
    deterministic.
    """
    n = int(round(config.horizon / config.dt))
    if n < 2:
        return []
    c, s_h = math.cos(state.theta), math.sin(state.theta)
    out = []
    grid_index = 0
    for dist in config.longitudinal_distances:
        for lat in config.lateral_offsets:
            idx = grid_index
            grid_index += 1
            if dist <= 0:
                continue
            # uniform progress along the path; speed follows arc length
            s_knots = np.linspace(0.0, dist, n + 1)
            y = _cubic_lateral(lat, dist, s_knots)
            xs = state.x + c * s_knots - s_h * y
            zs = state.z + s_h * s_knots + c * y
            dx, dz = np.diff(xs), np.diff(zs)
            seg = np.hypot(dx, dz)
            theta = np.arctan2(dz, dx)
            v = seg / config.dt
            states = np.stack([xs[1:], zs[1:], theta, v], axis=1)

            dtheta = np.diff(np.unwrap(theta))
            curvature = np.abs(dtheta) / np.maximum(seg[1:], 1e-9)
            accel = np.abs(np.diff(np.concatenate([[state.v], v]))) / config.dt
            if curvature.max(initial=0.0) > config.max_curvature:
                continue
            if accel.max(initial=0.0) > config.max_accel:
                continue
            out.append(CandidateTrajectory(states, idx))
    return out


def candidate_cost(candidate: CandidateTrajectory, ego_pred: np.ndarray,
                   actor_preds, config: AttackConfig) -> tuple[float, float, float]:
    """(C_attack, C_collision, C_total) for one candidate.

    C_attack is the minimum BEV distance to the ego prediction over time;
    C_collision counts other-actor predictions approached within tolerance.
    """
    t = min(candidate.states.shape[0], ego_pred.shape[0])
    d = np.hypot(candidate.states[:t, 0] - ego_pred[:t, 0],
                 candidate.states[:t, 1] - ego_pred[:t, 1])
    c_attack = float(d.min()) if t else math.inf
    c_coll = 0.0
    for pred in actor_preds:
        tt = min(candidate.states.shape[0], pred.shape[0])
        if tt == 0:
            continue
        dd = np.hypot(candidate.states[:tt, 0] - pred[:tt, 0],
                      candidate.states[:tt, 1] - pred[:tt, 1])
        if float(dd.min()) <= config.tolerance:
            c_coll += 1.0
    return c_attack, c_coll, c_attack + config.lambda_collision * c_coll


def attack_select(candidates, ego_pred: np.ndarray, actor_preds,
                  config: AttackConfig, rng: np.random.Generator) -> CandidateTrajectory:
    """Pick a maneuver: sort by composite cost, sample among the top-k.

    k=1 is a pure argmin with ties broken by lowest grid index.
    """
    if not candidates:
        raise ConfigError("attack_select needs at least one candidate")
    scored = []
    for cand in candidates:
        _, _, total = candidate_cost(cand, ego_pred, actor_preds, config)
        cand.cost = total
        scored.append(cand)
    scored.sort(key=lambda cnd: (cnd.cost, cnd.grid_index))
    top = scored[:config.top_k]
    if len(top) == 1:
        return top[0]
    return top[int(rng.integers(len(top)))]


class AggressivePlanner:
    """Stateful attack behavior: replan every period, follow in between."""

    def __init__(self, config: AttackConfig, seed: int = 0):
        self.config = config
        self.rng = np.random.default_rng(seed)
        self._plan: CandidateTrajectory | None = None
        self._plan_t = -math.inf

    def pose_at(self, t: float, state: ActorState, ego_state,
                other_states=()) -> ActorState:
        """Actor state for simulation time t, replanning when due."""
        cfg = self.config
        if self._plan is None or t - self._plan_t >= cfg.replan_period - 1e-9:
            cands = spline_candidates(state, cfg)
            if cands:
                ego_pred = predict_trajectory(ego_state, cfg.horizon, cfg.dt)
                preds = [predict_trajectory(a, cfg.horizon, cfg.dt)
                         for a in other_states]
                self._plan = attack_select(cands, ego_pred, preds, cfg, self.rng)
                self._plan_t = t
            else:
                self._plan = None
        if self._plan is None:
            # infeasible everywhere: keep rolling straight
            return ActorState(state.x + state.v * cfg.dt * math.cos(state.theta),
                              state.z + state.v * cfg.dt * math.sin(state.theta),
                              state.theta, state.v)
        k = int(round((t - self._plan_t) / cfg.dt))
        k = min(max(k, 0), self._plan.states.shape[0] - 1)
        row = self._plan.states[k]
        return ActorState(float(row[0]), float(row[1]), float(row[2]), float(row[3]))
