"""Closed-loop episode engine: reset, step, termination, trace records."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from ..behavior import (
    ActorState,
    AggressivePlanner,
    AttackConfig,
    constant_speed_behavior,
    idm_acceleration,
    pure_pursuit_heading_rate,
    replay_behavior,
)
from ..errors import ConfigError, EpisodeDoneError, SceneFormatError
from ..metrics.hd import (
    ScoreTrace,
    comfort_score,
    drivable_compliance,
    route_completion,
    time_to_collision_score,
)
from ..render.api import rasterize
from ..scene.camera import look_at_camera
from ..scene.io import load_scene
from .collision import BEVBox, detect_collision_bg, detect_collision_fg
from .control import lqr_control
from .ego import EgoState, bicycle_step
from .scenario import ScenarioConfig

DONE_REASONS = ("collision", "route_complete", "horizon", "off_route")
ROUTE_DONE_EPS = 1e-6


@dataclass
class StepResult:
    observations: dict              # camera name -> RenderOutput
    ego: EgoState
    actors: list                    # ActorState per actor
    collision_fg: bool
    collision_bg: bool
    done: bool
    reason: str | None
    sub_scores: dict | None         # NC/DAC/TTC/COM, None before first step
    timing_ms: float = 0.0

    def __post_init__(self):
        if self.done and self.reason not in DONE_REASONS:
            raise ConfigError(f"done requires a reason from {DONE_REASONS}")


class _ActorRuntime:
    """Per-actor behavior state advanced once per control tick."""

    def __init__(self, spec, seed: int, trajectory=None):
        self.spec = spec
        self.trajectory = trajectory
        self.state = ActorState(spec.start_pose[0], spec.start_pose[1],
                                spec.start_pose[2], spec.start_speed)
        self.lane_origin = (spec.start_pose[0], spec.start_pose[1],
                            spec.start_pose[2])
        btype = spec.behavior["type"]
        self.btype = btype
        if btype == "attack":
            params = {k: v for k, v in spec.behavior.items() if k != "type"}
            self.planner = AggressivePlanner(AttackConfig(**params), seed=seed)
        if btype == "replay" and trajectory is None:
            raise ConfigError(
                f"actor {spec.ref!r}: replay behavior needs a trajectory")

    def advance(self, t: float, dt: float, ego: EgoState, others):
        if self.btype == "replay":
            self.state, _ = replay_behavior(self.trajectory, t)
        elif self.btype == "constant":
            self.state = constant_speed_behavior(
                (self.lane_origin[0], self.lane_origin[1], self.lane_origin[2]),
                self.spec.start_speed, t)
        elif self.btype == "idm":
            self.state = self._idm_advance(dt, ego)
        else:
            ego_state = ActorState(ego.x, ego.z, ego.theta, ego.v)
            self.state = self.planner.pose_at(t, self.state, ego_state, others)

    def _idm_advance(self, dt: float, ego: EgoState) -> ActorState:
        s = self.state
        # leader = the ego when it sits ahead in this actor's lane corridor
        fwd = np.array([math.cos(s.theta), math.sin(s.theta)])
        rel = np.array([ego.x - s.x, ego.z - s.z])
        along = float(rel @ fwd)
        lateral = abs(fwd[0] * rel[1] - fwd[1] * rel[0])
        gap = along - 4.6 if (along > 0 and lateral < 2.0) else None
        a = idm_acceleration(s.v, gap, ego.v if gap is not None else None)
        lane_pt = (self.lane_origin[0] + math.cos(self.lane_origin[2]) * 1e3,
                   self.lane_origin[1] + math.sin(self.lane_origin[2]) * 1e3)
        omega = pure_pursuit_heading_rate(s, lane_pt)
        v = max(s.v + a * dt, 0.0)
        th = s.theta + omega * dt
        return ActorState(s.x + v * math.cos(th) * dt,
                          s.z + v * math.sin(th) * dt, th, v)


class Environment:
    """One closed-loop episode at a time over a loaded scene."""

    def __init__(self, config: ScenarioConfig, asset_library=None,
                 scene_graph=None, render_observations: bool = True,
                 seed: int | None = None):
        config.validate()
        self.config = config
        self.seed = config.seed if seed is None else seed
        self.library = asset_library
        self.render_observations = render_observations
        if scene_graph is not None:
            self.graph = scene_graph
        else:
            try:
                self.graph = load_scene(config.scene)
            except FileNotFoundError as e:
                raise SceneFormatError(
                    f"scene file {config.scene!r} not found") from e
        self.dt = 1.0 / config.control_hz
        self._route = np.asarray(config.route, dtype=np.float64)
        self._done = False
        self._reason = None
        self._t = 0.0
        self._trace: list[dict] = []

    # -- lifecycle -----------------------------------------------------------

    def reset(self) -> StepResult:
        cfg = self.config
        torch.manual_seed(self.seed)
        self.rng = np.random.default_rng(self.seed)
        x, z, th, v = cfg.ego_start
        self.ego = EgoState(x, z, th, v, wheelbase=cfg.wheelbase,
                            length=cfg.ego_extents[0], width=cfg.ego_extents[1])
        self.actors = [
            _ActorRuntime(spec, seed=self.seed + 1 + i,
                          trajectory=self._native_trajectory(spec))
            for i, spec in enumerate(cfg.actors)
        ]
        self._t = 0.0
        self._done = False
        self._reason = None
        self._prev_v = v
        self._prev_a = 0.0
        self._prev_theta = th
        self._path = [(x, z)]
        self.score = ScoreTrace()
        self._trace = []
        result = StepResult(self._render(), self.ego,
                            [a.state for a in self.actors],
                            collision_fg=False, collision_bg=False,
                            done=False, reason=None, sub_scores=None)
        self._record(result, controls=None)
        return result

    def _native_trajectory(self, spec):
        if spec.kind == "native":
            idx = int(spec.ref)
            if not 0 <= idx < len(self.graph.native_actors):
                raise ConfigError(f"scenario.actors: native index {idx} out of range")
            return self.graph.native_actors[idx].trajectory
        if spec.behavior["type"] == "replay":
            ref = spec.behavior.get("trajectory")
            if ref is None:
                raise ConfigError(
                    f"actor {spec.ref!r}: replay behavior needs a trajectory")
            from ..unicycle import UnicycleTrajectory
            return UnicycleTrajectory.from_dict(ref)
        return None

    def step(self, action: dict) -> StepResult:
        """Advance one control period.

        action = {"waypoints": [[x, y, t], ...]} (ego frame) or
        {"controls": [[delta, accel], ...]}; the first control of the
        resulting sequence is applied.
        """
        if self._done:
            raise EpisodeDoneError(f"episode finished ({self._reason})")
        t_wall = time.perf_counter()
        delta, accel = self._action_to_control(action)

        prev_ego = self.ego
        self.ego = bicycle_step(self.ego, delta, accel, self.dt)
        self._t += self.dt
        others = [a.state for a in self.actors]
        for i, actor in enumerate(self.actors):
            actor.advance(self._t, self.dt, prev_ego,
                          [s for j, s in enumerate(others) if j != i])
        self._path.append((self.ego.x, self.ego.z))

        fg, bg = self._collisions()
        scores = self._sub_scores(fg or bg)
        self.score.append(*scores)
        self._update_done(fg or bg)

        result = StepResult(self._render(), self.ego,
                            [a.state for a in self.actors],
                            collision_fg=fg, collision_bg=bg,
                            done=self._done, reason=self._reason,
                            sub_scores=dict(zip(("NC", "DAC", "TTC", "COM"),
                                                scores)),
                            timing_ms=(time.perf_counter() - t_wall) * 1e3)
        self._record(result, controls=(delta, accel))
        return result

    # -- internals -----------------------------------------------------------

    def _action_to_control(self, action: dict):
        if not isinstance(action, dict):
            raise ConfigError("action must be an object")
        has_wp = "waypoints" in action
        has_ctrl = "controls" in action
        if has_wp == has_ctrl:
            raise ConfigError("action needs exactly one of waypoints/controls")
        if has_ctrl:
            ctrls = action["controls"]
            if not ctrls:
                raise ConfigError("controls list is empty")
            d, a = ctrls[0]
            return float(d), float(a)
        controls = lqr_control(action["waypoints"], self.ego, dt=self.dt)
        return controls[0]

    def _ego_box(self) -> BEVBox:
        return BEVBox(self.ego.x, self.ego.z, self.ego.theta,
                      self.ego.length, self.ego.width)

    def _collisions(self):
        boxes = [BEVBox(a.state.x, a.state.z, a.state.theta,
                        a.spec.extents[0], a.spec.extents[1])
                 for a in self.actors]
        fg = any(detect_collision_fg(self._ego_box(), boxes))

        bg = False
        static = self.graph.static_bg
        if len(static):
            ground_y = self.graph.ground_height(self.ego.x, self.ego.z) \
                if len(self.graph.ground) else 0.0
            h = self.config.ego_extents[2]
            sem = static.sem_logits.argmax(axis=1) if static.num_classes else None
            ground_classes = ()
            if self.graph.schema is not None:
                ground_classes = tuple(
                    i for i, g in enumerate(self.graph.schema.is_ground) if g)
            bg = detect_collision_bg(self._ego_box(), ground_y - h / 2, h,
                                     static.mu, static.opacity, sem,
                                     ground_classes)
        return fg, bg

    def _sub_scores(self, collided: bool):
        nc = 0.0 if collided else 1.0
        if self.config.drivable_polygons:
            dac = drivable_compliance(self._ego_box().corners(),
                                      self.config.drivable_polygons)
        else:
            dac = 1.0
        ego_s = (self.ego.x, self.ego.z, self.ego.theta, self.ego.v)
        actor_states = [(a.state.x, a.state.z, a.state.theta, a.state.v)
                        for a in self.actors]
        actor_lw = [(a.spec.extents[0], a.spec.extents[1]) for a in self.actors]
        ttc = time_to_collision_score(ego_s, (self.ego.length, self.ego.width),
                                      actor_states, actor_lw, dt=self.dt)
        a_lon = (self.ego.v - self._prev_v) / self.dt
        jerk = (a_lon - self._prev_a) / self.dt
        yaw_rate = (self.ego.theta - self._prev_theta) / self.dt
        com = comfort_score(a_lon, jerk, yaw_rate)
        self._prev_v = self.ego.v
        self._prev_a = a_lon
        self._prev_theta = self.ego.theta
        return nc, dac, ttc, com

    def _update_done(self, collided: bool):
        rc = route_completion(self._path, self._route)
        self.score.r_c = rc
        if collided:
            self._done, self._reason = True, "collision"
        elif rc >= 1.0 - ROUTE_DONE_EPS:
            self._done, self._reason = True, "route_complete"
        elif self._route_distance() > self.config.d_off:
            self._done, self._reason = True, "off_route"
        elif self._t >= self.config.horizon - 1e-9:
            self._done, self._reason = True, "horizon"

    def _route_distance(self) -> float:
        p = np.array([self.ego.x, self.ego.z])
        seg = np.diff(self._route, axis=0)
        rel = p - self._route[:-1]
        denom = np.maximum((seg ** 2).sum(axis=1), 1e-12)
        u = np.clip((rel * seg).sum(axis=1) / denom, 0.0, 1.0)
        proj = self._route[:-1] + u[:, None] * seg
        return float(np.min(np.hypot(*(p - proj).T)))

    def _render(self) -> dict:
        if not self.render_observations:
            return {}
        composed = self.graph.compose(
            self._t, asset_library=self.library,
            actor_poses=self._actor_pose_overrides())
        obs = {}
        for rig in self.config.cameras:
            cam = self._rig_camera(rig)
            obs[rig.name] = rasterize(composed.gaussians, cam,
                                      modes=("color",), dtype=torch.float32)
        return obs

    def _actor_pose_overrides(self) -> dict:
        overrides = {}
        for i, actor in enumerate(self.actors):
            key = ("native", int(actor.spec.ref)) if actor.spec.kind == "native" \
                else ("inserted", self._inserted_index(actor.spec.ref))
            overrides[key] = actor.state.pose
        return overrides

    def _inserted_index(self, asset_id) -> int:
        for i, ref in enumerate(self.graph.inserted_actors):
            if ref.asset_id == asset_id:
                return i
        raise ConfigError(f"asset {asset_id!r} is not an inserted actor "
                          "of the scene")

    def _rig_camera(self, rig):
        c, s = math.cos(self.ego.theta), math.sin(self.ego.theta)
        fwd = np.array([c, s])
        left = np.array([-s, c])
        bev = np.array([self.ego.x, self.ego.z]) \
            + rig.forward * fwd + rig.left * left
        ground_y = self.graph.ground_height(bev[0], bev[1]) \
            if len(self.graph.ground) else 0.0
        eye = np.array([bev[0], ground_y + rig.down, bev[1]])
        yaw = self.ego.theta + rig.yaw
        look_bev = bev + 5.0 * np.array([math.cos(yaw), math.sin(yaw)])
        target = np.array([look_bev[0], eye[1], look_bev[1]])
        return look_at_camera(eye, target, rig.width, rig.height, f=rig.f)

    # -- trace ---------------------------------------------------------------

    def _record(self, result: StepResult, controls):
        rec = {
            "t": round(self._t, 9),
            "ego": [self.ego.x, self.ego.z, self.ego.theta, self.ego.v],
            "actors": [[a.state.x, a.state.z, a.state.theta, a.state.v]
                       for a in self.actors],
            "collision_fg": result.collision_fg,
            "collision_bg": result.collision_bg,
            "done": result.done,
            "reason": result.reason,
            "sub_scores": result.sub_scores,
            "controls": list(controls) if controls is not None else None,
        }
        self._trace.append(rec)

    def trace_records(self) -> list[dict]:
        return list(self._trace)

    def write_trace(self, path) -> None:
        with open(path, "w") as f:
            for rec in self._trace:
                f.write(json.dumps(rec) + "\n")

    @property
    def done(self) -> bool:
        return self._done

    @property
    def reason(self):
        return self._reason

    @property
    def t(self) -> float:
        return self._t
