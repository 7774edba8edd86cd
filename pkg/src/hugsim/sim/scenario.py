"""Scenario configuration: JSON schema, validation, loading."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError


def _require(cond: bool, path: str, msg: str):
    if not cond:
        raise ConfigError(f"scenario.{path}: {msg}")


@dataclass
class CameraRigEntry:
    """One camera mounted on the ego, pose relative to the ego BEV frame."""

    name: str = "front"
    width: int = 128
    height: int = 128
    f: float | None = None
    # offset in ego frame: forward, down, left (meters); yaw relative to heading
    forward: float = 0.0
    down: float = -1.5
    left: float = 0.0
    yaw: float = 0.0

    @classmethod
    def from_dict(cls, d: dict, path: str) -> "CameraRigEntry":
        _require(isinstance(d, dict), path, "must be an object")
        entry = cls(**{k: d[k] for k in d})
        _require(entry.width > 0 and entry.height > 0,
                 path, "image size must be positive")
        return entry

    def to_dict(self) -> dict:
        return {"name": self.name, "width": self.width, "height": self.height,
                "f": self.f, "forward": self.forward, "down": self.down,
                "left": self.left, "yaw": self.yaw}


@dataclass
class ActorSpec:
    """An actor binding: who it is, how it behaves, where it starts."""

    kind: str                   # "asset" or "native"
    ref: str | int              # asset id or native-actor index
    behavior: dict = field(default_factory=lambda: {"type": "constant"})
    start_pose: tuple = (0.0, 0.0, 0.0)
    start_speed: float = 0.0
    extents: tuple = (4.6, 1.9, 1.5)  # (l, w, h)

    @classmethod
    def from_dict(cls, d: dict, path: str) -> "ActorSpec":
        _require(isinstance(d, dict), path, "must be an object")
        spec = cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})
        _require(spec.kind in ("asset", "native"), f"{path}.kind",
                 "must be 'asset' or 'native'")
        btype = spec.behavior.get("type")
        _require(btype in ("replay", "constant", "idm", "attack"),
                 f"{path}.behavior.type",
                 f"unknown behavior {btype!r}")
        return spec

    def to_dict(self) -> dict:
        return {"kind": self.kind, "ref": self.ref, "behavior": self.behavior,
                "start_pose": list(self.start_pose),
                "start_speed": self.start_speed, "extents": list(self.extents)}


def _polygon_simple(poly: np.ndarray) -> bool:
    """No two non-adjacent edges intersect."""
    n = poly.shape[0]
    edges = [(poly[i], poly[(i + 1) % n]) for i in range(n)]

    def cross2(a, b):
        return a[0] * b[1] - a[1] * b[0]

    def seg_intersect(p1, p2, p3, p4):
        d1 = cross2(p4 - p3, p1 - p3)
        d2 = cross2(p4 - p3, p2 - p3)
        d3 = cross2(p2 - p1, p3 - p1)
        d4 = cross2(p2 - p1, p4 - p1)
        return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))

    for i in range(n):
        for j in range(i + 1, n):
            if abs(i - j) in (0, 1) or (i == 0 and j == n - 1):
                continue
            if seg_intersect(*edges[i], *edges[j]):
                return False
    return True


@dataclass
class ScenarioConfig:
    scene: str                              # path to scene container
    route: list                             # BEV waypoints [[x, z], ...]
    drivable_polygons: list = field(default_factory=list)
    cameras: list = field(default_factory=lambda: [CameraRigEntry()])
    ego_start: tuple = (0.0, 0.0, 0.0, 0.0)  # x, z, theta, v
    wheelbase: float = 2.7
    ego_extents: tuple = (4.6, 1.9, 1.5)
    control_hz: float = 10.0
    actors: list = field(default_factory=list)
    horizon: float = 30.0                   # seconds
    d_off: float = 10.0                     # off-route termination distance
    tier: str = "normal"
    seed: int = 0

    def validate(self) -> None:
        _require(self.control_hz > 0, "control_hz", "must be positive")
        route = np.asarray(self.route, dtype=np.float64)
        _require(route.ndim == 2 and route.shape[0] >= 2 and route.shape[1] == 2,
                 "route", "needs >= 2 BEV points")
        _require(self.horizon > 0, "horizon", "must be positive")
        for i, poly in enumerate(self.drivable_polygons):
            p = np.asarray(poly, dtype=np.float64)
            _require(p.ndim == 2 and p.shape[0] >= 3 and p.shape[1] == 2,
                     f"drivable_polygons[{i}]", "needs >= 3 BEV points")
            _require(_polygon_simple(p), f"drivable_polygons[{i}]",
                     "polygon self-intersects")

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        _require(isinstance(d, dict), "", "top level must be an object")
        _require("scene" in d, "scene", "required")
        _require("route" in d, "route", "required")
        kwargs = dict(d)
        kwargs["cameras"] = [CameraRigEntry.from_dict(c, f"cameras[{i}]")
                             for i, c in enumerate(d.get("cameras", [{}]))]
        kwargs["actors"] = [ActorSpec.from_dict(a, f"actors[{i}]")
                            for i, a in enumerate(d.get("actors", []))]
        for key in ("ego_start", "ego_extents"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        try:
            cfg = cls(**kwargs)
        except TypeError as e:
            raise ConfigError(f"scenario: {e}") from e
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path) as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"scenario {path}: invalid JSON ({e})") from e
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "scene": self.scene,
            "route": [list(p) for p in self.route],
            "drivable_polygons": [[list(p) for p in poly]
                                  for poly in self.drivable_polygons],
            "cameras": [c.to_dict() for c in self.cameras],
            "ego_start": list(self.ego_start),
            "wheelbase": self.wheelbase,
            "ego_extents": list(self.ego_extents),
            "control_hz": self.control_hz,
            "actors": [a.to_dict() for a in self.actors],
            "horizon": self.horizon,
            "d_off": self.d_off,
            "tier": self.tier,
            "seed": self.seed,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1)
