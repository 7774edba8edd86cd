"""Decomposed scene graph and time-indexed world-frame composition."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import MissingAssetError
from ..unicycle import UnicycleTrajectory
from .gaussians import GaussianSet
from .ground import GroundPlaneSet, GroundSurface
from .schema import SemanticSchema

PARTITION_GROUND = 0
PARTITION_STATIC = 1
PARTITION_NATIVE = 2
PARTITION_INSERTED = 3
PARTITION_NAMES = ["ground", "static", "native", "inserted"]


def actor_rotation(theta: float) -> np.ndarray:
    """Rotation taking object axes (z forward) to a world yaw heading.

    Heading theta advances along (cos t, 0, sin t) in world (x, y, z);
    object +z maps onto that direction, object +y stays world +y (down).
    """
    s, c = np.sin(theta), np.cos(theta)
    return np.array([[s, 0.0, c], [0.0, 1.0, 0.0], [-c, 0.0, s]])


@dataclass
class NativeActor:
    """In-scene dynamic vehicle: object-frame Gaussians plus fitted trajectory."""

    gaussians: GaussianSet
    trajectory: UnicycleTrajectory
    extents: tuple[float, float, float]  # (l, w, h) meters


@dataclass
class InsertedActorRef:
    """Binding of a library asset to a behavior inside a scene."""

    asset_id: str
    behavior: dict
    trajectory: UnicycleTrajectory | None = None


@dataclass
class ComposedScene:
    """Flat world-frame Gaussians tagged with partition and instance id."""

    gaussians: GaussianSet
    partition: np.ndarray  # (N,) int8 partition codes
    instance: np.ndarray  # (N,) int32, -1 for static content
    clamped: bool = False  # any trajectory queried outside its support


class SceneGraph:
    """Ground / static / native-dynamic / inserted decomposition.

    Immutable after construction; composition is a pure function.
    World origin is the first-frame front camera.
    """

    def __init__(self, ground: GaussianSet, static_bg: GaussianSet,
                 native_actors: list[NativeActor] | None = None,
                 inserted_actors: list[InsertedActorRef] | None = None,
                 schema: SemanticSchema | None = None,
                 ground_planes: GroundPlaneSet | None = None):
        self.ground = ground
        self.static_bg = static_bg
        self.native_actors = list(native_actors or [])
        self.inserted_actors = list(inserted_actors or [])
        self.schema = schema
        self.ground_planes = ground_planes
        self._surface: GroundSurface | None = None

    @property
    def surface(self) -> GroundSurface:
        if self._surface is None:
            self._surface = GroundSurface(self.ground.mu.astype(np.float64))
        return self._surface

    def ground_height(self, x: float, z: float) -> float:
        return self.surface.height(x, z)

    def actor_world_transform(self, pose, height: float):
        """(R, t) for a BEV pose (x, z, theta) and box height (box center origin)."""
        x, z, theta = float(pose[0]), float(pose[1]), float(pose[2])
        R = actor_rotation(theta)
        y_center = self.ground_height(x, z) - 0.5 * height
        return R, np.array([x, y_center, z])

    def compose(self, t: float, asset_library=None,
                actor_poses: dict | None = None) -> ComposedScene:
        """World-frame Gaussians at time t.

        actor_poses optionally overrides trajectory lookups with explicit
        (x, z, theta) poses, keyed by ("native"|"inserted", index).
        """
        parts = [self.ground, self.static_bg]
        codes = [np.full(len(self.ground), PARTITION_GROUND, dtype=np.int8),
                 np.full(len(self.static_bg), PARTITION_STATIC, dtype=np.int8)]
        inst = [np.full(len(self.ground), -1, dtype=np.int32),
                np.full(len(self.static_bg), -1, dtype=np.int32)]
        clamped = False

        for i, actor in enumerate(self.native_actors):
            pose, was_clamped = self._actor_pose(("native", i), actor.trajectory,
                                                 t, actor_poses)
            clamped |= was_clamped
            R, tr = self.actor_world_transform(pose, actor.extents[2])
            g = actor.gaussians.transformed(R, tr)
            parts.append(g)
            codes.append(np.full(len(g), PARTITION_NATIVE, dtype=np.int8))
            inst.append(np.full(len(g), i, dtype=np.int32))

        for i, ref in enumerate(self.inserted_actors):
            if asset_library is None or not asset_library.has(ref.asset_id):
                raise MissingAssetError(f"asset {ref.asset_id!r} is not available")
            asset = asset_library.get(ref.asset_id)
            pose, was_clamped = self._actor_pose(("inserted", i), ref.trajectory,
                                                 t, actor_poses)
            clamped |= was_clamped
            g = asset.placed(pose, self.surface)
            parts.append(g)
            codes.append(np.full(len(g), PARTITION_INSERTED, dtype=np.int8))
            inst.append(np.full(len(g), i, dtype=np.int32))

        return ComposedScene(GaussianSet.concat(parts), np.concatenate(codes),
                             np.concatenate(inst), clamped=clamped)

    @staticmethod
    def _actor_pose(key, trajectory, t, actor_poses):
        if actor_poses is not None and key in actor_poses:
            return np.asarray(actor_poses[key], dtype=np.float64), False
        if trajectory is None:
            raise MissingAssetError(f"actor {key} has neither trajectory nor pose")
        return trajectory.interpolate(t)


def compose_scene(graph: SceneGraph, t: float, asset_library=None,
                  actor_poses: dict | None = None) -> ComposedScene:
    return graph.compose(t, asset_library=asset_library, actor_poses=actor_poses)
