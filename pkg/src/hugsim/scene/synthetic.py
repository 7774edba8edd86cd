"""Procedural desk-scale scene generation (stand-in for dataset reconstruction)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..render.sh import num_coeffs, rgb_to_sh
from ..unicycle import rollout
from .camera import Camera, look_at_camera
from .gaussians import GaussianSet
from .graph import NativeActor, SceneGraph
from .ground import build_ground_planes
from .schema import SemanticSchema, default_schema


@dataclass
class BuildingBox:
    center: tuple[float, float]  # (x, z) BEV
    size: tuple[float, float, float]  # (l, w, h)


@dataclass
class ActorSpec:
    start: tuple[float, float, float]  # (x, z, theta)
    speed: float
    extents: tuple[float, float, float] = (4.0, 1.8, 1.5)
    omega: float = 0.0
    duration: float = 10.0
    knot_dt: float = 0.5


@dataclass
class SyntheticSceneSpec:
    """Declarative description of a straight-road desk-scale scene."""

    road_length: float = 50.0
    road_width: float = 8.0
    grade: float = 0.0  # vertical rise per meter along +x (positive = uphill)
    ground_density: float = 2.0  # Gaussians per square meter
    marking_dash: float = 1.5
    marking_gap: float = 1.5
    buildings: list[BuildingBox] = field(default_factory=list)
    building_density: float = 8.0  # Gaussians per square meter of facade
    actors: list[ActorSpec] = field(default_factory=list)
    sh_degree: int = 1
    seed: int = 0
    ground_y: float = 0.0
    window_spacing: float = 5.0
    window_delta_z: float = 10.0

    def validate(self) -> None:
        if self.road_length <= 0 or self.road_width <= 0:
            raise ConfigError("road dimensions must be positive")
        if self.ground_density <= 0:
            raise ConfigError("ground density must be positive")
        for b in self.buildings:
            if min(b.size) <= 0:
                raise ConfigError("building dimensions must be positive")

    def to_json(self) -> str:
        d = {
            "road_length": self.road_length, "road_width": self.road_width,
            "grade": self.grade, "ground_density": self.ground_density,
            "marking_dash": self.marking_dash, "marking_gap": self.marking_gap,
            "buildings": [{"center": list(b.center), "size": list(b.size)}
                          for b in self.buildings],
            "building_density": self.building_density,
            "actors": [{"start": list(a.start), "speed": a.speed,
                        "extents": list(a.extents), "omega": a.omega,
                        "duration": a.duration, "knot_dt": a.knot_dt}
                       for a in self.actors],
            "sh_degree": self.sh_degree, "seed": self.seed,
            "ground_y": self.ground_y, "window_spacing": self.window_spacing,
            "window_delta_z": self.window_delta_z,
        }
        return json.dumps(d, indent=2)

    @staticmethod
    def from_json(text: str) -> "SyntheticSceneSpec":
        d = json.loads(text)
        return SyntheticSceneSpec(
            road_length=d.get("road_length", 50.0),
            road_width=d.get("road_width", 8.0),
            grade=d.get("grade", 0.0),
            ground_density=d.get("ground_density", 2.0),
            marking_dash=d.get("marking_dash", 1.5),
            marking_gap=d.get("marking_gap", 1.5),
            buildings=[BuildingBox(tuple(b["center"]), tuple(b["size"]))
                       for b in d.get("buildings", [])],
            building_density=d.get("building_density", 8.0),
            actors=[ActorSpec(tuple(a["start"]), a["speed"],
                              tuple(a.get("extents", (4.0, 1.8, 1.5))),
                              a.get("omega", 0.0), a.get("duration", 10.0),
                              a.get("knot_dt", 0.5))
                    for a in d.get("actors", [])],
            sh_degree=d.get("sh_degree", 1),
            seed=d.get("seed", 0),
            ground_y=d.get("ground_y", 0.0),
            window_spacing=d.get("window_spacing", 5.0),
            window_delta_z=d.get("window_delta_z", 10.0),
        )


def _make_set(mu, rgb, scale, opacity, quat, sem_class, n_classes, n_coeffs, rng):
    n = mu.shape[0]
    sh = np.zeros((n, n_coeffs, 3))
    sh[:, 0, :] = rgb_to_sh(rgb)
    if n_coeffs > 1:
        sh[:, 1:, :] = 0.05 * rng.standard_normal((n, n_coeffs - 1, 3))
    sem = np.full((n, n_classes), -4.0)
    sem[:, sem_class] = 6.0
    return GaussianSet(mu, quat, scale, opacity, sh, sem, validate=False)


def make_box_gaussians(extents, n, rng, rgb=(0.7, 0.2, 0.2), n_classes=5,
                       sem_class=3, n_coeffs=4) -> GaussianSet:
    """Gaussians scattered on the surface of an axis-aligned box (object frame)."""
    l, w, h = extents
    # sample faces proportionally to area
    areas = np.array([w * h, w * h, l * h, l * h, l * w, l * w])
    face = rng.choice(6, size=n, p=areas / areas.sum())
    u = rng.uniform(-0.5, 0.5, size=(n, 2))
    mu = np.zeros((n, 3))
    half = np.array([w / 2, h / 2, l / 2])  # object: x right, y down, z forward
    for i in range(n):
        a, b = u[i]
        f = face[i]
        if f < 2:  # front/back (z faces)
            mu[i] = [a * w, b * h, half[2] * (1 if f == 0 else -1)]
        elif f < 4:  # side (x faces)
            mu[i] = [half[0] * (1 if f == 2 else -1), a * h, b * l]
        else:  # top/bottom (y faces)
            mu[i] = [a * w, half[1] * (1 if f == 4 else -1), b * l]
    base = np.asarray(rgb) + 0.15 * rng.standard_normal((n, 3))
    scale = np.full((n, 3), 0.35 * (l * w * h / max(n, 1)) ** (1 / 3) + 0.05)
    quat = np.tile([1.0, 0, 0, 0], (n, 1))
    opacity = rng.uniform(0.7, 0.95, size=n)
    return _make_set(mu, np.clip(base, 0.05, 0.95), scale, opacity, quat,
                     sem_class, n_classes, n_coeffs, rng)


def camera_path_poses(spec: SyntheticSceneSpec, height: float = 1.5,
                      image=(64, 64), f=None) -> list[Camera]:
    """Cameras marching along the road, holding constant height above grade."""
    cams = []
    xs = np.arange(0.0, spec.road_length, spec.window_spacing)
    for x in xs:
        y = spec.ground_y - spec.grade * x - height
        y_fwd = spec.ground_y - spec.grade * (x + 5.0) - height
        cams.append(look_at_camera((x, y, 0.0), (x + 5.0, y_fwd, 0.0),
                                   image[0], image[1], f=f))
    return cams


def build_synthetic_scene(spec: SyntheticSceneSpec) -> SceneGraph:
    """Deterministic scene construction from a declarative spec."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    schema = default_schema()
    ncls = len(schema)
    nco = num_coeffs(spec.sh_degree)

    def ground_y_at(x):
        return spec.ground_y - spec.grade * np.asarray(x, dtype=np.float64)

    # road surface
    n_road = max(4, int(spec.road_length * spec.road_width * spec.ground_density))
    gx = rng.uniform(0.0, spec.road_length, n_road)
    gz = rng.uniform(-spec.road_width / 2, spec.road_width / 2, n_road)
    gmu = np.stack([gx, ground_y_at(gx), gz], axis=1)
    spacing = 1.0 / np.sqrt(spec.ground_density)
    gscale = np.concatenate([
        rng.uniform(0.6 * spacing, 1.2 * spacing, (n_road, 1)),
        np.full((n_road, 1), 0.02),
        rng.uniform(0.6 * spacing, 1.2 * spacing, (n_road, 1)),
    ], axis=1)
    shade = rng.uniform(0.25, 0.45, (n_road, 1))
    road = _make_set(gmu, np.repeat(shade, 3, axis=1), gscale,
                     rng.uniform(0.8, 0.98, n_road),
                     np.tile([1.0, 0, 0, 0], (n_road, 1)),
                     schema.index("road"), ncls, nco, rng)

    # dashed center-line markings
    marks = []
    period = spec.marking_dash + spec.marking_gap
    x = 0.0
    while x < spec.road_length:
        for dx in np.arange(0, spec.marking_dash, 0.5):
            marks.append([x + dx, 0.0, 0.0])
        x += period
    marks = np.asarray(marks) if marks else np.zeros((0, 3))
    if len(marks):
        marks[:, 1] = ground_y_at(marks[:, 0]) - 0.01
        marks = marks[:, [0, 1, 2]]
    n_m = marks.shape[0]
    marking = _make_set(marks, np.full((n_m, 3), 0.9),
                        np.tile([0.35, 0.02, 0.12], (n_m, 1)),
                        np.full(n_m, 0.95), np.tile([1.0, 0, 0, 0], (n_m, 1)),
                        schema.index("road-marking"), ncls, nco, rng)

    ground = GaussianSet.concat([road, marking])

    # buildings
    bsets = []
    for b in spec.buildings:
        l, w, h = b.size
        area = 2 * (l * h + w * h) + l * w
        n_b = max(8, int(area * spec.building_density))
        g = make_box_gaussians((l, w, h), n_b, rng,
                               rgb=tuple(rng.uniform(0.4, 0.8, 3)),
                               n_classes=ncls, sem_class=schema.index("building"),
                               n_coeffs=nco)
        cx, cz = b.center
        cy = float(ground_y_at(cx)) - h / 2
        mu = g.mu.astype(np.float64)
        # object (x=width,y=height,z=length) -> world box aligned with road
        world = np.stack([mu[:, 2] + cx, mu[:, 1] + cy, mu[:, 0] + cz], axis=1)
        bsets.append(GaussianSet(world, g.quat, g.scale, g.opacity, g.sh,
                                 g.sem_logits, validate=False))
    static_bg = (GaussianSet.concat(bsets) if bsets
                 else GaussianSet.empty(nco, ncls))

    # native actors with straight/curved unicycle trajectories
    actors = []
    for a in spec.actors:
        n_knots = int(a.duration / a.knot_dt) + 1
        times = np.arange(n_knots) * a.knot_dt
        traj = rollout(a.start, [a.speed] * (n_knots - 1),
                       [a.omega] * (n_knots - 1), times)
        body = make_box_gaussians(a.extents, 60, rng, n_classes=ncls,
                                  sem_class=schema.index("vehicle"), n_coeffs=nco)
        actors.append(NativeActor(body, traj, a.extents))

    cams = camera_path_poses(spec)
    planes = build_ground_planes(ground.mu.astype(np.float64),
                                 [(c.R, c.t) for c in cams],
                                 delta_z=spec.window_delta_z)
    return SceneGraph(ground=ground, static_bg=static_bg, native_actors=actors,
                      schema=schema, ground_planes=planes)
