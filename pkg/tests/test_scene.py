import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hugsim.errors import InvariantViolation, SceneFormatError
from hugsim.scene.camera import Camera, look_at_camera
from hugsim.scene.gaussians import (
    GaussianSet,
    covariance_3d,
    quat_to_rotmat,
    yaw_quat,
)
from hugsim.scene.graph import (
    PARTITION_GROUND,
    PARTITION_NATIVE,
    PARTITION_STATIC,
    NativeActor,
    SceneGraph,
    actor_rotation,
)
from hugsim.scene.ground import GroundSurface, build_ground_planes
from hugsim.scene.io import load_scene, save_scene
from hugsim.scene.schema import SemanticSchema, default_schema
from hugsim.scene.synthetic import SyntheticSceneSpec, build_synthetic_scene
from hugsim.unicycle import rollout

from conftest import random_gaussians

unit_quats = st.lists(
    st.floats(-1.0, 1.0), min_size=4, max_size=4
).map(np.array).filter(lambda q: np.linalg.norm(q) > 1e-3)


@given(unit_quats)
def test_quat_to_rotmat_is_rotation(q):
    R = quat_to_rotmat(q)
    assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(R) == pytest.approx(1.0, abs=1e-12)


def test_yaw_quat_matches_y_rotation():
    theta = 0.7
    R = quat_to_rotmat(yaw_quat(theta))
    c, s = np.cos(theta), np.sin(theta)
    want = np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    assert np.allclose(R, want, atol=1e-12)


def test_transformed_matches_per_gaussian_covariance(rng):
    gs = random_gaussians(rng, n=10)
    R = quat_to_rotmat(yaw_quat(0.4))
    t = np.array([1.0, -2.0, 3.0])
    out = gs.transformed(R, t)
    for i in range(len(gs)):
        cov = covariance_3d(gs.gaussian(i))
        cov_t = covariance_3d(out.gaussian(i))
        assert np.allclose(cov_t, R @ cov @ R.T, atol=1e-5)
        assert np.allclose(out.mu[i], R @ gs.mu[i].astype(np.float64) + t,
                           atol=1e-5)


def test_gaussian_set_validate_rejects_bad_values(rng):
    gs = random_gaussians(rng, n=5)
    bad = gs.copy()
    bad.quat[2] *= 3.0
    with pytest.raises(InvariantViolation, match="quaternion"):
        bad.validate()
    bad = gs.copy()
    bad.scale[0, 1] = 0.0
    with pytest.raises(InvariantViolation, match="scale"):
        bad.validate()
    bad = gs.copy()
    bad.opacity[4] = 1.5
    with pytest.raises(InvariantViolation, match="opacity"):
        bad.validate()


def test_concat_and_getitem_round_trip(rng):
    a = random_gaussians(rng, n=7)
    b = random_gaussians(rng, n=3)
    both = GaussianSet.concat([a, b])
    assert len(both) == 10
    assert both[np.arange(7)].allclose(a)
    assert both[np.arange(7, 10)].allclose(b)
    assert len(GaussianSet.concat([])) == 0


def test_look_at_camera_projects_target_to_center():
    cam = look_at_camera(eye=[1.0, -2.0, 0.5], target=[4.0, -1.0, 9.0],
                         width=64, height=48, f=50.0)
    uv = cam.project(np.array([[4.0, -1.0, 9.0]]))[0]
    assert uv == pytest.approx([32.0, 24.0], abs=1e-9)
    assert np.allclose(cam.center, [1.0, -2.0, 0.5], atol=1e-12)
    # camera frame is right-handed with y pointing down in world terms
    assert np.allclose(cam.R @ cam.R.T, np.eye(3), atol=1e-12)
    back = Camera.from_dict(cam.to_dict())
    assert np.array_equal(back.K, cam.K) and np.array_equal(back.R, cam.R)


def test_ground_surface_height_on_slope():
    xs, zs = np.meshgrid(np.linspace(0, 10, 30), np.linspace(-4, 4, 20))
    grade = 0.05
    mu = np.stack([xs.ravel(), -grade * xs.ravel(), zs.ravel()], axis=1)
    surf = GroundSurface(mu)
    assert surf.height(5.0, 0.0) == pytest.approx(-grade * 5.0, abs=0.02)


def test_ground_planes_cover_every_gaussian():
    mu = np.stack([np.linspace(0, 30, 100), np.zeros(100), np.zeros(100)], axis=1)
    cams = [look_at_camera((x0, -1.5, 0.0), (x0 + 5.0, -1.5, 0.0), 32, 32)
            for x0 in (0.0, 10.0, 20.0)]
    planes = build_ground_planes(mu, [(c.R, c.t) for c in cams], delta_z=10.0)
    covered = np.unique(np.concatenate([w.members for w in planes.windows]))
    assert covered.size == 100
    # a flat plane seen from grade-aligned anchors has constant window height
    for w in planes.windows:
        assert np.ptp(w.heights(mu)) == pytest.approx(0.0, abs=1e-12)


def test_schema_validation():
    with pytest.raises(InvariantViolation, match="sky"):
        SemanticSchema(classes=["a", "b"], is_ground=[True, False],
                       is_sky=[False, False], is_collidable=[False, True])
    s = default_schema()
    assert s.index("road") == 0
    assert SemanticSchema.from_dict(s.to_dict()).classes == s.classes


def test_actor_rotation_heading_convention():
    # object +z must map onto the BEV heading direction (cos t, 0, sin t)
    for theta in (0.0, 0.9, -2.1):
        R = actor_rotation(theta)
        fwd = R @ np.array([0.0, 0.0, 1.0])
        assert np.allclose(fwd, [np.cos(theta), 0.0, np.sin(theta)], atol=1e-12)
        assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)


def test_compose_partitions_and_actor_pose_override(rng):
    ground = random_gaussians(rng, n=6)
    static = random_gaussians(rng, n=4)
    car = random_gaussians(rng, n=5)
    traj = rollout([0.0, 0.0, 0.0], [2.0, 2.0], [0.0, 0.0], [0.0, 1.0, 2.0])
    graph = SceneGraph(ground, static,
                       native_actors=[NativeActor(car, traj, (4.0, 1.8, 1.5))])
    out = graph.compose(1.0)
    assert len(out.gaussians) == 15
    assert (out.partition == PARTITION_GROUND).sum() == 6
    assert (out.partition == PARTITION_STATIC).sum() == 4
    assert (out.partition == PARTITION_NATIVE).sum() == 5
    assert set(out.instance[out.partition == PARTITION_NATIVE]) == {0}

    # overriding the pose moves the actor without touching the background
    moved = graph.compose(1.0, actor_poses={("native", 0): (10.0, -3.0, 0.5)})
    nat = out.partition == PARTITION_NATIVE
    assert np.array_equal(moved.gaussians.mu[~nat], out.gaussians.mu[~nat])
    assert not np.allclose(moved.gaussians.mu[nat], out.gaussians.mu[nat])

    # querying beyond the trajectory support flags clamping
    assert not out.clamped
    assert graph.compose(5.0).clamped


def test_scene_io_round_trip(tmp_path, rng):
    spec = SyntheticSceneSpec(road_length=12.0, ground_density=0.5,
                              actors=[], seed=1)
    graph = build_synthetic_scene(spec)
    path = tmp_path / "scene.hsim"
    save_scene(graph, path)
    back = load_scene(path)
    assert back.ground.allclose(graph.ground)
    assert back.static_bg.allclose(graph.static_bg)
    assert back.schema.classes == graph.schema.classes
    assert len(back.native_actors) == len(graph.native_actors)


def test_scene_io_rejects_garbage(tmp_path):
    path = tmp_path / "bad.hsim"
    path.write_bytes(b"not a scene container at all")
    with pytest.raises(SceneFormatError):
        load_scene(path)
