"""End-to-end acceptance suite.

Each test pins one user-facing guarantee: renderer correctness against the
reference path, gradient fidelity, the semantic blending modes, the fitting
pipelines, closed-loop scoring, planning, performance, and determinism.
Several tests are deliberately slow (minutes); the budgets they assert are
part of the contract.
"""

import json
import math
import time

import numpy as np
import pytest
import torch

from hugsim.behavior import (ActorState, attack_select, candidate_cost,
                             predict_trajectory, spline_candidates)
from hugsim.behavior.attack import AttackConfig
from hugsim.fit import FitConfig, FitFrame, LossWeights, optimize_scene
from hugsim.fit.gradcheck import gradient_check
from hugsim.fit.losses import (loss_alpha, loss_image, loss_semantic,
                               loss_smooth, loss_track, loss_unicycle)
from hugsim.fit.optimize import _psnr
from hugsim.fit.unicycle_fit import fit_unicycle, noisy_boxes, trajectory_errors
from hugsim.metrics.hd import ScoreTrace, hd_score, hd_score_step, score_report
from hugsim.render.api import (ExposureAffine, FlowContext, apply_exposure,
                               rasterize, render_reference)
from hugsim.render.core import (CameraTensors, SplatParams, project_splats,
                                rasterize_tiled)
from hugsim.render.sh import rgb_to_sh
from hugsim.scene.camera import look_at_camera
from hugsim.scene.gaussians import GaussianSet
from hugsim.scene.graph import SceneGraph
from hugsim.scene.ground import build_ground_planes
from hugsim.scene.synthetic import SyntheticSceneSpec, build_synthetic_scene
from hugsim.sim.engine import Environment
from hugsim.sim.scenario import ActorSpec, CameraRigEntry, ScenarioConfig
from hugsim.unicycle import rollout

from conftest import forward_camera, random_gaussians

ALL_MODES = ("color", "semantic", "depth", "flow", "alpha")


def empty_graph():
    empty = GaussianSet(np.zeros((0, 3)), np.zeros((0, 4)), np.zeros((0, 3)),
                        np.zeros(0), np.zeros((0, 1, 3)), np.zeros((0, 5)),
                        validate=False)
    return SceneGraph(empty, empty)


def make_env(route, ego_start=(0.0, 0.0, 0.0, 5.0), actors=(), horizon=30.0,
             seed=0, graph=None, **kw):
    cfg = ScenarioConfig(scene="unused", route=[list(p) for p in route],
                         ego_start=ego_start, actors=list(actors),
                         horizon=horizon, seed=seed, **kw)
    return Environment(cfg, scene_graph=graph if graph is not None
                       else empty_graph(), render_observations=False)


# -- renderer ----------------------------------------------------------------------

def test_tiled_matches_reference_over_many_scenes():
    t0 = time.perf_counter()
    rng = np.random.default_rng(42)
    for _ in range(100):
        n = int(rng.integers(1, 201))
        w = int(rng.integers(8, 65))
        h = int(rng.integers(8, 65))
        gs = random_gaussians(rng, n=n, sh_coeffs=int(rng.choice([1, 4])),
                              n_classes=int(rng.integers(2, 6)))
        cam = look_at_camera(eye=rng.normal(0, 0.2, 3),
                             target=[0.0, 0.0, 4.0], width=w, height=h,
                             f=float(rng.uniform(20, 60)))
        cam2 = look_at_camera(eye=rng.normal(0, 0.2, 3),
                              target=[0.0, 0.0, 4.0], width=w, height=h,
                              f=cam.fx)
        fc = FlowContext(cam_t2=cam2,
                         mu_t2=gs.mu + rng.normal(0, 0.05, (n, 3)))
        mode = str(rng.choice(["3d", "2d"]))
        a = rasterize(gs, cam, modes=ALL_MODES, flow_context=fc,
                      semantic_mode=mode, terminate_eps=0.0)
        b = render_reference(gs, cam, modes=ALL_MODES, flow_context=fc,
                             semantic_mode=mode)
        for m in ALL_MODES:
            diff = np.abs(getattr(a, m) - getattr(b, m)).max()
            assert diff < 1e-6, f"{m}: {diff}"
    assert time.perf_counter() - t0 < 120.0


# -- gradients ---------------------------------------------------------------------

def test_rasterize_through_gradients():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    gs = random_gaussians(rng, n=5, z_shift=4.0)
    gs.opacity[:] = np.clip(gs.opacity, 0.2, 0.8)
    cam = forward_camera(width=16, height=16, f=20.0)
    cam_t = CameraTensors.from_camera(cam)
    sem = torch.zeros((5, 4), dtype=torch.float64)
    modes = ("color", "alpha", "depth")

    def render_loss(params):
        mu, quat, scale, opacity, sh = params
        sp = SplatParams(mu, quat, scale, opacity, sh, sem)
        prep = project_splats(sp, cam_t, modes=modes)
        out = rasterize_tiled(prep, 16, 16, modes=modes, terminate_eps=0.0)
        return (out["color"].sum() + 0.5 * out["alpha"].sum()
                + 0.1 * out["depth"].sum())

    base = SplatParams.from_set(gs)
    err = gradient_check(render_loss, [base.mu, base.quat, base.scale,
                                       base.opacity, base.sh], rng=rng)
    assert err < 1e-3

    # photometric / mask / semantic losses on random inputs
    a = torch.tensor(rng.uniform(0.1, 0.9, (12, 12, 3)))
    b = torch.tensor(rng.uniform(0.1, 0.9, (12, 12, 3)))
    assert gradient_check(lambda p: loss_image(p[0], b, 0.2), [a], rng=rng) < 1e-4
    alpha = torch.tensor(rng.uniform(0.1, 0.9, (8, 8)))
    mask = torch.tensor(rng.integers(0, 2, (8, 8)).astype(float))
    assert gradient_check(lambda p: loss_alpha(p[0], mask), [alpha], rng=rng) < 1e-4
    probs = torch.tensor(rng.uniform(0.05, 0.95, (8, 8, 3)))
    labels = rng.integers(0, 3, (8, 8))
    assert gradient_check(lambda p: loss_semantic(p[0], labels),
                          [probs], rng=rng) < 1e-4

    # trajectory losses, each checked separately
    traj = rollout([0.0, 0.0, 0.1], [2.0, 3.0], [0.2, -0.1],
                   np.array([0.0, 0.5, 1.0]))
    st = torch.tensor(traj.states + rng.normal(0, 0.05, traj.states.shape))
    vel = torch.tensor(traj.velocities)
    for loss_fn in (
        lambda p: loss_unicycle(states=p[0], velocities=p[1], times=traj.times),
        lambda p: loss_smooth(states=p[0], velocities=p[1], times=traj.times),
        lambda p: loss_track(p[0], traj.states),
    ):
        assert gradient_check(loss_fn, [st.clone(), vel.clone()], rng=rng) < 1e-4
    assert time.perf_counter() - t0 < 300.0


# -- semantic blending modes ---------------------------------------------------------

def test_floater_wrong_class_bounded_only_by_per_gaussian_softmax():
    # A nearly transparent "floater" of class 1 sits in front of an opaque
    # class-0 wall. Normalizing logits per Gaussian before blending caps the
    # wrong-class probability at the floater's own blended alpha; blending raw
    # logits first lets the floater's extreme logits dominate the pixel.
    cam = forward_camera(width=32, height=32, f=40.0)
    alpha_f = 0.05
    mu = np.array([[0.0, 0.0, 3.0], [0.0, 0.0, 6.0]])
    quat = np.tile([1.0, 0.0, 0.0, 0.0], (2, 1))
    scale = np.array([[0.1, 0.1, 0.1], [3.0, 3.0, 0.5]])
    opacity = np.array([alpha_f, 0.95])
    sh = rgb_to_sh(np.array([[1.0, 0.0, 0.0], [0.5, 0.5, 0.5]])).reshape(2, 1, 3)
    sem = np.array([[0.0, 2000.0], [60.0, 0.0]])
    gs = GaussianSet(mu, quat, scale, opacity, sh, sem, validate=False)

    floater_only = GaussianSet(mu[:1], quat[:1], scale[:1], opacity[:1],
                               sh[:1], sem[:1], validate=False)
    cy, cx = 16, 16
    floater_alpha = rasterize(floater_only, cam, modes=("alpha",),
                              terminate_eps=0.0).alpha[cy, cx]
    assert floater_alpha == pytest.approx(alpha_f, abs=1e-9)

    p3 = rasterize(gs, cam, modes=("semantic",), semantic_mode="3d",
                   terminate_eps=0.0).semantic[cy, cx, 1]
    p2 = rasterize(gs, cam, modes=("semantic",), semantic_mode="2d",
                   terminate_eps=0.0).semantic[cy, cx, 1]
    assert p3 <= floater_alpha + 1e-12
    assert p2 > floater_alpha
    assert p2 > 0.9  # the floater hijacks the pixel outright


# -- unicycle fitting ----------------------------------------------------------------

def test_unicycle_fitting_beats_noisy_observations():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    noisy_et, noisy_er, fit_et, fit_er = [], [], [], []
    for _ in range(20):
        T, dt = 30, 0.5
        times = np.arange(T) * dt
        v = rng.uniform(3.0, 8.0)
        om = np.convolve(rng.normal(0.0, 0.15, T - 1),
                         np.ones(9) / 9, mode="same")
        start = np.array([rng.normal(0, 5), rng.normal(0, 5),
                          rng.uniform(-np.pi, np.pi)])
        traj = rollout(start, np.full(T - 1, v), om, times)
        noisy = noisy_boxes(traj, 0.1 * v * dt, np.rad2deg(0.1), rng)
        e_t0, e_r0 = trajectory_errors(noisy, traj.states)
        fit = fit_unicycle(times, noisy)
        e_t1, e_r1 = trajectory_errors(fit.states, traj.states)
        noisy_et.append(e_t0)
        noisy_er.append(e_r0)
        fit_et.append(e_t1)
        fit_er.append(e_r1)
    assert np.mean(fit_et) <= 0.5 * np.mean(noisy_et)
    assert np.mean(fit_er) <= 0.7 * np.mean(noisy_er)
    assert time.perf_counter() - t0 < 180.0


# -- ground model ------------------------------------------------------------------

@pytest.mark.slow
def test_ground_constraint_flattens_windows_and_generalizes():
    t0 = time.perf_counter()
    grade = 0.04
    L, Wd, sp = 20.0, 8.0, 0.5
    xs = np.arange(0.0, L, sp)
    zs = np.arange(-Wd / 2, Wd / 2, sp)
    gx, gz = np.meshgrid(xs, zs, indexing="ij")
    gx, gz = gx.ravel(), gz.ravel()
    n = gx.size
    rng = np.random.default_rng(0)
    checker = ((np.floor(gx) + np.floor(gz)) % 2).astype(float)
    shade = 0.2 + 0.6 * checker + rng.normal(0, 0.02, n)
    mu = np.stack([gx, -grade * gx, gz], 1)
    sh = np.zeros((n, 1, 3))
    sh[:, 0, :] = rgb_to_sh(np.repeat(shade[:, None], 3, 1))
    sem = np.zeros((n, 5))
    sem[:, 0] = 6.0
    gt = GaussianSet(mu, np.tile([1.0, 0, 0, 0], (n, 1)),
                     np.tile([0.3, 0.02, 0.3], (n, 1)), np.full(n, 0.97),
                     sh, sem, validate=False)
    cams = [look_at_camera((2.0, -grade * 2 - 1.5, 0.0),
                           (10.0, -grade * 10 - 1.5 - dp, 0.0), 48, 48)
            for dp in (-0.4, 0.0, 0.4)]
    anchor_cams = [look_at_camera((x0, -grade * x0 - 1.5, 0.0),
                                  (x0 + 5, -grade * (x0 + 5) - 1.5, 0.0), 48, 48)
                   for x0 in (0.0, 5.0, 10.0, 15.0)]
    plane_set = build_ground_planes(gt.mu, [(c.R, c.t) for c in anchor_cams],
                                    delta_z=10.0)
    frames = [FitFrame(camera=c,
                       color=rasterize(gt, c, modes=("color",),
                                       terminate_eps=0.0).color)
              for c in cams]
    init_mu = gt.mu.copy()
    init_mu[:, 1] += rng.normal(0, 0.3, n)
    init = GaussianSet(init_mu, gt.quat, gt.scale, gt.opacity, gt.sh,
                       gt.sem_logits, validate=False)
    gm = np.ones(n, bool)

    def window_var(gs):
        return float(np.mean([np.var(w.heights(gs.mu.astype(np.float64)),
                                     ddof=1)
                              for w in plane_set.windows
                              if len(w.members) >= 2]))

    # evaluation pose 1.5 m above the capture line (lateral to the road plane)
    ext_cam = look_at_camera((2.0, -grade * 2 - 1.5, 1.5),
                             (10.0, -grade * 10 - 1.5, 1.5), 48, 48)
    ext_gt = rasterize(gt, ext_cam, modes=("color",), terminate_eps=0.0).color

    results = {}
    for lg in (0.0, 10.0):
        w = LossWeights(lambda_ssim=0.2, lambda_ground=lg)
        cfg = FitConfig(iterations=400, seed=0, learning_rates={"mu": 5e-3},
                        mu_lr_decay=0.1)
        fitted, _, _, _ = optimize_scene(
            init, frames, w, cfg, ground_mask=gm,
            plane_set=plane_set if lg > 0 else None, dtype=torch.float32)
        img = rasterize(fitted, ext_cam, modes=("color",),
                        terminate_eps=0.0, dtype=torch.float32).color
        results[lg] = (window_var(fitted), _psnr(img, ext_gt))

    var_off, psnr_off = results[0.0]
    var_on, psnr_on = results[10.0]
    assert var_on <= 0.1 * var_off
    assert psnr_on > psnr_off
    assert time.perf_counter() - t0 < 600.0


# -- exposure ----------------------------------------------------------------------

@pytest.mark.slow
def test_exposure_compensation_recovers_psnr():
    rng = np.random.default_rng(5)
    n = 20
    mu = rng.normal(0.0, 0.6, (n, 3))
    quat = rng.normal(size=(n, 4))
    quat /= np.linalg.norm(quat, axis=1, keepdims=True)
    gt = GaussianSet(mu, quat, rng.uniform(0.15, 0.4, (n, 3)),
                     rng.uniform(0.5, 0.95, n),
                     (rng.uniform(0, 1, (n, 1, 3)) - 0.5) / 0.28209479177387814,
                     rng.normal(0, 1, (n, 3)), validate=False)
    cams = []
    for i in range(6):
        ang = 2 * np.pi * i / 6
        eye = np.array([3 * np.sin(ang), -0.5, 3 * np.cos(ang)])
        cams.append(look_at_camera(eye, np.zeros(3), 48, 48, f=45.0))
    gains = rng.uniform(0.8, 1.2, 6)
    frames = [FitFrame(camera=c,
                       color=np.clip(rasterize(gt, c, modes=("color",),
                                               terminate_eps=0.0).color * g,
                                     0.0, None))
              for c, g in zip(cams, gains)]
    init = GaussianSet(gt.mu + rng.normal(0, 0.08, (n, 3)), gt.quat, gt.scale,
                       gt.opacity, gt.sh + rng.normal(0, 0.08, gt.sh.shape),
                       gt.sem_logits, validate=False)
    cfg = FitConfig(iterations=500, seed=0)

    psnrs = {}
    for fe in (False, True):
        fitted, exposures, _, _ = optimize_scene(
            init, frames, LossWeights(lambda_ssim=0.2), cfg, fit_exposure=fe)
        vals = []
        for frame, expo in zip(frames, exposures):
            img = rasterize(fitted, frame.camera, modes=("color",),
                            terminate_eps=0.0).color
            if fe:
                img = apply_exposure(img, expo)
            vals.append(_psnr(img, frame.color))
        psnrs[fe] = float(np.mean(vals))
    assert psnrs[True] > psnrs[False] + 0.2


# -- closed loop -------------------------------------------------------------------

def test_empty_straight_scenario_scores_perfectly():
    env = make_env(route=((0.0, 0.0), (20.0, 0.0)))
    res = env.reset()
    while not res.done:
        res = env.step({"controls": [(0.0, 0.0)]})
    assert res.reason == "route_complete"
    report = score_report(env.score)
    assert report["R_c"] == 1.0
    assert report["hd_score"] == 1.0


def test_stationary_obstacle_collision_at_closed_form_step():
    blocker = ActorSpec(kind="asset", ref="car", behavior={"type": "constant"},
                        start_pose=(20.0, 0.0, 0.0), start_speed=0.0,
                        extents=(4.6, 1.9, 1.5))
    env = make_env(route=((0.0, 0.0), (60.0, 0.0)), actors=[blocker])
    res = env.reset()
    ttc_history = []
    steps = 0
    while not res.done:
        res = env.step({"controls": [(0.0, 0.0)]})
        ttc_history.append(res.sub_scores["TTC"])
        steps += 1
    assert res.reason == "collision"
    # centers meet at 20 m - 4.6 m bumper-to-bumper -> 15.4 m at 0.5 m/step
    expected = math.ceil(15.4 / 0.5)
    assert abs(steps - expected) <= 1
    assert res.sub_scores["NC"] == 0.0
    assert 0.0 in ttc_history[:-1]  # warning fired before the impact step


def test_lqr_recovers_from_lateral_offset():
    env = make_env(route=((0.0, 0.0), (60.0, 0.0)),
                   ego_start=(0.0, 0.5, 0.0, 5.0), horizon=6.0,
                   control_hz=10.0)
    env.reset()

    def ego_frame_plan():
        e = env.ego
        c, s = math.cos(e.theta), math.sin(e.theta)
        wps = []
        for t in np.linspace(0.5, 2.0, 4):
            wx, wz = e.x + 5.0 * t, 0.0
            dx, dz = wx - e.x, wz - e.z
            wps.append([c * dx + s * dz, -s * dx + c * dz, float(t)])
        return wps

    laterals = []
    for _ in range(50):  # 5 s at 10 Hz
        res = env.step({"waypoints": ego_frame_plan()})
        laterals.append(abs(env.ego.z))
        if res.done:
            break
    assert max(laterals) <= 0.6          # no overshoot past the start offset
    assert laterals[-1] < 0.1            # converged within 5 s
    settle = next(i for i, v in enumerate(laterals) if v < 0.1)
    assert all(v < 0.1 for v in laterals[settle:])


def test_attack_planner_reaches_straight_ego():
    attacker = ActorSpec(kind="asset", ref="car",
                         behavior={"type": "attack"},
                         start_pose=(25.0, 0.0, math.pi), start_speed=5.0,
                         extents=(4.6, 1.9, 1.5))
    env = make_env(route=((0.0, 0.0), (100.0, 0.0)), actors=[attacker],
                   horizon=3.0, seed=3)
    res = env.reset()
    while not res.done:
        res = env.step({"controls": [(0.0, 0.0)]})
    assert res.reason == "collision"
    assert env.t <= 3.0 + 1e-9

    # the planner's pick must equal brute force over every candidate
    cfg = AttackConfig()
    state = ActorState(25.0, 0.0, math.pi, 5.0)
    ego_pred = predict_trajectory(ActorState(0.0, 0.0, 0.0, 5.0),
                                  cfg.horizon, cfg.dt)
    cands = spline_candidates(state, cfg)
    rng = np.random.default_rng(0)
    pick = attack_select(cands, ego_pred, [], cfg, rng)
    costs = [candidate_cost(c, ego_pred, [], cfg)[2] for c in cands]
    best = min(range(len(cands)), key=lambda i: (costs[i], cands[i].grid_index))
    assert pick.grid_index == cands[best].grid_index
    assert pick.cost == pytest.approx(costs[best])


def test_hd_score_matches_manual_arithmetic():
    rows = [
        (1.0, 1.0, 1.0, 1.0),
        (1.0, 1.0, 0.0, 1.0),
        (1.0, 0.5, 1.0, 0.5),
        (0.0, 1.0, 1.0, 1.0),   # collision step gates to zero
        (1.0, 1.0, 0.5, 0.0),
    ]
    trace = ScoreTrace(r_c=0.8)
    for r in rows:
        trace.append(*r)
    # per step: gate (NC*DAC) times (5*TTC + 2*COM)/7
    want_steps = [1.0,
                  (5 * 0.0 + 2 * 1.0) / 7,
                  0.5 * (5 * 1.0 + 2 * 0.5) / 7,
                  0.0,
                  (5 * 0.5 + 2 * 0.0) / 7]
    got = trace.step_scores()
    assert got == pytest.approx(want_steps, abs=0)
    for r, w in zip(rows, want_steps):
        assert hd_score_step(*r) == w
    assert hd_score(trace) == 0.8 * sum(want_steps) / 5


# -- performance -------------------------------------------------------------------

@pytest.mark.slow
def test_tiled_rasterizer_beats_reference_by_5x():
    rng = np.random.default_rng(9)
    n = 10_000
    mu = rng.normal(0.0, 3.0, (n, 3))
    mu[:, 2] = rng.uniform(2.0, 20.0, n)
    quat = rng.normal(size=(n, 4))
    quat /= np.linalg.norm(quat, axis=1, keepdims=True)
    gs = GaussianSet(mu, quat, rng.uniform(0.02, 0.1, (n, 3)),
                     rng.uniform(0.2, 0.9, n), rng.normal(0, 0.3, (n, 1, 3)),
                     rng.normal(0, 1, (n, 3)), validate=False)
    cam = look_at_camera(eye=np.zeros(3), target=[0.0, 0.0, 5.0],
                         width=256, height=256, f=200.0)
    t0 = time.perf_counter()
    fast = rasterize(gs, cam, modes=("color",), terminate_eps=1e-4)
    t_fast = time.perf_counter() - t0
    t0 = time.perf_counter()
    ref = render_reference(gs, cam, modes=("color",))
    t_ref = time.perf_counter() - t0
    assert np.abs(fast.color - ref.color).max() < 1e-3
    assert t_ref / t_fast >= 5.0, f"speedup {t_ref / t_fast:.1f}x"


@pytest.mark.slow
def test_full_sim_step_under_100ms():
    graph = build_synthetic_scene(SyntheticSceneSpec(
        road_length=60.0, road_width=8.0, ground_density=0.3, seed=1))
    rig = [CameraRigEntry(name="front", width=128, height=128),
           CameraRigEntry(name="left", width=128, height=128, yaw=0.6),
           CameraRigEntry(name="right", width=128, height=128, yaw=-0.6)]
    cfg = ScenarioConfig(scene="unused", route=[[0.0, 0.0], [50.0, 0.0]],
                         ego_start=(0.0, 0.0, 0.0, 5.0), horizon=30.0,
                         cameras=rig)
    env = Environment(cfg, scene_graph=graph, render_observations=True)
    env.reset()
    timings = []
    for _ in range(20):
        res = env.step({"controls": [(0.0, 0.0)]})
        assert set(res.observations) == {"front", "left", "right"}
        assert res.observations["front"].color.shape == (128, 128, 3)
        timings.append(res.timing_ms)
    # best-of-N, as in timeit: wall clock on a shared machine includes
    # scheduler noise that says nothing about the step cost itself
    assert min(timings) < 100.0, f"timings {timings}"


# -- determinism -------------------------------------------------------------------

def test_equal_seeds_give_byte_identical_traces(tmp_path):
    attacker = ActorSpec(kind="asset", ref="car",
                         behavior={"type": "attack"},
                         start_pose=(30.0, 2.0, math.pi), start_speed=4.0,
                         extents=(4.6, 1.9, 1.5))

    def run(path):
        env = make_env(route=((0.0, 0.0), (50.0, 0.0)), actors=[attacker],
                       horizon=5.0, seed=11)
        res = env.reset()
        while not res.done:
            res = env.step({"controls": [(0.05, 0.2)]})
        env.write_trace(path)

    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    run(p1)
    run(p2)
    b1, b2 = p1.read_bytes(), p2.read_bytes()
    assert len(json.loads(b1.decode().splitlines()[0])["ego"]) == 4
    assert b1 == b2
