import numpy as np
import pytest
import torch

from hugsim.errors import ConfigError
from hugsim.render.api import (
    ExposureAffine,
    FlowContext,
    apply_exposure,
    fit_exposure_lstsq,
    flow_vectors,
    project_gaussian,
    rasterize,
    render_reference,
)
from hugsim.render.export import (
    read_pfm,
    read_pgm,
    read_ppm,
    write_pfm,
    write_pgm_labels,
    write_ppm,
)
from hugsim.render.sh import eval_sh_basis, num_coeffs, rgb_to_sh, sh_to_rgb
from hugsim.scene.camera import look_at_camera
from hugsim.scene.gaussians import GaussianSet

from conftest import forward_camera, random_gaussians

ALL_MODES = ("color", "semantic", "depth", "flow", "alpha")


def isotropic_gaussian(mu, sigma, opacity, rgb=(1.0, 0.0, 0.0)):
    return GaussianSet(np.asarray(mu).reshape(1, 3), [[1.0, 0, 0, 0]],
                       np.full((1, 3), sigma), [opacity],
                       rgb_to_sh(np.asarray(rgb)).reshape(1, 1, 3),
                       np.zeros((1, 1)))


def test_sh_degree0_round_trip(rng):
    rgb = rng.uniform(0.0, 1.0, (10, 3))
    assert np.allclose(sh_to_rgb(rgb_to_sh(rgb)), rgb, atol=1e-12)
    assert [num_coeffs(d) for d in range(4)] == [1, 4, 9, 16]


def test_eval_sh_basis_constant_term(rng):
    dirs = rng.normal(size=(20, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    basis = eval_sh_basis(dirs, 1)
    assert basis.shape == (20, 4)
    assert np.allclose(basis[:, 0], 0.28209479177387814)


def test_projection_matches_pinhole_and_ewa_oracle():
    # isotropic Gaussian at depth d: pixel center from the pinhole model,
    # image covariance (f * sigma / d)^2 I from the EWA jacobian
    cam = forward_camera(f=60.0)
    d, sigma = 5.0, 0.2
    g = isotropic_gaussian([0.3, -0.1, d], sigma, 0.9).gaussian(0)
    splat = project_gaussian(g, cam)
    want_uv = cam.project(np.array([[0.3, -0.1, d]]))[0]
    assert np.allclose(splat.mu2d, want_uv, atol=1e-6)
    assert splat.depth == pytest.approx(d)
    # image variance (f sigma / d)^2 plus the 0.3 px^2 low-pass dilation;
    # off-center projection shears it slightly, the smaller eigenvalue
    # stays on the oracle value
    s = (60.0 * sigma / d) ** 2 + 0.3
    evals = np.linalg.eigvalsh(splat.cov2d)
    assert evals[0] == pytest.approx(s, rel=0.01)


def test_behind_camera_is_culled():
    cam = forward_camera()
    g = isotropic_gaussian([0.0, 0.0, -3.0], 0.2, 0.9).gaussian(0)
    assert project_gaussian(g, cam) is None


def test_single_gaussian_center_pixel_alpha():
    # pixel samples sit on integer coordinates, so with width 32 the
    # principal point (16, 16) is sampled exactly and blended alpha there
    # equals the opacity
    cam = forward_camera(width=32, height=32, f=40.0)
    gs = isotropic_gaussian([0.0, 0.0, 4.0], 0.3, 0.7)
    out = rasterize(gs, cam, modes=("color", "alpha"), terminate_eps=0.0)
    cy, cx = 16, 16
    assert out.alpha[cy, cx] == pytest.approx(0.7, abs=1e-6)
    assert out.color[cy, cx, 0] == pytest.approx(0.7, abs=1e-6)
    assert out.color[cy, cx, 1] == pytest.approx(0.0, abs=1e-6)


def test_two_gaussians_front_to_back_compositing():
    cam = forward_camera(width=16, height=16, f=30.0)
    near = isotropic_gaussian([0.0, 0.0, 3.0], 0.4, 0.6, rgb=(1, 0, 0))
    far = isotropic_gaussian([0.0, 0.0, 6.0], 0.8, 0.8, rgb=(0, 1, 0))
    gs = GaussianSet.concat([far, near])  # storage order must not matter
    out = rasterize(gs, cam, modes=("color", "alpha"), terminate_eps=0.0)
    c = out.color[8, 8]
    assert c[0] == pytest.approx(0.6, abs=1e-6)
    assert c[1] == pytest.approx((1 - 0.6) * 0.8, abs=1e-6)
    assert out.alpha[8, 8] == pytest.approx(0.6 + 0.4 * 0.8, abs=1e-6)


def test_tiled_matches_reference_all_modes(rng):
    cam = forward_camera()
    cam2 = look_at_camera(eye=[0.1, 0.0, 0.0], target=[0.0, 0.0, 1.0],
                          width=48, height=48, f=40.0)
    for _ in range(5):
        gs = random_gaussians(rng, n=60, sh_coeffs=4)
        fc = FlowContext(cam_t2=cam2,
                         mu_t2=gs.mu + rng.normal(0, 0.05, (len(gs), 3)))
        a = rasterize(gs, cam, modes=ALL_MODES, flow_context=fc,
                      terminate_eps=0.0)
        b = render_reference(gs, cam, modes=ALL_MODES, flow_context=fc)
        for mode in ALL_MODES:
            diff = np.abs(getattr(a, mode) - getattr(b, mode)).max()
            assert diff < 1e-6, f"{mode}: {diff}"


def test_semantic_probabilities_bounded_by_alpha(rng):
    gs = random_gaussians(rng, n=40)
    cam = forward_camera()
    out = rasterize(gs, cam, modes=("semantic", "alpha"), terminate_eps=0.0)
    total = out.semantic.sum(axis=2)
    assert np.all(total <= out.alpha + 1e-9)
    assert np.allclose(total, out.alpha, atol=1e-9)


def test_unknown_mode_and_missing_flow_context(rng):
    gs = random_gaussians(rng, n=3)
    cam = forward_camera()
    with pytest.raises(ConfigError, match="modes"):
        rasterize(gs, cam, modes=("colour",))
    with pytest.raises(ConfigError, match="flow"):
        rasterize(gs, cam, modes=("flow",))


def test_flow_vectors_oracle():
    cam1 = forward_camera(f=50.0)
    cam2 = look_at_camera(eye=[0.2, 0.0, 0.0], target=[0.2, 0.0, 1.0],
                          width=48, height=48, f=50.0)
    mu1 = np.array([[0.0, 0.0, 5.0]])
    mu2 = np.array([[0.5, 0.0, 5.0]])
    got = flow_vectors(mu1, mu2, cam1, cam2)[0]
    want = cam2.project(mu2)[0] - cam1.project(mu1)[0]
    assert np.allclose(got, want, atol=1e-12)


def test_exposure_lstsq_recovers_affine(rng):
    img = rng.uniform(0.0, 1.0, (16, 16, 3))
    aff = ExposureAffine(A=np.diag([1.1, 0.9, 1.05]), b=np.array([0.02, -0.01, 0.0]))
    target = apply_exposure(img, aff)
    est = fit_exposure_lstsq(img, target)
    assert np.allclose(est.A, aff.A, atol=1e-9)
    assert np.allclose(est.b, aff.b, atol=1e-9)
    assert np.allclose(apply_exposure(img, est), target, atol=1e-9)


def test_ppm_pfm_pgm_round_trips(tmp_path, rng):
    color = rng.uniform(0.0, 1.0, (9, 7, 3))
    write_ppm(tmp_path / "c.ppm", color)
    back = read_ppm(tmp_path / "c.ppm")
    assert back.shape == color.shape
    assert np.abs(back - color).max() <= 0.5 / 255.0 + 1e-12

    depth = rng.uniform(0.0, 50.0, (9, 7)).astype(np.float32)
    write_pfm(tmp_path / "d.pfm", depth)
    assert np.array_equal(read_pfm(tmp_path / "d.pfm"), depth)

    labels = rng.integers(0, 5, (9, 7))
    probs = np.eye(5)[labels]  # one-hot semantic image
    write_pgm_labels(tmp_path / "l.pgm", probs)
    assert np.array_equal(read_pgm(tmp_path / "l.pgm"), labels)


def test_float32_path_close_to_reference(rng):
    gs = random_gaussians(rng, n=80)
    cam = forward_camera()
    fast = rasterize(gs, cam, modes=("color",), terminate_eps=1e-4,
                     dtype=torch.float32)
    ref = render_reference(gs, cam, modes=("color",))
    assert np.abs(fast.color - ref.color).max() < 1e-3
