"""Differentiable splat projection and alpha-blended volume rendering.

Everything here operates on torch tensors (float64 by default) so that
gradients flow from rendered pixels back to Gaussian parameters. The tiled
path and the brute-force reference path share one contribution rule:

    alpha'_i(p) = opacity_i * exp(-0.5 * d^T Sigma'^-1 d)   if Mahalanobis^2 <= CUTOFF^2
                  0                                          otherwise

so both paths agree exactly wherever the tile binning (a conservative
CUTOFF-sigma bounding box) includes a splat.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .sh import eval_sh_basis

TILE = 16
CUTOFF_SIGMA = 3.0  # hard support radius of a splat, in standard deviations
POWER_CUTOFF = 0.5 * CUTOFF_SIGMA ** 2
LOWPASS = 0.3  # px^2 added to the projected covariance diagonal
NEAR_PLANE = 0.05
DEFAULT_TERMINATE_EPS = 1e-4


@dataclass
class SplatParams:
    """Raw per-Gaussian parameters as torch tensors."""

    mu: torch.Tensor          # (N, 3)
    quat: torch.Tensor        # (N, 4) not necessarily normalized
    scale: torch.Tensor       # (N, 3) positive
    opacity: torch.Tensor     # (N,)
    sh: torch.Tensor          # (N, C, 3)
    sem_logits: torch.Tensor  # (N, S)

    @staticmethod
    def from_set(gs, dtype=torch.float64, requires_grad=False) -> "SplatParams":
        def t(a):
            x = torch.as_tensor(a, dtype=dtype).clone()
            x.requires_grad_(requires_grad)
            return x

        return SplatParams(t(gs.mu), t(gs.quat), t(gs.scale), t(gs.opacity),
                           t(gs.sh), t(gs.sem_logits))


@dataclass
class CameraTensors:
    """Camera constants lifted to torch."""

    R: torch.Tensor
    t: torch.Tensor
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    @staticmethod
    def from_camera(cam, dtype=torch.float64) -> "CameraTensors":
        return CameraTensors(
            R=torch.as_tensor(cam.R, dtype=dtype),
            t=torch.as_tensor(cam.t, dtype=dtype),
            fx=cam.fx, fy=cam.fy, cx=cam.cx, cy=cam.cy,
            width=cam.width, height=cam.height,
        )


def quat_to_rotmat_torch(quat: torch.Tensor) -> torch.Tensor:
    q = quat / quat.norm(dim=1, keepdim=True)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    rows = [
        1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
    ]
    return torch.stack(rows, dim=1).reshape(-1, 3, 3)


def covariance_3d_torch(quat: torch.Tensor, scale: torch.Tensor) -> torch.Tensor:
    R = quat_to_rotmat_torch(quat)
    M = R * scale[:, None, :]
    return M @ M.transpose(1, 2)


@dataclass
class PreparedSplats:
    """Projected splats ready for compositing, plus per-splat attributes."""

    idx: torch.Tensor       # (K,) indices of surviving splats (into input order)
    mu2d: torch.Tensor      # (K, 2)
    conic: torch.Tensor     # (K, 3) upper-triangular inverse covariance (a, b, c)
    depth: torch.Tensor     # (K,) camera-frame z
    radius: torch.Tensor    # (K,) CUTOFF-sigma pixel radius
    ext: torch.Tensor       # (K, 2) CUTOFF-sigma bbox half-extents per axis
    opacity: torch.Tensor   # (K,)
    color: torch.Tensor | None
    sem: torch.Tensor | None       # (K, S) softmax probabilities or raw logits
    flow: torch.Tensor | None      # (K, 2)
    order: torch.Tensor     # (K,) depth-ascending permutation of the K splats


def project_splats(params: SplatParams, cam: CameraTensors,
                   sh_degree: int | None = None,
                   modes: tuple = ("color",),
                   flow_target: torch.Tensor | None = None,
                   flow_cam: CameraTensors | None = None,
                   viewport_cull: bool = True) -> PreparedSplats:
    """EWA projection of all Gaussians into one camera."""
    p_cam = params.mu @ cam.R.T + cam.t
    z = p_cam[:, 2]
    in_front = z > NEAR_PLANE

    zc = z.clamp(min=NEAR_PLANE)  # keep math finite for culled splats
    u = cam.fx * p_cam[:, 0] / zc + cam.cx
    v = cam.fy * p_cam[:, 1] / zc + cam.cy
    mu2d = torch.stack([u, v], dim=1)

    cov3d = covariance_3d_torch(params.quat, params.scale)
    # J rows of the affine projective approximation (third row dropped)
    zero = torch.zeros_like(zc)
    J = torch.stack([
        torch.stack([cam.fx / zc, zero, -cam.fx * p_cam[:, 0] / zc ** 2], dim=1),
        torch.stack([zero, cam.fy / zc, -cam.fy * p_cam[:, 1] / zc ** 2], dim=1),
    ], dim=1)  # (N, 2, 3)
    JW = J @ cam.R
    cov2d = JW @ cov3d @ JW.transpose(1, 2)
    cov2d = cov2d + LOWPASS * torch.eye(2, dtype=cov2d.dtype)

    a, b, c = cov2d[:, 0, 0], cov2d[:, 0, 1], cov2d[:, 1, 1]
    det = a * c - b * b
    conic = torch.stack([c / det, -b / det, a / det], dim=1)
    mid = 0.5 * (a + c)
    lmax = mid + torch.sqrt((mid * mid - det).clamp(min=0.0))
    radius = CUTOFF_SIGMA * torch.sqrt(lmax)
    # exact axis-aligned bbox of the CUTOFF-sigma ellipse
    ext = CUTOFF_SIGMA * torch.sqrt(torch.stack([a, c], dim=1).clamp(min=0.0))

    keep = in_front
    if viewport_cull:
        keep = keep & (mu2d[:, 0] + ext[:, 0] >= 0) & (mu2d[:, 0] - ext[:, 0] <= cam.width - 1)
        keep = keep & (mu2d[:, 1] + ext[:, 1] >= 0) & (mu2d[:, 1] - ext[:, 1] <= cam.height - 1)
    idx = torch.nonzero(keep, as_tuple=False).flatten()

    color = None
    if "color" in modes:
        cam_center = -cam.R.T @ cam.t
        dirs = params.mu - cam_center
        dirs = dirs / dirs.norm(dim=1, keepdim=True).clamp(min=1e-12)
        deg = sh_degree if sh_degree is not None else int(params.sh.shape[1] ** 0.5) - 1
        basis = eval_sh_basis(dirs, deg)  # (N, C)
        color = (basis[:, :params.sh.shape[1], None] * params.sh).sum(dim=1) + 0.5

    sem = None
    if "semantic" in modes:
        sem = torch.softmax(params.sem_logits, dim=1)
    elif "semantic2d" in modes:
        sem = params.sem_logits

    flow = None
    if "flow" in modes:
        if flow_target is None or flow_cam is None:
            raise ValueError("flow mode requires flow context")
        p2 = flow_target @ flow_cam.R.T + flow_cam.t
        z2 = p2[:, 2].clamp(min=NEAR_PLANE)
        u2 = flow_cam.fx * p2[:, 0] / z2 + flow_cam.cx
        v2 = flow_cam.fy * p2[:, 1] / z2 + flow_cam.cy
        flow = torch.stack([u2, v2], dim=1) - mu2d

    order = torch.argsort(z[idx], stable=True)
    return PreparedSplats(
        idx=idx, mu2d=mu2d[idx], conic=conic[idx], depth=z[idx],
        radius=radius[idx], ext=ext[idx], opacity=params.opacity[idx],
        color=color[idx] if color is not None else None,
        sem=sem[idx] if sem is not None else None,
        flow=flow[idx] if flow is not None else None,
        order=order,
    )


def _composite(pix: torch.Tensor, prep: PreparedSplats, sel: torch.Tensor,
               terminate_eps: float):
    """Front-to-back compositing of the selected splats over a pixel block.

    pix: (P, 2) pixel sample positions; sel: (K,) depth-sorted indices into prep.
    Returns weights (P, K) and the per-splat attribute views.
    """
    mu = prep.mu2d[sel]
    con = prep.conic[sel]
    op = prep.opacity[sel]
    dx = pix[:, 0:1] - mu[None, :, 0]  # (P, K)
    dy = pix[:, 1:2] - mu[None, :, 1]
    power = ((0.5 * con[None, :, 0]) * dx * dx + con[None, :, 1] * dx * dy
             + (0.5 * con[None, :, 2]) * dy * dy)
    alpha = torch.where(power <= POWER_CUTOFF, op[None, :] * torch.exp(-power),
                        torch.zeros((), dtype=pix.dtype))
    trans = torch.cumprod(1.0 - alpha, dim=1)
    t_excl = torch.cat([torch.ones_like(trans[:, :1]), trans[:, :-1]], dim=1)
    w = alpha * t_excl
    if terminate_eps > 0.0:
        w = torch.where(t_excl < terminate_eps, torch.zeros((), dtype=w.dtype), w)
    return w


def _blend_block(w: torch.Tensor, prep: PreparedSplats, sel: torch.Tensor,
                 modes, out: dict, oy, ox, shape):
    """Accumulate one pixel block's modality outputs into `out` slices."""
    h, wd = shape
    alpha = w.sum(dim=1).reshape(h, wd)
    out["alpha"][oy:oy + h, ox:ox + wd] = alpha
    out["count"][oy:oy + h, ox:ox + wd] = (w > 0).sum(dim=1).reshape(h, wd)
    if "color" in modes:
        out["color"][oy:oy + h, ox:ox + wd] = (w @ prep.color[sel]).reshape(h, wd, 3)
    if "semantic" in modes or "semantic2d" in modes:
        out["semantic"][oy:oy + h, ox:ox + wd] = \
            (w @ prep.sem[sel]).reshape(h, wd, -1)
    if "depth" in modes:
        out["depth"][oy:oy + h, ox:ox + wd] = (w @ prep.depth[sel]).reshape(h, wd)
    if "flow" in modes:
        out["flow"][oy:oy + h, ox:ox + wd] = (w @ prep.flow[sel]).reshape(h, wd, 2)


def _alloc_outputs(H, W, modes, n_sem, dtype):
    out = {
        "alpha": torch.zeros(H, W, dtype=dtype),
        "count": torch.zeros(H, W, dtype=torch.int64),
    }
    if "color" in modes:
        out["color"] = torch.zeros(H, W, 3, dtype=dtype)
    if "semantic" in modes or "semantic2d" in modes:
        out["semantic"] = torch.zeros(H, W, n_sem, dtype=dtype)
    if "depth" in modes:
        out["depth"] = torch.zeros(H, W, dtype=dtype)
    if "flow" in modes:
        out["flow"] = torch.zeros(H, W, 2, dtype=dtype)
    return out


def _finalize(out: dict, modes) -> dict:
    if "semantic2d" in modes:
        out["semantic"] = torch.softmax(out["semantic"], dim=2)
    return out


def _tile_bins(prep: PreparedSplats, H: int, W: int):
    """Depth-ordered splat index list per tile, computed loop-free in numpy.

    Returns (ntx, nty, tile_ids, splits) where tile_ids are the non-empty
    tiles and splits the per-tile index arrays (depth ascending).
    """
    mu = prep.mu2d.detach().numpy()
    ext = prep.ext.detach().numpy()
    ntx = (W + TILE - 1) // TILE
    nty = (H + TILE - 1) // TILE
    x0 = np.clip(np.floor((mu[:, 0] - ext[:, 0]) / TILE), 0, ntx - 1).astype(np.int64)
    x1 = np.clip(np.floor((mu[:, 0] + ext[:, 0]) / TILE), 0, ntx - 1).astype(np.int64)
    y0 = np.clip(np.floor((mu[:, 1] - ext[:, 1]) / TILE), 0, nty - 1).astype(np.int64)
    y1 = np.clip(np.floor((mu[:, 1] + ext[:, 1]) / TILE), 0, nty - 1).astype(np.int64)
    nx, ny = x1 - x0 + 1, y1 - y0 + 1
    counts = nx * ny
    total = int(counts.sum())
    if total == 0:
        return ntx, nty, np.zeros(0, dtype=np.int64), []
    sid = np.repeat(np.arange(mu.shape[0]), counts)
    k = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    tx = x0[sid] + k % nx[sid]
    ty = y0[sid] + k // nx[sid]
    tile = ty * ntx + tx
    rank = np.empty(mu.shape[0], dtype=np.int64)
    rank[prep.order.numpy()] = np.arange(mu.shape[0])
    perm = np.lexsort((rank[sid], tile))
    tile_sorted = tile[perm]
    sid_sorted = sid[perm]
    tile_ids, starts = np.unique(tile_sorted, return_index=True)
    splits = np.split(sid_sorted, starts[1:])
    return ntx, nty, tile_ids, splits


def rasterize_tiled(prep: PreparedSplats, H: int, W: int, modes=("color",),
                    terminate_eps: float = DEFAULT_TERMINATE_EPS) -> dict:
    """Tile-binned rasterization; exact match of the reference path.

    Tiles are batched by padded splat count so compositing runs as a handful
    of batched tensor ops rather than one dispatch per tile.
    """
    dtype = prep.mu2d.dtype
    n_sem = prep.sem.shape[1] if prep.sem is not None else 0
    if prep.mu2d.shape[0] == 0:
        return _finalize(_alloc_outputs(H, W, modes, n_sem, dtype), modes)

    ntx, nty, tile_ids, splits = _tile_bins(prep, H, W)
    n_tiles = ntx * nty
    p = TILE * TILE
    canvases = {"alpha": torch.zeros(n_tiles, p, dtype=dtype),
                "count": torch.zeros(n_tiles, p, dtype=torch.int64)}
    chans = {}
    if "color" in modes:
        chans["color"] = (prep.color, 3)
    if "semantic" in modes or "semantic2d" in modes:
        chans["semantic"] = (prep.sem, n_sem)
    if "depth" in modes:
        chans["depth"] = (prep.depth[:, None], 1)
    if "flow" in modes:
        chans["flow"] = (prep.flow, 2)
    for name, (_, c) in chans.items():
        canvases[name] = torch.zeros(n_tiles, p, c, dtype=dtype)

    # group tiles into power-of-two padded size classes
    sizes = np.array([len(s) for s in splits])
    classes = np.maximum(8, 1 << np.ceil(np.log2(np.maximum(sizes, 1))).astype(int))
    xoff = torch.arange(TILE, dtype=dtype).repeat(TILE)           # (256,)
    yoff = torch.arange(TILE, dtype=dtype).repeat_interleave(TILE)
    for kp in np.unique(classes):
        rows = np.nonzero(classes == kp)[0]
        b = rows.size
        sel_np = np.zeros((b, kp), dtype=np.int64)
        mask_np = np.zeros((b, kp), dtype=bool)
        for i, r in enumerate(rows):
            s = splits[r]
            sel_np[i, :len(s)] = s
            mask_np[i, :len(s)] = True
        sel = torch.from_numpy(sel_np)
        mask = torch.from_numpy(mask_np)
        tids = tile_ids[rows]
        ox = torch.as_tensor((tids % ntx) * TILE, dtype=dtype)
        oy = torch.as_tensor((tids // ntx) * TILE, dtype=dtype)
        px = ox[:, None] + xoff[None, :]  # (B, 256)
        py = oy[:, None] + yoff[None, :]

        mu = prep.mu2d[sel]      # (B, K, 2)
        con = prep.conic[sel]    # (B, K, 3)
        op = prep.opacity[sel]
        tix = torch.as_tensor(tids, dtype=torch.long)
        # Depth-chunked front-to-back pass; once every pixel in the batch is
        # terminated the remaining (occluded) chunks are skipped outright.
        chunk = 64 if terminate_eps > 0.0 else kp
        t_run = torch.ones(b, p, dtype=dtype)
        zero = torch.zeros((), dtype=dtype)
        acc = {name: torch.zeros(b, p, c, dtype=dtype)
               for name, (_, c) in chans.items()}
        acc_alpha = torch.zeros(b, p, dtype=dtype)
        acc_count = torch.zeros(b, p, dtype=torch.int64)
        for k0 in range(0, kp, chunk):
            k1 = min(k0 + chunk, kp)
            dx = px[:, :, None] - mu[:, None, k0:k1, 0]  # (B, 256, kc)
            dy = py[:, :, None] - mu[:, None, k0:k1, 1]
            power = ((0.5 * con[:, None, k0:k1, 0]) * dx * dx
                     + con[:, None, k0:k1, 1] * dx * dy
                     + (0.5 * con[:, None, k0:k1, 2]) * dy * dy)
            live = (power <= POWER_CUTOFF) & mask[:, None, k0:k1]
            alpha = torch.where(live, op[:, None, k0:k1] * torch.exp(-power),
                                zero)
            trans = torch.cumprod(1.0 - alpha, dim=2)
            t_excl = t_run[:, :, None] * torch.cat(
                [torch.ones_like(trans[:, :, :1]), trans[:, :, :-1]], dim=2)
            w = alpha * t_excl
            if terminate_eps > 0.0:
                w = torch.where(t_excl < terminate_eps, zero, w)
            acc_alpha += w.sum(dim=2)
            acc_count += (w > 0).sum(dim=2)
            for name, (attr, c) in chans.items():
                acc[name] += torch.bmm(w, attr[sel[:, k0:k1]].reshape(b, k1 - k0, c))
            if k1 < kp:
                t_run = t_run * trans[:, :, -1]
                if terminate_eps > 0.0 and float(t_run.detach().max()) < terminate_eps:
                    break
        canvases["alpha"][tix] = acc_alpha
        canvases["count"][tix] = acc_count
        for name in chans:
            canvases[name][tix] = acc[name]

    out = {}
    hp, wp = nty * TILE, ntx * TILE

    def assemble(canvas, c=None):
        shape = (nty, ntx, TILE, TILE) + (() if c is None else (c,))
        img = canvas.reshape(shape)
        img = img.permute(0, 2, 1, 3, 4) if c else img.permute(0, 2, 1, 3)
        tail = (c,) if c else ()
        return img.reshape((hp, wp) + tail)[:H, :W]

    out["alpha"] = assemble(canvases["alpha"])
    out["count"] = assemble(canvases["count"])
    for name, (_, c) in chans.items():
        img = assemble(canvases[name], c)
        out[name] = img[..., 0] if name == "depth" else img
    return _finalize(out, modes)


def rasterize_full(prep: PreparedSplats, H: int, W: int, modes=("color",),
                   row_chunk: int = 32) -> dict:
    """Brute-force per-pixel blend over every splat: the oracle path."""
    dtype = prep.mu2d.dtype
    n_sem = prep.sem.shape[1] if prep.sem is not None else 0
    out = _alloc_outputs(H, W, modes, n_sem, dtype)
    k = prep.mu2d.shape[0]
    if k == 0:
        return _finalize(out, modes)
    sel = prep.order
    xs = torch.arange(W, dtype=dtype)
    for y0 in range(0, H, row_chunk):
        h = min(row_chunk, H - y0)
        ys = torch.arange(y0, y0 + h, dtype=dtype)
        gy, gx = torch.meshgrid(ys, xs, indexing="ij")
        pix = torch.stack([gx.reshape(-1), gy.reshape(-1)], dim=1)
        w = _composite(pix, prep, sel, terminate_eps=0.0)
        _blend_block(w, prep, sel, modes, out, y0, 0, (h, W))
    return _finalize(out, modes)
