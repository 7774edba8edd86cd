"""Versioned binary scene container.

Layout: 8-byte magic "HSIMSCN1", u32 little-endian JSON header length,
UTF-8 JSON header, then packed float32 Gaussian records per partition.
Record fields in order: mu(3), quat(4), scale(3), opacity(1), sh(C*3), sem(S).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import SceneFormatError
from ..unicycle import UnicycleTrajectory
from .gaussians import GaussianSet
from .graph import InsertedActorRef, NativeActor, SceneGraph
from .ground import GroundPlaneSet
from .schema import SemanticSchema

MAGIC = b"HSIMSCN1"
VERSION = 1


def _pack_records(gs: GaussianSet) -> bytes:
    n = len(gs)
    if n == 0:
        return b""
    rec = np.hstack([
        gs.mu, gs.quat, gs.scale, gs.opacity.reshape(n, 1),
        gs.sh.reshape(n, -1), gs.sem_logits,
    ]).astype("<f4")
    return rec.tobytes()


def _unpack_records(buf: bytes, n: int, sh_coeffs: int, n_classes: int) -> GaussianSet:
    stride = 3 + 4 + 3 + 1 + sh_coeffs * 3 + n_classes
    need = n * stride * 4
    if len(buf) < need:
        raise SceneFormatError(
            f"truncated container: need {need} record bytes, have {len(buf)}")
    rec = np.frombuffer(buf[:need], dtype="<f4").reshape(n, stride)
    o = 0
    mu = rec[:, o:o + 3]; o += 3
    quat = rec[:, o:o + 4]; o += 4
    scale = rec[:, o:o + 3]; o += 3
    opacity = rec[:, o]; o += 1
    sh = rec[:, o:o + sh_coeffs * 3].reshape(n, sh_coeffs, 3); o += sh_coeffs * 3
    sem = rec[:, o:o + n_classes]
    return GaussianSet(mu, quat, scale, opacity, sh, sem)


def save_scene(graph: SceneGraph, path) -> None:
    sh_coeffs = graph.ground.sh_coeffs if len(graph.ground) else graph.static_bg.sh_coeffs
    n_classes = graph.ground.num_classes if len(graph.ground) else graph.static_bg.num_classes
    header = {
        "version": VERSION,
        "sh_coeffs": sh_coeffs,
        "num_classes": n_classes,
        "schema": graph.schema.to_dict() if graph.schema else None,
        "counts": {
            "ground": len(graph.ground),
            "static": len(graph.static_bg),
            "native": [len(a.gaussians) for a in graph.native_actors],
        },
        "native_actors": [
            {"trajectory": a.trajectory.to_dict(), "extents": list(a.extents)}
            for a in graph.native_actors
        ],
        "inserted_actors": [
            {"asset_id": r.asset_id, "behavior": r.behavior,
             "trajectory": r.trajectory.to_dict() if r.trajectory else None}
            for r in graph.inserted_actors
        ],
        "ground_planes": graph.ground_planes.to_dict() if graph.ground_planes else None,
    }
    hdr = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(hdr)))
        f.write(hdr)
        f.write(_pack_records(graph.ground))
        f.write(_pack_records(graph.static_bg))
        for a in graph.native_actors:
            f.write(_pack_records(a.gaussians))


def load_scene(path) -> SceneGraph:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise SceneFormatError("truncated container: missing header")
    if data[:8] != MAGIC:
        raise SceneFormatError("bad container: magic bytes do not match")
    (hdr_len,) = struct.unpack("<I", data[8:12])
    if len(data) < 12 + hdr_len:
        raise SceneFormatError("truncated container: header cut short")
    try:
        header = json.loads(data[12:12 + hdr_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SceneFormatError(f"bad container: unreadable header ({e})") from e
    if header.get("version") != VERSION:
        raise SceneFormatError(
            f"version mismatch: container v{header.get('version')}, reader v{VERSION}")

    sh_coeffs = header["sh_coeffs"]
    n_classes = header["num_classes"]
    stride_bytes = (3 + 4 + 3 + 1 + sh_coeffs * 3 + n_classes) * 4
    buf = data[12 + hdr_len:]
    counts = header["counts"]

    ground = _unpack_records(buf, counts["ground"], sh_coeffs, n_classes)
    buf = buf[counts["ground"] * stride_bytes:]
    static_bg = _unpack_records(buf, counts["static"], sh_coeffs, n_classes)
    buf = buf[counts["static"] * stride_bytes:]

    natives = []
    for n, meta in zip(counts["native"], header["native_actors"]):
        g = _unpack_records(buf, n, sh_coeffs, n_classes)
        buf = buf[n * stride_bytes:]
        natives.append(NativeActor(
            g, UnicycleTrajectory.from_dict(meta["trajectory"]),
            tuple(meta["extents"])))

    inserted = [
        InsertedActorRef(
            r["asset_id"], r["behavior"],
            UnicycleTrajectory.from_dict(r["trajectory"]) if r["trajectory"] else None)
        for r in header.get("inserted_actors", [])
    ]

    schema = SemanticSchema.from_dict(header["schema"]) if header.get("schema") else None
    planes = (GroundPlaneSet.from_dict(header["ground_planes"])
              if header.get("ground_planes") else None)
    return SceneGraph(ground=ground, static_bg=static_bg, native_actors=natives,
                      inserted_actors=inserted, schema=schema, ground_planes=planes)
