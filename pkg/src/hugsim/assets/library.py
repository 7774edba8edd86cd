"""Directory-backed store of vehicle asset containers.

Each asset lives in its own binary file (magic "HSIMAST1", same u32-length
JSON header + float32 record layout as scene containers); index.json maps
asset ids to files, extents, and tags.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

from ..errors import SceneFormatError
from ..scene.gaussians import GaussianSet
from ..scene.io import _pack_records, _unpack_records
from .vehicle import VehicleAsset

ASSET_MAGIC = b"HSIMAST1"
ASSET_VERSION = 1
INDEX_NAME = "index.json"


def save_asset(asset: VehicleAsset, path) -> None:
    shadow = asset.shadow if asset.shadow is not None else None
    header = {
        "version": ASSET_VERSION,
        "asset_id": asset.asset_id,
        "extents": list(asset.extents),
        "sh_coeffs": asset.gaussians.sh_coeffs,
        "num_classes": asset.gaussians.num_classes,
        "counts": {"body": len(asset.gaussians),
                   "shadow": len(shadow) if shadow is not None else 0},
        "meta": asset.meta,
    }
    hdr = json.dumps(header).encode("utf-8")
    with open(path, "wb") as f:
        f.write(ASSET_MAGIC)
        f.write(struct.pack("<I", len(hdr)))
        f.write(hdr)
        f.write(_pack_records(asset.gaussians))
        if shadow is not None and len(shadow):
            f.write(_pack_records(shadow))


def load_asset(path) -> VehicleAsset:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise SceneFormatError("truncated asset: missing header")
    if data[:8] != ASSET_MAGIC:
        raise SceneFormatError("bad asset file: magic bytes do not match")
    (hdr_len,) = struct.unpack("<I", data[8:12])
    if len(data) < 12 + hdr_len:
        raise SceneFormatError("truncated asset: header cut short")
    try:
        header = json.loads(data[12:12 + hdr_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SceneFormatError(f"bad asset file: unreadable header ({e})") from e
    if header.get("version") != ASSET_VERSION:
        raise SceneFormatError(
            f"version mismatch: asset v{header.get('version')}, reader v{ASSET_VERSION}")

    sh_coeffs = header["sh_coeffs"]
    n_classes = header["num_classes"]
    stride_bytes = (3 + 4 + 3 + 1 + sh_coeffs * 3 + n_classes) * 4
    buf = data[12 + hdr_len:]
    n_body = header["counts"]["body"]
    n_shadow = header["counts"]["shadow"]
    body = _unpack_records(buf, n_body, sh_coeffs, n_classes)
    shadow: GaussianSet | None = None
    if n_shadow:
        shadow = _unpack_records(buf[n_body * stride_bytes:], n_shadow,
                                 sh_coeffs, n_classes)
    return VehicleAsset(header["asset_id"], body, tuple(header["extents"]),
                        shadow=shadow, meta=header.get("meta", {}))


class AssetLibrary:
    """Lazy-loading view over a directory of asset files."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._cache: dict[str, VehicleAsset] = {}
        self._index = self._read_index()

    def _read_index(self) -> dict:
        idx_path = self.root / INDEX_NAME
        if not idx_path.exists():
            return {}
        try:
            return json.loads(idx_path.read_text())
        except json.JSONDecodeError as e:
            raise SceneFormatError(f"bad asset index: {e}") from e

    def _write_index(self) -> None:
        (self.root / INDEX_NAME).write_text(json.dumps(self._index, indent=1))

    def ids(self) -> list[str]:
        return sorted(self._index)

    def has(self, asset_id: str) -> bool:
        return asset_id in self._index

    def get(self, asset_id: str) -> VehicleAsset:
        if asset_id not in self._index:
            raise KeyError(asset_id)
        if asset_id not in self._cache:
            entry = self._index[asset_id]
            self._cache[asset_id] = load_asset(self.root / entry["file"])
        return self._cache[asset_id]

    def save(self, asset: VehicleAsset, tags: list[str] | None = None) -> Path:
        fname = f"{asset.asset_id}.hsa"
        path = self.root / fname
        save_asset(asset, path)
        self._index[asset.asset_id] = {
            "file": fname,
            "extents": list(asset.extents),
            "tags": list(tags or []),
        }
        self._write_index()
        self._cache[asset.asset_id] = asset
        return path
