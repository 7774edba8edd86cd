"""Image export: PPM (color), PFM (float maps), PGM (semantic argmax)."""

from __future__ import annotations

import struct

import numpy as np


def write_ppm(path, image: np.ndarray) -> None:
    """8-bit binary PPM from a float color image; values clamped to [0, 1]."""
    img = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    data = (img * 255.0 + 0.5).astype(np.uint8)
    h, w = data.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(data.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.readline().strip() != b"P6":
            raise ValueError("not a binary PPM")
        line = f.readline()
        while line.startswith(b"#"):
            line = f.readline()
        w, h = map(int, line.split())
        maxval = int(f.readline())
        data = np.frombuffer(f.read(w * h * 3), dtype=np.uint8)
    return data.reshape(h, w, 3).astype(np.float64) / maxval


def write_pfm(path, image: np.ndarray) -> None:
    """Little-endian 32-bit float PFM; 1 channel (Pf) or 3 channels (PF).

    2-channel maps (flow) are padded with a zero third channel.
    """
    img = np.asarray(image, dtype=np.float32)
    if img.ndim == 2:
        header = b"Pf"
        payload = img
    else:
        if img.shape[2] == 2:
            img = np.concatenate([img, np.zeros_like(img[:, :, :1])], axis=2)
        header = b"PF"
        payload = img
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")  # negative scale = little endian
        f.write(payload[::-1].astype("<f4").tobytes())  # bottom-up rows


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header not in (b"Pf", b"PF"):
            raise ValueError("not a PFM file")
        w, h = map(int, f.readline().split())
        scale = float(f.readline())
        count = w * h * (3 if header == b"PF" else 1)
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(count * 4), dtype=dtype).astype(np.float32)
    if header == b"PF":
        return data.reshape(h, w, 3)[::-1].copy()
    return data.reshape(h, w)[::-1].copy()


def write_pgm_labels(path, semantic: np.ndarray) -> None:
    """Semantic argmax as an 8-bit PGM indexed by schema class."""
    labels = np.argmax(np.asarray(semantic), axis=2).astype(np.uint8)
    h, w = labels.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(labels.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        if f.readline().strip() != b"P5":
            raise ValueError("not a binary PGM")
        w, h = map(int, f.readline().split())
        int(f.readline())
        data = np.frombuffer(f.read(w * h), dtype=np.uint8)
    return data.reshape(h, w)
