"""File formats: PFM float maps, 8-bit PNG, and the binary grid format.

Grid files start with one ASCII line of eight space-separated fields::

    DGGRID1 <triplane|voxel> <RX> <RY> <RZ> <C> <LO> <HI>

followed by little-endian float32 data. Tri-planes store ``(3, C, R, R)`` with
``RX = RY = RZ = R``; voxel grids store ``(RX, RY, RZ, 4)``. The box is the
cube ``[LO, HI]^3``.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from .fields import TriPlaneGrid, VoxelGrid

__all__ = [
    "atomic_write_bytes",
    "write_pfm",
    "read_pfm",
    "pfm_bytes",
    "write_png",
    "write_grid",
    "read_grid",
    "sha256_file",
]

GRID_MAGIC = "DGGRID1"


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def pfm_bytes(image) -> bytes:
    a = np.asarray(image, dtype=np.float32)
    if a.ndim == 2:
        tag = b"Pf"
    elif a.ndim == 3 and a.shape[2] == 3:
        tag = b"PF"
    else:
        raise ValueError(f"PFM holds 1 or 3 channels, got shape {a.shape}")
    h, w = a.shape[:2]
    header = tag + b"\n" + f"{w} {h}\n".encode() + b"-1.0\n"
    # PFM scanlines run bottom to top
    return header + np.ascontiguousarray(a[::-1]).astype("<f4").tobytes()


def write_pfm(path, image) -> None:
    atomic_write_bytes(path, pfm_bytes(image))


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        tag = fh.readline().strip()
        if tag not in (b"PF", b"Pf"):
            raise ValueError(f"{path}: not a PFM file")
        dims = fh.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        data = fh.read()
    dtype = "<f4" if scale < 0 else ">f4"
    channels = 3 if tag == b"PF" else 1
    a = np.frombuffer(data, dtype=dtype, count=w * h * channels)
    a = a.reshape((h, w, channels) if channels == 3 else (h, w))
    return a[::-1].astype(np.float32)


def write_png(path, color) -> None:
    a = np.clip(np.asarray(color, dtype=np.float64), 0.0, 1.0)
    img = Image.fromarray(np.round(a * 255.0).astype(np.uint8))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".png")
    os.close(fd)
    try:
        img.save(tmp, format="PNG")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_grid(path, grid: TriPlaneGrid | VoxelGrid) -> None:
    if isinstance(grid, TriPlaneGrid):
        r = grid.resolution
        fields = [GRID_MAGIC, "triplane", r, r, r, grid.channels]
        data = grid.planes
    elif isinstance(grid, VoxelGrid):
        rx, ry, rz = grid.resolution
        fields = [GRID_MAGIC, "voxel", rx, ry, rz, 4]
        data = grid.values
    else:
        raise TypeError(f"cannot serialize {type(grid).__name__}")
    lo, hi = grid.bbox
    fields += [float(lo), float(hi)]
    header = " ".join(repr(f) if isinstance(f, float) else str(f) for f in fields) + "\n"
    atomic_write_bytes(path, header.encode("ascii") + np.asarray(data, dtype="<f4").tobytes())


def read_grid(path) -> TriPlaneGrid | VoxelGrid:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        data = fh.read()
    if len(header) != 8 or header[0] != GRID_MAGIC:
        raise ValueError(f"{path}: not a grid file")
    kind = header[1]
    rx, ry, rz, c = (int(v) for v in header[2:6])
    bbox = (float(header[6]), float(header[7]))
    values = np.frombuffer(data, dtype="<f4").astype(np.float64)
    if kind == "triplane":
        return TriPlaneGrid(values.reshape(3, c, rx, rx), bbox)
    if kind == "voxel":
        return VoxelGrid(values.reshape(rx, ry, rz, c), bbox)
    raise ValueError(f"{path}: unknown grid type {kind!r}")


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
