"""Binary field/sinogram files and 16-bit PGM previews.

All binary formats are little-endian.  Field files (magic ``PMT1``) hold
n, the per-axis dims, spacing and origin, a half-space flag byte and the
row-major f64 samples.  Sinogram files (magic ``PMS1``) hold n, the
direction count, the offset count, p_min and dp, then for every direction
its n+1 components followed by its offset samples.
"""
from __future__ import annotations

import json
import os
import re
import struct
from pathlib import Path

import numpy as np

from .grid import Field, GridSpec
from .radon import Sinogram

FIELD_MAGIC = b"PMT1"
SINOGRAM_MAGIC = b"PMS1"


class FormatError(ValueError):
    """The file is truncated or does not start with the expected magic bytes."""


def _take(buf: bytes, pos: int, fmt: str) -> tuple[tuple, int]:
    size = struct.calcsize(fmt)
    if pos + size > len(buf):
        raise FormatError("unexpected end of file")
    return struct.unpack_from(fmt, buf, pos), pos + size


def encode_field(f: Field) -> bytes:
    g = f.grid
    k = g.n + 1
    head = [FIELD_MAGIC, struct.pack("<I", g.n), struct.pack(f"<{k}I", *g.dims),
            struct.pack(f"<{k}d", *g.spacing), struct.pack(f"<{k}d", *g.origin),
            struct.pack("<B", 1 if f.half_space else 0)]
    return b"".join(head) + np.ascontiguousarray(f.values, dtype="<f8").tobytes()


def decode_field(buf: bytes) -> Field:
    if buf[:4] != FIELD_MAGIC:
        raise FormatError("not a PMT1 field file")
    (n,), pos = _take(buf, 4, "<I")
    if n < 1:
        raise FormatError("field dimension must be >= 1")
    k = n + 1
    dims, pos = _take(buf, pos, f"<{k}I")
    spacing, pos = _take(buf, pos, f"<{k}d")
    origin, pos = _take(buf, pos, f"<{k}d")
    (flag,), pos = _take(buf, pos, "<B")
    count = int(np.prod(dims))
    if len(buf) != pos + 8 * count:
        raise FormatError(f"expected {count} samples, file holds {(len(buf) - pos) / 8:g}")
    vals = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).astype(np.float64).reshape(dims)
    grid = GridSpec(n, tuple(dims), tuple(spacing), tuple(origin))
    return Field(grid, vals, half_space=bool(flag))


def encode_sinogram(s: Sinogram) -> bytes:
    m, npts = s.values.shape
    parts = [SINOGRAM_MAGIC, struct.pack("<3I", s.n, m, npts), struct.pack("<2d", s.p0, s.dp)]
    body = np.concatenate([s.directions, s.values], axis=1)
    return b"".join(parts) + np.ascontiguousarray(body, dtype="<f8").tobytes()


def decode_sinogram(buf: bytes) -> Sinogram:
    if buf[:4] != SINOGRAM_MAGIC:
        raise FormatError("not a PMS1 sinogram file")
    (n, m, npts), pos = _take(buf, 4, "<3I")
    (p0, dp), pos = _take(buf, pos, "<2d")
    width = n + 1 + npts
    if len(buf) != pos + 8 * m * width:
        raise FormatError("sinogram payload has the wrong length")
    body = np.frombuffer(buf, dtype="<f8", count=m * width, offset=pos).astype(np.float64).reshape(m, width)
    return Sinogram(n, body[:, : n + 1], p0, dp, body[:, n + 1:])


def _write_bytes(path, data: bytes) -> None:
    p = Path(path)
    tmp = p.with_name(p.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, p)


def write_field(path, f: Field) -> None:
    _write_bytes(path, encode_field(f))


def read_field(path) -> Field:
    return decode_field(Path(path).read_bytes())


def write_sinogram(path, s: Sinogram) -> None:
    _write_bytes(path, encode_sinogram(s))


def read_sinogram(path) -> Sinogram:
    return decode_sinogram(Path(path).read_bytes())


def read_any(path) -> Field | Sinogram:
    buf = Path(path).read_bytes()
    if buf[:4] == SINOGRAM_MAGIC:
        return decode_sinogram(buf)
    return decode_field(buf)


# ---------------------------------------------------------------------------
# previews
# ---------------------------------------------------------------------------

def pgm_bytes(img: np.ndarray) -> tuple[bytes, float, float]:
    """16-bit binary PGM of a 2D array, rows top to bottom.  Returns (bytes, lo, hi)."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM export needs a 2D array")
    lo, hi = float(img.min()), float(img.max())
    scale = 65535.0 / (hi - lo) if hi > lo else 0.0
    q = np.rint((img - lo) * scale).astype(">u2")
    h, w = q.shape
    return f"P5\n{w} {h}\n65535\n".encode("ascii") + q.tobytes(), lo, hi


def _image_2d(values: np.ndarray) -> np.ndarray:
    # x runs left to right, y bottom to top
    return values.T[::-1]


def export_pgm(f: Field, path) -> list[Path]:
    """Write PGM previews with a JSON sidecar holding the min/max scaling.

    n = 1 fields give one image; n = 2 fields give the three central axis slices
    (``<stem>_x0``, ``<stem>_x1``, ``<stem>_y``).
    """
    p = Path(path)
    if f.n == 1:
        images = {p.stem: _image_2d(f.values)}
    elif f.n == 2:
        i, j, k = (d // 2 for d in f.grid.dims)
        images = {f"{p.stem}_x0": _image_2d(f.values[i]),
                  f"{p.stem}_x1": _image_2d(f.values[:, j]),
                  f"{p.stem}_y": f.values[:, :, k].T[::-1]}
    else:
        raise ValueError("PGM export covers n = 1 and n = 2")
    written = []
    for stem, img in images.items():
        data, lo, hi = pgm_bytes(img)
        target = p.with_name(stem + ".pgm")
        _write_bytes(target, data)
        side = {"min": lo, "max": hi, "width": img.shape[1], "height": img.shape[0]}
        _write_bytes(target.with_suffix(".json"), (json.dumps(side, sort_keys=True) + "\n").encode())
        written.append(target)
    return written


def read_pgm(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    m = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", buf)
    if m is None:
        raise FormatError("not a binary PGM")
    w, h, maxval = (int(v) for v in m.groups())
    if maxval != 65535:
        raise FormatError("only 16-bit PGM is supported")
    return np.frombuffer(buf, dtype=">u2", count=w * h, offset=m.end()).reshape(h, w).astype(np.int64)


def dump_json(obj, path=None) -> str:
    """Deterministic JSON (sorted keys, repr-exact floats)."""
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path is not None:
        _write_bytes(path, text.encode())
    return text
