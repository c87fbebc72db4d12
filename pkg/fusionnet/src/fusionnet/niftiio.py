"""Minimal single-file NIfTI-1 access for model inputs and outputs.

Covers exactly the artifact subset this package exchanges with the map
toolkit: little- or big-endian headers, optional gzip, scalar dtypes,
Fortran-ordered data, scl_slope/scl_inter scaling. Nothing here imports the
producing package; the file format is the only contract.
"""

from __future__ import annotations

import gzip
import struct
from pathlib import Path
from typing import NamedTuple

import numpy as np

HDR_SIZE = 348
VOX_OFFSET = 352
MAGIC = b"n+1\x00"

_DTYPES = {
    2: np.uint8,
    4: np.int16,
    8: np.int32,
    16: np.float32,
    64: np.float64,
    256: np.int8,
    512: np.uint16,
    768: np.uint32,
}
_FLOAT32_CODE = 16


class NiftiVolume(NamedTuple):
    data: np.ndarray
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float]


def _maybe_decompress(raw: bytes) -> bytes:
    return gzip.decompress(raw) if raw[:2] == b"\x1f\x8b" else raw


def read_volume(path: str | Path) -> NiftiVolume:
    """A 3D or 4D volume with its in-plane/axial spacing and world origin."""
    raw = _maybe_decompress(Path(path).read_bytes())
    if len(raw) < HDR_SIZE:
        raise ValueError(f"{path}: shorter than a NIfTI-1 header")
    for bo in ("<", ">"):
        if struct.unpack(bo + "i", raw[:4])[0] == HDR_SIZE:
            break
    else:
        raise ValueError(f"{path}: bad sizeof_hdr")
    if raw[344:348] != MAGIC:
        raise ValueError(f"{path}: not a single-file NIfTI-1")

    dim = struct.unpack(bo + "8h", raw[40:56])
    ndim = dim[0]
    if ndim not in (3, 4):
        raise ValueError(f"{path}: expected 3D or 4D, got {ndim}D")
    shape = tuple(int(d) for d in dim[1 : 1 + ndim])
    datatype = struct.unpack(bo + "h", raw[70:72])[0]
    if datatype not in _DTYPES:
        raise ValueError(f"{path}: unsupported datatype code {datatype}")
    dtype = np.dtype(_DTYPES[datatype]).newbyteorder(bo)
    pixdim = struct.unpack(bo + "8f", raw[76:108])
    vox_offset = int(struct.unpack(bo + "f", raw[108:112])[0])
    scl_slope, scl_inter = struct.unpack(bo + "2f", raw[112:120])
    srow_x = struct.unpack(bo + "4f", raw[280:296])
    srow_y = struct.unpack(bo + "4f", raw[296:312])
    srow_z = struct.unpack(bo + "4f", raw[312:328])

    count = int(np.prod(shape))
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=vox_offset)
    data = np.reshape(data, shape, order="F")
    if scl_slope not in (0.0, 1.0) or scl_inter != 0.0:
        slope = scl_slope if scl_slope != 0.0 else 1.0
        data = data.astype(np.float64) * slope + scl_inter
    spacing = (float(pixdim[1]), float(pixdim[2]), float(pixdim[3]))
    origin = (float(srow_x[3]), float(srow_y[3]), float(srow_z[3]))
    return NiftiVolume(np.asarray(data), spacing, origin)


def write_volume(
    data: np.ndarray,
    path: str | Path,
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0),
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> None:
    """Write a 3D/4D array as float32 NIfTI-1 (gzipped for .gz paths)."""
    data = np.asarray(data)
    if data.ndim not in (3, 4):
        raise ValueError(f"can only write 3D or 4D arrays, got {data.ndim}D")
    hdr = bytearray(HDR_SIZE)
    dim = [data.ndim, *data.shape] + [1] * (7 - data.ndim)
    struct.pack_into("<i", hdr, 0, HDR_SIZE)
    struct.pack_into("<8h", hdr, 40, *dim)
    struct.pack_into("<2h", hdr, 70, _FLOAT32_CODE, 32)
    struct.pack_into("<8f", hdr, 76, 1.0, spacing[0], spacing[1], spacing[2], 1.0, 0.0, 0.0, 0.0)
    struct.pack_into("<f", hdr, 108, float(VOX_OFFSET))
    struct.pack_into("<2f", hdr, 112, 1.0, 0.0)
    hdr[123] = 2 | 8  # mm + seconds
    hdr[148 : 148 + 9] = b"fusionnet"
    struct.pack_into("<2h", hdr, 252, 0, 1)  # sform only
    struct.pack_into("<4f", hdr, 280, spacing[0], 0.0, 0.0, origin[0])
    struct.pack_into("<4f", hdr, 296, 0.0, spacing[1], 0.0, origin[1])
    struct.pack_into("<4f", hdr, 312, 0.0, 0.0, spacing[2], origin[2])
    hdr[344:348] = MAGIC
    payload = bytes(hdr) + b"\x00\x00\x00\x00" + data.astype(np.float32).tobytes(order="F")
    path = Path(path)
    if path.name.endswith(".gz"):
        payload = gzip.compress(payload, compresslevel=6, mtime=0)
    path.write_bytes(payload)
