"""Minimal NIfTI-1 I/O plus sidecar/annotation file formats.

Single-file NIfTI-1 (.nii, .nii.gz) only. Intensities are stored as float32,
label maps as uint8. Gzip members are written with mtime=0 so outputs are
byte-reproducible. Orientation is limited to axis-aligned grids: spacing comes
from pixdim, origin from the sform (or qform) translation.
"""

from __future__ import annotations

import gzip
import json
import struct
from pathlib import Path

import numpy as np

from .volume import (
    ChannelStack,
    DceSeries,
    Grid3,
    GsGroup,
    LabelVolume,
    LesionAnnotation,
    ProbabilityMap,
    Volume3,
)

HDR_SIZE = 348
MAGIC_SINGLE = b"n+1\x00"
MAGIC_PAIR = b"ni1\x00"

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
_CODES = {np.dtype(np.uint8): 2, np.dtype(np.float32): 16}


class NiftiError(ValueError):
    """Malformed or unsupported NIfTI file."""


def _is_gz(path: Path) -> bool:
    return path.name.endswith(".gz")


def stem(path: str | Path) -> str:
    """Filename without .nii / .nii.gz extension."""
    name = Path(path).name
    for suffix in (".nii.gz", ".nii"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return Path(name).stem


def timing_sidecar_path(nifti_path: str | Path) -> Path:
    p = Path(nifti_path)
    return p.parent / (stem(p) + ".timing.txt")


def _read_raw(path: Path) -> bytes:
    if _is_gz(path):
        with gzip.open(path, "rb") as fh:
            return fh.read()
    return path.read_bytes()


def _write_raw(path: Path, payload: bytes) -> None:
    if _is_gz(path):
        buf = gzip.compress(payload, compresslevel=6, mtime=0)
        path.write_bytes(buf)
    else:
        path.write_bytes(payload)


def _parse_header(raw: bytes):
    if len(raw) < HDR_SIZE:
        raise NiftiError("file shorter than a NIfTI-1 header")
    for bo in ("<", ">"):
        if struct.unpack(bo + "i", raw[:4])[0] == HDR_SIZE:
            break
    else:
        raise NiftiError("bad sizeof_hdr; not a NIfTI-1 file")
    magic = raw[344:348]
    if magic == MAGIC_PAIR:
        raise NiftiError("two-file NIfTI (.hdr/.img) is not supported")
    if magic != MAGIC_SINGLE:
        raise NiftiError("bad magic; not a NIfTI-1 file")
    dim = struct.unpack(bo + "8h", raw[40:56])
    datatype, bitpix = struct.unpack(bo + "2h", raw[70:74])
    pixdim = struct.unpack(bo + "8f", raw[76:108])
    vox_offset = struct.unpack(bo + "f", raw[108:112])[0]
    scl_slope, scl_inter = struct.unpack(bo + "2f", raw[112:120])
    qform_code, sform_code = struct.unpack(bo + "2h", raw[252:256])
    qoffset = struct.unpack(bo + "3f", raw[268:280])
    srow = np.array(struct.unpack(bo + "12f", raw[280:328]), dtype=np.float64).reshape(3, 4)
    return {
        "byteorder": bo,
        "ndim": dim[0],
        "shape": dim[1:8],
        "datatype": datatype,
        "bitpix": bitpix,
        "pixdim": pixdim,
        "vox_offset": int(vox_offset),
        "scl_slope": scl_slope,
        "scl_inter": scl_inter,
        "qform_code": qform_code,
        "sform_code": sform_code,
        "qoffset": qoffset,
        "srow": srow,
    }


def _load_array(path: Path) -> tuple[np.ndarray, Grid3]:
    """Read any supported 3D/4D NIfTI into a float64 array plus its grid."""
    raw = _read_raw(Path(path))
    hdr = _parse_header(raw)
    ndim = hdr["ndim"]
    if ndim not in (3, 4):
        raise NiftiError(f"expected a 3D or 4D file, got {ndim} dimensions")
    shape = tuple(int(n) for n in hdr["shape"][:ndim])
    if any(n < 1 for n in shape):
        raise NiftiError(f"non-positive dimensions in header: {shape}")
    spacing = tuple(float(s) for s in hdr["pixdim"][1:4])
    if any(not np.isfinite(s) or s <= 0 for s in spacing):
        raise NiftiError(f"non-positive voxel spacing in header: {spacing}")
    if hdr["sform_code"] > 0:
        origin = tuple(float(v) for v in hdr["srow"][:, 3])
    elif hdr["qform_code"] > 0:
        origin = tuple(float(v) for v in hdr["qoffset"])
    else:
        origin = (0.0, 0.0, 0.0)

    try:
        base = _DTYPES[hdr["datatype"]]
    except KeyError:
        raise NiftiError(f"unsupported NIfTI datatype code {hdr['datatype']}") from None
    dt = np.dtype(base).newbyteorder(hdr["byteorder"])
    count = int(np.prod(shape))
    offset = hdr["vox_offset"]
    if offset < HDR_SIZE or len(raw) - offset < count * dt.itemsize:
        raise NiftiError("data section truncated")
    flat = np.frombuffer(raw, dtype=dt, count=count, offset=offset)
    arr = flat.astype(np.float64).reshape(shape, order="F")
    slope, inter = hdr["scl_slope"], hdr["scl_inter"]
    if slope not in (0.0, 1.0) or inter != 0.0:
        if slope == 0.0:
            slope = 1.0
        arr = arr * float(slope) + float(inter)
    grid = Grid3(dims=shape[:3], spacing=spacing, origin=origin)
    return arr, grid


def read_timing(path: str | Path) -> np.ndarray:
    """Sidecar timing file: one acquisition time in seconds per line."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        times = np.array([float(ln) for ln in lines], dtype=np.float64)
    except ValueError as exc:
        raise NiftiError(f"bad timing file {path}: {exc}") from None
    if times.size < 2 or np.any(np.diff(times) <= 0):
        raise NiftiError(f"timing file {path} must list strictly increasing seconds")
    return times


def write_timing(times: np.ndarray, path: str | Path) -> None:
    Path(path).write_text("".join(f"{t:.9g}\n" for t in np.asarray(times)))


def read_nifti(path: str | Path, timing_path: str | Path | None = None) -> Volume3 | DceSeries:
    """Read a 3D file as a Volume3 or a 4D file as a DceSeries.

    For 4D input the acquisition times come from `timing_path`, or from the
    `<stem>.timing.txt` sidecar next to the file when present; otherwise frame
    indices 0..T-1 are used and the series is flagged as frame-index timed.
    """
    path = Path(path)
    arr, grid = _load_array(path)
    if not np.all(np.isfinite(arr)):
        raise NiftiError(f"{path} contains non-finite voxels")
    if arr.ndim == 3:
        return Volume3(grid, arr)
    n_frames = arr.shape[3]
    if n_frames < 3:
        raise NiftiError(f"4D series needs at least 3 frames, got {n_frames}")
    sidecar = Path(timing_path) if timing_path is not None else timing_sidecar_path(path)
    if sidecar.is_file():
        times = read_timing(sidecar)
        if len(times) != n_frames:
            raise NiftiError(f"timing file lists {len(times)} times for {n_frames} frames")
        unit = "seconds"
    else:
        if timing_path is not None:
            raise NiftiError(f"timing file {sidecar} not found")
        times = np.arange(n_frames, dtype=np.float64)
        unit = "frame-index"
    frames = tuple(Volume3(grid, arr[..., t]) for t in range(n_frames))
    return DceSeries(grid=grid, frames=frames, times=times, time_unit=unit)


def _build_header(dims: tuple[int, ...], spacing, origin, dtype: np.dtype) -> bytes:
    hdr = bytearray(HDR_SIZE)
    ndim = len(dims)
    dim = [ndim] + list(dims) + [1] * (7 - ndim)
    pixdim = [1.0, spacing[0], spacing[1], spacing[2], 1.0, 0.0, 0.0, 0.0]
    struct.pack_into("<i", hdr, 0, HDR_SIZE)
    struct.pack_into("<8h", hdr, 40, *dim)
    struct.pack_into("<2h", hdr, 70, _CODES[dtype], dtype.itemsize * 8)
    struct.pack_into("<8f", hdr, 76, *pixdim)
    struct.pack_into("<f", hdr, 108, float(HDR_SIZE + 4))
    struct.pack_into("<2f", hdr, 112, 1.0, 0.0)
    hdr[123] = 2 | 8  # mm + seconds
    hdr[148 : 148 + 7] = b"perfkit"
    struct.pack_into("<2h", hdr, 252, 0, 1)  # qform off, sform on
    struct.pack_into("<4f", hdr, 280, spacing[0], 0.0, 0.0, origin[0])
    struct.pack_into("<4f", hdr, 296, 0.0, spacing[1], 0.0, origin[1])
    struct.pack_into("<4f", hdr, 312, 0.0, 0.0, spacing[2], origin[2])
    hdr[344:348] = MAGIC_SINGLE
    return bytes(hdr) + b"\x00\x00\x00\x00"  # no extensions


def _write_array(arr: np.ndarray, grid: Grid3, path: Path, dtype) -> None:
    dtype = np.dtype(dtype)
    payload = _build_header(arr.shape, grid.spacing, grid.origin, dtype)
    payload += arr.astype(dtype).tobytes(order="F")
    _write_raw(Path(path), payload)


def write_nifti(v: Volume3 | LabelVolume, path: str | Path) -> None:
    """Write a volume (float32 on disk) or label map (uint8 on disk)."""
    path = Path(path)
    if isinstance(v, LabelVolume):
        _write_array(v.labels, v.grid, path, np.uint8)
    elif isinstance(v, Volume3):
        _write_array(v.voxels, v.grid, path, np.float32)
    else:
        raise TypeError(f"cannot write {type(v).__name__} as NIfTI")


def write_series(series: DceSeries, path: str | Path, timing: bool = True) -> None:
    """Write a 4D series; adds the timing sidecar when times are in seconds."""
    data = np.stack([f.voxels for f in series.frames], axis=3)
    _write_array(data, series.grid, Path(path), np.float32)
    if timing and series.time_unit == "seconds":
        write_timing(series.times, timing_sidecar_path(path))


def read_labels(path: str | Path) -> LabelVolume:
    arr, grid = _load_array(Path(path))
    if arr.ndim != 3:
        raise NiftiError("label map must be 3D")
    if not np.all(arr == np.round(arr)):
        raise NiftiError("label map contains non-integer values")
    return LabelVolume(grid, arr.astype(np.uint8))


def read_probability_map(path: str | Path) -> ProbabilityMap:
    arr, grid = _load_array(Path(path))
    if arr.ndim != 4 or arr.shape[3] != 6:
        raise NiftiError("probability map must be 4D with 6 channels")
    return ProbabilityMap(grid, arr)


def write_probability_map(p: ProbabilityMap, path: str | Path) -> None:
    _write_array(p.probs, p.grid, Path(path), np.float32)


def read_stack(path: str | Path) -> ChannelStack:
    arr, grid = _load_array(Path(path))
    if arr.ndim != 4:
        raise NiftiError("channel stack must be 4D")
    return ChannelStack(grid, np.moveaxis(arr, 3, 0))


def write_stack(s: ChannelStack, path: str | Path) -> None:
    _write_array(np.moveaxis(s.channels, 0, 3), s.grid, Path(path), np.float32)


def read_annotations(path: str | Path) -> list[LesionAnnotation]:
    """Lesion annotations from JSON: [{id, patient_id, gs_code, voxels}, ...]."""
    records = json.loads(Path(path).read_text())
    if not isinstance(records, list):
        raise ValueError(f"{path}: expected a JSON list of lesion records")
    out = []
    for rec in records:
        out.append(
            LesionAnnotation(
                id=int(rec["id"]),
                patient_id=str(rec["patient_id"]),
                gs=GsGroup(int(rec["gs_code"])),
                voxel_set=frozenset(tuple(int(c) for c in v) for v in rec["voxels"]),
            )
        )
    return out


def write_annotations(annotations: list[LesionAnnotation], path: str | Path) -> None:
    records = [
        {
            "id": a.id,
            "patient_id": a.patient_id,
            "gs_code": int(a.gs),
            "voxels": sorted(list(v) for v in a.voxel_set),
        }
        for a in sorted(annotations, key=lambda a: (a.patient_id, a.id))
    ]
    Path(path).write_text(json.dumps(records, indent=1) + "\n")
