"""Reading and writing frame files.

Binary layout (little-endian)::

    offset  size  field
    0       8     magic b"SLITFRM1"
    8       4     u32 version (= 1)
    12      4     u32 N (pixels per frame)
    16      4     u32 M (frames)
    20      8     f64 pixel pitch [m]
    28      8     f64 exposure [s]
    36      8     f64 max voltage [V]
    44      8     f64 slit width [m]
    52      8     f64 wavelength [m]
    60      8     f64 screen distance [m]
    68      8     u64 seed
    76      8*M*N f64 voltages [V], frame-major

The CSV variant has one header line
``# SLITFRM-CSV v1, N=<n>, M=<m>, pixel_pitch=..., ...`` followed by one
frame per line.

Fields not stored in either format (baseline, noise levels, peak scale) come
back as the :class:`SensorModel` / :class:`BeamModel` defaults.
"""

import math
import struct
from pathlib import Path

import numpy as np

from .analytic import SlitGeometry
from .ccdsim import BeamModel, FrameSet, SensorModel
from .errors import FormatError

MAGIC = b"SLITFRM1"
VERSION = 1
HEADER = struct.Struct("<8sIII6dQ")
CSV_TAG = "# SLITFRM-CSV v1"

_CSV_KEYS = ("N", "M", "pixel_pitch", "exposure", "max_voltage", "slit_width",
             "wavelength", "screen_distance", "seed")


def _metadata(fs):
    g = fs.beam.geometry
    s = fs.sensor
    return {
        "N": s.pixel_count, "M": fs.frame_count, "pixel_pitch": s.pixel_pitch,
        "exposure": s.exposure, "max_voltage": s.max_voltage, "slit_width": g.slit_width,
        "wavelength": g.wavelength, "screen_distance": g.screen_distance, "seed": fs.seed,
    }


def _frameset(meta, frames):
    try:
        sensor = SensorModel(pixel_count=meta["N"], pixel_pitch=meta["pixel_pitch"],
                             exposure=meta["exposure"], max_voltage=meta["max_voltage"])
        geometry = SlitGeometry(meta["slit_width"], meta["wavelength"], meta["screen_distance"])
        return FrameSet(sensor, BeamModel(geometry=geometry), meta["M"], meta["seed"], frames)
    except ValueError as exc:
        raise FormatError(f"invalid frame file contents: {exc}", offset=0) from exc


def write_binary(path, fs):
    m = _metadata(fs)
    header = HEADER.pack(MAGIC, VERSION, m["N"], m["M"], m["pixel_pitch"], m["exposure"],
                         m["max_voltage"], m["slit_width"], m["wavelength"],
                         m["screen_distance"], m["seed"])
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(fs.frames, dtype="<f8").tobytes())


def read_binary(path):
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:8] != MAGIC:
        raise FormatError("bad magic bytes, expected b'SLITFRM1' at byte offset 0", offset=0)
    if len(data) < HEADER.size:
        raise FormatError(f"truncated header: file ends at byte offset {len(data)}, "
                          f"header needs {HEADER.size} bytes", offset=len(data))
    (_, version, n, m, pitch, exposure, vmax, width, wavelength, distance,
     seed) = HEADER.unpack_from(data)
    if version != VERSION:
        raise FormatError(f"unsupported version {version} at byte offset 8", offset=8)
    need = HEADER.size + 8 * n * m
    if len(data) < need:
        raise FormatError(f"truncated voltage data: file ends at byte offset {len(data)}, "
                          f"expected {need} bytes for {m} x {n} values", offset=len(data))
    if len(data) > need:
        raise FormatError(f"{len(data) - need} trailing bytes after byte offset {need}",
                          offset=need)
    frames = np.frombuffer(data, dtype="<f8", count=n * m, offset=HEADER.size)
    meta = dict(N=n, M=m, pixel_pitch=pitch, exposure=exposure, max_voltage=vmax,
                slit_width=width, wavelength=wavelength, screen_distance=distance, seed=seed)
    return _frameset(meta, frames.reshape(m, n).astype(float))


def write_csv(path, fs):
    m = _metadata(fs)
    fields = ", ".join(f"{k}={m[k]!r}" for k in _CSV_KEYS)
    with open(path, "w", newline="\n") as f:
        f.write(f"{CSV_TAG}, {fields}\n")
        for row in fs.frames:
            f.write(",".join(repr(float(v)) for v in row))
            f.write("\n")


def read_csv(path):
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith(CSV_TAG):
        raise FormatError(f"line 1 must start with {CSV_TAG!r}", offset=1)
    meta = {}
    for item in lines[0][len(CSV_TAG):].split(","):
        item = item.strip()
        if not item:
            continue
        key, sep, value = item.partition("=")
        if not sep:
            raise FormatError(f"malformed header field {item!r} on line 1", offset=1)
        meta[key.strip()] = value.strip()
    missing = [k for k in _CSV_KEYS if k not in meta]
    if missing:
        raise FormatError(f"header is missing {', '.join(missing)} on line 1", offset=1)
    try:
        for k in ("N", "M", "seed"):
            meta[k] = int(meta[k])
        for k in _CSV_KEYS[2:-1]:
            meta[k] = float(meta[k])
    except ValueError as exc:
        raise FormatError(f"bad header value on line 1: {exc}", offset=1) from None
    rows = lines[1:]
    if len(rows) != meta["M"]:
        raise FormatError(f"expected {meta['M']} frame lines, found {len(rows)}",
                          offset=len(lines) + 1)
    frames = np.empty((meta["M"], meta["N"]))
    for i, line in enumerate(rows):
        try:
            values = [float(v) for v in line.split(",")]
        except ValueError:
            raise FormatError(f"non-numeric value on line {i + 2}", offset=i + 2) from None
        if len(values) != meta["N"] or not all(math.isfinite(v) for v in values):
            raise FormatError(f"line {i + 2} must hold {meta['N']} finite values",
                              offset=i + 2)
        frames[i] = values
    return _frameset(meta, frames)


def write_frames(path, fs, fmt="binary"):
    if fmt == "binary":
        write_binary(path, fs)
    elif fmt == "csv":
        write_csv(path, fs)
    else:
        raise ValueError(f"unknown frame format {fmt!r}")


def read_frames(path):
    """Read a frame file, detecting binary or CSV from its first bytes."""
    with open(path, "rb") as f:
        head = f.read(len(CSV_TAG))
    if head.startswith(b"#"):
        return read_csv(path)
    return read_binary(path)
