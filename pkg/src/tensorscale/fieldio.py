"""File formats: raw f32/u8 fields with JSON sidecars, PGM input, CSV, PPM.

A field on disk is a pair <name>.f32 (raw little-endian 32-bit floats,
row-major, last axis fastest) plus <name>.json describing it:
{"shape": [...], "dtype": "f32", "axes": ["y","x"] or ["z","y","x"]}.
Masks use <name>.u8 with dtype "u8". Every writer goes through a temp file
and an atomic rename, so a crashed run never leaves a truncated artifact.
"""

import json
import os
import tempfile

import numpy as np


class FileFormatError(OSError):
    """A file exists but its contents do not match the declared format."""


class ShapeMismatchError(ValueError):
    """Two fields that must share a shape do not."""


_AXES = {1: ["x"], 2: ["y", "x"], 3: ["z", "y", "x"]}
_SUFFIXES = (".f32", ".u8", ".json", ".pgm")


def atomic_write_bytes(path, data: bytes) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    atomic_write_bytes(path, text.encode("ascii"))


def _split_base(path):
    path = os.fspath(path)
    root, ext = os.path.splitext(path)
    return root if ext in _SUFFIXES else path


def write_field(path, array) -> None:
    """Write a float field as <base>.f32 + <base>.json (path may carry
    either suffix or none)."""
    base = _split_base(path)
    arr = np.ascontiguousarray(array, dtype="<f4")
    sidecar = {"shape": list(arr.shape), "dtype": "f32",
               "axes": _AXES[arr.ndim]}
    atomic_write_bytes(base + ".f32", arr.tobytes())
    write_json(base + ".json", sidecar)


def write_mask(path, mask) -> None:
    base = _split_base(path)
    arr = np.ascontiguousarray(np.asarray(mask).astype(np.uint8))
    sidecar = {"shape": list(arr.shape), "dtype": "u8",
               "axes": _AXES[arr.ndim]}
    atomic_write_bytes(base + ".u8", arr.tobytes())
    write_json(base + ".json", sidecar)


def _read_sidecar(base):
    sidecar_path = base + ".json"
    try:
        with open(sidecar_path, "r", encoding="ascii") as handle:
            sidecar = json.load(handle)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{sidecar_path}: not valid JSON: {exc}") from exc
    for key in ("shape", "dtype"):
        if key not in sidecar:
            raise FileFormatError(f"{sidecar_path}: missing '{key}'")
    return sidecar


def _read_raw(base):
    sidecar = _read_sidecar(base)
    shape = tuple(int(n) for n in sidecar["shape"])
    dtype = {"f32": "<f4", "u8": np.uint8}.get(sidecar["dtype"])
    if dtype is None:
        raise FileFormatError(f"{base}.json: unsupported dtype {sidecar['dtype']!r}")
    suffix = ".f32" if sidecar["dtype"] == "f32" else ".u8"
    with open(base + suffix, "rb") as handle:
        payload = handle.read()
    expected = int(np.prod(shape)) * np.dtype(dtype).itemsize
    if len(payload) != expected:
        raise FileFormatError(
            f"{base}{suffix}: payload is {len(payload)} bytes, sidecar "
            f"shape {shape} needs {expected}")
    return np.frombuffer(payload, dtype=dtype).reshape(shape), sidecar


def read_field(path) -> np.ndarray:
    """Read a sidecar-described f32 field as float64."""
    arr, sidecar = _read_raw(_split_base(path))
    if sidecar["dtype"] != "f32":
        raise FileFormatError(f"{path}: expected an f32 field, got {sidecar['dtype']}")
    return arr.astype(np.float64)


def read_mask(path) -> np.ndarray:
    arr, sidecar = _read_raw(_split_base(path))
    if sidecar["dtype"] != "u8":
        raise FileFormatError(f"{path}: expected a u8 mask, got {sidecar['dtype']}")
    return arr.astype(bool)


def read_pgm(path) -> np.ndarray:
    """Load a P2 (ascii) or P5 (binary) PGM scaled into [0, 1]."""
    with open(path, "rb") as handle:
        data = handle.read()

    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise FileFormatError(f"{path}: truncated PGM header")
        chunk = data[pos:pos + 1]
        if chunk == b"#":
            pos = data.find(b"\n", pos)
            if pos < 0:
                raise FileFormatError(f"{path}: unterminated PGM comment")
            continue
        if chunk.isspace():
            pos += 1
            continue
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    magic = tokens[0]
    if magic not in (b"P2", b"P5"):
        raise FileFormatError(f"{path}: not a P2/P5 PGM (magic {magic!r})")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError as exc:
        raise FileFormatError(f"{path}: malformed PGM header") from exc
    if not 0 < maxval <= 65535:
        raise FileFormatError(f"{path}: maxval {maxval} outside 1..65535")

    if magic == b"P2":
        try:
            values = np.array(data[pos:].split(), dtype=np.int64)
        except ValueError as exc:
            raise FileFormatError(f"{path}: malformed P2 samples") from exc
    else:
        pos += 1  # single whitespace after maxval
        dtype = np.uint8 if maxval < 256 else ">u2"  # 16-bit PGM is big-endian
        payload = data[pos:pos + width * height * np.dtype(dtype).itemsize]
        values = np.frombuffer(payload, dtype=dtype).astype(np.int64)
    if values.size != width * height:
        raise FileFormatError(
            f"{path}: expected {width * height} samples, got {values.size}")
    return values.reshape(height, width).astype(np.float64) / maxval


def read_input_field(path) -> np.ndarray:
    """Dispatch on suffix: .pgm image or sidecar-described f32 field."""
    if os.fspath(path).lower().endswith(".pgm"):
        return read_pgm(path)
    return read_field(path)


def write_histogram_csv(path, hist) -> None:
    lines = ["bin_center,count"]
    for center, count in zip(hist.centers, hist.counts):
        lines.append(f"{float(center):.17g},{int(count)}")
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))


def write_orientation_preview(path, angle, anisotropy) -> None:
    """8-bit PPM rendering of a 2D orientation field: hue = angle/pi,
    full saturation, value = anisotropy."""
    angle = np.asarray(angle, dtype=np.float64)
    if angle.ndim != 2:
        raise ValueError("preview requires a 2D angle field")
    hue = np.clip(angle / np.pi, 0.0, 1.0)
    value = np.clip(np.asarray(anisotropy, dtype=np.float64), 0.0, 1.0)
    h6 = hue * 6.0
    sector = np.floor(h6).astype(int) % 6
    frac = h6 - np.floor(h6)
    p = np.zeros_like(value)
    q = value * (1.0 - frac)
    t = value * frac
    channels = {0: (value, t, p), 1: (q, value, p), 2: (p, value, t),
                3: (p, q, value), 4: (t, p, value), 5: (value, p, q)}
    rgb = np.zeros(angle.shape + (3,))
    for s, (r, g, b) in channels.items():
        sel = sector == s
        rgb[sel, 0] = r[sel]
        rgb[sel, 1] = g[sel]
        rgb[sel, 2] = b[sel]
    body = np.round(rgb * 255.0).astype(np.uint8).tobytes()
    header = f"P6\n{angle.shape[1]} {angle.shape[0]}\n255\n".encode("ascii")
    atomic_write_bytes(path, header + body)
