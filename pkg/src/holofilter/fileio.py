"""Binary file formats: a versioned float-tensor container, PGM label maps,
PPM renders, and checkpoint directories.

The tensor container stores 32-bit little-endian floats, so writing a float64
array downcasts once; reading returns float64. Rewriting what was read is
bit-exact. PGM/PPM are the binary netpbm forms (P5/P6) with 16-bit PGM
samples big-endian per the format.
"""

from __future__ import annotations

import os

import numpy as np

from .seeding import seeded_rng

TENSOR_MAGIC = b"HSTN"
TENSOR_VERSION = 1
TENSOR_DTYPE_F32 = 1

CHECKPOINT_MANIFEST = "manifest.txt"

_MAX_ELEMENTS = 1 << 31  # sanity cap against absurd headers


class FileFormatError(ValueError):
    """A malformed container, PGM, or PPM file."""


def write_tensor(path, array) -> None:
    """Write an array to the tensor container (float32 payload)."""
    arr = np.asarray(array, dtype=np.float64)
    if arr.ndim < 1:
        raise ValueError("cannot store a 0-d tensor")
    if arr.ndim > 255:
        raise ValueError(f"rank {arr.ndim} exceeds the format's 255 limit")
    if any(e < 1 for e in arr.shape):
        raise ValueError(f"extents must be positive, got {arr.shape}")
    if any(e > 0xFFFFFFFF for e in arr.shape):
        raise ValueError(f"extent overflows 32 bits: {arr.shape}")
    header = TENSOR_MAGIC + bytes([TENSOR_VERSION, TENSOR_DTYPE_F32, arr.ndim])
    header += np.asarray(arr.shape, dtype="<u4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_tensor(path) -> np.ndarray:
    """Read a tensor container back as float64."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 7:
        raise FileFormatError(f"{path}: header truncated at byte {len(data)}")
    if data[:4] != TENSOR_MAGIC:
        raise FileFormatError(f"{path}: bad magic {data[:4]!r} at byte 0")
    if data[4] != TENSOR_VERSION:
        raise FileFormatError(f"{path}: unsupported version {data[4]} at byte 4")
    if data[5] != TENSOR_DTYPE_F32:
        raise FileFormatError(f"{path}: unsupported dtype code {data[5]} at byte 5")
    rank = data[6]
    if rank == 0:
        raise FileFormatError(f"{path}: zero rank at byte 6")
    payload_at = 7 + 4 * rank
    if len(data) < payload_at:
        raise FileFormatError(f"{path}: extents truncated at byte {len(data)}")
    extents = np.frombuffer(data[7:payload_at], dtype="<u4")
    if (extents == 0).any():
        raise FileFormatError(f"{path}: zero extent at byte 7")
    n = int(np.prod(extents.astype(np.int64)))
    if n > _MAX_ELEMENTS:
        raise FileFormatError(f"{path}: extent overflow ({n} elements) at byte 7")
    expected = payload_at + 4 * n
    if len(data) != expected:
        raise FileFormatError(f"{path}: payload truncated at byte {len(data)} "
                              f"(expected {expected} bytes)")
    flat = np.frombuffer(data[payload_at:], dtype="<f4").astype(np.float64)
    return flat.reshape(tuple(int(e) for e in extents))


def _read_netpbm_header(data: bytes, path, magic: bytes, n_fields: int):
    """Parse 'P5'/'P6' + whitespace-separated numeric fields, honoring
    '#' comments; returns (fields, payload offset)."""
    if data[:2] != magic:
        raise FileFormatError(f"{path}: bad magic {data[:2]!r} at byte 0")
    fields = []
    pos = 2
    while len(fields) < n_fields:
        if pos >= len(data):
            raise FileFormatError(f"{path}: header truncated at byte {pos}")
        ch = data[pos:pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
        elif ch.isdigit():
            start = pos
            while pos < len(data) and data[pos:pos + 1].isdigit():
                pos += 1
            fields.append(int(data[start:pos]))
        else:
            raise FileFormatError(f"{path}: unexpected byte {ch!r} at byte {pos}")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FileFormatError(f"{path}: missing whitespace after header at byte {pos}")
    return fields, pos + 1


def write_label_map(path, labels, maxval=None) -> None:
    """Write an (h, w) integer label map as binary PGM (P5)."""
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"label map must be 2-d, got shape {labels.shape}")
    if labels.size == 0:
        raise ValueError("label map is empty")
    if labels.min() < 0:
        raise ValueError("labels must be nonnegative")
    top = int(labels.max())
    if maxval is None:
        maxval = 255 if top <= 255 else 65535
    if maxval not in (255, 65535):
        raise ValueError(f"maxval must be 255 or 65535, got {maxval}")
    if top > maxval:
        raise ValueError(f"label {top} exceeds maxval {maxval}")
    h, w = labels.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode()
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(labels.astype(dtype).tobytes())


def read_label_map(path) -> np.ndarray:
    """Read a binary PGM back as an (h, w) int64 label map."""
    with open(path, "rb") as fh:
        data = fh.read()
    (w, h, maxval), offset = _read_netpbm_header(data, path, b"P5", 3)
    if w < 1 or h < 1:
        raise FileFormatError(f"{path}: bad extents {w}x{h}")
    if not 0 < maxval < 65536:
        raise FileFormatError(f"{path}: bad maxval {maxval}")
    dtype = ">u2" if maxval > 255 else "u1"
    sample_bytes = 2 if maxval > 255 else 1
    expected = offset + w * h * sample_bytes
    if len(data) != expected:
        raise FileFormatError(f"{path}: payload truncated at byte {len(data)} "
                              f"(expected {expected} bytes)")
    labels = np.frombuffer(data[offset:], dtype=dtype).astype(np.int64).reshape(h, w)
    if labels.max() > maxval:
        raise FileFormatError(f"{path}: sample value {labels.max()} exceeds "
                              f"maxval {maxval}")
    return labels


def write_ppm(path, rgb, comments=()) -> None:
    """Write an (h, w, 3) uint8 image as binary PPM (P6), with optional
    '#' header comments (metadata survives in the file itself)."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.size == 0:
        raise ValueError(f"image must be non-empty (h, w, 3), got shape {rgb.shape}")
    h, w, _ = rgb.shape
    lines = ["P6"]
    for comment in comments:
        if "\n" in comment:
            raise ValueError("comments must be single lines")
        lines.append(f"# {comment}")
    lines.append(f"{w} {h}")
    lines.append("255")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode())
        fh.write(rgb.astype(np.uint8).tobytes())


def read_ppm(path) -> np.ndarray:
    """Read a binary PPM back as an (h, w, 3) uint8 image."""
    with open(path, "rb") as fh:
        data = fh.read()
    (w, h, maxval), offset = _read_netpbm_header(data, path, b"P6", 3)
    if maxval != 255:
        raise FileFormatError(f"{path}: only maxval 255 is supported, got {maxval}")
    expected = offset + w * h * 3
    if len(data) != expected:
        raise FileFormatError(f"{path}: payload truncated at byte {len(data)} "
                              f"(expected {expected} bytes)")
    return np.frombuffer(data[offset:], dtype=np.uint8).reshape(h, w, 3).copy()


def render_labels(labels, palette_seed: int = 0, ignore_label=255) -> np.ndarray:
    """Color-code a label map with a deterministic per-class palette.

    The ignore label renders black; palette colors stay off-black. Negative
    labels are rejected.
    """
    labels = np.asarray(labels)
    if labels.ndim != 2:
        raise ValueError(f"label map must be 2-d, got shape {labels.shape}")
    if labels.size and labels.min() < 0:
        raise ValueError(f"label {labels.min()} out of range")
    rgb = np.zeros((*labels.shape, 3), dtype=np.uint8)
    for value in np.unique(labels):
        if value == ignore_label:
            continue  # stays black
        color = seeded_rng(palette_seed, int(value)).integers(16, 256, size=3)
        rgb[labels == value] = color
    return rgb


def save_checkpoint(directory, tensors: dict) -> None:
    """Write named tensors to a directory: one container file each plus a
    manifest listing name/file pairs in sorted order."""
    os.makedirs(directory, exist_ok=True)
    names = sorted(tensors)
    for name in names:
        if "/" in name or name.startswith("."):
            raise ValueError(f"unsafe tensor name {name!r}")
        write_tensor(os.path.join(directory, f"{name}.hstn"), tensors[name])
    manifest = "".join(f"{name} {name}.hstn\n" for name in names)
    with open(os.path.join(directory, CHECKPOINT_MANIFEST), "w") as fh:
        fh.write(manifest)


def load_checkpoint(directory) -> dict:
    """Read a checkpoint directory back into a name -> array dict."""
    tensors = {}
    with open(os.path.join(directory, CHECKPOINT_MANIFEST)) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            name, filename = line.split(" ", 1)
            tensors[name] = read_tensor(os.path.join(directory, filename))
    return tensors
