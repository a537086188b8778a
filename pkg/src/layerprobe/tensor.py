"""Dense tensor values and the image-level spatial ops the extractor needs.

A tensor is a plain float32 ndarray. Image tensors are rank-3 with layout
(channels, height, width); flat descriptors are rank-1. Construction and
file IO validate finiteness so NaN/Inf never enters the pipeline.
"""

import struct

import numpy as np

from .errors import BadMagic, CropTooLarge, LengthMismatch, NonFiniteValue, ShapeMismatch, TruncatedFile

TEN1_MAGIC = b"TEN1"


def tensor_new(dims, data):
    """Build a (C, H, W) float32 tensor from a flat buffer.

    Layout is channel-major then row-major: element (c, h, w) sits at flat
    index c*H*W + h*W + w.
    """
    c, h, w = (int(d) for d in dims)
    if c < 1 or h < 1 or w < 1:
        raise ShapeMismatch(f"dims must be >= 1, got {(c, h, w)}")
    arr = np.asarray(data, dtype=np.float32).ravel()
    if arr.size != c * h * w:
        raise LengthMismatch(f"expected {c * h * w} values for dims {(c, h, w)}, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue("tensor data contains NaN or Inf")
    return arr.reshape(c, h, w)


def hflip(t):
    """Mirror a (C, H, W) tensor along its width axis."""
    if t.ndim != 3:
        raise ShapeMismatch(f"hflip expects rank-3 input, got rank {t.ndim}")
    return np.ascontiguousarray(t[:, :, ::-1])


def crop_center(t, side):
    """Cut the centered side*side patch; odd remainders round the origin down."""
    if t.ndim != 3:
        raise ShapeMismatch(f"crop_center expects rank-3 input, got rank {t.ndim}")
    side = int(side)
    _, h, w = t.shape
    if side < 1 or side > h or side > w:
        raise CropTooLarge(f"crop side {side} does not fit {h}x{w}")
    top = (h - side) // 2
    left = (w - side) // 2
    return np.ascontiguousarray(t[:, top:top + side, left:left + side])


def average(a, b):
    """Elementwise mean of two same-shape arrays."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"shape {a.shape} vs {b.shape}")
    return (a + b) / np.float32(2.0)


def write_tensor(path, t):
    """Write a rank-3 tensor in the TEN1 container (magic, u32 dims, f32 LE data)."""
    if t.ndim != 3:
        raise ShapeMismatch(f"TEN1 stores rank-3 tensors, got rank {t.ndim}")
    t = np.ascontiguousarray(t, dtype=np.float32)
    if not np.all(np.isfinite(t)):
        raise NonFiniteValue("refusing to write non-finite tensor")
    with open(path, "wb") as f:
        f.write(TEN1_MAGIC)
        f.write(struct.pack("<3I", *t.shape))
        f.write(t.astype("<f4").tobytes())


def read_tensor(path):
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != TEN1_MAGIC:
        raise BadMagic(f"{path}: expected TEN1 magic, got {blob[:4]!r}")
    if len(blob) < 16:
        raise TruncatedFile(f"{path}: header ends at offset {len(blob)}, need 16 bytes")
    c, h, w = struct.unpack_from("<3I", blob, 4)
    need = 16 + 4 * c * h * w
    if len(blob) < need:
        raise TruncatedFile(f"{path}: need {need} bytes, file has {len(blob)}")
    if len(blob) > need:
        raise TruncatedFile(f"{path}: {len(blob) - need} trailing bytes after offset {need}")
    data = np.frombuffer(blob, dtype="<f4", count=c * h * w, offset=16)
    return tensor_new((c, h, w), data)
