"""End-to-end descriptor pipeline: align, crop+mirror, forward, pool, average.

One image becomes one RepresentationSet: the aligned face is center-cropped,
the crop and its mirror are both pushed through the network, the spatial tap
is max-pooled to 3x3 and 1x1, and each representation kind is averaged over
the two patches. Because the patch pair of a mirrored face is exactly the
swapped pair of the original, the averaged set is mirror invariant.

The five-point template lives on a 120x120 canvas (eyes, nose tip, mouth
corners); other canvas sides scale it proportionally.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagic,
    DegenerateLandmarks,
    DimMismatch,
    DuplicateImageId,
    MissingKind,
    NonFiniteValue,
    ShapeMismatch,
    TrailingBytes,
    TruncatedFile,
)
from .inference import adaptive_maxpool, forward_with_taps
from .tensor import average, crop_center, hflip

FEA1_MAGIC = b"FEA1"
KIND_TAGS = {"spat3": 0, "spat1": 1, "fc1": 2, "fc2": 3}
TAG_KINDS = {v: k for k, v in KIND_TAGS.items()}

# left eye, right eye, nose tip, left mouth corner, right mouth corner
CANONICAL_TEMPLATE_120 = np.array(
    [[40.0, 48.0], [80.0, 48.0], [60.0, 72.0], [46.0, 92.0], [74.0, 92.0]],
    dtype=np.float64,
)


def template_for_canvas(side):
    return CANONICAL_TEMPLATE_120 * (side / 120.0)


@dataclass(frozen=True)
class RepresentationSet:
    image_id: str
    vectors: dict  # kind -> flat float32 vector


def validate_landmarks(lm):
    lm = np.asarray(lm, dtype=np.float64)
    if lm.shape != (5, 2):
        raise ShapeMismatch(f"landmarks must be five (x, y) points, got {lm.shape}")
    if not np.all(np.isfinite(lm)):
        raise NonFiniteValue("landmarks contain NaN or Inf")
    return lm


def fit_similarity(src, dst):
    """Least-squares similarity (scale, rotation, translation) from src to dst.

    Points are treated as complex numbers z = x + iy; the transform is
    z -> a*z + b with complex a, which is the classical closed-form
    least-squares fit (no reflection). Returns (a, b).
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    zs = src[:, 0] + 1j * src[:, 1]
    zd = dst[:, 0] + 1j * dst[:, 1]
    ms = zs.mean()
    md = zd.mean()
    cs = zs - ms
    cd = zd - md
    denom = (cs * np.conj(cs)).real.sum()
    if denom < 1e-12:
        raise DegenerateLandmarks("source points are (near) coincident")
    num = (cd * np.conj(cs)).sum()
    # divide components by the real denominator (complex division would
    # round twice and break the exact zero-residual identity)
    a = complex(num.real / denom, num.imag / denom)
    if abs(a) < 1e-12:
        raise DegenerateLandmarks("destination points are (near) coincident")
    b = md - a * ms
    return a, b


def similarity_scale(a):
    """Isotropic scale factor of a fitted transform."""
    return abs(a)


def warp_similarity(image, a, b, out_side):
    """Resample image under z -> a*z + b onto an out_side square canvas.

    Output pixel (x, y) is bilinearly sampled at the inverse-mapped source
    location; reads outside the source fill with 0.
    """
    image = np.asarray(image, dtype=np.float32)
    c, h, w = image.shape
    xo, yo = np.meshgrid(np.arange(out_side, dtype=np.float64),
                         np.arange(out_side, dtype=np.float64))
    z = (xo + 1j * yo - b) / a
    sx = z.real.ravel()
    sy = z.imag.ravel()

    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0

    def gather(xi, yi):
        inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        vals = image[:, np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
        return vals * inside

    out = (gather(x0, y0) * (1.0 - fx) * (1.0 - fy)
           + gather(x0 + 1, y0) * fx * (1.0 - fy)
           + gather(x0, y0 + 1) * (1.0 - fx) * fy
           + gather(x0 + 1, y0 + 1) * fx * fy)
    return np.ascontiguousarray(out.reshape(c, out_side, out_side).astype(np.float32))


def align_similarity(image, landmarks, template=None, out_side=120):
    """Map a face onto the canonical canvas via a landmark-fitted similarity."""
    lm = validate_landmarks(landmarks)
    if template is None:
        template = template_for_canvas(out_side)
    a, b = fit_similarity(lm, template)
    return warp_similarity(image, a, b, out_side)


def make_patch_pair(aligned, crop_side):
    """Center patch and its mirror, the two inputs every forward pass sees."""
    patch = crop_center(aligned, crop_side)
    return patch, hflip(patch)


def preprocess(patch, channel_means):
    means = np.asarray(channel_means, dtype=np.float32).reshape(-1, 1, 1)
    return patch / np.float32(255.0) - means


def extract_representation_set(model, aligned, crop_side, image_id=""):
    """Produce the per-image descriptor set for every declared tap kind."""
    taps = model.spec.taps
    patches = make_patch_pair(aligned, crop_side)
    per_patch = []
    for patch in patches:
        x = preprocess(patch, model.spec.channel_means)
        _, captured = forward_with_taps(model, x)
        vecs = {}
        for kind, layer_name in taps.items():
            t = captured[layer_name]
            if kind == "spat3":
                vecs[kind] = adaptive_maxpool(t, 3).ravel()
            elif kind == "spat1":
                vecs[kind] = adaptive_maxpool(t, 1).ravel()
            else:
                vecs[kind] = t.ravel()
        per_patch.append(vecs)
    first, second = per_patch
    return RepresentationSet(image_id, {k: average(first[k], second[k]) for k in taps})


# --- FEA1 feature cache ---

def cache_write(path, sets, kind):
    """Persist one representation kind of many images; ids must be unique."""
    records = []
    dim = None
    seen = set()
    for s in sets:
        if kind not in s.vectors:
            raise MissingKind(f"{s.image_id}: no {kind!r} vector")
        v = np.ascontiguousarray(s.vectors[kind], dtype=np.float32).ravel()
        if dim is None:
            dim = v.size
        elif v.size != dim:
            raise DimMismatch(f"{s.image_id}: dim {v.size} != {dim}")
        if s.image_id in seen:
            raise DuplicateImageId(s.image_id)
        seen.add(s.image_id)
        records.append((s.image_id, v))
    with open(path, "wb") as f:
        f.write(FEA1_MAGIC)
        f.write(bytes([KIND_TAGS[kind]]))
        f.write(struct.pack("<II", dim or 0, len(records)))
        for image_id, v in records:
            ib = image_id.encode()
            f.write(len(ib).to_bytes(2, "little"))
            f.write(ib)
            f.write(v.astype("<f4").tobytes())


def cache_read(path):
    """Read a FEA1 cache; returns (kind, [(image_id, vector), ...])."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != FEA1_MAGIC:
        raise BadMagic(f"{path}: expected FEA1 magic, got {blob[:4]!r}")
    if len(blob) < 13:
        raise TruncatedFile(f"{path}: header wants 13 bytes, file has {len(blob)}")
    tag = blob[4]
    if tag not in TAG_KINDS:
        raise BadMagic(f"{path}: unknown kind tag {tag}")
    dim, count = struct.unpack_from("<II", blob, 5)
    pos = 13
    records = []
    seen = set()
    for _ in range(count):
        if pos + 2 > len(blob):
            raise TruncatedFile(f"{path}: record header at offset {pos} past end")
        nlen = int.from_bytes(blob[pos:pos + 2], "little")
        pos += 2
        end = pos + nlen + 4 * dim
        if end > len(blob):
            raise TruncatedFile(f"{path}: record at offset {pos} wants {end - len(blob)} more bytes")
        image_id = blob[pos:pos + nlen].decode()
        if image_id in seen:
            raise DuplicateImageId(image_id)
        seen.add(image_id)
        vec = np.frombuffer(blob, dtype="<f4", count=dim, offset=pos + nlen).copy()
        records.append((image_id, vec))
        pos = end
    if pos != len(blob):
        raise TrailingBytes(f"{path}: {len(blob) - pos} unread bytes at offset {pos}")
    return TAG_KINDS[tag], records
