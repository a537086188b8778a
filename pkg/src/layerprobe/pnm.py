"""Binary PNM image IO: P5 (grayscale) and P6 (RGB), maxval 255 only.

Readers return float32 (C, H, W) tensors with values in [0, 255]; the
canonical writer emits `P5/P6\\n<w> <h>\\n255\\n` followed by raw samples,
so write(read(x)) reproduces canonical files byte for byte.
"""

import numpy as np

from .errors import BadMagic, ParseError, TruncatedFile


def _next_token(blob, pos):
    # PNM headers allow '#' comments anywhere whitespace may appear.
    n = len(blob)
    while pos < n:
        ch = blob[pos:pos + 1]
        if ch == b"#":
            nl = blob.find(b"\n", pos)
            pos = n if nl < 0 else nl + 1
        elif ch.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not blob[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise TruncatedFile(f"header ends at offset {start}")
    return blob[start:pos], pos


def read_pnm(path):
    """Read a binary PGM/PPM file into a float32 (C, H, W) tensor."""
    with open(path, "rb") as f:
        blob = f.read()
    magic = blob[:2]
    if magic not in (b"P5", b"P6"):
        raise BadMagic(f"{path}: expected P5 or P6, got {magic!r}")
    channels = 1 if magic == b"P5" else 3
    pos = 2
    fields = []
    for _ in range(3):
        tok, pos = _next_token(blob, pos)
        if not tok.isdigit():
            raise ParseError(1, f"{path}: non-numeric header field {tok!r}")
        fields.append(int(tok))
    width, height, maxval = fields
    if maxval != 255:
        raise ParseError(1, f"{path}: only maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace byte separates header from samples
    need = pos + width * height * channels
    if len(blob) < need:
        raise TruncatedFile(f"{path}: need {need} bytes, file has {len(blob)}")
    raw = np.frombuffer(blob, dtype=np.uint8, count=width * height * channels, offset=pos)
    img = raw.reshape(height, width, channels).transpose(2, 0, 1)
    return np.ascontiguousarray(img, dtype=np.float32)


def write_pnm(path, img):
    """Write a (C, H, W) array (1 or 3 channels, values 0..255) as P5/P6."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[0] not in (1, 3):
        raise BadMagic(f"PNM wants (1|3, H, W) arrays, got shape {img.shape}")
    samples = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    c, h, w = samples.shape
    magic = b"P5" if c == 1 else b"P6"
    with open(path, "wb") as f:
        f.write(magic + b"\n" + f"{w} {h}".encode() + b"\n255\n")
        f.write(samples.transpose(1, 2, 0).tobytes())
