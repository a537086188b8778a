"""Dataset file parsers and a planted-structure synthetic dataset generator.

The attribute/partition/landmark text formats follow the CelebA releases:

* attributes: line 1 = image count, line 2 = attribute names, then one row
  per image of `id v1 .. vK` with labels in {-1, 1};
* partition: `filename digit` with 0=train, 1=val, 2=test;
* landmarks: `filename x1 y1 .. x5 y5`.

The generator plants visual predicates whose decodability is known by
construction: a location attribute whose classes differ only in where a
bright blob sits (so any globally pooled descriptor is uninformative while
a location-sensitive linear readout is not), plus presence and brightness
attributes. It also emits a small fixed-seed random-weight model so the
whole pipeline can run at desk scale.
"""

import os
from dataclasses import dataclass, field

import numpy as np

from . import model_io, pnm
from .errors import (
    BadHeader,
    BadLabelValue,
    BadSplitDigit,
    DuplicateId,
    FieldCount,
    NonNumeric,
    ParseError,
    RegionOutOfBounds,
    RowWidthMismatch,
)
from .eval_select import TEST, TRAIN, VAL
from .extraction import template_for_canvas

SPLIT_DIGITS = {"0": TRAIN, "1": VAL, "2": TEST}
DIGIT_OF_SPLIT = {v: k for k, v in SPLIT_DIGITS.items()}


@dataclass(frozen=True)
class AttributeTable:
    names: tuple                 # ordered attribute names
    rows: dict                   # image_id -> int8 array of +-1 labels

    def labels_for(self, name):
        col = self.names.index(name)
        return {image_id: int(row[col]) for image_id, row in self.rows.items()}


def parse_attributes(text):
    lines = text.splitlines()
    if len(lines) < 2:
        raise BadHeader(1, "attribute file wants a count line and a names line")
    try:
        declared = int(lines[0].strip())
    except ValueError:
        raise BadHeader(1, f"image count is not an integer: {lines[0]!r}") from None
    if declared < 0:
        raise BadHeader(1, f"negative image count {declared}")
    names = tuple(lines[1].split())
    if not names:
        raise BadHeader(2, "empty attribute name line")

    rows = {}
    body = [(i, l) for i, l in enumerate(lines[2:], start=3) if l.strip()]
    for lineno, line in body:
        fields = line.split()
        if len(fields) != len(names) + 1:
            raise RowWidthMismatch(lineno, f"{len(fields) - 1} labels for {len(names)} attributes")
        image_id = fields[0]
        if image_id in rows:
            raise DuplicateId(lineno, image_id)
        labels = np.empty(len(names), dtype=np.int8)
        for k, tok in enumerate(fields[1:]):
            if tok not in ("-1", "1"):
                raise BadLabelValue(lineno, f"label must be -1 or 1, got {tok!r}")
            labels[k] = int(tok)
        rows[image_id] = labels
    if len(rows) != declared:
        raise BadHeader(1, f"header declares {declared} images, found {len(rows)}")
    return AttributeTable(names, rows)


def format_attributes(table):
    lines = [str(len(table.rows)), " ".join(table.names)]
    for image_id in table.rows:
        lines.append(image_id + " " + " ".join(str(int(v)) for v in table.rows[image_id]))
    return "\n".join(lines) + "\n"


def parse_partition(text):
    split = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ParseError(lineno, f"expected 'filename digit', got {line!r}")
        image_id, digit = fields
        if digit not in SPLIT_DIGITS:
            raise BadSplitDigit(lineno, f"split digit must be 0/1/2, got {digit!r}")
        if image_id in split:
            raise DuplicateId(lineno, image_id)
        split[image_id] = SPLIT_DIGITS[digit]
    return split


def format_partition(split):
    lines = [f"{image_id} {DIGIT_OF_SPLIT[s]}" for image_id, s in split.items()]
    return "\n".join(lines) + "\n"


def parse_landmarks(text):
    points = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 11:
            raise FieldCount(lineno, f"expected filename + 10 coordinates, got {len(fields)} fields")
        image_id = fields[0]
        if image_id in points:
            raise DuplicateId(lineno, image_id)
        try:
            coords = [float(v) for v in fields[1:]]
        except ValueError:
            raise NonNumeric(lineno, f"non-numeric coordinate in {fields[1:]}") from None
        points[image_id] = np.array(coords, dtype=np.float64).reshape(5, 2)
    return points


def format_landmarks(points):
    lines = []
    for image_id, lm in points.items():
        coords = " ".join(repr(float(v)) for v in np.asarray(lm).ravel())
        lines.append(f"{image_id} {coords}")
    return "\n".join(lines) + "\n"


# --- synthetic dataset ---

@dataclass(frozen=True)
class SynthRule:
    name: str
    kind: str                 # "location" | "presence" | "brightness"
    region: tuple = None      # (row, col) blob center (positive class)
    region_neg: tuple = None  # (row, col) blob center of the negative class


def default_rules():
    return (
        SynthRule("Blob_Location", "location", region=(32, 32), region_neg=(88, 88)),
        SynthRule("Spot_Top_Right", "presence", region=(32, 88)),
        SynthRule("Bright_Image", "brightness"),
    )


@dataclass(frozen=True)
class SynthConfig:
    n_images: int = 200
    canvas: int = 120
    crop: int = 112
    blob_size: int = 12
    blob_value: float = 220.0
    background: float = 40.0
    brightness_boost: float = 30.0
    noise_sigma: float = 8.0
    jitter: int = 3
    seed: int = 0
    rules: tuple = field(default_factory=default_rules)


def _check_region(cfg, center):
    half = cfg.blob_size // 2
    reach = half + cfg.jitter
    r, c = center
    if r - reach < 0 or c - reach < 0 or r + reach + 1 > cfg.canvas or c + reach + 1 > cfg.canvas:
        raise RegionOutOfBounds(f"blob at {center} (size {cfg.blob_size}, jitter {cfg.jitter}) "
                                f"leaves the {cfg.canvas}x{cfg.canvas} canvas")


def _stamp(img, center, size, value):
    half = size // 2
    r, c = center
    region = img[r - half:r - half + size, c - half:c - half + size]
    np.maximum(region, value, out=region)


def generate_synthetic(cfg, out_dir):
    """Write a complete synthetic dataset; pure function of the config.

    Emits images/ (P5 PNM), attrs.txt, partition.txt, landmarks.txt and a
    model.nnm/model.nnw pair. Returns the file paths in a dict.
    """
    if cfg.n_images < 4:
        raise ValueError("n_images must be >= 4")
    for rule in cfg.rules:
        if rule.kind in ("location", "presence"):
            _check_region(cfg, rule.region)
        if rule.kind == "location":
            _check_region(cfg, rule.region_neg)

    rng = np.random.default_rng(cfg.seed)
    img_dir = os.path.join(out_dir, "images")
    os.makedirs(img_dir, exist_ok=True)

    names = tuple(r.name for r in cfg.rules)
    ids = [f"img{i:05d}.pgm" for i in range(cfg.n_images)]
    labels = rng.integers(0, 2, size=(cfg.n_images, len(cfg.rules))) * 2 - 1

    rows = {}
    for i, image_id in enumerate(ids):
        img = np.full((cfg.canvas, cfg.canvas), cfg.background, dtype=np.float64)
        for k, rule in enumerate(cfg.rules):
            positive = labels[i, k] > 0
            jr, jc = rng.integers(-cfg.jitter, cfg.jitter + 1, size=2)
            if rule.kind == "brightness":
                if positive:
                    img += cfg.brightness_boost
            elif rule.kind == "presence":
                if positive:
                    r, c = rule.region
                    _stamp(img, (r + jr, c + jc), cfg.blob_size, cfg.blob_value)
            elif rule.kind == "location":
                r, c = rule.region if positive else rule.region_neg
                _stamp(img, (r + jr, c + jc), cfg.blob_size, cfg.blob_value)
        img += rng.normal(0.0, cfg.noise_sigma, size=img.shape)
        pnm.write_pnm(os.path.join(img_dir, image_id), img[None, :, :])
        rows[image_id] = np.array([int(v) for v in labels[i]], dtype=np.int8)

    table = AttributeTable(names, rows)

    order = rng.permutation(cfg.n_images)
    n_train = int(cfg.n_images * 0.6)
    n_val = int(cfg.n_images * 0.2)
    split = {}
    for pos, idx in enumerate(order):
        split[ids[idx]] = TRAIN if pos < n_train else VAL if pos < n_train + n_val else TEST
    split = {i: split[i] for i in ids}

    template = template_for_canvas(cfg.canvas)
    landmarks = {i: template for i in ids}

    paths = {
        "images_dir": img_dir,
        "attrs": os.path.join(out_dir, "attrs.txt"),
        "partition": os.path.join(out_dir, "partition.txt"),
        "landmarks": os.path.join(out_dir, "landmarks.txt"),
        "manifest": os.path.join(out_dir, "model.nnm"),
        "weights": os.path.join(out_dir, "model.nnw"),
    }
    _write(paths["attrs"], format_attributes(table))
    _write(paths["partition"], format_partition(split))
    _write(paths["landmarks"], format_landmarks(landmarks))

    spec, params = make_synth_model(cfg.seed, crop=cfg.crop)
    _write(paths["manifest"], model_io.format_manifest(spec))
    with open(paths["weights"], "wb") as f:
        f.write(model_io.pack_weights(spec, params))
    return paths


def make_synth_model(seed, crop=112, channels=1):
    """Small random-weight net: two conv+pool stacks, two FC layers."""
    manifest = f"""
input {channels} {crop} {crop}
mean 0.18
layer conv1 Conv2D out=4 kh=5 kw=5 stride=2 pad=2
layer act1 PReLU
layer pool1 MaxPool2D kernel=2 stride=2 ceil=0
layer conv2 Conv2D out=8 kh=3 kw=3 stride=1 pad=1
layer act2 PReLU
layer pool2 MaxPool2D kernel=2 stride=2 ceil=0
layer fc1 FullyConnected out=16
layer actf1 PReLU
layer drop1 Dropout rate=0.5
layer fc2 FullyConnected out=16
layer actf2 PReLU
layer sm Softmax
tap spat3 pool2
tap spat1 pool2
tap fc1 fc1
tap fc2 fc2
"""
    spec = model_io.parse_manifest(manifest)
    rng = np.random.default_rng(seed + 1)
    params = {}
    for name, shape in model_io.parameter_plan(spec):
        layer, _, pname = name.partition(".")
        if pname in ("kernel", "weight"):
            fan_in = int(np.prod(shape[1:]))
            arr = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        elif pname == "bias":
            arr = rng.normal(0.0, 0.01, size=shape)
        else:  # prelu slope
            arr = rng.uniform(0.1, 0.3, size=shape)
        params.setdefault(layer, {})[pname] = arr.astype(np.float32)
    return spec, params


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
