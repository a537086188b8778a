"""Model manifest parsing, static shape inference, and weight blob IO.

The manifest is a line-oriented text format so model definitions diff
cleanly and parse without dependencies::

    input 1 112 112
    mean 0.45
    layer conv1 Conv2D out=4 kh=5 kw=5 stride=2 pad=2
    layer act1 PReLU
    layer pool1 MaxPool2D kernel=2 stride=2 ceil=0
    layer fc1 FullyConnected out=16
    layer drop1 Dropout rate=0.5
    tap spat3 pool1
    tap fc1 fc1

Weights travel separately in an `.nnw` blob: magic "NNW1", then one record
per parameter in manifest layer order. Each record is name (u16 LE length +
bytes), rank (u8), dims (u32 LE each), then f32 LE values, which streams
without an index.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    BadTap,
    DuplicateName,
    ManifestError,
    MissingParameter,
    NonFiniteWeight,
    ShapeMismatch,
    ShapeUnderflow,
    TrailingBytes,
    TruncatedFile,
    UnknownLayerKind,
)

NNW1_MAGIC = b"NNW1"

LAYER_KINDS = ("Conv2D", "MaxPool2D", "PReLU", "FullyConnected", "Dropout", "Softmax")
TAP_KINDS = ("spat3", "spat1", "fc1", "fc2")

# per layer kind: manifest key -> (python type, validator)
_PARAM_SCHEMA = {
    "Conv2D": {
        "out": (int, lambda v: v >= 1),
        "kh": (int, lambda v: v >= 1),
        "kw": (int, lambda v: v >= 1),
        "stride": (int, lambda v: v >= 1),
        "pad": (int, lambda v: v >= 0),
    },
    "MaxPool2D": {
        "kernel": (int, lambda v: v >= 1),
        "stride": (int, lambda v: v >= 1),
        "ceil": (int, lambda v: v in (0, 1)),
    },
    "FullyConnected": {"out": (int, lambda v: v >= 1)},
    "Dropout": {"rate": (float, lambda v: 0.0 <= v < 1.0)},
    "PReLU": {},
    "Softmax": {},
}


@dataclass(frozen=True)
class LayerDesc:
    name: str
    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ModelSpec:
    input_dims: tuple       # (C, H, W)
    channel_means: tuple    # C values, applied after scaling pixels to [0, 1]
    layers: tuple           # ordered LayerDescs
    taps: dict              # tap kind -> layer name

    def layer(self, name):
        for l in self.layers:
            if l.name == name:
                return l
        raise KeyError(name)


@dataclass(frozen=True)
class Model:
    spec: ModelSpec
    params: dict  # layer name -> {param name -> float32 ndarray}


def parse_manifest(text):
    """Parse manifest text into a validated ModelSpec."""
    input_dims = None
    means = None
    layers = []
    names = set()
    taps = {}
    tap_lines = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        directive = fields[0]
        if directive == "input":
            if input_dims is not None:
                raise ManifestError(lineno, "duplicate input directive")
            if len(fields) != 4:
                raise ManifestError(lineno, "input wants: input C H W")
            try:
                c, h, w = (int(v) for v in fields[1:])
            except ValueError:
                raise ManifestError(lineno, f"non-integer input dims {fields[1:]}") from None
            if min(c, h, w) < 1:
                raise ManifestError(lineno, f"input dims must be >= 1, got {(c, h, w)}")
            input_dims = (c, h, w)
        elif directive == "mean":
            if means is not None:
                raise ManifestError(lineno, "duplicate mean directive")
            try:
                means = tuple(float(v) for v in fields[1:])
            except ValueError:
                raise ManifestError(lineno, f"non-numeric mean values {fields[1:]}") from None
            if not means:
                raise ManifestError(lineno, "mean wants at least one value")
        elif directive == "layer":
            if len(fields) < 3:
                raise ManifestError(lineno, "layer wants: layer <name> <kind> [key=value ...]")
            name, kind = fields[1], fields[2]
            if kind not in LAYER_KINDS:
                raise UnknownLayerKind(lineno, f"unknown layer kind {kind!r}")
            if name in names:
                raise DuplicateName(lineno, f"duplicate layer name {name!r}")
            names.add(name)
            layers.append(LayerDesc(name, kind, _parse_params(lineno, kind, fields[3:])))
        elif directive == "tap":
            if len(fields) != 3:
                raise ManifestError(lineno, "tap wants: tap <kind> <layer>")
            kind, target = fields[1], fields[2]
            if kind not in TAP_KINDS:
                raise BadTap(lineno, f"unknown tap kind {kind!r}")
            if kind in taps:
                raise BadTap(lineno, f"duplicate tap for kind {kind!r}")
            taps[kind] = target
            tap_lines[kind] = lineno
        else:
            raise ManifestError(lineno, f"unknown directive {directive!r}")

    if input_dims is None:
        raise ManifestError(0, "missing input directive")
    if means is None:
        means = (0.0,) * input_dims[0]
    if len(means) != input_dims[0]:
        raise ManifestError(0, f"mean wants {input_dims[0]} values, got {len(means)}")

    by_name = {l.name: l for l in layers}
    fc_count = sum(1 for l in layers if l.kind == "FullyConnected")
    for kind, target in taps.items():
        lineno = tap_lines[kind]
        if target not in by_name:
            raise BadTap(lineno, f"tap {kind} references unknown layer {target!r}")
        if kind in ("fc1", "fc2"):
            if by_name[target].kind != "FullyConnected":
                raise BadTap(lineno, f"tap {kind} must reference a FullyConnected layer")
            if fc_count != 2:
                raise BadTap(lineno, f"fc taps expect exactly two FullyConnected layers, found {fc_count}")

    return ModelSpec(input_dims, means, tuple(layers), taps)


def _parse_params(lineno, kind, tokens):
    schema = _PARAM_SCHEMA[kind]
    params = {}
    for tok in tokens:
        key, sep, value = tok.partition("=")
        if not sep:
            raise ManifestError(lineno, f"expected key=value, got {tok!r}")
        if key not in schema:
            raise ManifestError(lineno, f"unknown key {key!r} for {kind}")
        if key in params:
            raise ManifestError(lineno, f"duplicate key {key!r}")
        typ, ok = schema[key]
        try:
            parsed = typ(value)
        except ValueError:
            raise ManifestError(lineno, f"bad value {value!r} for {key}") from None
        if not ok(parsed):
            raise ManifestError(lineno, f"value {parsed} out of range for {key}")
        params[key] = parsed
    missing = set(schema) - set(params)
    if missing:
        raise ManifestError(lineno, f"{kind} missing keys {sorted(missing)}")
    return params


def format_manifest(spec):
    """Serialize a ModelSpec to canonical manifest text (parse round-trips)."""
    lines = ["input {} {} {}".format(*spec.input_dims)]
    lines.append("mean " + " ".join(repr(float(v)) for v in spec.channel_means))
    for l in spec.layers:
        keys = list(_PARAM_SCHEMA[l.kind])
        kv = " ".join(f"{k}={l.params[k]!r}" if isinstance(l.params[k], float) else f"{k}={l.params[k]}" for k in keys)
        lines.append(f"layer {l.name} {l.kind}" + (" " + kv if kv else ""))
    for kind in TAP_KINDS:
        if kind in spec.taps:
            lines.append(f"tap {kind} {spec.taps[kind]}")
    return "\n".join(lines) + "\n"


def _ceil_div(a, b):
    return -(-a // b)


def infer_shapes(spec):
    """Statically compute every layer's output dims in manifest order.

    Conv2D: H' = floor((H + 2*pad - kh)/stride) + 1 (same along W).
    MaxPool2D in ceil mode uses ceil instead, then drops a window that
    would start past the input edge so every window has real elements.
    FullyConnected flattens whatever it receives.
    """
    dims = spec.input_dims
    plan = []
    for l in spec.layers:
        if l.kind == "Conv2D":
            if len(dims) != 3:
                raise ShapeUnderflow(l.name, "spatial layer after flatten")
            _, h, w = dims
            p = l.params
            oh = (h + 2 * p["pad"] - p["kh"]) // p["stride"] + 1
            ow = (w + 2 * p["pad"] - p["kw"]) // p["stride"] + 1
            if oh < 1 or ow < 1:
                raise ShapeUnderflow(l.name, f"conv output {oh}x{ow} from input {h}x{w}")
            dims = (p["out"], oh, ow)
        elif l.kind == "MaxPool2D":
            if len(dims) != 3:
                raise ShapeUnderflow(l.name, "spatial layer after flatten")
            c, h, w = dims
            k, s = l.params["kernel"], l.params["stride"]
            if l.params["ceil"]:
                oh = _ceil_div(h - k, s) + 1
                ow = _ceil_div(w - k, s) + 1
                # a window starting at or past the edge would be empty
                if oh > 1 and (oh - 1) * s >= h:
                    oh -= 1
                if ow > 1 and (ow - 1) * s >= w:
                    ow -= 1
            else:
                oh = (h - k) // s + 1
                ow = (w - k) // s + 1
            if oh < 1 or ow < 1:
                raise ShapeUnderflow(l.name, f"pool output {oh}x{ow} from input {h}x{w}")
            dims = (c, oh, ow)
        elif l.kind == "FullyConnected":
            dims = (l.params["out"],)
        else:  # PReLU / Dropout / Softmax preserve shape
            pass
        plan.append((l.name, dims))
    return plan


def parameter_plan(spec):
    """Expected (name, shape) of every parameter record, in blob order."""
    dims = spec.input_dims
    plan = []
    for layer, (_, out_dims) in zip(spec.layers, infer_shapes(spec)):
        if layer.kind == "Conv2D":
            p = layer.params
            plan.append((f"{layer.name}.kernel", (p["out"], dims[0], p["kh"], p["kw"])))
            plan.append((f"{layer.name}.bias", (p["out"],)))
        elif layer.kind == "FullyConnected":
            n_in = int(np.prod(dims))
            plan.append((f"{layer.name}.weight", (layer.params["out"], n_in)))
            plan.append((f"{layer.name}.bias", (layer.params["out"],)))
        elif layer.kind == "PReLU":
            # channel-wise slopes on feature maps, one shared slope on vectors
            plan.append((f"{layer.name}.slope", (dims[0],) if len(dims) == 3 else (1,)))
        dims = out_dims
    return plan


def pack_weights(spec, params):
    """Serialize {layer: {param: array}} into NNW1 bytes (plan order)."""
    chunks = [NNW1_MAGIC]
    for name, shape in parameter_plan(spec):
        layer, _, pname = name.partition(".")
        try:
            arr = params[layer][pname]
        except KeyError:
            raise MissingParameter(name) from None
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        if arr.shape != shape:
            raise ShapeMismatch(f"{name}: expected {shape}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteWeight(name)
        nb = name.encode()
        chunks.append(len(nb).to_bytes(2, "little"))
        chunks.append(nb)
        chunks.append(bytes([arr.ndim]))
        for d in arr.shape:
            chunks.append(int(d).to_bytes(4, "little"))
        chunks.append(arr.astype("<f4").tobytes())
    return b"".join(chunks)


def load_weights(spec, blob):
    """Validate an NNW1 blob against the spec's parameter plan and build a Model."""
    if blob[:4] != NNW1_MAGIC:
        raise BadMagic(f"expected NNW1 magic, got {blob[:4]!r}")
    pos = 4
    params = {l.name: {} for l in spec.layers}

    def take(n, what):
        nonlocal pos
        if pos + n > len(blob):
            raise TruncatedFile(f"offset {pos}: {what} wants {n} bytes, {len(blob) - pos} left")
        out = blob[pos:pos + n]
        pos += n
        return out

    for expect_name, expect_shape in parameter_plan(spec):
        if pos == len(blob):
            raise MissingParameter(expect_name)
        nlen = int.from_bytes(take(2, "name length"), "little")
        name = take(nlen, "name").decode()
        if name != expect_name:
            raise MissingParameter(f"expected {expect_name!r}, found {name!r}")
        rank = take(1, "rank")[0]
        shape = tuple(int.from_bytes(take(4, "dim"), "little") for _ in range(rank))
        if shape != expect_shape:
            raise ShapeMismatch(f"{name}: expected {expect_shape}, got {shape}")
        count = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(take(4 * count, "values"), dtype="<f4").reshape(shape)
        if not np.all(np.isfinite(values)):
            raise NonFiniteWeight(name)
        layer, _, pname = name.partition(".")
        params[layer][pname] = np.ascontiguousarray(values)
    if pos != len(blob):
        raise TrailingBytes(f"{len(blob) - pos} unread bytes at offset {pos}")
    return Model(spec, params)


def load_model(manifest_path, weights_path):
    with open(manifest_path, encoding="utf-8") as f:
        spec = parse_manifest(f.read())
    with open(weights_path, "rb") as f:
        return load_weights(spec, f.read())
