import numpy as np
import pytest

from layerprobe import errors, model_io

VALID = """\
input 3 120 120
mean 0.5 0.5 0.5
layer conv1 Conv2D out=8 kh=3 kw=3 stride=1 pad=1
layer pool1 MaxPool2D kernel=2 stride=2 ceil=0
layer fc1 FullyConnected out=32
layer fc2 FullyConnected out=16
tap spat3 pool1
tap spat1 pool1
tap fc1 fc1
tap fc2 fc2
"""


def test_parse_valid_manifest():
    spec = model_io.parse_manifest(VALID)
    assert spec.input_dims == (3, 120, 120)
    assert spec.channel_means == (0.5, 0.5, 0.5)
    assert [l.kind for l in spec.layers] == ["Conv2D", "MaxPool2D", "FullyConnected", "FullyConnected"]
    assert spec.taps == {"spat3": "pool1", "spat1": "pool1", "fc1": "fc1", "fc2": "fc2"}


def test_duplicate_layer_name():
    text = VALID.replace("layer fc2 FullyConnected out=16", "layer fc1 FullyConnected out=16")
    with pytest.raises(errors.DuplicateName):
        model_io.parse_manifest(text)


def test_tap_unknown_layer():
    with pytest.raises(errors.BadTap) as e:
        model_io.parse_manifest(VALID.replace("tap spat3 pool1", "tap spat3 convX"))
    assert "convX" in str(e.value)


def test_fc_tap_needs_two_fc_layers():
    text = VALID.replace("layer fc2 FullyConnected out=16\n", "").replace("tap fc2 fc2\n", "")
    with pytest.raises(errors.BadTap):
        model_io.parse_manifest(text)


def test_unknown_kind_and_keys():
    with pytest.raises(errors.UnknownLayerKind):
        model_io.parse_manifest("input 1 4 4\nlayer a Conv3D out=1 kh=1 kw=1 stride=1 pad=0\n")
    with pytest.raises(errors.ManifestError):
        model_io.parse_manifest("input 1 4 4\nlayer a Conv2D out=1 kh=1 kw=1 stride=1 pad=0 color=9\n")
    with pytest.raises(errors.ManifestError):
        model_io.parse_manifest("input 1 4 4\nlayer a Conv2D out=1 kh=1 kw=1\n")


def test_error_carries_line_number():
    with pytest.raises(errors.ManifestError) as e:
        model_io.parse_manifest("input 1 4 4\nbogus directive\n")
    assert e.value.line == 2


def test_dropout_rate_range():
    with pytest.raises(errors.ManifestError):
        model_io.parse_manifest("input 1 4 4\nlayer d Dropout rate=1.0\n")


def test_round_trip_parse_format_parse():
    spec = model_io.parse_manifest(VALID)
    text = model_io.format_manifest(spec)
    again = model_io.parse_manifest(text)
    assert again == spec
    assert model_io.format_manifest(again) == text


def test_infer_shapes_conv():
    spec = model_io.parse_manifest("input 1 5 5\nlayer c Conv2D out=2 kh=3 kw=3 stride=1 pad=0\n")
    assert model_io.infer_shapes(spec) == [("c", (2, 3, 3))]


def test_infer_shapes_pool_ceil_vs_floor():
    base = "input 1 7 7\nlayer p MaxPool2D kernel=2 stride=2 ceil={}\n"
    assert model_io.infer_shapes(model_io.parse_manifest(base.format(1))) == [("p", (1, 4, 4))]
    assert model_io.infer_shapes(model_io.parse_manifest(base.format(0))) == [("p", (1, 3, 3))]


def test_infer_shapes_underflow():
    spec = model_io.parse_manifest("input 1 2 2\nlayer c Conv2D out=1 kh=3 kw=3 stride=1 pad=0\n")
    with pytest.raises(errors.ShapeUnderflow) as e:
        model_io.infer_shapes(spec)
    assert e.value.layer == "c"


def test_spatial_layer_after_flatten():
    spec = model_io.parse_manifest(
        "input 1 4 4\nlayer f FullyConnected out=4\nlayer c Conv2D out=1 kh=1 kw=1 stride=1 pad=0\n")
    with pytest.raises(errors.ShapeUnderflow):
        model_io.infer_shapes(spec)


def _random_params(spec, seed):
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in model_io.parameter_plan(spec):
        layer, _, pname = name.partition(".")
        params.setdefault(layer, {})[pname] = rng.normal(size=shape).astype(np.float32)
    return params


def test_weights_round_trip_bitwise():
    spec = model_io.parse_manifest(VALID)
    params = _random_params(spec, 0)
    blob = model_io.pack_weights(spec, params)
    model = model_io.load_weights(spec, blob)
    assert model_io.pack_weights(spec, model.params) == blob


def test_identity_conv_layer_forward():
    from layerprobe.inference import forward_with_taps

    spec = model_io.parse_manifest(
        "input 1 3 3\n"
        "layer c Conv2D out=1 kh=1 kw=1 stride=1 pad=0\n"
        "layer f1 FullyConnected out=9\n"
        "layer f2 FullyConnected out=9\n"
        "tap spat3 c\n")
    params = {
        "c": {"kernel": np.ones((1, 1, 1, 1), np.float32), "bias": np.zeros(1, np.float32)},
        "f1": {"weight": np.eye(9, dtype=np.float32), "bias": np.zeros(9, np.float32)},
        "f2": {"weight": np.eye(9, dtype=np.float32), "bias": np.zeros(9, np.float32)},
    }
    model = model_io.load_weights(spec, model_io.pack_weights(spec, params))
    x = np.arange(9, dtype=np.float32).reshape(1, 3, 3)
    _, taps = forward_with_taps(model, x)
    assert np.array_equal(taps["c"], x)


def test_weights_error_cases():
    spec = model_io.parse_manifest(VALID)
    params = _random_params(spec, 1)
    blob = model_io.pack_weights(spec, params)

    with pytest.raises(errors.BadMagic):
        model_io.load_weights(spec, b"XXXX" + blob[4:])
    with pytest.raises(errors.TrailingBytes):
        model_io.load_weights(spec, blob + b"\x00")
    with pytest.raises(errors.TruncatedFile):
        model_io.load_weights(spec, blob[:-2])

    missing = dict(params)
    missing["fc1"] = {"weight": params["fc1"]["weight"]}  # drop fc1.bias
    with pytest.raises(errors.MissingParameter):
        model_io.pack_weights(spec, missing)

    bad_shape = {k: dict(v) for k, v in params.items()}
    bad_shape["conv1"]["bias"] = np.zeros(9, np.float32)
    with pytest.raises(errors.ShapeMismatch):
        model_io.pack_weights(spec, bad_shape)

    nan = {k: {p: a.copy() for p, a in v.items()} for k, v in params.items()}
    nan["conv1"]["kernel"][0, 0, 0, 0] = np.nan
    with pytest.raises(errors.NonFiniteWeight):
        model_io.pack_weights(spec, nan)
    # and the same NaN smuggled into a valid blob is caught on load
    loc = blob.find(params["conv1"]["kernel"].tobytes()[:16])
    corrupt = blob[:loc] + np.float32(np.nan).tobytes() + blob[loc + 4:]
    with pytest.raises(errors.NonFiniteWeight):
        model_io.load_weights(spec, corrupt)


def test_truncated_blob_names_missing_parameter():
    spec = model_io.parse_manifest(VALID)
    params = _random_params(spec, 2)
    blob = model_io.pack_weights(spec, params)
    # keep only the magic: first expected parameter is reported
    with pytest.raises(errors.MissingParameter) as e:
        model_io.load_weights(spec, blob[:4])
    assert "conv1.kernel" in str(e.value)
