import numpy as np
import pytest

from layerprobe import errors, model_io
from layerprobe.extraction import (
    CANONICAL_TEMPLATE_120,
    RepresentationSet,
    align_similarity,
    cache_read,
    cache_write,
    extract_representation_set,
    fit_similarity,
    make_patch_pair,
    similarity_scale,
    template_for_canvas,
)
from layerprobe.inference import adaptive_maxpool, forward_with_taps
from layerprobe.tensor import average, hflip


def test_identity_landmarks_keep_120_image_bitwise():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(1, 120, 120)).astype(np.float32)
    out = align_similarity(img, CANONICAL_TEMPLATE_120)
    assert np.array_equal(out, img)


def test_recovered_scale_from_doubled_points():
    lm = CANONICAL_TEMPLATE_120 * 2.0
    a, _ = fit_similarity(lm, CANONICAL_TEMPLATE_120)
    assert abs(similarity_scale(a) - 0.5) <= 1e-6


def test_coincident_points_degenerate():
    lm = np.tile([[30.0, 40.0]], (5, 1))
    with pytest.raises(errors.DegenerateLandmarks):
        align_similarity(np.zeros((1, 50, 50), np.float32), lm)


def test_rotation_recovery():
    # rotate template by 30 degrees about its centroid and shift it
    theta = np.deg2rad(30.0)
    R = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    centroid = CANONICAL_TEMPLATE_120.mean(axis=0)
    lm = (CANONICAL_TEMPLATE_120 - centroid) @ R.T * 1.5 + centroid + [7.0, -3.0]
    a, b = fit_similarity(lm, CANONICAL_TEMPLATE_120)
    # residual of the fitted transform on exact correspondences is ~0
    z = lm[:, 0] + 1j * lm[:, 1]
    mapped = a * z + b
    target = CANONICAL_TEMPLATE_120[:, 0] + 1j * CANONICAL_TEMPLATE_120[:, 1]
    assert np.max(np.abs(mapped - target)) <= 1e-9
    assert abs(similarity_scale(a) - 1.0 / 1.5) <= 1e-9


def test_out_of_source_reads_fill_zero():
    from layerprobe.extraction import warp_similarity

    img = np.ones((1, 20, 20), np.float32)
    # pure translation by (+50, +50): the source lands in the middle
    out = warp_similarity(img, 1.0 + 0j, 50.0 + 50.0j, 120)
    assert out.shape == (1, 120, 120)
    assert out[0, 0, 0] == 0.0
    assert out[0, 60, 60] == 1.0
    assert out.max() == 1.0


def test_patch_pair_sizes_and_mirror():
    rng = np.random.default_rng(1)
    aligned = rng.normal(size=(3, 120, 120)).astype(np.float32)
    center, mirrored = make_patch_pair(aligned, 112)
    assert center.shape == (3, 112, 112) and mirrored.shape == (3, 112, 112)
    assert np.array_equal(mirrored, hflip(center))
    with pytest.raises(errors.CropTooLarge):
        make_patch_pair(aligned, 121)


def test_symmetric_image_gives_equal_patches():
    half = np.arange(60, dtype=np.float32)
    row = np.concatenate([half, half[::-1]])
    aligned = np.tile(row, (120, 1))[None, :, :]
    center, mirrored = make_patch_pair(aligned, 112)
    assert np.array_equal(center, mirrored)


def _identity_model(side=4):
    n = side * side
    spec = model_io.parse_manifest(
        f"input 1 {side} {side}\n"
        "mean 0.0\n"
        "layer c Conv2D out=1 kh=1 kw=1 stride=1 pad=0\n"
        f"layer f1 FullyConnected out={n}\n"
        f"layer f2 FullyConnected out={n}\n"
        "tap spat3 c\ntap spat1 c\ntap fc1 f1\ntap fc2 f2\n")
    params = {
        "c": {"kernel": np.ones((1, 1, 1, 1), np.float32), "bias": np.zeros(1, np.float32)},
        "f1": {"weight": np.eye(n, dtype=np.float32), "bias": np.zeros(n, np.float32)},
        "f2": {"weight": np.eye(n, dtype=np.float32), "bias": np.zeros(n, np.float32)},
    }
    return model_io.Model(spec, params)


def test_identity_model_constant_image():
    model = _identity_model(4)
    aligned = np.full((1, 6, 6), 127.5, np.float32)
    rep = extract_representation_set(model, aligned, 4, image_id="x")
    expected = np.float32(127.5 / 255.0)
    for kind, dim in (("spat3", 9), ("spat1", 1), ("fc1", 16), ("fc2", 16)):
        assert rep.vectors[kind].shape == (dim,)
        assert np.all(rep.vectors[kind] == expected), kind


def _random_model(seed):
    from layerprobe.data_ingest import make_synth_model

    spec, params = make_synth_model(seed, crop=24)
    return model_io.Model(spec, params)


def test_mirror_invariance_exact():
    model = _random_model(5)
    rng = np.random.default_rng(2)
    for _ in range(5):
        aligned = rng.integers(0, 256, size=(1, 28, 28)).astype(np.float32)
        a = extract_representation_set(model, aligned, 24)
        b = extract_representation_set(model, hflip(aligned), 24)
        for kind in a.vectors:
            assert np.array_equal(a.vectors[kind], b.vectors[kind]), kind


def test_spat1_is_per_patch_max_of_spat3():
    model = _random_model(6)
    rng = np.random.default_rng(3)
    aligned = rng.integers(0, 256, size=(1, 28, 28)).astype(np.float32)
    center, mirrored = make_patch_pair(aligned, 24)
    from layerprobe.extraction import preprocess

    per_patch_s1 = []
    for patch in (center, mirrored):
        _, taps = forward_with_taps(model, preprocess(patch, model.spec.channel_means))
        t = taps[model.spec.taps["spat3"]]
        s3 = adaptive_maxpool(t, 3)
        s1 = adaptive_maxpool(t, 1)
        assert np.array_equal(s1.ravel(), s3.max(axis=(1, 2)))
        per_patch_s1.append(s1.ravel())
    rep = extract_representation_set(model, aligned, 24)
    assert np.array_equal(rep.vectors["spat1"], average(*per_patch_s1))


def test_extraction_composed_oracle_tiny_net():
    from oracles import conv2d_naive, fully_connected_naive

    spec = model_io.parse_manifest(
        "input 1 5 5\n"
        "mean 0.25\n"
        "layer c Conv2D out=2 kh=3 kw=3 stride=1 pad=0\n"
        "layer f1 FullyConnected out=3\n"
        "layer f2 FullyConnected out=2\n"
        "tap spat3 c\ntap spat1 c\ntap fc1 f1\ntap fc2 f2\n")
    rng = np.random.default_rng(4)
    params = {}
    for name, shape in model_io.parameter_plan(spec):
        layer, _, pname = name.partition(".")
        params.setdefault(layer, {})[pname] = rng.normal(size=shape).astype(np.float32)
    model = model_io.Model(spec, params)
    aligned = rng.integers(0, 256, size=(1, 7, 7)).astype(np.float32)
    rep = extract_representation_set(model, aligned, 5)

    vecs = []
    for patch in make_patch_pair(aligned, 5):
        x = patch / 255.0 - 0.25
        h = conv2d_naive(x, params["c"]["kernel"], params["c"]["bias"], 1, 0)
        # conv output is 3x3, so each pooling bin is a single pixel
        v1 = fully_connected_naive(h, params["f1"]["weight"], params["f1"]["bias"])
        v2 = fully_connected_naive(v1, params["f2"]["weight"], params["f2"]["bias"])
        vecs.append({"spat3": h.ravel(), "spat1": h.max(axis=(1, 2)), "fc1": v1, "fc2": v2})
    for kind in ("spat3", "spat1", "fc1", "fc2"):
        want = (vecs[0][kind] + vecs[1][kind]) / 2.0
        assert np.max(np.abs(rep.vectors[kind] - want)) <= 1e-5, kind


def test_cache_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(5)
    sets = [RepresentationSet(f"img{i}", {"fc1": rng.normal(size=7).astype(np.float32)})
            for i in range(3)]
    p = tmp_path / "fc1.fea"
    cache_write(p, sets, "fc1")
    kind, records = cache_read(p)
    assert kind == "fc1"
    assert [r[0] for r in records] == ["img0", "img1", "img2"]
    for (rid, vec), s in zip(records, sets):
        assert np.array_equal(vec, s.vectors["fc1"])
    p2 = tmp_path / "again.fea"
    cache_write(p2, [RepresentationSet(rid, {"fc1": vec}) for rid, vec in records], "fc1")
    assert p.read_bytes() == p2.read_bytes()


def test_cache_errors(tmp_path):
    v = np.zeros(3, np.float32)
    dup = [RepresentationSet("a", {"fc1": v}), RepresentationSet("a", {"fc1": v})]
    with pytest.raises(errors.DuplicateImageId):
        cache_write(tmp_path / "d.fea", dup, "fc1")
    ragged = [RepresentationSet("a", {"fc1": v}), RepresentationSet("b", {"fc1": np.zeros(4, np.float32)})]
    with pytest.raises(errors.DimMismatch):
        cache_write(tmp_path / "r.fea", ragged, "fc1")

    good = tmp_path / "g.fea"
    cache_write(good, [RepresentationSet("a", {"fc1": v})], "fc1")
    blob = good.read_bytes()
    bad = tmp_path / "bad.fea"
    bad.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(errors.BadMagic):
        cache_read(bad)
    trunc = tmp_path / "t.fea"
    trunc.write_bytes(blob[:-2])
    with pytest.raises(errors.TruncatedFile):
        cache_read(trunc)
    extra = tmp_path / "e.fea"
    extra.write_bytes(blob + b"\x01")
    with pytest.raises(errors.TrailingBytes):
        cache_read(extra)
