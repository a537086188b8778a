"""Command-line front end wiring the pipeline stages into batch runs.

Stages communicate through files only (feature caches, TSVs), so each stage
is independently testable and resumable. Every output is written to a temp
name and renamed into place, and all randomness flows from --seed, so a
rerun with identical flags reproduces every byte.
"""

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import data_ingest, eval_select, extraction, model_io, pnm, svm
from .errors import BadMagic, LayerProbeError, MissingFeature, MissingKind

IMAGE_EXTS = (".pgm", ".ppm", ".pnm")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LayerProbeError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"error: FileNotFound: {e}", file=sys.stderr)
        return 1


def build_parser():
    parser = argparse.ArgumentParser(prog="layerprobe",
                                     description="CNN representation probing for face attributes")
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("extract", help="images + landmarks + model -> feature caches")
    p.add_argument("--model", required=True)
    p.add_argument("--weights", required=True)
    p.add_argument("--images", required=True)
    p.add_argument("--landmarks", required=True)
    p.add_argument("--out", required=True)
    _common_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="caches + attributes + partition -> SVMs + results TSV")
    p.add_argument("--feats", required=True)
    p.add_argument("--attrs", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--out", required=True)
    _common_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("select", help="per-kind results -> selection + decomposition reports")
    p.add_argument("--results", required=True, help="kind_results.tsv from the train stage")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("report", help="selection results -> published-comparison table")
    p.add_argument("--results", required=True, help="selection.tsv from the select stage")
    p.add_argument("--dataset", required=True, choices=("celeba", "lfwa"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="generate a planted synthetic dataset + tiny model")
    p.add_argument("--out", required=True)
    p.add_argument("--n-images", type=int, default=200)
    p.add_argument("--noise", type=float, default=8.0)
    p.add_argument("--blob-size", type=int, default=12)
    p.add_argument("--jitter", type=int, default=3)
    _common_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("verify-model", help="manifest (+ weights) -> shape plan or errors")
    p.add_argument("--model", required=True)
    p.add_argument("--weights")
    p.set_defaults(func=cmd_verify_model)
    return parser


def _common_flags(p):
    p.add_argument("--crop", type=int, default=112)
    p.add_argument("--canvas", type=int, default=120)
    p.add_argument("--C", type=float, default=1.0, dest="C")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--class-weighted", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--l2norm", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--kinds", default=",".join(eval_select.KINDS))


def _resolve_threads(args):
    if args.threads:
        return max(1, args.threads)
    env = os.environ.get("LAYERPROBE_THREADS")
    return max(1, int(env)) if env else 1


def _parse_kinds(args):
    kinds = tuple(k.strip() for k in args.kinds.split(",") if k.strip())
    for k in kinds:
        if k not in eval_select.KINDS:
            raise MissingKind(f"unknown representation kind {k!r}")
    return kinds


def _atomic_write(path, write_fn):
    tmp = path + ".tmp"
    write_fn(tmp)
    os.replace(tmp, path)


def cmd_extract(args):
    model = model_io.load_model(args.model, args.weights)
    kinds = _parse_kinds(args)
    for k in kinds:
        if k not in model.spec.taps:
            raise MissingKind(f"model declares no tap for kind {k!r}")
    with open(args.landmarks, encoding="utf-8") as f:
        landmarks = data_ingest.parse_landmarks(f.read())

    files = sorted(f for f in os.listdir(args.images) if f.lower().endswith(IMAGE_EXTS))
    if not files:
        raise MissingFeature(f"no PNM images under {args.images}")

    def one(name):
        if name not in landmarks:
            raise MissingFeature(f"no landmarks for {name}")
        img = pnm.read_pnm(os.path.join(args.images, name))
        aligned = extraction.align_similarity(img, landmarks[name], out_side=args.canvas)
        return extraction.extract_representation_set(model, aligned, args.crop, image_id=name)

    threads = _resolve_threads(args)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sets = list(pool.map(one, files))
    else:
        sets = [one(name) for name in files]

    os.makedirs(args.out, exist_ok=True)
    for kind in kinds:
        path = os.path.join(args.out, f"{kind}.fea")
        _atomic_write(path, lambda tmp, k=kind: extraction.cache_write(tmp, sets, k))
        print(f"wrote {path} ({len(sets)} images)")
    return 0


def _load_cache(feats_dir, kind):
    path = os.path.join(feats_dir, f"{kind}.fea")
    tag, records = extraction.cache_read(path)
    if tag != kind:
        raise BadMagic(f"{path}: cache holds kind {tag!r}, expected {kind!r}")
    return dict(records)


def cmd_train(args):
    kinds = _parse_kinds(args)
    with open(args.attrs, encoding="utf-8") as f:
        table = data_ingest.parse_attributes(f.read())
    with open(args.partition, encoding="utf-8") as f:
        split = data_ingest.parse_partition(f.read())
    features = {kind: _load_cache(args.feats, kind) for kind in kinds}

    cfg = eval_select.EvalConfig(
        C=args.C, eps=args.eps, class_weighted=args.class_weighted,
        l2_normalize=args.l2norm, seed=args.seed,
    )

    def eval_one(attr):
        labels = table.labels_for(attr)
        return [eval_select.evaluate_kind(attr, kind, features[kind], labels, split, cfg)
                for kind in kinds]

    threads = _resolve_threads(args)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_attr = list(pool.map(eval_one, table.names))
    else:
        per_attr = [eval_one(attr) for attr in table.names]

    os.makedirs(os.path.join(args.out, "models"), exist_ok=True)
    results = [r for group in per_attr for r in group]
    for r in results:
        path = os.path.join(args.out, "models", f"{r.attribute}__{r.kind}.svm")
        _atomic_write(path, lambda tmp, rr=r: svm.save_svm_model(tmp, rr.model, rr.kind, rr.attribute))
    tsv = os.path.join(args.out, "kind_results.tsv")
    _atomic_write(tsv, lambda tmp: eval_select.write_kind_results_tsv(tmp, results))
    print(f"wrote {tsv} ({len(results)} rows)")
    return 0


def cmd_select(args):
    results = eval_select.read_kind_results_tsv(args.results)
    report = eval_select.build_selection_report(results)
    ba_test = {a: {k: report.results[a][k].ba_test for k in eval_select.KINDS}
               for a in report.attributes}
    deltas = eval_select.relative_report(ba_test)

    os.makedirs(args.out, exist_ok=True)
    outputs = {
        "selection.tsv": lambda p: eval_select.write_selection_tsv(p, report),
        "table3.tsv": lambda p: eval_select.write_table3_tsv(p, report.decomposition()),
        "fig3.tsv": lambda p: eval_select.write_fig3_tsv(p, deltas, report.attributes),
        "summary.txt": lambda p: eval_select.write_summary(p, report),
    }
    for name, writer in outputs.items():
        path = os.path.join(args.out, name)
        _atomic_write(path, writer)
        print(f"wrote {path}")
    return 0


def cmd_report(args):
    measured = eval_select.read_selection_tsv(args.results)
    rows = eval_select.reference_comparison(measured, args.dataset)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "table1.tsv")
    _atomic_write(path, lambda p: eval_select.write_table1_tsv(p, rows))
    print(f"wrote {path}")
    return 0


def cmd_synth(args):
    cfg = data_ingest.SynthConfig(
        n_images=args.n_images, canvas=args.canvas, crop=args.crop,
        blob_size=args.blob_size, noise_sigma=args.noise, jitter=args.jitter,
        seed=args.seed,
    )
    paths = data_ingest.generate_synthetic(cfg, args.out)
    for key in ("images_dir", "attrs", "partition", "landmarks", "manifest", "weights"):
        print(f"{key}: {paths[key]}")
    return 0


def cmd_verify_model(args):
    with open(args.model, encoding="utf-8") as f:
        spec = model_io.parse_manifest(f.read())
    plan = model_io.infer_shapes(spec)
    for (name, dims), layer in zip(plan, spec.layers):
        print(f"{name}\t{layer.kind}\t{'x'.join(str(d) for d in dims)}")
    if args.weights:
        with open(args.weights, "rb") as f:
            model_io.load_weights(spec, f.read())
        n = len(model_io.parameter_plan(spec))
        print(f"weights ok ({n} parameters)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
