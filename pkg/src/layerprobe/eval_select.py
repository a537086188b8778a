"""Per-attribute training over all representation kinds, selection, reports.

For each (attribute, kind) pair a linear SVM is trained on the train split
and scored with balanced accuracy on val and test. The best kind per
attribute is the val-BA argmax (ties resolved spatial-first), and three
report styles are emitted: the published-comparison table, the best-kind
decomposition histogram, and per-attribute deltas against the globally
pooled reference kind.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    LengthMismatch,
    MissingFeature,
    MissingKind,
    SingleClass,
    SingleClassTruth,
    UnknownAttribute,
)
from .reference import ATTRIBUTES, TABLE1, canonical_attribute
from .svm import SvmProblem, decision_value, train_dcd

KINDS = ("spat3", "spat1", "fc1", "fc2")  # also the tie-break priority
REFERENCE_KIND = "spat1"

TRAIN, VAL, TEST = "train", "val", "test"


@dataclass
class EvalConfig:
    C: float = 1.0
    eps: float = 0.1
    max_sweeps: int = 1000
    class_weighted: bool = True
    l2_normalize: bool = True
    bias_scale: float = 1.0
    seed: int = 0
    train_cap: int = 20000


@dataclass
class KindResult:
    attribute: str
    kind: str
    model: object  # SvmModel, or None when results come from a TSV
    ba_val: float
    ba_test: float


@dataclass
class SelectionReport:
    attributes: tuple                 # attribute order
    results: dict                     # attribute -> {kind: KindResult}
    best: dict                        # attribute -> chosen kind
    mean_best_ba_test: float

    def decomposition(self):
        return decomposition_report(self.best.values())


def balanced_accuracy(preds, truth):
    """Mean of the true-positive and true-negative rates."""
    preds = np.asarray(preds).ravel()
    truth = np.asarray(truth).ravel()
    if preds.size != truth.size:
        raise LengthMismatch(f"{preds.size} predictions vs {truth.size} labels")
    pos = truth > 0
    neg = ~pos
    if not pos.any() or not neg.any():
        raise SingleClassTruth("truth labels contain a single class")
    tar = np.count_nonzero(preds[pos] > 0) / np.count_nonzero(pos)
    trr = np.count_nonzero(preds[neg] <= 0) / np.count_nonzero(neg)
    return (tar + trr) / 2.0


def l2_normalize_rows(X):
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return X / norms


def stratified_cap(ids, labels, cap, seed):
    """Seeded subsample to at most cap instances, keeping class proportions."""
    ids = list(ids)
    if len(ids) <= cap:
        return ids
    rng = np.random.default_rng(seed)
    pos = [i for i in ids if labels[i] > 0]
    neg = [i for i in ids if labels[i] <= 0]
    n_pos = max(1, round(cap * len(pos) / len(ids)))
    n_pos = min(n_pos, cap - 1, len(pos))
    n_neg = min(cap - n_pos, len(neg))
    keep = [pos[k] for k in rng.choice(len(pos), n_pos, replace=False)]
    keep += [neg[k] for k in rng.choice(len(neg), n_neg, replace=False)]
    return sorted(keep)


def evaluate_kind(attribute, kind, features, labels, split, config=None):
    """Train one SVM for (attribute, kind) and score the val/test splits.

    features: image_id -> flat vector (one representation kind);
    labels: image_id -> +-1; split: image_id -> train|val|test.
    """
    cfg = config or EvalConfig()
    buckets = {TRAIN: [], VAL: [], TEST: []}
    for image_id in sorted(split):
        if image_id not in features:
            raise MissingFeature(image_id)
        buckets[split[image_id]].append(image_id)

    train_ids = buckets[TRAIN]
    train_labels = {i: labels[i] for i in train_ids}
    if len(set(train_labels.values())) < 2:
        raise SingleClass(f"{attribute}: train split has one class")
    train_ids = stratified_cap(train_ids, train_labels, cfg.train_cap, cfg.seed)

    def matrix(ids):
        X = np.stack([features[i] for i in ids]).astype(np.float64)
        y = np.array([labels[i] for i in ids], dtype=np.float64)
        return (l2_normalize_rows(X) if cfg.l2_normalize else X), y

    X, y = matrix(train_ids)
    if cfg.class_weighted:
        n_pos = np.count_nonzero(y > 0)
        n_neg = y.size - n_pos
        weights = (y.size / (2.0 * n_pos), y.size / (2.0 * n_neg))
    else:
        weights = (1.0, 1.0)
    model = train_dcd(SvmProblem(
        X, y, C=cfg.C, class_weights=weights, bias_scale=cfg.bias_scale,
        eps=cfg.eps, max_sweeps=cfg.max_sweeps, seed=cfg.seed,
    ))

    def score(ids):
        Xs, ys = matrix(ids)
        preds = np.where(Xs @ model.w + model.b >= 0.0, 1.0, -1.0)
        return balanced_accuracy(preds, ys)

    return KindResult(attribute, kind, model, score(buckets[VAL]), score(buckets[TEST]))


def select_best(results):
    """Val-BA argmax over the four kinds; ties fall to the spatial-first order."""
    by_kind = {r.kind: r for r in results}
    for kind in KINDS:
        if kind not in by_kind:
            raise MissingKind(kind)
    best = KINDS[0]
    for kind in KINDS[1:]:
        if by_kind[kind].ba_val > by_kind[best].ba_val:
            best = kind
    return best


def build_selection_report(kind_results):
    """Fold a flat list of KindResults into a SelectionReport."""
    attributes = []
    table = {}
    for r in kind_results:
        if r.attribute not in table:
            attributes.append(r.attribute)
            table[r.attribute] = {}
        table[r.attribute][r.kind] = r
    best = {a: select_best(table[a].values()) for a in attributes}
    chosen = [table[a][best[a]].ba_test for a in attributes]
    mean = float(np.mean(chosen)) if chosen else 0.0
    return SelectionReport(tuple(attributes), table, best, mean)


def decomposition_report(selections):
    """Histogram of chosen kinds; counts always sum to len(selections)."""
    counts = {k: 0 for k in KINDS}
    for kind in selections:
        counts[kind] += 1
    return counts


def relative_report(per_attribute_ba):
    """Deltas of each kind's BA against the globally pooled reference kind.

    per_attribute_ba: attribute -> {kind: ba}; returns the same structure
    with ba(kind) - ba(spat1) values (the reference row is all zeros).
    """
    deltas = {}
    for attr, by_kind in per_attribute_ba.items():
        for kind in KINDS:
            if kind not in by_kind:
                raise MissingKind(f"{attr}: {kind}")
        ref = by_kind[REFERENCE_KIND]
        deltas[attr] = {kind: by_kind[kind] - ref for kind in KINDS}
    return deltas


def reference_comparison(measured, dataset):
    """Rows of the published-comparison table, plus our measured column.

    measured: attribute -> test BA in [0, 1] (may cover a subset); dataset
    is "celeba" or "lfwa". Raises UnknownAttribute for names outside the
    embedded 40-attribute list.
    """
    table = TABLE1[dataset]
    known = {name: i for i, name in enumerate(ATTRIBUTES)}
    normalized = {}
    for name, ba in measured.items():
        canon = canonical_attribute(name)
        if canon not in known:
            raise UnknownAttribute(name)
        normalized[canon] = ba
    rows = []
    for i, name in enumerate(ATTRIBUTES):
        rows.append({
            "attribute": name,
            "baseline": table["baseline"][i],
            "lnet_anet": table["lnet_anet"][i],
            "ours_ref": table["ours"][i],
            "ours_measured": normalized.get(name),
        })
    return rows


# --- TSV emission (deterministic row order, repr-formatted floats) ---

def write_kind_results_tsv(path, kind_results):
    lines = ["attribute\tkind\tba_val\tba_test"]
    for r in kind_results:
        lines.append(f"{r.attribute}\t{r.kind}\t{r.ba_val!r}\t{r.ba_test!r}")
    _write_text(path, "\n".join(lines) + "\n")


def read_kind_results_tsv(path):
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    results = []
    for line in lines[1:]:
        attr, kind, ba_val, ba_test = line.split("\t")
        results.append(KindResult(attr, kind, None, float(ba_val), float(ba_test)))
    return results


def write_selection_tsv(path, report):
    lines = ["attribute\tbest_kind\tba_test"]
    for attr in report.attributes:
        kind = report.best[attr]
        lines.append(f"{attr}\t{kind}\t{report.results[attr][kind].ba_test!r}")
    _write_text(path, "\n".join(lines) + "\n")


def read_selection_tsv(path):
    """Returns attribute -> chosen test BA, in file order."""
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    measured = {}
    for line in lines[1:]:
        attr, _, ba_test = line.split("\t")
        measured[attr] = float(ba_test)
    return measured


def write_table3_tsv(path, counts):
    lines = ["kind\tcount"]
    for kind in KINDS:
        lines.append(f"{kind}\t{counts[kind]}")
    _write_text(path, "\n".join(lines) + "\n")


def write_fig3_tsv(path, deltas, attribute_order):
    lines = ["attribute\tkind\tdelta"]
    for attr in attribute_order:
        for kind in KINDS:
            lines.append(f"{attr}\t{kind}\t{deltas[attr][kind]!r}")
    _write_text(path, "\n".join(lines) + "\n")


def write_table1_tsv(path, rows):
    lines = ["attribute\tbaseline\tlnet_anet\tours_ref\tours_measured"]
    for r in rows:
        measured = "" if r["ours_measured"] is None else repr(round(100.0 * r["ours_measured"], 2))
        lines.append(f"{r['attribute']}\t{r['baseline']}\t{r['lnet_anet']}\t{r['ours_ref']}\t{measured}")
    _write_text(path, "\n".join(lines) + "\n")


def write_summary(path, report):
    counts = report.decomposition()
    lines = [
        f"attributes\t{len(report.attributes)}",
        f"mean_best_ba_test\t{report.mean_best_ba_test!r}",
    ]
    for kind in KINDS:
        lines.append(f"best_count_{kind}\t{counts[kind]}")
    _write_text(path, "\n".join(lines) + "\n")


def _write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
