"""L2-regularized hinge-loss linear SVM trained by dual coordinate descent.

Solves  min_a  0.5 * a'Qa - sum(a)  s.t.  0 <= a_i <= C_i  with
Q_ij = y_i y_j x_i'x_j, visiting one coordinate at a time. The primal weight
vector w = sum_i a_i y_i x_i is maintained incrementally, so each update
costs one dot product. The bias is handled by augmenting every feature
vector with a constant B (bias_scale); class imbalance by per-class
multipliers on C.

Per coordinate i: G = y_i * w'x_i - 1, then a_i <- clamp(a_i - G / x_i'x_i,
0, C_i). Sweeps visit indices in a fresh seeded permutation; training stops
once the largest projected-gradient violation in a sweep drops below eps.
Everything is deterministic given the seed.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, NonFiniteFeature, SingleClass

rng_for = np.random.default_rng


@dataclass
class SvmProblem:
    X: np.ndarray                      # (n, d) feature rows
    y: np.ndarray                      # (n,) labels in {-1, +1}
    C: float = 1.0
    class_weights: tuple = (1.0, 1.0)  # multipliers on C for (+1, -1)
    bias_scale: float = 1.0            # 0 disables the bias term
    eps: float = 0.1
    max_sweeps: int = 1000
    seed: int = 0


@dataclass
class SvmModel:
    w: np.ndarray
    b: float
    meta: dict = field(default_factory=dict)


def train_dcd(problem, on_update=None):
    """Train on an SvmProblem; returns an SvmModel.

    Non-convergence within max_sweeps is reported in meta["converged"], not
    raised. `on_update(alpha)` is called after every coordinate visit (test
    instrumentation; alpha is a live view, copy it if you keep it).
    """
    X = np.ascontiguousarray(problem.X, dtype=np.float64)
    y = np.asarray(problem.y, dtype=np.float64).ravel()
    n, d = X.shape
    if y.size != n:
        raise DimMismatch(f"{n} rows vs {y.size} labels")
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("feature matrix contains NaN or Inf")
    if not np.all(np.abs(y) == 1.0):
        raise SingleClass("labels must be -1 or +1")
    if n < 2 or np.all(y == y[0]):
        raise SingleClass("training set needs both classes")
    if problem.C <= 0:
        raise ValueError("C must be positive")

    B = float(problem.bias_scale)
    if B > 0:
        X = np.hstack([X, np.full((n, 1), B)])
    w_plus, w_minus = problem.class_weights
    upper = np.where(y > 0, problem.C * w_plus, problem.C * w_minus)
    qii = np.einsum("ij,ij->i", X, X)

    w = np.zeros(X.shape[1])
    alpha = np.zeros(n)
    rng = rng_for(problem.seed)
    sweeps = 0
    max_violation = np.inf
    for sweeps in range(1, problem.max_sweeps + 1):
        max_violation = 0.0
        for i in rng.permutation(n):
            xi = X[i]
            yi = y[i]
            g = yi * np.dot(w, xi) - 1.0
            if alpha[i] <= 0.0:
                pg = min(g, 0.0)
            elif alpha[i] >= upper[i]:
                pg = max(g, 0.0)
            else:
                pg = g
            if abs(pg) > max_violation:
                max_violation = abs(pg)
            if pg != 0.0:
                if qii[i] > 0.0:
                    new_alpha = min(max(alpha[i] - g / qii[i], 0.0), upper[i])
                else:
                    # zero row: dual objective is linear in alpha_i
                    new_alpha = upper[i] if g < 0.0 else 0.0
                if new_alpha != alpha[i]:
                    w += (new_alpha - alpha[i]) * yi * xi
                    alpha[i] = new_alpha
            if on_update is not None:
                on_update(alpha)
        if max_violation < problem.eps:
            break

    converged = max_violation < problem.eps
    if B > 0:
        b = B * w[-1]
        w_out = w[:-1].copy()
    else:
        b = 0.0
        w_out = w
    return SvmModel(w_out, float(b), {
        "C": problem.C,
        "eps": problem.eps,
        "sweeps_used": sweeps,
        "final_violation": float(max_violation),
        "converged": bool(converged),
    })


def decision_value(model, x):
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != model.w.size:
        raise DimMismatch(f"input dim {x.size} vs model dim {model.w.size}")
    return float(np.dot(model.w, x) + model.b)


def predict(model, x):
    """Sign of the decision value; an exact 0 counts as +1."""
    return 1 if decision_value(model, x) >= 0.0 else -1


def save_svm_model(path, model, kind, attr):
    """Text header plus d little-endian f32 weights."""
    w32 = np.ascontiguousarray(model.w, dtype="<f4")
    header = f"svm d={w32.size} C={model.meta.get('C', 1.0)!r} b={float(model.b)!r} kind={kind} attr={attr}\n"
    with open(path, "wb") as f:
        f.write(header.encode())
        f.write(w32.tobytes())


def load_svm_model(path):
    """Returns (SvmModel, kind, attr)."""
    from .errors import BadMagic, TruncatedFile

    with open(path, "rb") as f:
        blob = f.read()
    nl = blob.find(b"\n")
    if nl < 0 or not blob.startswith(b"svm "):
        raise BadMagic(f"{path}: missing svm header line")
    header = blob[:nl].decode()
    fields = header.split(" ", 5)
    tags = {}
    for tok in fields[1:5]:
        key, _, value = tok.partition("=")
        tags[key] = value
    attr = fields[5].partition("=")[2] if len(fields) > 5 else ""
    try:
        d = int(tags["d"])
        c = float(tags["C"])
        b = float(tags["b"])
        kind = tags["kind"]
    except (KeyError, ValueError):
        raise BadMagic(f"{path}: malformed header {header!r}") from None
    body = blob[nl + 1:]
    if len(body) != 4 * d:
        raise TruncatedFile(f"{path}: want {4 * d} weight bytes after header, got {len(body)}")
    w = np.frombuffer(body, dtype="<f4").astype(np.float64)
    return SvmModel(w, b, {"C": c}), kind, attr
