"""Forward-only execution of a loaded model with activation capture.

Layer math is float32 with im2col + BLAS matmul doing the heavy lifting, so
repeated forwards of the same input are bitwise identical. Dropout is an
inference-time identity and Softmax is never applied while extracting
representations (it only exists for training-time fidelity of manifests).

The extra pooling that manufactures the small spatial descriptors lives
here as adaptive_maxpool: output bin i along an axis of size H covers
[floor(i*H/N), floor((i+1)*H/N)), so the bins partition the map and the
max of the bin maxes equals the global max exactly.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import OutputLargerThanInput, ShapeMismatch


def conv2d(x, kernel, bias, stride=1, pad=0):
    """Cross-correlate (C,H,W) input with an (O,C,kh,kw) kernel bank.

    out(o,y,x) = bias[o] + sum_{c,i,j} in(c, y*s-pad+i, x*s-pad+j) * kernel(o,c,i,j)
    with zero padding for out-of-range reads.
    """
    x = np.asarray(x, dtype=np.float32)
    kernel = np.asarray(kernel, dtype=np.float32)
    if x.ndim != 3 or kernel.ndim != 4 or x.shape[0] != kernel.shape[1]:
        raise ShapeMismatch(f"conv2d: input {x.shape} vs kernel {kernel.shape}")
    out_c, in_c, kh, kw = kernel.shape
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    _, h, w = x.shape
    if kh > h or kw > w:
        raise ShapeMismatch(f"conv2d: kernel {kh}x{kw} larger than padded input {h}x{w}")
    windows = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    oh, ow = windows.shape[1], windows.shape[2]
    cols = windows.transpose(1, 2, 0, 3, 4).reshape(oh * ow, in_c * kh * kw)
    out = cols @ kernel.reshape(out_c, -1).T
    out += np.asarray(bias, dtype=np.float32)
    return np.ascontiguousarray(out.T.reshape(out_c, oh, ow))


def maxpool2d(x, kernel, stride, ceil_mode=False):
    """Per-channel window max; in ceil mode border windows are clipped."""
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 3:
        raise ShapeMismatch(f"maxpool2d expects rank-3 input, got {x.shape}")
    _, h, w = x.shape
    if not ceil_mode and (kernel > h or kernel > w):
        raise ShapeMismatch(f"maxpool2d: kernel {kernel} larger than input {h}x{w}")
    if ceil_mode:
        oh = -(-(h - kernel) // stride) + 1
        ow = -(-(w - kernel) // stride) + 1
        if oh > 1 and (oh - 1) * stride >= h:
            oh -= 1
        if ow > 1 and (ow - 1) * stride >= w:
            ow -= 1
        # pad with -inf so clipped windows keep their real max
        need_h = (oh - 1) * stride + kernel
        need_w = (ow - 1) * stride + kernel
        if need_h > h or need_w > w:
            x = np.pad(x, ((0, 0), (0, need_h - h), (0, need_w - w)), constant_values=-np.inf)
    else:
        oh = (h - kernel) // stride + 1
        ow = (w - kernel) // stride + 1
    if oh < 1 or ow < 1:
        raise ShapeMismatch(f"maxpool2d: empty output from input {h}x{w}")
    windows = sliding_window_view(x, (kernel, kernel), axis=(1, 2))[:, ::stride, ::stride]
    return np.ascontiguousarray(windows[:, :oh, :ow].max(axis=(3, 4)))


def prelu(x, slopes):
    """f(v) = v if v > 0 else slope * v; slopes are per-channel (or shared)."""
    x = np.asarray(x, dtype=np.float32)
    slopes = np.asarray(slopes, dtype=np.float32)
    if x.ndim == 3:
        if slopes.shape not in ((x.shape[0],), (1,)):
            raise ShapeMismatch(f"prelu: {slopes.shape[0]} slopes for {x.shape[0]} channels")
        s = slopes.reshape(-1, 1, 1)
    elif x.ndim == 1:
        if slopes.shape not in ((x.shape[0],), (1,)):
            raise ShapeMismatch(f"prelu: {slopes.shape[0]} slopes for vector of {x.shape[0]}")
        s = slopes
    else:
        raise ShapeMismatch(f"prelu expects rank-1 or rank-3 input, got {x.shape}")
    return np.where(x > 0, x, s * x)


def fully_connected(x, weight, bias):
    """weight (out, in) times flattened input plus bias."""
    x = np.asarray(x, dtype=np.float32).ravel()
    weight = np.asarray(weight, dtype=np.float32)
    if weight.ndim != 2 or x.size != weight.shape[1]:
        raise ShapeMismatch(f"fully_connected: input {x.size} vs weight {weight.shape}")
    return weight @ x + np.asarray(bias, dtype=np.float32)


def softmax(v):
    v = np.asarray(v, dtype=np.float32)
    e = np.exp(v - v.max())
    return e / e.sum()


def adaptive_maxpool(x, out_side):
    """Max-pool a (C,H,W) map into (C,N,N) with floor-boundary partition bins."""
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeMismatch(f"adaptive_maxpool expects rank-3 input, got {x.shape}")
    c, h, w = x.shape
    n = int(out_side)
    if n < 1 or n > h or n > w:
        raise OutputLargerThanInput(f"output side {n} for input {h}x{w}")
    out = np.empty((c, n, n), dtype=x.dtype)
    for i in range(n):
        r0, r1 = i * h // n, (i + 1) * h // n
        for j in range(n):
            c0, c1 = j * w // n, (j + 1) * w // n
            out[:, i, j] = x[:, r0:r1, c0:c1].max(axis=(1, 2))
    return out


def forward_with_taps(model, x):
    """Run the layer stack on one input, capturing declared tap activations.

    Returns (final activation, {tap layer name: captured tensor}). A tap on a
    layer immediately followed by its attached PReLU captures the rectified
    output, matching how the stack's value actually flows onward.
    """
    spec = model.spec
    x = np.asarray(x, dtype=np.float32)
    if x.shape != spec.input_dims:
        raise ShapeMismatch(f"input {x.shape} vs model input {spec.input_dims}")

    capture_at = {}  # layer index -> list of declared tap names resolved there
    names = [l.name for l in spec.layers]
    for target in set(spec.taps.values()):
        idx = names.index(target)
        if idx + 1 < len(spec.layers) and spec.layers[idx + 1].kind == "PReLU":
            idx += 1
        capture_at.setdefault(idx, []).append(target)

    taps = {}
    cur = x
    for idx, layer in enumerate(spec.layers):
        p = model.params.get(layer.name, {})
        if layer.kind == "Conv2D":
            cur = conv2d(cur, p["kernel"], p["bias"], layer.params["stride"], layer.params["pad"])
        elif layer.kind == "MaxPool2D":
            cur = maxpool2d(cur, layer.params["kernel"], layer.params["stride"], bool(layer.params["ceil"]))
        elif layer.kind == "PReLU":
            cur = prelu(cur, p["slope"])
        elif layer.kind == "FullyConnected":
            cur = fully_connected(cur, p["weight"], p["bias"])
        # Dropout and Softmax pass through unchanged at inference
        for target in capture_at.get(idx, ()):
            taps[target] = cur.copy()
    return cur, taps
