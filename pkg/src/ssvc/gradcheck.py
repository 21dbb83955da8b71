"""Finite-difference verification of analytic gradients.

The oracle never touches the reverse pass: it re-runs the forward
computation at theta +/- h and compares the central difference against
the accumulated .grad. Relative error per element is
|analytic - numeric| / (|analytic| + 1e-8).
"""

from __future__ import annotations

import time

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .model import SsvcConfig, SsvcParams, caption_loss

STEP = 1e-5


def finite_diff(loss_fn, tensor: Tensor, h=STEP) -> np.ndarray:
    """Central finite differences of loss_fn() wrt every element of tensor."""
    grad = np.zeros_like(tensor.data)
    flat = tensor.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = loss_fn()
        flat[i] = keep - h
        down = loss_fn()
        flat[i] = keep
        out[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    diff = np.abs(analytic - numeric)
    return float((diff / (np.abs(analytic) + 1e-8)).max()) if analytic.size else 0.0


def _checked(name, build, inputs):
    """Run build(inputs) -> scalar tensor, backprop, and compare per input."""
    for t in inputs:
        t.grad = None
    loss = build()
    ad.backward(loss)
    worst = 0.0
    for t in inputs:
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = finite_diff(lambda: float(build().data), t)
        worst = max(worst, relative_error(analytic, numeric))
    return name, worst


def _rand(rng, shape):
    # keep magnitudes away from relu/abs kinks
    return Tensor(rng.uniform(0.2, 1.2, size=shape) * rng.choice([-1.0, 1.0], size=shape),
                  requires_grad=True)


def check_primitives(seed=0):
    """Gradient-check every primitive op; returns {op_name: max_rel_error}."""
    rng = np.random.default_rng(seed)
    results = {}

    def project(t, rng_proj):
        # random projection makes hidden transposition errors visible
        r = Tensor(rng_proj.normal(size=t.data.shape))
        return ad.sum_all(ad.mul(t, r))

    a = _rand(rng, (3, 4))
    b = _rand(rng, (4, 2))
    results.update([_checked("matmul", lambda: project(ad.matmul(a, b), np.random.default_rng(7)), [a, b])])

    x = _rand(rng, (3, 4))
    y = _rand(rng, (3, 4))
    results.update([_checked("add", lambda: project(ad.add(x, y), np.random.default_rng(8)), [x, y])])

    m = _rand(rng, (3, 4))
    bias = _rand(rng, (4,))
    results.update([_checked("add_bias", lambda: project(ad.add(m, bias), np.random.default_rng(9)), [m, bias])])

    results.update([_checked("sub", lambda: project(ad.sub(x, y), np.random.default_rng(10)), [x, y])])
    results.update([_checked("mul", lambda: project(ad.mul(x, y), np.random.default_rng(11)), [x, y])])
    results.update([_checked("scale", lambda: project(ad.scale(x, 1.7), np.random.default_rng(12)), [x])])

    u = _rand(rng, (2, 5))
    results.update([_checked("tanh", lambda: project(ad.tanh(u), np.random.default_rng(13)), [u])])
    results.update([_checked("sigmoid", lambda: project(ad.sigmoid(u), np.random.default_rng(14)), [u])])
    results.update([_checked("relu", lambda: project(ad.relu(u), np.random.default_rng(15)), [u])])

    pos = Tensor(np.abs(np.random.default_rng(seed + 2).uniform(0.3, 2.0, size=(2, 4))), requires_grad=True)
    results.update([_checked("log", lambda: project(ad.log(pos), np.random.default_rng(16)), [pos])])

    s = _rand(rng, (3, 5))
    results.update([_checked("stable_softmax", lambda: project(ad.stable_softmax(s), np.random.default_rng(17)), [s])])
    results.update([_checked("log_softmax", lambda: project(ad.log_softmax(s), np.random.default_rng(18)), [s])])

    c1 = _rand(rng, (2, 3))
    c2 = _rand(rng, (2, 2))
    results.update([_checked("concat", lambda: project(ad.concat([c1, c2], axis=1), np.random.default_rng(19)), [c1, c2])])

    h = _rand(rng, (4, 3))
    w = _rand(rng, (4,))
    results.update([_checked("weighted_sum", lambda: project(ad.weighted_sum(h, w), np.random.default_rng(20)), [h, w])])

    v = _rand(rng, (5,))
    results.update([_checked("repeat_rows", lambda: project(ad.repeat_rows(v, 3), np.random.default_rng(21)), [v])])
    results.update([_checked("reshape", lambda: project(ad.reshape(x, (4, 3)), np.random.default_rng(22)), [x])])

    table = _rand(rng, (6, 3))
    results.update([_checked(
        "gather_rows", lambda: project(ad.gather_rows(table, [1, 3, 3, 5]), np.random.default_rng(23)), [table]
    )])

    pr = _rand(rng, (4, 5))
    results.update([_checked(
        "take_per_row", lambda: project(ad.take_per_row(pr, [0, 4, 2, 2]), np.random.default_rng(24)), [pr]
    )])

    results.update([_checked("sum_all", lambda: ad.sum_all(x), [x])])
    return results


def mini_config():
    """The miniature end-to-end configuration used by the acceptance gate."""
    return SsvcConfig(
        frames_per_seq=4, feature_dim=6, td_units=4, enc_units=3, enc_layers=2,
        dec_units=6, shp_units=2, embed_dim=3, vocab_size=7, max_caption_len=6,
    )


def check_end_to_end(seed=0):
    """Finite-difference check of every parameter of a miniature model.

    Returns {parameter_name: max_rel_error}. Uses a wider step than the
    primitive checks: deep-path gradients here reach ~1e-9, where the
    central-difference roundoff floor eps*|loss|/(2h) at h=1e-5 already
    exceeds the tolerance times the 1e-8 denominator guard.
    """
    config = mini_config()
    rng = np.random.default_rng(seed)
    params = SsvcParams(config, rng=rng)
    frames = rng.normal(size=(config.frames_per_seq, config.feature_dim))
    target = [1, 4, 5, 6, 2, 0]  # start, three words, end, pad

    def loss_value():
        return float(caption_loss(params, config, frames, target).data)

    named = params.named_tensors()
    for t in named.values():
        t.grad = None
    loss = caption_loss(params, config, frames, target)
    ad.backward(loss)

    report = {}
    for name, tensor in sorted(named.items()):
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        numeric = finite_diff(loss_value, tensor, h=1e-4)
        report[name] = relative_error(analytic, numeric)
    return report


def run_full_check(seed=0):
    """Primitive + end-to-end checks with thresholds; returns a report dict."""
    started = time.time()
    primitives = check_primitives(seed)
    e2e = check_end_to_end(seed)
    elapsed = time.time() - started
    return {
        "primitives": primitives,
        "primitives_max": max(primitives.values()),
        "primitives_pass": all(v < 1e-4 for v in primitives.values()),
        "end_to_end": e2e,
        "end_to_end_max": max(e2e.values()),
        "end_to_end_pass": all(v < 1e-3 for v in e2e.values()),
        "elapsed_seconds": elapsed,
    }
