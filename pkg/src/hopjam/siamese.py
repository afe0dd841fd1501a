"""From-scratch Siamese convolutional network over composite images.

One shared parameter set embeds both inputs (hard weight sharing: there is
exactly one copy of every kernel and bias). The embedding tower is four
valid convolutions with stride 1, each followed by ReLU, with 2x2/stride-2
max pooling after the first three blocks, then a fully-connected layer with
sigmoid activation. A pair of images is scored by

    p = sigmoid( sum_j alpha_j * |h1_j - h2_j| )

and trained with binary cross-entropy on same/different labels using Adam
with a stepwise-decaying learning rate. Everything is float64 numpy;
gradients are exact (ReLU and |.| take subgradient 0 at their kinks) and
verified against central finite differences in the test suite.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    ConfigurationError,
    DimensionError,
    DivergenceError,
    NumericalError,
    SamplingError,
)
from .fileio import atomic_write_bytes
from .rng import STREAM_SUPPORT, STREAM_TRAIN_INIT, child_rng

CHECKPOINT_MAGIC = b"HJAMCKPT"
CHECKPOINT_FORMAT_VERSION = 1

LOSS_EPS = 1e-7


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NetConfig:
    """Embedding-tower architecture. Kernel counts stay multiples of 16."""

    input_side: int = 105
    in_channels: int = 3
    conv_channels: tuple = (64, 128, 128, 256)
    conv_kernels: tuple = (10, 7, 4, 4)
    pool_after: tuple = (True, True, True, False)
    embed_dim: int = 4096

    def __post_init__(self):
        if not (len(self.conv_channels) == len(self.conv_kernels)
                == len(self.pool_after)):
            raise ConfigurationError("conv layer lists must align")
        for c in self.conv_channels:
            if c % 16 != 0:
                raise ConfigurationError(
                    f"kernel count {c} is not a multiple of 16")
        self.feature_shape()  # raises if the tower collapses

    def feature_shape(self) -> tuple:
        """(channels, side) entering the fully-connected layer."""
        side = self.input_side
        chans = self.in_channels
        for c, k, pool in zip(self.conv_channels, self.conv_kernels,
                              self.pool_after):
            side = side - k + 1
            if side < 1:
                raise ConfigurationError(
                    f"conv kernel {k} collapses a {side + k - 1}-pixel map")
            if pool:
                side //= 2
                if side < 1:
                    raise ConfigurationError("pooling collapses the map")
            chans = c
        return chans, side

    def flat_dim(self) -> int:
        chans, side = self.feature_shape()
        return chans * side * side


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 2000
    pairs_per_iteration: int = 180
    learning_rate: float = 6e-5
    lr_decay: float = 0.99
    lr_decay_every: int = 100
    seed: int = 0
    init_scheme: str = "flat"        # "flat" or "fan_in"
    weight_std: float = 0.1          # flat scheme: N(0, 0.01)
    bias_mean: float = 0.5           # flat scheme: N(0.5, 0.01)
    bias_std: float = 0.1
    balance: float = 0.5
    chunk_pairs: int = 16
    divergence_factor: float = 10.0
    divergence_patience: int = 50

    def __post_init__(self):
        if self.init_scheme not in ("flat", "fan_in"):
            raise ConfigurationError(
                f"unknown init scheme {self.init_scheme!r}")

    def lr_at(self, iteration: int) -> float:
        return self.learning_rate * self.lr_decay ** (iteration // self.lr_decay_every)


def param_names(cfg: NetConfig) -> list:
    """Declared parameter order (also the checkpoint blob order)."""
    names = []
    for i in range(len(cfg.conv_channels)):
        names += [f"conv{i}_w", f"conv{i}_b"]
    names += ["fc_w", "fc_b", "alpha"]
    return names


def init_params(cfg: NetConfig, train_cfg: TrainConfig) -> Dict[str, np.ndarray]:
    """Seeded parameter draw.

    ``flat``: weights N(0, std^2), biases N(mean, std^2) -- the published
    recipe, suited to long schedules. ``fan_in``: weight std sqrt(2/fan_in)
    with zero-mean small biases, which keeps activations unit-scale so the
    short desk schedule optimizes from the first step. Distance weights
    alpha draw like flat weights under both schemes.
    """
    rng = child_rng(train_cfg.seed, STREAM_TRAIN_INIT)
    fan_in_scheme = train_cfg.init_scheme == "fan_in"
    params: Dict[str, np.ndarray] = {}
    in_ch = cfg.in_channels
    for i, (out_ch, k) in enumerate(zip(cfg.conv_channels, cfg.conv_kernels)):
        std = (np.sqrt(2.0 / (in_ch * k * k)) if fan_in_scheme
               else train_cfg.weight_std)
        b_mean = 0.0 if fan_in_scheme else train_cfg.bias_mean
        b_std = 0.01 if fan_in_scheme else train_cfg.bias_std
        params[f"conv{i}_w"] = std * rng.standard_normal((out_ch, in_ch, k, k))
        params[f"conv{i}_b"] = b_mean + b_std * rng.standard_normal(out_ch)
        in_ch = out_ch
    fc_std = (np.sqrt(2.0 / cfg.flat_dim()) if fan_in_scheme
              else train_cfg.weight_std)
    params["fc_w"] = fc_std * rng.standard_normal((cfg.embed_dim, cfg.flat_dim()))
    params["fc_b"] = ((0.0 if fan_in_scheme else train_cfg.bias_mean)
                      + (0.01 if fan_in_scheme else train_cfg.bias_std)
                      * rng.standard_normal(cfg.embed_dim))
    params["alpha"] = train_cfg.weight_std * rng.standard_normal(cfg.embed_dim)
    return params


# ---------------------------------------------------------------------------
# layer primitives
# ---------------------------------------------------------------------------

def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Valid correlation, stride 1. x: (B,C,H,W), w: (F,C,K,K) -> (B,F,OH,OW)."""
    batch, _, h, width = x.shape
    f, _, k, _ = w.shape
    oh, ow = h - k + 1, width - k + 1
    win = sliding_window_view(x, (k, k), axis=(2, 3))      # (B,C,OH,OW,K,K)
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(batch * oh * ow, -1)
    y = cols @ w.reshape(f, -1).T + b
    return y.reshape(batch, oh, ow, f).transpose(0, 3, 1, 2)


def conv2d_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray):
    batch, c, h, width = x.shape
    f, _, k, _ = w.shape
    _, _, oh, ow = dy.shape
    win = sliding_window_view(x, (k, k), axis=(2, 3))
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(batch * oh * ow, -1)
    dy_r = dy.transpose(0, 2, 3, 1).reshape(batch * oh * ow, f)
    dw = (dy_r.T @ cols).reshape(w.shape)
    db = dy_r.sum(axis=0)
    dcols = (dy_r @ w.reshape(f, -1)).reshape(batch, oh, ow, c, k, k)
    dcols = dcols.transpose(0, 3, 4, 5, 1, 2)              # (B,C,K,K,OH,OW)
    dx = np.zeros_like(x)
    for ki in range(k):
        for kj in range(k):
            dx[:, :, ki:ki + oh, kj:kj + ow] += dcols[:, :, ki, kj]
    return dx, dw, db


def maxpool2_forward(x: np.ndarray):
    """2x2 max pooling with stride 2; odd trailing rows/cols are dropped.
    Ties route the gradient to the first maximum."""
    batch, c, h, width = x.shape
    oh, ow = h // 2, width // 2
    xr = (x[:, :, :2 * oh, :2 * ow]
          .reshape(batch, c, oh, 2, ow, 2)
          .transpose(0, 1, 2, 4, 3, 5)
          .reshape(batch, c, oh, ow, 4))
    idx = xr.argmax(axis=-1)
    y = np.take_along_axis(xr, idx[..., None], axis=-1)[..., 0]
    return y, idx, (h, width)


def maxpool2_backward(dy: np.ndarray, idx: np.ndarray, in_shape: tuple) -> np.ndarray:
    batch, c, oh, ow = dy.shape
    h, width = in_shape
    buf = np.zeros((batch, c, oh, ow, 4))
    np.put_along_axis(buf, idx[..., None], dy[..., None], axis=-1)
    dx = np.zeros((batch, c, h, width))
    dx[:, :, :2 * oh, :2 * ow] = (buf.reshape(batch, c, oh, ow, 2, 2)
                                  .transpose(0, 1, 2, 4, 3, 5)
                                  .reshape(batch, c, 2 * oh, 2 * ow))
    return dx


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


# ---------------------------------------------------------------------------
# embedding tower
# ---------------------------------------------------------------------------

def embed_forward(params: Dict[str, np.ndarray], cfg: NetConfig,
                  x: np.ndarray, want_cache: bool = True):
    """Embeddings for a batch of images (B, C, S, S) -> (B, E) in (0, 1)."""
    if x.ndim != 4 or x.shape[1:] != (cfg.in_channels, cfg.input_side,
                                      cfg.input_side):
        raise DimensionError(
            f"expected images (B, {cfg.in_channels}, {cfg.input_side}, "
            f"{cfg.input_side}), got {x.shape}")
    cache = {"inputs": [], "relu": [], "pool": []} if want_cache else None
    h = x
    for i, pool in enumerate(cfg.pool_after):
        if want_cache:
            cache["inputs"].append(h)
        z = conv2d_forward(h, params[f"conv{i}_w"], params[f"conv{i}_b"])
        a = np.maximum(z, 0.0)
        if want_cache:
            cache["relu"].append(a)
        if pool:
            a, idx, shape = maxpool2_forward(a)
            if want_cache:
                cache["pool"].append((idx, shape))
        elif want_cache:
            cache["pool"].append(None)
        h = a
    flat = h.reshape(h.shape[0], -1)
    emb = sigmoid(flat @ params["fc_w"].T + params["fc_b"])
    if want_cache:
        cache["feature_shape"] = h.shape
        cache["flat"] = flat
        cache["emb"] = emb
    return emb, cache


def embed_backward(params: Dict[str, np.ndarray], cfg: NetConfig, cache: dict,
                   demb: np.ndarray) -> Dict[str, np.ndarray]:
    """Gradients of all parameters given d(loss)/d(embedding)."""
    grads: Dict[str, np.ndarray] = {}
    emb = cache["emb"]
    dz = demb * emb * (1.0 - emb)
    grads["fc_w"] = dz.T @ cache["flat"]
    grads["fc_b"] = dz.sum(axis=0)
    dh = (dz @ params["fc_w"]).reshape(cache["feature_shape"])
    for i in reversed(range(len(cfg.pool_after))):
        if cfg.pool_after[i]:
            idx, shape = cache["pool"][i]
            dh = maxpool2_backward(dh, idx, shape)
        dh = dh * (cache["relu"][i] > 0.0)
        dh, dw, db = conv2d_backward(cache["inputs"][i],
                                     params[f"conv{i}_w"], dh)
        grads[f"conv{i}_w"] = dw
        grads[f"conv{i}_b"] = db
    return grads


def embed_images(params: Dict[str, np.ndarray], cfg: NetConfig,
                 images: np.ndarray, chunk: int = 64) -> np.ndarray:
    """Forward-only embeddings for many images, chunked."""
    outs = []
    for start in range(0, len(images), chunk):
        emb, _ = embed_forward(params, cfg, images[start:start + chunk],
                               want_cache=False)
        outs.append(emb)
    return np.concatenate(outs, axis=0)


# ---------------------------------------------------------------------------
# pair head, loss, gradients
# ---------------------------------------------------------------------------

def pair_score_from_embeddings(params: Dict[str, np.ndarray], ha: np.ndarray,
                               hb: np.ndarray) -> np.ndarray:
    """p = sigmoid(sum_j alpha_j |ha_j - hb_j|), batched."""
    return sigmoid(np.abs(ha - hb) @ params["alpha"])


def forward_pair(params: Dict[str, np.ndarray], cfg: NetConfig,
                 xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
    """Similarity scores for batched image pairs (both sides share params)."""
    ha, _ = embed_forward(params, cfg, xa, want_cache=False)
    hb, _ = embed_forward(params, cfg, xb, want_cache=False)
    return pair_score_from_embeddings(params, ha, hb)


def bce_loss(p: np.ndarray, y: np.ndarray) -> float:
    """Binary cross-entropy, mean over the batch, with p clamped to
    [eps, 1-eps] to avoid log(0)."""
    pc = np.clip(p, LOSS_EPS, 1.0 - LOSS_EPS)
    return float(np.mean(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))))


def loss_and_grads(params: Dict[str, np.ndarray], cfg: NetConfig,
                   xa: np.ndarray, xb: np.ndarray, y: np.ndarray,
                   chunk_pairs: int = 16):
    """Mean batch loss and exact gradients for every parameter.

    Pairs are processed in chunks; gradients accumulate with the full-batch
    normalization, so chunking never changes the result.
    """
    n = len(y)
    grads = {k: np.zeros_like(v) for k, v in params.items()}
    total_loss = 0.0
    for s in range(0, n, chunk_pairs):
        sl = slice(s, min(s + chunk_pairs, n))
        ha, cache_a = embed_forward(params, cfg, xa[sl])
        hb, cache_b = embed_forward(params, cfg, xb[sl])
        diff = ha - hb
        dist = np.abs(diff)
        p = sigmoid(dist @ params["alpha"])
        yc = y[sl]

        pc = np.clip(p, LOSS_EPS, 1.0 - LOSS_EPS)
        total_loss += float(np.sum(-(yc * np.log(pc)
                                     + (1.0 - yc) * np.log(1.0 - pc))))
        # d(loss)/d(logit); zero where the clamp is active
        live = (p > LOSS_EPS) & (p < 1.0 - LOSS_EPS)
        dlogit = np.where(live, p - yc, 0.0) / n

        grads["alpha"] += dist.T @ dlogit
        ddist = dlogit[:, None] * params["alpha"][None, :]
        dha = ddist * np.sign(diff)
        for name, g in embed_backward(params, cfg, cache_a, dha).items():
            grads[name] += g
        for name, g in embed_backward(params, cfg, cache_b, -dha).items():
            grads[name] += g
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in parameter {name!r}")
    return total_loss / n, grads


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: Dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(v) for k, v in params.items()},
        v={k: np.zeros_like(v) for k, v in params.items()},
    )


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
              state: AdamState, lr: float) -> None:
    """One bias-corrected first/second-moment update, in place."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for k, g in grads.items():
        state.m[k] = b1 * state.m[k] + (1.0 - b1) * g
        state.v[k] = b2 * state.v[k] + (1.0 - b2) * (g * g)
        params[k] -= lr * (state.m[k] / c1) / (np.sqrt(state.v[k] / c2)
                                               + state.eps)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def train(net_cfg: NetConfig, train_cfg: TrainConfig, records,
          corpus_dir: str, progress: Optional[callable] = None):
    """Train on seeded matching pairs from the manifest's train split.

    Returns (params, trace) where ``trace[i]`` is the mean pair loss of
    iteration i. Aborts with DivergenceError when the loss stays above
    ``divergence_factor`` times the initial loss for
    ``divergence_patience`` consecutive iterations.
    """
    from . import dataset  # local import; dataset does not import siamese

    train_records = [r for r in records if r.split == "train"]
    if not train_records:
        raise SamplingError("manifest has an empty train split")
    ids, images, _, _ = dataset.load_split_arrays(corpus_dir, records, "train")
    index_of = {sid: i for i, sid in enumerate(ids)}

    params = init_params(net_cfg, train_cfg)
    state = adam_init(params)
    trace = np.empty(train_cfg.iterations)
    over = 0
    for it in range(train_cfg.iterations):
        pairs = dataset.sample_pairs(train_records,
                                     train_cfg.pairs_per_iteration,
                                     train_cfg.seed, train_cfg.balance,
                                     stream=(it,))
        ia = np.array([index_of[p.a] for p in pairs])
        ib = np.array([index_of[p.b] for p in pairs])
        y = np.array([p.same for p in pairs], dtype=np.float64)
        loss, grads = loss_and_grads(params, net_cfg, images[ia], images[ib],
                                     y, train_cfg.chunk_pairs)
        adam_step(params, grads, state, train_cfg.lr_at(it))
        trace[it] = loss
        if loss > train_cfg.divergence_factor * trace[0]:
            over += 1
            if over >= train_cfg.divergence_patience:
                raise DivergenceError(
                    f"loss {loss:.4g} stayed above "
                    f"{train_cfg.divergence_factor}x the initial "
                    f"{trace[0]:.4g} for {over} iterations (iteration {it})")
        else:
            over = 0
        if progress is not None:
            progress(it, loss)
    return params, trace


def smooth_trace(trace: np.ndarray, window: int = 21) -> np.ndarray:
    """Centered moving average with edge shrinkage, for loss-curve checks."""
    half = window // 2
    out = np.empty_like(trace)
    for i in range(len(trace)):
        out[i] = trace[max(0, i - half):i + half + 1].mean()
    return out


# ---------------------------------------------------------------------------
# support-set classification
# ---------------------------------------------------------------------------

def classify(params: Dict[str, np.ndarray], cfg: NetConfig,
             query: np.ndarray, support: Dict[int, np.ndarray],
             expected_classes: Optional[Sequence[int]] = None):
    """Score a query image against per-class exemplar sets.

    The class score is the mean pair similarity against that class's
    exemplars; returns (argmax class id, {class_id: score}) with ties broken
    toward the lowest class id.
    """
    if expected_classes is not None and set(support) != set(expected_classes):
        missing = sorted(set(expected_classes) - set(support))
        raise ConfigurationError(f"support is missing classes {missing}")
    if not support:
        raise ConfigurationError("support set is empty")
    hq, _ = embed_forward(params, cfg, query[None], want_cache=False)
    scores = {}
    for cid in sorted(support):
        exemplars = np.asarray(support[cid])
        if len(exemplars) == 0:
            raise ConfigurationError(f"class {cid} has no support exemplars")
        he = embed_images(params, cfg, exemplars)
        scores[cid] = float(np.mean(
            pair_score_from_embeddings(params, np.repeat(hq, len(he), axis=0), he)))
    best = max(sorted(scores), key=lambda cid: scores[cid])
    return best, scores


def draw_support(records, corpus_dir: str, k: int, seed: int,
                 draw_index: int = 0) -> Dict[int, np.ndarray]:
    """k train-split exemplars per class, seeded per draw index."""
    from . import dataset

    by_class: Dict[int, list] = {}
    for r in records:
        if r.split == "train":
            by_class.setdefault(r.class_id, []).append(r)
    rng = child_rng(seed, STREAM_SUPPORT, draw_index)
    support = {}
    for cid in sorted(by_class):
        pool = by_class[cid]
        if len(pool) < k:
            raise SamplingError(
                f"class {cid} has {len(pool)} train samples, need {k}")
        chosen = rng.choice(len(pool), size=k, replace=False)
        support[cid] = np.stack([
            dataset.load_composite_array(corpus_dir, pool[int(i)])
            for i in chosen])
    return support


def evaluate(params: Dict[str, np.ndarray], net_cfg: NetConfig, records,
             corpus_dir: str, k_support: int = 5, n_draws: int = 3,
             seed: int = 0, split: str = "test") -> dict:
    """Support-set classification report over a manifest split.

    Every query is scored against ``n_draws`` independently drawn support
    sets; accuracies aggregate over all (query, draw) evaluations. The
    report carries the overall accuracy, the per-JSR curve, the mean of the
    per-JSR accuracies and a 10x10 confusion matrix.
    """
    from . import dataset

    ids, images, labels, jsrs = dataset.load_split_arrays(
        corpus_dir, records, split)
    class_ids = sorted({r.class_id for r in records})
    n_classes = len(class_ids)
    cid_pos = {cid: i for i, cid in enumerate(class_ids)}

    query_emb = embed_images(params, net_cfg, images)
    confusion = np.zeros((n_classes, n_classes), dtype=int)
    correct = np.zeros(len(images), dtype=float)
    for draw in range(n_draws):
        support = draw_support(records, corpus_dir, k_support, seed, draw)
        if set(support) != set(class_ids):
            raise ConfigurationError("support does not cover every class")
        sup_emb = {cid: embed_images(params, net_cfg, support[cid])
                   for cid in class_ids}
        # score matrix: mean pair similarity per (query, class)
        scores = np.empty((len(images), n_classes))
        for j, cid in enumerate(class_ids):
            he = sup_emb[cid]
            s = np.zeros(len(images))
            for e in range(len(he)):
                s += pair_score_from_embeddings(params, query_emb,
                                                np.repeat(he[e][None],
                                                          len(images), axis=0))
            scores[:, j] = s / len(he)
        pred = np.argmax(scores, axis=1)  # first max = lowest class id
        for q in range(len(images)):
            confusion[cid_pos[labels[q]], pred[q]] += 1
            correct[q] += float(class_ids[pred[q]] == labels[q])
    correct /= n_draws

    per_jsr = {}
    for jsr in sorted(set(jsrs)):
        mask = jsrs == jsr
        per_jsr[float(jsr)] = float(correct[mask].mean())
    return {
        "split": split,
        "n_queries": int(len(images)),
        "n_draws": int(n_draws),
        "k_support": int(k_support),
        "overall_accuracy": float(correct.mean()),
        "per_jsr_accuracy": per_jsr,
        "mean_per_jsr_accuracy": float(np.mean(list(per_jsr.values()))),
        "class_ids": class_ids,
        "confusion": confusion.tolist(),
    }


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(path: str, params: Dict[str, np.ndarray],
                    net_cfg: NetConfig, step: int,
                    state: Optional[AdamState] = None) -> None:
    """Versioned binary: magic, u32 header length, header JSON, then
    little-endian float64 blobs in declared parameter order (optimizer
    moments appended when present)."""
    names = param_names(net_cfg)
    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "net": dataclasses.asdict(net_cfg),
        "step": int(step),
        "params": {n: list(params[n].shape) for n in names},
        "has_optimizer_state": state is not None,
    }
    if state is not None:
        header["adam"] = {"t": state.t, "beta1": state.beta1,
                          "beta2": state.beta2, "eps": state.eps}
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    out = [CHECKPOINT_MAGIC, struct.pack("<I", len(blob)), blob]
    for n in names:
        out.append(params[n].astype("<f8").tobytes())
    if state is not None:
        for n in names:
            out.append(state.m[n].astype("<f8").tobytes())
        for n in names:
            out.append(state.v[n].astype("<f8").tobytes())
    atomic_write_bytes(path, b"".join(out))


def load_checkpoint(path: str):
    """Returns (params, net_cfg, step, adam_state_or_None)."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ConfigurationError(f"{path} is not a hopjam checkpoint")
    off = len(CHECKPOINT_MAGIC)
    (hlen,) = struct.unpack_from("<I", blob, off)
    off += 4
    header = json.loads(blob[off:off + hlen].decode("utf-8"))
    off += hlen
    net = dict(header["net"])
    for key in ("conv_channels", "conv_kernels", "pool_after"):
        net[key] = tuple(net[key])
    net_cfg = NetConfig(**net)

    def take(shape):
        nonlocal off
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off)
        off += count * 8
        return arr.reshape(shape).copy()

    params = {n: take(header["params"][n]) for n in param_names(net_cfg)}
    state = None
    if header.get("has_optimizer_state"):
        state = adam_init(params)
        meta = header.get("adam", {})
        state.t = int(meta.get("t", header["step"]))
        state.beta1 = float(meta.get("beta1", 0.9))
        state.beta2 = float(meta.get("beta2", 0.999))
        state.eps = float(meta.get("eps", 1e-8))
        state.m = {n: take(header["params"][n]) for n in param_names(net_cfg)}
        state.v = {n: take(header["params"][n]) for n in param_names(net_cfg)}
    return params, net_cfg, int(header["step"]), state
