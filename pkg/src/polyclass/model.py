"""Sequence classifier for variable-length point sets, implemented in numpy.

Forward, backward and the optimizer are written out explicitly so gradients
can be verified against finite differences. The graph is:

    (B, N, 2) -> linear projection -> + sinusoidal positions
    -> layernorm -> multi-head self-attention (residual)
    -> 5 x [conv1d -> batchnorm -> relu] (dropout after the first block)
    -> masked mean pool -> linear head -> logits

Padding positions are excluded from attention, batch-norm statistics and
pooling, and are re-zeroed between blocks so convolutions see them as the
same zeros that same-padding would supply.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict

import numpy as np

from .errors import CheckpointError, EmptySequenceError, SequenceTooLongError

_LN_EPS = 1e-5
_BN_EPS = 1e-5
_BN_MOMENTUM = 0.1
_MASK_BIAS = -1e30

_CKPT_MAGIC = b"PCLS"
_CKPT_VERSION = 1


@dataclass
class ModelConfig:
    num_classes: int
    d_model: int = 64
    num_heads: int = 4
    conv_channels: tuple[int, ...] = (64, 128, 256, 512, 1024)
    kernel_size: int = 3
    dropout_rate: float = 0.10
    max_len: int = 2048

    def __post_init__(self):
        self.conv_channels = tuple(self.conv_channels)
        if self.d_model % self.num_heads != 0:
            raise ValueError("d_model must be divisible by num_heads")
        if self.kernel_size % 2 != 1:
            raise ValueError("kernel_size must be odd")


@dataclass
class Batch:
    coords: np.ndarray  # (B, N, 2)
    mask: np.ndarray  # (B, N), 1.0 = real point
    labels: np.ndarray | None = None  # (B,)


@dataclass
class AdamHyper:
    lr: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4


def make_batch(sequences, labels=None, dtype=np.float32) -> Batch:
    """Pad variable-length (N_i, 2) arrays to the batch max with a mask."""
    if not sequences:
        raise EmptySequenceError("empty batch")
    n_max = max(len(s) for s in sequences)
    b = len(sequences)
    coords = np.zeros((b, n_max, 2), dtype=dtype)
    mask = np.zeros((b, n_max), dtype=dtype)
    for i, s in enumerate(sequences):
        arr = np.asarray(s, dtype=dtype)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
            raise ValueError(f"sequence {i} must have shape (N, 2), N >= 1")
        coords[i, : len(arr)] = arr
        mask[i, : len(arr)] = 1.0
    lab = None if labels is None else np.asarray(labels, dtype=np.int64)
    return Batch(coords, mask, lab)


def positional_encoding(n: int, d: int, max_len: int = 2048, dtype=np.float64) -> np.ndarray:
    """Sinusoids: pe[pos, 2i] = sin(pos / 10000^(2i/d)), odd columns cos."""
    if n > max_len:
        raise SequenceTooLongError(f"sequence length {n} exceeds max_len {max_len}")
    pos = np.arange(n, dtype=np.float64)[:, None]
    idx = np.arange(d, dtype=np.float64)[None, :]
    freq_exp = 2.0 * np.floor(idx / 2.0) / d
    angles = pos / np.power(10000.0, freq_exp)
    pe = np.where(np.arange(d)[None, :] % 2 == 0, np.sin(angles), np.cos(angles))
    return pe.astype(dtype)


def init_params(config: ModelConfig, rng: np.random.Generator, dtype=np.float32) -> dict:
    """Seeded Glorot/He initialization of every trainable tensor."""
    d = config.d_model
    k = config.kernel_size

    def glorot(shape):
        limit = np.sqrt(6.0 / (shape[0] + shape[-1]))
        return rng.uniform(-limit, limit, size=shape)

    params = {
        "proj_w": glorot((2, d)),
        "proj_b": np.zeros(d),
        "ln_gamma": np.ones(d),
        "ln_beta": np.zeros(d),
        "attn_wq": glorot((d, d)),
        "attn_wk": glorot((d, d)),
        "attn_wv": glorot((d, d)),
        "attn_wo": glorot((d, d)),
        "attn_bq": np.zeros(d),
        "attn_bk": np.zeros(d),
        "attn_bv": np.zeros(d),
        "attn_bo": np.zeros(d),
    }
    c_in = d
    for i, c_out in enumerate(config.conv_channels):
        fan_in = k * c_in
        params[f"conv{i}_w"] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(k, c_in, c_out))
        params[f"bn{i}_gamma"] = np.ones(c_out)
        params[f"bn{i}_beta"] = np.zeros(c_out)
        c_in = c_out
    params["head_w"] = glorot((c_in, config.num_classes))
    params["head_b"] = np.zeros(config.num_classes)
    return {name: np.asarray(v, dtype=dtype) for name, v in params.items()}


def init_buffers(config: ModelConfig, dtype=np.float32) -> dict:
    buffers = {}
    for i, c_out in enumerate(config.conv_channels):
        buffers[f"bn{i}_mean"] = np.zeros(c_out, dtype=dtype)
        buffers[f"bn{i}_var"] = np.ones(c_out, dtype=dtype)
    return buffers


def num_parameters(params: dict) -> int:
    return int(sum(v.size for v in params.values()))


def _softmax_lastaxis(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _conv1d(x: np.ndarray, w: np.ndarray):
    """Same-padded stride-1 conv. x (B,N,Cin), w (k,Cin,Cout) -> (B,N,Cout).

    Implemented as a single GEMM over a contiguous (B*N, k*Cin) window
    matrix, which is also returned for the backward pass.
    """
    b, n, c_in = x.shape
    k = w.shape[0]
    pad = k // 2
    xp = np.zeros((b, n + 2 * pad, c_in), dtype=x.dtype)
    xp[:, pad : pad + n] = x
    # (B, N, k, Cin) view -> one contiguous copy
    windows = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)
    win2d = np.ascontiguousarray(windows.transpose(0, 1, 3, 2)).reshape(b * n, k * c_in)
    out = win2d @ w.reshape(k * c_in, -1)
    return out.reshape(b, n, -1), win2d


def _conv1d_backward(d_out: np.ndarray, win2d: np.ndarray, w: np.ndarray, n: int):
    b = d_out.shape[0]
    k, c_in, c_out = w.shape
    pad = k // 2
    d_out2d = np.ascontiguousarray(d_out).reshape(b * n, c_out)
    d_w = (win2d.T @ d_out2d).reshape(k, c_in, c_out)
    # one wide GEMM for all taps, then scatter-add the k shifted slices
    d_win = (d_out2d @ w.reshape(k * c_in, c_out).T).reshape(b, n, k, c_in)
    d_xp = np.zeros((b, n + 2 * pad, c_in), dtype=d_out.dtype)
    for t in range(k):
        d_xp[:, t : t + n] += d_win[:, :, t, :]
    return d_w, d_xp[:, pad : pad + n]


def _attention(y: np.ndarray, params: dict, mask: np.ndarray, config: ModelConfig):
    """Multi-head self-attention with key masking; masked query rows zeroed.

    Returns (output (B,N,d), internals-for-backward).
    """
    b, n, d = y.shape
    h = config.num_heads
    dh = d // h
    scale = 1.0 / np.sqrt(dh)
    dtype = y.dtype

    def split_heads(t):
        return t.reshape(b, n, h, dh).transpose(0, 2, 1, 3)

    q = split_heads(y @ params["attn_wq"] + params["attn_bq"])
    k_ = split_heads(y @ params["attn_wk"] + params["attn_bk"])
    v = split_heads(y @ params["attn_wv"] + params["attn_bv"])
    scores = (q @ k_.transpose(0, 1, 3, 2)) * scale
    key_bias = ((1.0 - mask)[:, None, None, :] * _MASK_BIAS).astype(dtype)
    attn = _softmax_lastaxis(scores + key_bias)
    ctx = attn @ v
    merged = ctx.transpose(0, 2, 1, 3).reshape(b, n, d)
    out = (merged @ params["attn_wo"] + params["attn_bo"]) * mask[:, :, None].astype(dtype)
    return out, {"q": q, "k": k_, "v": v, "attn": attn, "merged": merged}


def self_attention(x: np.ndarray, params: dict, config: ModelConfig, mask: np.ndarray | None = None):
    """Standalone masked multi-head attention over (N, d) or (B, N, d)."""
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    b, n, _ = x.shape
    if mask is None:
        mask = np.ones((b, n), dtype=x.dtype)
    elif mask.ndim == 1:
        mask = mask[None]
    if np.any(mask.sum(axis=1) == 0):
        raise EmptySequenceError("attention over a fully masked sequence")
    out, _ = _attention(x, params, mask, config)
    return out[0] if squeeze else out


def conv_block(
    x: np.ndarray,
    w: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    mask: np.ndarray | None = None,
    train: bool = False,
    dropout_rate: float = 0.0,
    dropout_rng: np.random.Generator | None = None,
):
    """One conv -> batch-norm -> ReLU block (reference form of the stack).

    Training mode normalizes with batch statistics over unmasked positions;
    eval mode uses the running stats. Masked positions are zeroed so the
    next convolution sees the same zeros plain same-padding would supply.
    forward() inlines this computation; a test pins the equivalence.
    """
    b, n, _ = x.shape
    if mask is None:
        mask = np.ones((b, n), dtype=x.dtype)
    m3 = mask[:, :, None].astype(x.dtype)
    z, _ = _conv1d(x * m3, w)
    if train:
        total = mask.sum()
        zm = z * m3
        mean = zm.sum(axis=(0, 1)) / total
        var = (zm * z).sum(axis=(0, 1)) / total - mean * mean
    else:
        mean = running_mean
        var = running_var
    y = gamma * (z - mean) / np.sqrt(var + _BN_EPS) + beta
    r = np.maximum(y, 0.0)
    if train and dropout_rate > 0.0 and dropout_rng is not None:
        keep = 1.0 - dropout_rate
        r = r * (dropout_rng.random(r.shape) < keep).astype(x.dtype) / keep
    return r * m3


def forward(
    batch: Batch,
    params: dict,
    buffers: dict,
    config: ModelConfig,
    mode: str = "eval",
    dropout_rng: np.random.Generator | None = None,
    cache: dict | None = None,
    update_stats: bool = True,
) -> np.ndarray:
    """Run the network; returns logits (B, num_classes).

    mode 'train' uses batch statistics for BN (updating running stats unless
    update_stats=False) and applies dropout when a dropout_rng is given.
    """
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    train = mode == "train"
    coords = batch.coords
    mask = batch.mask
    b, n, _ = coords.shape
    if n > config.max_len:
        raise SequenceTooLongError(f"sequence length {n} exceeds max_len {config.max_len}")
    counts = mask.sum(axis=1)
    if np.any(counts == 0):
        raise EmptySequenceError("a batch row has no unmasked positions")
    dtype = params["proj_w"].dtype
    m3 = mask[:, :, None].astype(dtype)

    # projection + positions
    x0 = coords.astype(dtype) @ params["proj_w"] + params["proj_b"]
    pe = positional_encoding(n, config.d_model, config.max_len, dtype=dtype)
    x0 = (x0 + pe[None]) * m3

    # layer norm
    mu = x0.mean(axis=-1, keepdims=True)
    var = x0.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + _LN_EPS)
    xhat_ln = (x0 - mu) * inv_std
    y_ln = params["ln_gamma"] * xhat_ln + params["ln_beta"]

    # multi-head self-attention with key masking, residual around it
    attn_out, attn_internals = _attention(y_ln, params, mask.astype(dtype), config)
    x = (x0 + attn_out) * m3

    if cache is not None:
        cache.update(
            batch=batch, x0=x0, mu=mu, inv_std=inv_std, xhat_ln=xhat_ln, y_ln=y_ln,
            conv=[], **attn_internals,
        )

    # conv blocks
    total = counts.sum()
    for i in range(len(config.conv_channels)):
        w = params[f"conv{i}_w"]
        z, windows = _conv1d(x, w)
        if train:
            zm = z * m3  # masked positions carry no statistics
            mean = zm.sum(axis=(0, 1)) / total
            var_c = (zm * z).sum(axis=(0, 1)) / total - mean * mean
            if update_stats:
                buffers[f"bn{i}_mean"] = (
                    (1 - _BN_MOMENTUM) * buffers[f"bn{i}_mean"] + _BN_MOMENTUM * mean
                ).astype(dtype)
                buffers[f"bn{i}_var"] = (
                    (1 - _BN_MOMENTUM) * buffers[f"bn{i}_var"] + _BN_MOMENTUM * var_c
                ).astype(dtype)
        else:
            mean = buffers[f"bn{i}_mean"]
            var_c = buffers[f"bn{i}_var"]
        inv_std_c = 1.0 / np.sqrt(var_c + _BN_EPS)
        xhat = (z - mean) * inv_std_c
        y = params[f"bn{i}_gamma"] * xhat + params[f"bn{i}_beta"]
        r = np.maximum(y, 0.0)
        drop_mask = None
        if i == 0 and train and config.dropout_rate > 0.0 and dropout_rng is not None:
            keep = 1.0 - config.dropout_rate
            drop_mask = (dropout_rng.random(r.shape) < keep).astype(dtype) / keep
            r = r * drop_mask
        x_next = r * m3
        if cache is not None:
            cache["conv"].append(
                dict(x_in=x, windows=windows, mean=mean, inv_std=inv_std_c,
                     xhat=xhat, y=y, drop_mask=drop_mask)
            )
        x = x_next

    pooled = (x * m3).sum(axis=1) / counts[:, None]
    logits = pooled @ params["head_w"] + params["head_b"]
    if cache is not None:
        cache["pooled"] = pooled
        cache["x_last"] = x
        cache["counts"] = counts
        cache["m3"] = m3
    return logits


def cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean softmax cross-entropy; returns (loss, dlogits)."""
    b = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    loss = -float(log_p[np.arange(b), labels].mean())
    probs = np.exp(log_p)
    d_logits = probs.copy()
    d_logits[np.arange(b), labels] -= 1.0
    return loss, d_logits / b


def loss_and_backward(
    batch: Batch,
    params: dict,
    buffers: dict,
    config: ModelConfig,
    dropout_rng: np.random.Generator | None = None,
    update_stats: bool = True,
):
    """One training-mode forward + exact backward. Returns (loss, grads)."""
    if batch.labels is None:
        raise ValueError("labels required for loss_and_backward")
    cache: dict = {}
    logits = forward(
        batch, params, buffers, config,
        mode="train", dropout_rng=dropout_rng, cache=cache, update_stats=update_stats,
    )
    loss, d_logits = cross_entropy(logits, batch.labels)
    grads = {name: np.zeros_like(v) for name, v in params.items()}
    m3 = cache["m3"]
    counts = cache["counts"]
    b, n, _ = batch.coords.shape
    total = counts.sum()

    # head + pooling
    pooled = cache["pooled"]
    grads["head_w"] = pooled.T @ d_logits
    grads["head_b"] = d_logits.sum(axis=0)
    d_pooled = d_logits @ params["head_w"].T
    d_x = d_pooled[:, None, :] * (m3 / counts[:, None, None])

    # conv blocks, reverse order
    for i in reversed(range(len(config.conv_channels))):
        blk = cache["conv"][i]
        d_r = d_x * m3  # gradient of r*mask; masked rows are zero from here on
        if blk["drop_mask"] is not None:
            d_r = d_r * blk["drop_mask"]
        d_y = d_r * (blk["y"] > 0)
        xhat = blk["xhat"]
        inv_std_c = blk["inv_std"]
        d_xhat = d_y * params[f"bn{i}_gamma"]  # masked rows stay zero
        grads[f"bn{i}_gamma"] = (d_y * xhat).sum(axis=(0, 1))
        grads[f"bn{i}_beta"] = d_y.sum(axis=(0, 1))
        # batch statistics were computed over unmasked positions only
        sum_dxhat = d_xhat.sum(axis=(0, 1))
        sum_dxhat_xhat = (d_xhat * xhat).sum(axis=(0, 1))
        d_z = inv_std_c * (
            d_xhat - (m3 / total) * (sum_dxhat + xhat * sum_dxhat_xhat)
        )
        d_w, d_x = _conv1d_backward(d_z, blk["windows"], params[f"conv{i}_w"], n)
        grads[f"conv{i}_w"] = d_w

    # residual split: x1 = (x0 + attn_out) * m3
    d_x = d_x * m3
    d_attn_out = d_x
    d_x0 = d_x.copy()

    # attention backward
    h = config.num_heads
    dh = config.d_model // h
    scale = 1.0 / np.sqrt(dh)
    merged = cache["merged"]
    grads["attn_wo"] = merged.reshape(-1, config.d_model).T @ d_attn_out.reshape(-1, config.d_model)
    grads["attn_bo"] = d_attn_out.sum(axis=(0, 1))
    d_merged = d_attn_out @ params["attn_wo"].T
    d_ctx = d_merged.reshape(b, n, h, dh).transpose(0, 2, 1, 3)
    attn = cache["attn"]
    q, k_, v = cache["q"], cache["k"], cache["v"]
    d_attn = d_ctx @ v.transpose(0, 1, 3, 2)
    d_v = attn.transpose(0, 1, 3, 2) @ d_ctx
    d_scores = attn * (d_attn - (d_attn * attn).sum(axis=-1, keepdims=True))
    d_q = (d_scores @ k_) * scale
    d_k = (d_scores.transpose(0, 1, 3, 2) @ q) * scale

    def merge_heads(t):
        return t.transpose(0, 2, 1, 3).reshape(b, n, config.d_model)

    d_q = merge_heads(d_q)
    d_k = merge_heads(d_k)
    d_v = merge_heads(d_v)
    y_ln = cache["y_ln"]
    y_flat = y_ln.reshape(-1, config.d_model)
    grads["attn_wq"] = y_flat.T @ d_q.reshape(-1, config.d_model)
    grads["attn_wk"] = y_flat.T @ d_k.reshape(-1, config.d_model)
    grads["attn_wv"] = y_flat.T @ d_v.reshape(-1, config.d_model)
    grads["attn_bq"] = d_q.sum(axis=(0, 1))
    grads["attn_bk"] = d_k.sum(axis=(0, 1))
    grads["attn_bv"] = d_v.sum(axis=(0, 1))
    d_y_ln = (
        d_q @ params["attn_wq"].T
        + d_k @ params["attn_wk"].T
        + d_v @ params["attn_wv"].T
    )

    # layer norm backward (per position)
    xhat_ln = cache["xhat_ln"]
    grads["ln_gamma"] = (d_y_ln * xhat_ln).sum(axis=(0, 1))
    grads["ln_beta"] = d_y_ln.sum(axis=(0, 1))
    d_xhat_ln = d_y_ln * params["ln_gamma"]
    d_feat = config.d_model
    inv_std = cache["inv_std"]
    d_x0 += inv_std * (
        d_xhat_ln
        - d_xhat_ln.mean(axis=-1, keepdims=True)
        - xhat_ln * (d_xhat_ln * xhat_ln).mean(axis=-1, keepdims=True)
    )

    # x0 = (proj + pe) * m3
    d_pre = d_x0 * m3
    coords = batch.coords.astype(d_pre.dtype)
    grads["proj_w"] = coords.reshape(-1, 2).T @ d_pre.reshape(-1, config.d_model)
    grads["proj_b"] = d_pre.sum(axis=(0, 1))
    return loss, grads


def init_adam_state(params: dict) -> dict:
    return {
        "t": 0,
        "m": {k: np.zeros_like(v) for k, v in params.items()},
        "v": {k: np.zeros_like(v) for k, v in params.items()},
    }


def adam_step(params: dict, grads: dict, state: dict, hyper: AdamHyper) -> None:
    """In-place decoupled-weight-decay Adam with bias correction."""
    state["t"] += 1
    t = state["t"]
    bc1 = 1.0 - hyper.beta1 ** t
    bc2 = 1.0 - hyper.beta2 ** t
    for name, g in grads.items():
        p = params[name]
        if hyper.weight_decay:
            p *= 1.0 - hyper.lr * hyper.weight_decay
        m = state["m"][name]
        v = state["v"][name]
        m *= hyper.beta1
        m += (1.0 - hyper.beta1) * g
        v *= hyper.beta2
        v += (1.0 - hyper.beta2) * g * g
        p -= hyper.lr * (m / bc1) / (np.sqrt(v / bc2) + hyper.eps)


HEAD_WIDTH = 1024  # width of the classification head in the FLOP convention


def count_flops(config: ModelConfig, n: int) -> int:
    """Closed-form FLOP count of one forward pass, 1 MAC = 2 FLOPs.

    Terms: input projection, attention (QKV + scores + context + output),
    each conv, one 2NC term each for BN and ReLU per block, the pooling,
    and the fixed 1024-wide classification head. This convention is
    self-consistent and pinned by tests; it makes no attempt to match any
    external counter.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    d = config.d_model
    k = config.kernel_size
    total = 2 * n * 2 * d
    total += 2 * (3 * n * d * d + 2 * n * n * d + n * d * d)
    c_in = d
    for c_out in config.conv_channels:
        total += 2 * n * k * c_in * c_out
        total += 2 * n * c_out  # batch norm
        total += 2 * n * c_out  # relu
        c_in = c_out
    total += 2 * n * c_in  # pooling
    total += 2 * HEAD_WIDTH * config.num_classes  # head
    return int(total)


def save_checkpoint(
    path,
    config: ModelConfig,
    params: dict,
    buffers: dict,
    meta: dict | None = None,
    opt_state: dict | None = None,
) -> None:
    """Write the versioned binary container documented in the README.

    Layout: magic 'PCLS', uint32 LE version, uint32 LE header length, JSON
    header (sorted keys), then each tensor's raw little-endian bytes in
    header order. Identical inputs produce identical bytes.
    """
    dtype = str(params[sorted(params)[0]].dtype)
    np_dtype = "<f8" if dtype == "float64" else "<f4"
    tensors = []
    blobs = []
    for kind, src in (("param", params), ("buffer", buffers)):
        for name in sorted(src):
            arr = np.ascontiguousarray(src[name], dtype=np_dtype)
            tensors.append({"kind": kind, "name": name, "shape": list(arr.shape)})
            blobs.append(arr.tobytes())
    opt_header = None
    if opt_state is not None:
        opt_header = {"t": opt_state["t"]}
        for kind in ("m", "v"):
            for name in sorted(opt_state[kind]):
                arr = np.ascontiguousarray(opt_state[kind][name], dtype=np_dtype)
                tensors.append({"kind": f"opt_{kind}", "name": name, "shape": list(arr.shape)})
                blobs.append(arr.tobytes())
    header = {
        "version": _CKPT_VERSION,
        "dtype": dtype,
        "config": asdict(config),
        "meta": meta or {},
        "opt": opt_header,
        "tensors": tensors,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(_CKPT_MAGIC)
        f.write(struct.pack("<II", _CKPT_VERSION, len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path):
    """Read a checkpoint; returns (config, params, buffers, meta, opt_state)."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != _CKPT_MAGIC:
        raise CheckpointError(f"bad checkpoint magic {data[:4]!r}")
    version, header_len = struct.unpack("<II", data[4:12])
    if version != _CKPT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(data[12 : 12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    np_dtype = "<f8" if header["dtype"] == "float64" else "<f4"
    itemsize = 8 if header["dtype"] == "float64" else 4
    cfg_dict = dict(header["config"])
    cfg_dict["conv_channels"] = tuple(cfg_dict["conv_channels"])
    config = ModelConfig(**cfg_dict)
    offset = 12 + header_len
    params: dict = {}
    buffers: dict = {}
    opt_state = None
    if header.get("opt") is not None:
        opt_state = {"t": header["opt"]["t"], "m": {}, "v": {}}
    for spec in header["tensors"]:
        shape = tuple(spec["shape"])
        nbytes = int(np.prod(shape)) * itemsize if shape else itemsize
        raw = data[offset : offset + nbytes]
        if len(raw) < nbytes:
            raise CheckpointError(f"checkpoint truncated at tensor {spec['name']}")
        arr = np.frombuffer(raw, dtype=np_dtype).reshape(shape).copy()
        offset += nbytes
        if spec["kind"] == "param":
            params[spec["name"]] = arr
        elif spec["kind"] == "buffer":
            buffers[spec["name"]] = arr
        elif spec["kind"] in ("opt_m", "opt_v") and opt_state is not None:
            opt_state[spec["kind"][4:]][spec["name"]] = arr
        else:
            raise CheckpointError(f"unknown tensor kind {spec['kind']!r}")
    return config, params, buffers, header.get("meta", {}), opt_state
