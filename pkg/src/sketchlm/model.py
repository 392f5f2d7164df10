"""Tiny decoder-only transformer with residual cross-attention over canvases.

Text tokens run through a causal self-attention stack; wherever an image
placeholder sits in the sequence, a single-head cross-attention block reads
that placeholder's image features (conv grid + fixed 2-D sinusoidal position
channels) and adds its output to the hidden state, for every layer except
the last.  The cross-attention output projection starts at zero, so an
untrained model computes exactly the language-only function.

Two forward paths exist on purpose: a taped graph used for training and
gradient checks (`forward`/`loss_and_grads`), and `DecodeStream`, a plain
numpy incremental decoder with a KV cache used for generation.  A parity
test keeps them honest.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .codec import Vocab
from .canvas import Canvas

CKPT_MAGIC = b"SKLMCKPT"
CKPT_VERSION = 1


class ModelError(ValueError):
    pass


class ContextOverflow(ModelError):
    pass


class EmptyMask(ModelError):
    pass


class CheckpointError(ValueError):
    pass


class VersionMismatch(CheckpointError):
    pass


class ShapeMismatch(CheckpointError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    n_layers: int = 4
    hidden_dim: int = 128
    n_heads: int = 4
    ctx_len: int = 640
    image_grid: int = 8
    feat_dim: int = 64
    pos_dim: int = 16
    encoder_channels: tuple[int, int, int] = (16, 32, 48)
    mlp_ratio: int = 4
    init_std: float = 1.0  # multiplier on the fan-in-scaled projection std
    freeze_encoder: bool = False
    dtype: str = "float32"

    def __post_init__(self):
        if self.hidden_dim % self.n_heads:
            raise ValueError("hidden_dim must be divisible by n_heads")
        if self.n_layers < 2:
            raise ValueError("need at least 2 layers (cross-attention skips the last)")
        if self.image_grid < 1 or 256 % self.image_grid:
            raise ValueError("image_grid must divide 256")
        if self.pos_dim % 4:
            raise ValueError("pos_dim must be a multiple of 4")
        patches = conv_patch_sizes(self.image_grid)
        if math.prod(patches) * self.image_grid != 256:
            raise ValueError(f"image_grid {self.image_grid} not reachable in 4 conv stages")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype)

    @property
    def head_dim(self) -> int:
        return self.hidden_dim // self.n_heads

    @property
    def kv_dim(self) -> int:
        return self.feat_dim + self.pos_dim


def conv_patch_sizes(grid: int) -> tuple[int, ...]:
    """Four non-overlapping patch sizes whose product downsamples 256 to grid."""
    rem = 256 // grid
    sizes = []
    for _ in range(4):
        p = 4
        while p > 1 and (p > rem or rem % p):
            p //= 2
        sizes.append(p)
        rem //= p
    return tuple(sizes)


def image_position_grid(grid: int, pos_dim: int, dtype) -> np.ndarray:
    """Fixed 2-D sinusoidal position channels, one row per grid cell."""
    per_axis = pos_dim // 2
    n_freq = per_axis // 2
    freqs = np.pi * (2.0 ** np.arange(n_freq))
    coords = (np.arange(grid) + 0.5) / grid
    ax = coords[:, None] * freqs[None, :]
    enc = np.concatenate([np.sin(ax), np.cos(ax)], axis=1)  # (grid, per_axis)
    rows = []
    for gy in range(grid):
        for gx in range(grid):
            rows.append(np.concatenate([enc[gx], enc[gy]]))
    return np.asarray(rows, dtype=dtype)


@dataclass
class Weights:
    config: ModelConfig
    params: dict[str, np.ndarray]

    def astype(self, dtype: str) -> "Weights":
        cfg = replace(self.config, dtype=dtype)
        return Weights(cfg, {k: v.astype(cfg.np_dtype) for k, v in self.params.items()})


def _encoder_dims(cfg: ModelConfig) -> list[tuple[int, int, int]]:
    """(patch, c_in, c_out) per conv stage."""
    chans = (3, *cfg.encoder_channels, cfg.feat_dim)
    return [(p, chans[i], chans[i + 1]) for i, p in enumerate(conv_patch_sizes(cfg.image_grid))]


def init_weights(cfg: ModelConfig, seed: int = 0) -> Weights:
    """Fan-in-scaled initialization (init_std is a multiplier on 1/sqrt(fan_in)).

    Residual output projections shrink by 1/sqrt(2 * n_layers); every
    cross-attention output projection starts at exactly zero so the untrained
    network computes the text-only function.
    """
    rng = np.random.default_rng(seed)
    dt = cfg.np_dtype
    H, V = cfg.hidden_dim, cfg.vocab_size
    resid = 1.0 / math.sqrt(2.0 * cfg.n_layers)

    def proj(fan_in, fan_out, scale=1.0):
        std = cfg.init_std * scale / math.sqrt(fan_in)
        return rng.normal(0.0, std, (fan_in, fan_out)).astype(dt)

    p: dict[str, np.ndarray] = {}
    p["tok_emb"] = rng.normal(0.0, 0.02, (V, H)).astype(dt)
    p["pos_emb"] = rng.normal(0.0, 0.02, (cfg.ctx_len, H)).astype(dt)
    for i in range(cfg.n_layers):
        pre = f"layers.{i}"
        for ln in ("ln1", "ln2"):
            p[f"{pre}.{ln}.g"] = np.ones(H, dt)
            p[f"{pre}.{ln}.b"] = np.zeros(H, dt)
        for name in ("wq", "wk", "wv"):
            p[f"{pre}.attn.{name}"] = proj(H, H)
        p[f"{pre}.attn.wo"] = proj(H, H, resid)
        for name in ("bq", "bk", "bv", "bo"):
            p[f"{pre}.attn.{name}"] = np.zeros(H, dt)
        p[f"{pre}.mlp.w1"] = proj(H, cfg.mlp_ratio * H)
        p[f"{pre}.mlp.b1"] = np.zeros(cfg.mlp_ratio * H, dt)
        p[f"{pre}.mlp.w2"] = proj(cfg.mlp_ratio * H, H, resid)
        p[f"{pre}.mlp.b2"] = np.zeros(H, dt)
        if i < cfg.n_layers - 1:
            p[f"{pre}.cross.wq"] = proj(H, H)
            p[f"{pre}.cross.bq"] = np.zeros(H, dt)
            p[f"{pre}.cross.wk"] = proj(cfg.kv_dim, H)
            p[f"{pre}.cross.bk"] = np.zeros(H, dt)
            p[f"{pre}.cross.wv"] = proj(cfg.kv_dim, H)
            p[f"{pre}.cross.bv"] = np.zeros(H, dt)
            # zero output projection: training starts from the text-only function
            p[f"{pre}.cross.wo"] = np.zeros((H, H), dt)
            p[f"{pre}.cross.bo"] = np.zeros(H, dt)
    p["ln_f.g"] = np.ones(H, dt)
    p["ln_f.b"] = np.zeros(H, dt)
    p["head.w"] = proj(H, V)
    p["head.b"] = np.zeros(V, dt)
    for j, (patch, c_in, c_out) in enumerate(_encoder_dims(cfg)):
        # gelu-friendly fan-in scaling keeps content features comparable to the
        # O(1) positional channels they are concatenated with
        fan_in = patch * patch * c_in
        p[f"enc.{j}.w"] = rng.normal(0.0, math.sqrt(2.0 / fan_in), (fan_in, c_out)).astype(dt)
        p[f"enc.{j}.b"] = np.zeros(c_out, dt)
    return Weights(cfg, p)


def encoder_param_names(cfg: ModelConfig) -> set[str]:
    return {f"enc.{j}.{n}" for j in range(4) for n in ("w", "b")}


@dataclass(frozen=True)
class SequenceInput:
    """Token ids plus the images bound to each placeholder position."""

    token_ids: np.ndarray  # (L,) int64
    placeholder_positions: tuple[tuple[int, int], ...]  # (position, image index)
    images: tuple[Canvas, ...]

    def __post_init__(self):
        pos = [p for p, _ in self.placeholder_positions]
        if pos != sorted(pos) or len(set(pos)) != len(pos):
            raise ValueError("placeholder positions must be strictly increasing")
        if len(self.placeholder_positions) != len(self.images):
            raise ValueError("one image per placeholder required")
        for p, idx in self.placeholder_positions:
            if not 0 <= p < len(self.token_ids):
                raise ValueError(f"placeholder position {p} outside sequence")
            if not 0 <= idx < len(self.images):
                raise ValueError(f"image index {idx} out of range")


def canvases_to_input(images: Sequence[Canvas], dtype) -> np.ndarray:
    """uint8 canvases to a (M, 256, 256, 3) float batch in [-1, 1]."""
    arr = np.stack([np.asarray(c, np.uint8) for c in images]).astype(dtype)
    return arr / 127.5 - 1.0


# --- plain-numpy building blocks (inference path) --------------------------


def _ln_np(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    return xc / np.sqrt(var + ad.LN_EPS) * g + b


def _gelu_np(x):
    inner = math.sqrt(2.0 / math.pi) * (x + 0.044715 * x**3)
    return 0.5 * x * (1.0 + np.tanh(inner))


def _softmax_np(x, axis=-1):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def encode_image(c: Canvas, w: Weights) -> np.ndarray:
    """Conv-grid features with position channels appended: (grid^2, F+P)."""
    return encode_images_np([c], w)[0]


def encode_images_np(images: Sequence[Canvas], w: Weights) -> np.ndarray:
    cfg = w.config
    x = canvases_to_input(images, cfg.np_dtype)  # (M, 256, 256, 3)
    m = x.shape[0]
    size = 256
    for j, (patch, c_in, c_out) in enumerate(_encoder_dims(cfg)):
        g = size // patch
        x = x.reshape(m, g, patch, g, patch, c_in).transpose(0, 1, 3, 2, 4, 5)
        x = x.reshape(m, g * g, patch * patch * c_in)
        x = x @ w.params[f"enc.{j}.w"] + w.params[f"enc.{j}.b"]
        if j < 3:
            x = _gelu_np(x)
        size = g
        x = x.reshape(m, g, g, c_out)
    feats = x.reshape(m, cfg.image_grid**2, cfg.feat_dim)
    pos = image_position_grid(cfg.image_grid, cfg.pos_dim, cfg.np_dtype)
    pos = np.broadcast_to(pos, (m, *pos.shape))
    return np.concatenate([feats, pos], axis=-1)


def cross_attention(f: np.ndarray, h_j: np.ndarray, w: Weights, layer: int,
                    return_weights: bool = False):
    """Single-head residual cross-attention delta for one hidden state.

    Queries come from h_j, keys/values from the feature rows f; the caller
    adds the returned delta to the hidden state.
    """
    cfg = w.config
    p = w.params
    pre = f"layers.{layer}.cross"
    q = h_j @ p[f"{pre}.wq"] + p[f"{pre}.bq"]
    k = f @ p[f"{pre}.wk"] + p[f"{pre}.bk"]
    v = f @ p[f"{pre}.wv"] + p[f"{pre}.bv"]
    att = _softmax_np((k @ q) / math.sqrt(cfg.hidden_dim))
    delta = (att @ v) @ p[f"{pre}.wo"] + p[f"{pre}.bo"]
    if return_weights:
        return delta, att
    return delta


# --- graph forward (training path) -----------------------------------------


def _graph_params(w: Weights, trainable: bool) -> dict[str, ad.Tensor]:
    frozen = encoder_param_names(w.config) if w.config.freeze_encoder else set()
    out = {}
    for name, arr in w.params.items():
        if trainable and name not in frozen:
            out[name] = ad.param(arr)
        else:
            out[name] = ad.constant(arr)
    return out


def _encode_images_graph(images, wt, cfg) -> ad.Tensor:
    x = ad.constant(canvases_to_input(images, cfg.np_dtype))
    m = x.data.shape[0]
    size = 256
    for j, (patch, c_in, c_out) in enumerate(_encoder_dims(cfg)):
        g = size // patch
        x = ad.reshape(x, (m, g, patch, g, patch, c_in))
        x = ad.transpose(x, (0, 1, 3, 2, 4, 5))
        x = ad.reshape(x, (m, g * g, patch * patch * c_in))
        x = ad.add(ad.matmul(x, wt[f"enc.{j}.w"]), wt[f"enc.{j}.b"])
        if j < 3:
            x = ad.gelu(x)
        size = g
    feats = ad.reshape(x, (m, cfg.image_grid**2, cfg.feat_dim))
    pos = image_position_grid(cfg.image_grid, cfg.pos_dim, cfg.np_dtype)
    pos_t = ad.constant(np.broadcast_to(pos, (m, *pos.shape)).copy())
    return ad.concat([feats, pos_t], axis=-1)


def _forward_graph(x: SequenceInput, wt: dict[str, ad.Tensor], cfg: ModelConfig,
                   use_images: bool = True) -> ad.Tensor:
    tokens = np.asarray(x.token_ids, np.int64)
    L = len(tokens)
    if L > cfg.ctx_len:
        raise ContextOverflow(f"sequence length {L} > ctx_len {cfg.ctx_len}")
    H, nh, hd = cfg.hidden_dim, cfg.n_heads, cfg.head_dim

    h = ad.add(ad.take_rows(wt["tok_emb"], tokens), ad.take_rows(wt["pos_emb"], np.arange(L)))

    m_imgs = len(x.images)
    if use_images and m_imgs:
        feats = _encode_images_graph(x.images, wt, cfg)  # (M, G^2, F+P)
        ph_pos = np.asarray([p for p, _ in x.placeholder_positions], np.int64)
        img_order = [i for _, i in x.placeholder_positions]
        if img_order != list(range(m_imgs)):  # reorder features to placeholder order
            feats = ad.take_rows(feats, np.asarray(img_order, np.int64))
    else:
        feats = None

    mask = np.triu(np.full((L, L), -np.inf, dtype=cfg.np_dtype), k=1)
    mask_t = ad.constant(mask)

    for layer in range(cfg.n_layers):
        pre = f"layers.{layer}"
        hn = ad.layernorm(h, wt[f"{pre}.ln1.g"], wt[f"{pre}.ln1.b"])

        if feats is not None and layer < cfg.n_layers - 1:
            m = feats.data.shape[0]
            qs = ad.add(ad.matmul(ad.reshape(ad.take_rows(hn, ph_pos), (m, 1, H)),
                                  wt[f"{pre}.cross.wq"]), wt[f"{pre}.cross.bq"])
            ks = ad.add(ad.matmul(feats, wt[f"{pre}.cross.wk"]), wt[f"{pre}.cross.bk"])
            vs = ad.add(ad.matmul(feats, wt[f"{pre}.cross.wv"]), wt[f"{pre}.cross.bv"])
            scores = ad.mul(ad.matmul(qs, ad.transpose(ks, (0, 2, 1))), 1.0 / math.sqrt(H))
            att = ad.softmax(scores)  # (M, 1, G^2)
            ctx = ad.reshape(ad.matmul(att, vs), (m, H))
            delta = ad.add(ad.matmul(ctx, wt[f"{pre}.cross.wo"]), wt[f"{pre}.cross.bo"])
            h = ad.add(h, ad.scatter_rows(delta, ph_pos, L))
            hn = ad.layernorm(h, wt[f"{pre}.ln1.g"], wt[f"{pre}.ln1.b"])

        def heads(t):
            return ad.transpose(ad.reshape(t, (L, nh, hd)), (1, 0, 2))

        q = heads(ad.add(ad.matmul(hn, wt[f"{pre}.attn.wq"]), wt[f"{pre}.attn.bq"]))
        k = heads(ad.add(ad.matmul(hn, wt[f"{pre}.attn.wk"]), wt[f"{pre}.attn.bk"]))
        v = heads(ad.add(ad.matmul(hn, wt[f"{pre}.attn.wv"]), wt[f"{pre}.attn.bv"]))
        scores = ad.add(ad.mul(ad.matmul(q, ad.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(hd)), mask_t)
        att = ad.softmax(scores)
        ctx = ad.reshape(ad.transpose(ad.matmul(att, v), (1, 0, 2)), (L, H))
        h = ad.add(h, ad.add(ad.matmul(ctx, wt[f"{pre}.attn.wo"]), wt[f"{pre}.attn.bo"]))

        hn2 = ad.layernorm(h, wt[f"{pre}.ln2.g"], wt[f"{pre}.ln2.b"])
        up = ad.gelu(ad.add(ad.matmul(hn2, wt[f"{pre}.mlp.w1"]), wt[f"{pre}.mlp.b1"]))
        h = ad.add(h, ad.add(ad.matmul(up, wt[f"{pre}.mlp.w2"]), wt[f"{pre}.mlp.b2"]))

    hf = ad.layernorm(h, wt["ln_f.g"], wt["ln_f.b"])
    return ad.add(ad.matmul(hf, wt["head.w"]), wt["head.b"])


def forward(x: SequenceInput, w: Weights, use_images: bool = True) -> np.ndarray:
    """Full-sequence next-token logits, (L, V)."""
    wt = _graph_params(w, trainable=False)
    return _forward_graph(x, wt, w.config, use_images=use_images).data


def masked_ce(logits: np.ndarray, targets: np.ndarray, loss_mask: np.ndarray) -> float:
    """Mean cross-entropy over masked-in rows (logits row i scores targets[i])."""
    mask = np.asarray(loss_mask, bool)
    if not mask.any():
        raise EmptyMask("loss mask selects nothing")
    t = ad.constant(np.asarray(logits))
    return float(ad.masked_cross_entropy(t, targets, mask).data)


def loss_and_grads(x: SequenceInput, targets: np.ndarray, loss_mask: np.ndarray,
                   w: Weights) -> tuple[float, dict[str, np.ndarray]]:
    """Masked-CE loss and gradients for every trainable parameter.

    targets/loss_mask align with token positions: token p is scored by logits
    row p-1 whenever loss_mask[p] is set (position 0 can never be scored).
    """
    mask = np.asarray(loss_mask, bool)
    if mask[0]:
        raise ValueError("position 0 has no preceding logits row")
    if not mask.any():
        raise EmptyMask("loss mask selects nothing")
    wt = _graph_params(w, trainable=True)
    logits = _forward_graph(x, wt, w.config)
    L = len(x.token_ids)
    rows = ad.take_rows(logits, np.arange(L - 1))
    loss = ad.masked_cross_entropy(rows, np.asarray(targets)[1:], mask[1:])
    ad.backward(loss)
    grads = {name: t.grad for name, t in wt.items() if t.needs_grad and t.grad is not None}
    return float(loss.data), grads


def backward(x: SequenceInput, targets: np.ndarray, loss_mask: np.ndarray,
             w: Weights) -> dict[str, np.ndarray]:
    return loss_and_grads(x, targets, loss_mask, w)[1]


# --- optimizer --------------------------------------------------------------


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(w: Weights, grads: dict[str, np.ndarray], state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
              ) -> tuple[Weights, AdamState]:
    """Bias-corrected Adam; updates weights and state in place (single writer)."""
    state.t += 1
    b1t = 1.0 - beta1**state.t
    b2t = 1.0 - beta2**state.t
    for name, g in grads.items():
        p = w.params[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= (lr * (m / b1t) / (np.sqrt(v / b2t) + eps)).astype(p.dtype, copy=False)
    return w, state


# --- incremental decoder ----------------------------------------------------


class DecodeStream:
    """KV-cached token-at-a-time decoder over fixed weights.

    append() feeds one token (with its canvas when the token is the image
    placeholder) and returns next-token logits.  With capture_attention=True,
    every placeholder append records its per-layer cross-attention weights.
    """

    def __init__(self, w: Weights, capture_attention: bool = False):
        self.w = w
        cfg = w.config
        dt = cfg.np_dtype
        self.t = 0
        self._k = [np.empty((cfg.ctx_len, cfg.hidden_dim), dt) for _ in range(cfg.n_layers)]
        self._v = [np.empty((cfg.ctx_len, cfg.hidden_dim), dt) for _ in range(cfg.n_layers)]
        self.capture_attention = capture_attention
        self.attention_maps: list[list[np.ndarray]] = []  # per placeholder, per layer

    def append(self, token_id: int, image: Optional[Canvas] = None) -> np.ndarray:
        w, cfg = self.w, self.w.config
        p = w.params
        if self.t >= cfg.ctx_len:
            raise ContextOverflow(f"decode stream full at ctx_len {cfg.ctx_len}")
        nh, hd, H = cfg.n_heads, cfg.head_dim, cfg.hidden_dim

        h = p["tok_emb"][token_id] + p["pos_emb"][self.t]
        feats = encode_image(image, w) if image is not None else None
        maps: list[np.ndarray] = []

        for layer in range(cfg.n_layers):
            pre = f"layers.{layer}"
            hn = _ln_np(h, p[f"{pre}.ln1.g"], p[f"{pre}.ln1.b"])
            if feats is not None and layer < cfg.n_layers - 1:
                delta, att = cross_attention(feats, hn, w, layer, return_weights=True)
                h = h + delta
                hn = _ln_np(h, p[f"{pre}.ln1.g"], p[f"{pre}.ln1.b"])
                if self.capture_attention:
                    maps.append(att)
            q = hn @ p[f"{pre}.attn.wq"] + p[f"{pre}.attn.bq"]
            self._k[layer][self.t] = hn @ p[f"{pre}.attn.wk"] + p[f"{pre}.attn.bk"]
            self._v[layer][self.t] = hn @ p[f"{pre}.attn.wv"] + p[f"{pre}.attn.bv"]
            kh = self._k[layer][: self.t + 1].reshape(self.t + 1, nh, hd)
            vh = self._v[layer][: self.t + 1].reshape(self.t + 1, nh, hd)
            scores = np.einsum("tnd,nd->tn", kh, q.reshape(nh, hd)) / math.sqrt(hd)
            att_t = _softmax_np(scores, axis=0)
            ctx = np.einsum("tn,tnd->nd", att_t, vh).reshape(H)
            h = h + ctx @ p[f"{pre}.attn.wo"] + p[f"{pre}.attn.bo"]
            hn2 = _ln_np(h, p[f"{pre}.ln2.g"], p[f"{pre}.ln2.b"])
            up = _gelu_np(hn2 @ p[f"{pre}.mlp.w1"] + p[f"{pre}.mlp.b1"])
            h = h + up @ p[f"{pre}.mlp.w2"] + p[f"{pre}.mlp.b2"]

        if feats is not None and self.capture_attention:
            self.attention_maps.append(maps)
        self.t += 1
        hf = _ln_np(h, p["ln_f.g"], p["ln_f.b"])
        return hf @ p["head.w"] + p["head.b"]


# --- checkpoints ------------------------------------------------------------


def save_checkpoint(path, w: Weights, vocab: Vocab, extra: Optional[dict] = None,
                    opt_arrays: Optional[dict[str, np.ndarray]] = None) -> None:
    """Versioned binary checkpoint: JSON header + little-endian f32 arrays."""
    arrays: list[tuple[str, np.ndarray]] = list(w.params.items())
    if opt_arrays:
        arrays.extend(opt_arrays.items())
    header = {
        "config": asdict(w.config),
        "vocab": list(vocab.id_to_token),
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in arrays],
        "extra": extra or {},
    }
    blob = json.dumps(header, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<II", CKPT_VERSION, 0))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, "<f4").tobytes())


@dataclass
class Checkpoint:
    weights: Weights
    vocab: Vocab
    extra: dict
    opt_arrays: dict[str, np.ndarray]


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != CKPT_MAGIC:
        raise CheckpointError("bad magic; not a checkpoint file")
    version, _ = struct.unpack_from("<II", data, 8)
    if version != CKPT_VERSION:
        raise VersionMismatch(f"checkpoint version {version}, expected {CKPT_VERSION}")
    (hlen,) = struct.unpack_from("<Q", data, 16)
    try:
        header = json.loads(data[24 : 24 + hlen])
    except (ValueError, UnicodeDecodeError):
        raise CheckpointError("corrupt header") from None
    cfg_fields = dict(header["config"])
    cfg_fields["encoder_channels"] = tuple(cfg_fields["encoder_channels"])
    cfg = ModelConfig(**cfg_fields)
    tokens = tuple(header["vocab"])
    vocab = Vocab({t: i for i, t in enumerate(tokens)}, tokens)

    offset = 24 + hlen
    arrays: dict[str, np.ndarray] = {}
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        n = int(np.prod(shape)) if shape else 1
        end = offset + 4 * n
        if end > len(data):
            raise CheckpointError(f"truncated array payload at {spec['name']}")
        arrays[spec["name"]] = (
            np.frombuffer(data[offset:end], "<f4").reshape(shape).astype(cfg.np_dtype)
        )
        offset = end
    if offset != len(data):
        raise CheckpointError("trailing bytes after arrays")

    reference = init_weights(cfg, seed=0).params
    params = {}
    for name, ref in reference.items():
        if name not in arrays:
            raise ShapeMismatch(f"missing parameter {name}")
        if arrays[name].shape != ref.shape:
            raise ShapeMismatch(
                f"{name}: shape {arrays[name].shape}, config wants {ref.shape}"
            )
        params[name] = arrays.pop(name)
    return Checkpoint(Weights(cfg, params), vocab, header.get("extra", {}), arrays)
