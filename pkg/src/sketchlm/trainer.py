"""Supervised fine-tuning over dataset shards.

Each sample serializes to one transcript: the command with its canvas
placeholder, then the response strokes interleaved with a feedback
placeholder after every stroke (the canvas state at that point), closed by
the response tag.  Loss covers response tokens only; placeholder tokens are
never scored.  An optional plain-text corpus mixes in language-only batches
to keep the model's text head honest.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .codec import (
    PLACEHOLDER_TOKEN,
    TAG_COMMAND_CLOSE,
    TAG_COMMAND_OPEN,
    TAG_RESPONSE_CLOSE,
    TAG_RESPONSE_OPEN,
    Vocab,
    build_vocab,
    serialize_stroke,
    split_words,
)
from .dataset import Sample, TaskKind, read_shard
from .model import (
    AdamState,
    ContextOverflow,
    ModelConfig,
    SequenceInput,
    Weights,
    adam_step,
    init_weights,
    load_checkpoint,
    loss_and_grads,
    save_checkpoint,
)


class TrainerError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    dataset_paths: tuple[str, ...]
    out_dir: str
    lr: float = 3e-4
    batch_size: int = 8
    steps: int = 200
    seed: int = 0
    mix_ratio: float = 0.1  # fraction of text-only regularization batches
    text_corpus_path: Optional[str] = "bundled"  # None disables; "bundled" uses packaged text
    text_chunk_len: int = 96
    checkpoint_every: int = 0  # 0: only the final checkpoint
    # warm up the conv encoder on synthetic pretext tasks, then freeze it for
    # the main loop (the frozen-extractor recipe); 0 trains it end to end
    encoder_pretrain_steps: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0.0 <= self.mix_ratio <= 1.0:
            raise ValueError("mix_ratio must be in [0,1]")
        if self.batch_size < 1 or self.steps < 0:
            raise ValueError("batch_size >= 1 and steps >= 0 required")


def sample_text(sample: Sample) -> str:
    """The full training transcript as text (for vocabulary building)."""
    words = [TAG_COMMAND_OPEN, sample.command_text, PLACEHOLDER_TOKEN, TAG_COMMAND_CLOSE,
             TAG_RESPONSE_OPEN]
    if sample.task is TaskKind.CLASSIFICATION:
        words.append(sample.response_text)
    else:
        for s in sample.response_strokes:
            words.append(serialize_stroke(s))
            words.append(PLACEHOLDER_TOKEN)
    words.append(TAG_RESPONSE_CLOSE)
    return " ".join(words)


def sample_words(sample: Sample) -> tuple[list[str], list[int], int]:
    """Transcript words, placeholder positions, first scored index (no rasters)."""
    words: list[str] = [TAG_COMMAND_OPEN, *split_words(sample.command_text),
                        PLACEHOLDER_TOKEN, TAG_COMMAND_CLOSE, TAG_RESPONSE_OPEN]
    ph_positions = [words.index(PLACEHOLDER_TOKEN)]
    response_start = len(words)
    if sample.task is TaskKind.CLASSIFICATION:
        words.extend(split_words(sample.response_text))
    else:
        for stroke in sample.response_strokes:
            words.extend(split_words(serialize_stroke(stroke)))
            words.append(PLACEHOLDER_TOKEN)
            ph_positions.append(len(words) - 1)
    words.append(TAG_RESPONSE_CLOSE)
    return words, ph_positions, response_start


def sample_to_sequence(
    sample: Sample, vocab: Vocab, ctx_len: int
) -> tuple[SequenceInput, np.ndarray, np.ndarray]:
    """Sample to (sequence, targets, loss mask).

    targets is the token sequence itself; loss_mask[p] marks token p as a
    scored target (predicted from position p-1).  The mask covers the
    response section only and never a placeholder token.  Canvases are
    rasterized here, so callers should encode per batch rather than hold
    many sequences alive.
    """
    words, ph_positions, response_start = sample_words(sample)
    if len(words) > ctx_len:
        raise ContextOverflow(f"sample needs {len(words)} tokens, ctx_len is {ctx_len}")

    images = [sample.prompt_canvas()]
    if sample.task is not TaskKind.CLASSIFICATION:
        images.extend(sample.feedback_canvases())

    token_ids = np.asarray([vocab.id_of(w) for w in words], np.int64)
    mask = np.zeros(len(words), bool)
    mask[response_start:] = True
    mask[ph_positions] = False
    seq = SequenceInput(
        token_ids,
        tuple((p, i) for i, p in enumerate(ph_positions)),
        tuple(images),
    )
    return seq, token_ids.copy(), mask


def load_text_corpus(path) -> str:
    if path == "bundled":
        return resources.files("sketchlm.data").joinpath("textcorpus.txt").read_text("utf-8")
    return Path(path).read_text("utf-8")


def _corpus_ids(text: str, vocab: Vocab) -> np.ndarray:
    return np.asarray([vocab.id_of(w) for w in split_words(text)], np.int64)


def text_batch(corpus_ids: np.ndarray, chunk_len: int, rng) -> tuple[SequenceInput, np.ndarray, np.ndarray]:
    """A language-only training chunk; every position after the first is scored."""
    start = int(rng.integers(0, max(1, len(corpus_ids) - chunk_len)))
    ids = corpus_ids[start : start + chunk_len]
    mask = np.ones(len(ids), bool)
    mask[0] = False
    return SequenceInput(ids, (), ()), ids.copy(), mask


def build_training_vocab(samples: Sequence[Sample], corpus_text: Optional[str]) -> Vocab:
    texts = [sample_text(s) for s in samples]
    if corpus_text:
        texts.append(corpus_text)
    return build_vocab(texts)


def pretrain_encoder(weights: Weights, classes: Sequence[str], steps: int,
                     seed: int, lr: float = 1e-3, batch_size: int = 16) -> list[float]:
    """Warm up the image encoder on synthetic pretext tasks, then freeze it.

    The paper-style recipe keeps a pretrained feature extractor frozen while
    the language side adapts; at desk scale the stand-in is a short
    supervised warm-up on scenes drawn from the same generative process as
    the dataset: per-class object counts (one softmax per class) plus a
    per-grid-cell ink-occupancy head.  The heads are throwaways; only the
    conv weights persist.
    """
    from . import autodiff as ad
    from .dataset import ObjectPool, compose_location_scene, procedural_object
    from .canvas import render_strokes
    from .model import _encode_images_graph, adam_step, AdamState

    cfg = weights.config
    rng = np.random.default_rng((seed, 0xEC))
    sources = []
    for ci, name in enumerate(classes):
        for k in range(16):
            sources.append(procedural_object(name, np.random.default_rng((seed, 0xEC, ci, k))))
    pool = ObjectPool(sources)

    grid = cfg.image_grid
    cell = 256 // grid
    max_count = 4
    dt = cfg.np_dtype
    n_classes = len(classes)
    head_rng = np.random.default_rng((seed, 0xEC, 999))
    kv = cfg.feat_dim + cfg.pos_dim
    count_head = head_rng.normal(0, 1 / np.sqrt(kv), (kv, n_classes * (max_count + 1))).astype(dt)
    occ_head = head_rng.normal(0, 1 / np.sqrt(kv), (kv, 1)).astype(dt)

    # heads ride along in the weight dict for the optimizer, removed at the end
    weights.params["pretext.count"] = count_head
    weights.params["pretext.occ"] = occ_head
    state = AdamState()
    losses = []
    for _ in range(steps):
        canvases, counts, occupancy = [], [], []
        for _b in range(batch_size):
            n = int(rng.integers(1, max_count + 1))
            scene = compose_location_scene(pool, n, rng)
            canvas = render_strokes([st for o in scene.objects for st in o.strokes])
            canvases.append(canvas)
            row = [0] * n_classes
            for o in scene.objects:
                row[classes.index(o.class_name)] += 1
            counts.append(row)
            ink = (canvas != 255).any(axis=2)
            blocks = ink.reshape(grid, cell, grid, cell).any(axis=(1, 3))
            occupancy.append(blocks.reshape(-1))
        counts = np.asarray(counts)
        occupancy = np.asarray(occupancy, dtype=dt)

        params = {
            name: (ad.param(arr) if name.startswith(("enc.", "pretext.")) else ad.constant(arr))
            for name, arr in weights.params.items()
        }
        feats = _encode_images_graph(canvases, params, cfg)  # (B, G^2, F+P)
        pooled = ad.mul(
            ad.reshape(ad.matmul(ad.transpose(feats, (0, 2, 1)),
                                 ad.constant(np.ones((grid * grid, 1), dt))),
                       (batch_size, kv)),
            1.0 / (grid * grid),
        )
        count_logits = ad.reshape(ad.matmul(pooled, params["pretext.count"]),
                                  (batch_size * n_classes, max_count + 1))
        count_targets = counts.reshape(-1)
        loss_counts = ad.masked_cross_entropy(count_logits, count_targets,
                                              np.ones(len(count_targets)))
        occ_logits = ad.reshape(ad.matmul(feats, params["pretext.occ"]),
                                (batch_size, grid * grid))
        loss_occ = ad.sigmoid_bce(occ_logits, occupancy)
        loss = ad.add(loss_counts, loss_occ)
        ad.backward(loss)
        grads = {n: t.grad for n, t in params.items() if t.needs_grad and t.grad is not None}
        adam_step(weights, grads, state, lr)
        losses.append(float(loss.data))
    del weights.params["pretext.count"]
    del weights.params["pretext.occ"]
    return losses


def diverged(curve: Sequence[tuple[int, float, str]], window: int = 50,
             tolerance: float = 1.10) -> bool:
    """True when smoothed task loss rises between consecutive windows.

    Mean task-batch loss per window of `window` steps must be non-increasing
    (within tolerance, since single batches are noisy); a rise flags a
    diverging run.
    """
    task_losses = [loss for _, loss, component in curve if component == "task"]
    means = [
        float(np.mean(task_losses[i : i + window]))
        for i in range(0, len(task_losses) - window + 1, window)
    ]
    return any(b > a * tolerance for a, b in zip(means, means[1:]))


@dataclass
class TrainResult:
    curve: list[tuple[int, float, str]]  # (step, loss, component)
    checkpoint_path: Path
    weights: Weights
    vocab: Vocab
    diverged: bool = False


def _load_samples(paths: Sequence[str]) -> tuple[list[Sample], list[str]]:
    samples: list[Sample] = []
    classes: set[str] = set()
    for p in paths:
        samples.extend(read_shard(p))
        manifest = Path(p).parent / "manifest.json"
        if manifest.exists():
            classes.update(json.loads(manifest.read_text()).get("classes", []))
    if not samples:
        raise TrainerError("no samples in the given shards")
    return samples, sorted(classes)


def train(
    cfg: TrainConfig,
    model_cfg: ModelConfig,
    resume_from: Optional[str] = None,
) -> TrainResult:
    """Run the fine-tuning loop; deterministic for (data, config, seed)."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    samples, classes = _load_samples(cfg.dataset_paths)

    corpus_text = None
    if cfg.mix_ratio > 0 and cfg.text_corpus_path is not None:
        corpus_text = load_text_corpus(cfg.text_corpus_path)

    vocab = build_training_vocab(samples, corpus_text)
    model_cfg = replace(model_cfg, vocab_size=len(vocab))

    fitting = [s for s in samples if len(sample_words(s)[0]) <= model_cfg.ctx_len]
    if not fitting:
        raise TrainerError(f"every sample overflows ctx_len {model_cfg.ctx_len}")
    dropped = len(samples) - len(fitting)

    corpus_ids = _corpus_ids(corpus_text, vocab) if corpus_text else None

    rng = np.random.default_rng(cfg.seed)
    state = AdamState()
    start_step = 0
    if resume_from is not None:
        ck = load_checkpoint(resume_from)
        if ck.vocab.id_to_token != vocab.id_to_token:
            raise TrainerError("resume checkpoint was trained on different data (vocab differs)")
        if replace(ck.weights.config, freeze_encoder=model_cfg.freeze_encoder) != model_cfg:
            raise TrainerError("resume checkpoint config does not match")
        model_cfg = ck.weights.config  # keeps a pretrain-frozen encoder frozen
        weights = ck.weights
        for name, arr in ck.opt_arrays.items():
            kind, pname = name.split(".", 2)[1], name.split(".", 2)[2]
            (state.m if kind == "m" else state.v)[pname] = arr
        state.t = int(ck.extra["adam_t"])
        start_step = int(ck.extra["step"])
        rng.bit_generator.state = json.loads(ck.extra["rng_state"])
        model_cfg = weights.config
    else:
        if cfg.encoder_pretrain_steps > 0:
            if not classes:
                raise TrainerError("encoder pretraining needs a dataset manifest with classes")
            model_cfg = replace(model_cfg, freeze_encoder=True)
            weights = init_weights(model_cfg, seed=cfg.seed)
            pretrain_encoder(weights, classes, cfg.encoder_pretrain_steps, cfg.seed)
        else:
            weights = init_weights(model_cfg, seed=cfg.seed)

    def write_ckpt(path, step):
        opt = {}
        for pname, arr in state.m.items():
            opt[f"adam.m.{pname}"] = arr
        for pname, arr in state.v.items():
            opt[f"adam.v.{pname}"] = arr
        extra = {
            "step": step,
            "adam_t": state.t,
            "rng_state": json.dumps(rng.bit_generator.state),
            "classes": classes,
            "dropped_overlong": dropped,
            "train_config": {
                "lr": cfg.lr, "batch_size": cfg.batch_size, "steps": cfg.steps,
                "seed": cfg.seed, "mix_ratio": cfg.mix_ratio,
            },
        }
        save_checkpoint(path, weights, vocab, extra=extra, opt_arrays=opt)

    curve: list[tuple[int, float, str]] = []
    for step in range(start_step + 1, cfg.steps + 1):
        use_text = corpus_ids is not None and float(rng.random()) < cfg.mix_ratio
        batch = []
        if use_text:
            component = "text"
            for _ in range(cfg.batch_size):
                batch.append(text_batch(corpus_ids, cfg.text_chunk_len, rng))
        else:
            component = "task"
            idx = rng.integers(0, len(fitting), cfg.batch_size)
            batch = [sample_to_sequence(fitting[int(i)], vocab, model_cfg.ctx_len)
                     for i in idx]

        total_loss = 0.0
        grad_sum: dict[str, np.ndarray] = {}
        for seq, targets, mask in batch:
            loss, grads = loss_and_grads(seq, targets, mask, weights)
            total_loss += loss
            for name, g in grads.items():
                if name in grad_sum:
                    grad_sum[name] += g
                else:
                    grad_sum[name] = g.copy()
        scale = 1.0 / len(batch)
        for name in grad_sum:
            grad_sum[name] *= scale
        adam_step(weights, grad_sum, state, cfg.lr)
        curve.append((step, total_loss * scale, component))

        if cfg.checkpoint_every and step % cfg.checkpoint_every == 0 and step < cfg.steps:
            write_ckpt(out / f"step-{step:06d}.ckpt", step)

    ckpt_path = out / "model.ckpt"
    write_ckpt(ckpt_path, cfg.steps)
    with open(out / "loss.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss", "component"])
        for step, loss, component in curve:
            writer.writerow([step, f"{loss:.8f}", component])
    return TrainResult(curve, ckpt_path, weights, vocab, diverged=diverged(curve))
