import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from sketchlm.codec import Color, Point, Stroke, Vocab


def random_stroke(rng: np.random.Generator, max_points: int = 12) -> Stroke:
    """Any grammar-valid stroke: full RGB range, width 1 or 2."""
    n = int(rng.integers(1, max_points + 1))
    pts = tuple(Point(int(rng.integers(0, 256)), int(rng.integers(0, 256))) for _ in range(n))
    color = Color(*(int(rng.integers(0, 256)) for _ in range(3)))
    return Stroke(color, int(rng.integers(1, 3)), pts)


def random_polyline(rng: np.random.Generator, max_points: int = 12) -> tuple[Point, ...]:
    n = int(rng.integers(1, max_points + 1))
    return tuple(Point(int(rng.integers(0, 256)), int(rng.integers(0, 256))) for _ in range(n))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


# --- shared overfit model (acceptance criterion 6 and the studio check) -----

OVERFIT_CLASSES = ("circle", "square", "triangle")
OVERFIT_SEED = 6


def build_overfit_samples():
    """8 scenes x 4 tasks = 32 samples; draw/remove pairs share a scene.

    Pairing means the canvas produced by a scene's generate command is exactly
    the prompt canvas its remove command was trained on, so an overfit model
    can chain draw -> remove in one session.
    """
    from sketchlm.dataset import (
        ObjectPool,
        TaskKind,
        compose_location_scene,
        derive_sample,
        procedural_object,
    )

    sources = []
    for ci, name in enumerate(OVERFIT_CLASSES):
        for k in range(8):
            sources.append(procedural_object(name, np.random.default_rng((OVERFIT_SEED, ci, k))))
    pool = ObjectPool(sources)
    tasks = (TaskKind.GENERATE_ALL, TaskKind.CLASSIFICATION,
             TaskKind.REMOVE_ALL, TaskKind.REPRODUCE)
    samples = []
    for i in range(8):
        rng = np.random.default_rng((OVERFIT_SEED, 50, i))
        scene = compose_location_scene(pool, n=1 + i % 2, rng=rng)
        for j, task in enumerate(tasks):
            task_rng = np.random.default_rng((OVERFIT_SEED, 60, i, j))
            samples.append(derive_sample(task, scene, task_rng, seed=i * 4 + j))
    return samples


@dataclass
class OverfitBundle:
    samples: list
    vocab: Vocab
    weights: object
    checkpoint_path: Path
    train_seconds: float
    final_full_loss: float
    diverged: bool


@pytest.fixture(scope="session")
def overfit_bundle(tmp_path_factory) -> OverfitBundle:
    """Train the tiny model to memorize the 32-sample set (a few minutes)."""
    from sketchlm.dataset import write_shard
    from sketchlm.model import ModelConfig, loss_and_grads
    from sketchlm.trainer import TrainConfig, sample_to_sequence, train

    root = tmp_path_factory.mktemp("overfit")
    samples = build_overfit_samples()
    shard = root / "samples.jsonl"
    write_shard(samples, shard)
    tcfg = TrainConfig(
        dataset_paths=(str(shard),),
        out_dir=str(root / "ckpt"),
        lr=1e-3, batch_size=8, steps=1100, seed=0,
        mix_ratio=0.0, text_corpus_path=None,
    )
    mcfg = ModelConfig(
        vocab_size=0, n_layers=3, hidden_dim=96, n_heads=4, ctx_len=160,
        image_grid=8, feat_dim=48, pos_dim=16, encoder_channels=(12, 24, 36),
    )
    t0 = time.monotonic()
    result = train(tcfg, mcfg)
    train_seconds = time.monotonic() - t0
    full = 0.0
    for s in samples:
        seq, tg, mk = sample_to_sequence(s, result.vocab, result.weights.config.ctx_len)
        full += loss_and_grads(seq, tg, mk, result.weights)[0]
    return OverfitBundle(samples, result.vocab, result.weights,
                         result.checkpoint_path, train_seconds, full / len(samples),
                         result.diverged)
