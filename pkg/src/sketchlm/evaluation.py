"""Evaluation protocols: pixel metrics for exact tasks, exact-match accuracy.

The replay oracle is a fake token stream that greedily reproduces a sample's
ground-truth response; pushing it through the real run_command loop scores
the theoretical ceiling and validates the whole harness wiring independent
of any learning.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .canvas import Canvas, psnr
from .codec import (
    PLACEHOLDER_TOKEN,
    TAG_RESPONSE_CLOSE,
    TAG_RESPONSE_OPEN,
    Vocab,
    serialize_stroke,
    split_words,
)
from .dataset import Sample, TaskKind
from .inference import Budgets, Greedy, SamplingPolicy, Session, classify, run_command
from .model import DecodeStream, Weights

PSNR_TASKS = (TaskKind.REMOVE_ALL, TaskKind.REMOVE_PARTIAL, TaskKind.REPRODUCE)

StreamFactory = Callable[[Sample], object]  # sample -> TokenStream


@dataclass(frozen=True)
class EvalReport:
    task_name: str
    metric_name: str  # "psnr-dB" | "accuracy-%"
    mean: float
    per_sample: tuple[float, ...]
    sample_count: int
    model_id: str
    seed: int

    def __post_init__(self):
        if len(self.per_sample) != self.sample_count:
            raise ValueError("per_sample length must equal sample_count")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def model_streams(weights: Weights) -> StreamFactory:
    return lambda sample: DecodeStream(weights)


def response_token_words(sample: Sample) -> list[str]:
    """The sample's response content as words, placeholders excluded."""
    words: list[str] = []
    if sample.task is TaskKind.CLASSIFICATION:
        words.extend(split_words(sample.response_text))
    else:
        for s in sample.response_strokes:
            words.extend(split_words(serialize_stroke(s)))
    words.append(TAG_RESPONSE_CLOSE)
    return words


class ReplayStream:
    """Scripted logits: predicts the sample's ground-truth response verbatim.

    During the prompt it idles; once the response tag arrives it emits the
    next scripted token, advancing only when the loop feeds that token back
    (placeholders and other system-fed tokens never advance the script).
    """

    def __init__(self, script_ids: Sequence[int], vocab: Vocab):
        self._script = list(script_ids)
        self._vocab = vocab
        self._k = 0
        self._in_response = False
        self._response_open = vocab.id_of(TAG_RESPONSE_OPEN)

    @classmethod
    def for_sample(cls, sample: Sample, vocab: Vocab) -> "ReplayStream":
        return cls([vocab.id_of(w) for w in response_token_words(sample)], vocab)

    def append(self, token_id: int, image: Optional[Canvas] = None) -> np.ndarray:
        if not self._in_response:
            if token_id == self._response_open:
                self._in_response = True
        elif self._k < len(self._script) and token_id == self._script[self._k]:
            self._k += 1
        logits = np.full(len(self._vocab), -1e9, np.float32)
        if self._k < len(self._script):
            logits[self._script[self._k]] = 0.0
        else:
            logits[self._vocab.response_end_id] = 0.0
        return logits


def oracle_streams(vocab: Vocab) -> StreamFactory:
    return lambda sample: ReplayStream.for_sample(sample, vocab)


def eval_psnr_task(
    streams: StreamFactory,
    samples: Sequence[Sample],
    task: TaskKind,
    vocab: Vocab,
    policy: Optional[SamplingPolicy] = None,
    budgets: Budgets = Budgets(),
    model_id: str = "model",
    seed: int = 0,
) -> EvalReport:
    """Run each sample's command through the loop and score PSNR vs ground truth.

    Every generation is scored, including empty or broken ones; reproduce
    samples draw on a blank canvas while observing the reference image.
    """
    if task not in PSNR_TASKS:
        raise ValueError(f"{task} is not a pixel-metric task")
    scores = []
    for sample in samples:
        if sample.task is not task:
            raise ValueError(f"sample of task {sample.task} in {task} eval")
        session = Session(canvas=sample.start_canvas(), policy=policy or Greedy(),
                          budgets=budgets)
        for _ in run_command(session, sample.command_text, streams(sample), vocab,
                             prompt_canvas=sample.prompt_canvas()):
            pass
        scores.append(psnr(session.canvas, sample.gt_canvas()))
    return EvalReport(
        task_name=task.value,
        metric_name="psnr-dB",
        mean=float(np.mean(scores)) if scores else 0.0,
        per_sample=tuple(scores),
        sample_count=len(scores),
        model_id=model_id,
        seed=seed,
    )


def eval_classification(
    streams: StreamFactory,
    samples: Sequence[Sample],
    vocab: Vocab,
    budgets: Budgets = Budgets(),
    model_id: str = "model",
    seed: int = 0,
) -> EvalReport:
    """Greedy decode; exact match after trimming and case folding."""
    scores = []
    for sample in samples:
        if sample.task is not TaskKind.CLASSIFICATION:
            raise ValueError("classification eval got a non-classification sample")
        session = Session(canvas=sample.start_canvas(), budgets=budgets)
        answer = classify(session, sample.command_text, streams(sample), vocab)
        ok = answer.strip().lower() == sample.response_text.strip().lower()
        scores.append(100.0 if ok else 0.0)
    return EvalReport(
        task_name=TaskKind.CLASSIFICATION.value,
        metric_name="accuracy-%",
        mean=float(np.mean(scores)) if scores else 0.0,
        per_sample=tuple(scores),
        sample_count=len(scores),
        model_id=model_id,
        seed=seed,
    )


def _write_gray_ppm(path: Path, gray: np.ndarray) -> None:
    h, w = gray.shape
    rgb = np.repeat(gray[:, :, None], 3, axis=2).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.tobytes())


def export_attention_maps(
    weights: Weights,
    sample: Sample,
    vocab: Vocab,
    out_dir,
    placeholder_index: int = 0,
    upscale: int = 32,
) -> list[Path]:
    """Write one min-max-normalized cross-attention map per layer (PPM files).

    Maps come from the chosen placeholder's append step; nearest-neighbour
    upscaling keeps the files viewable without changing the G x G content.
    """
    from .trainer import sample_to_sequence  # local import to avoid a cycle

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seq, _, _ = sample_to_sequence(sample, vocab, weights.config.ctx_len)
    stream = DecodeStream(weights, capture_attention=True)
    image_at = {p: seq.images[i] for p, i in seq.placeholder_positions}
    for pos, tid in enumerate(seq.token_ids):
        stream.append(int(tid), image_at.get(pos))
    if placeholder_index >= len(stream.attention_maps):
        raise ValueError(f"sample has no placeholder {placeholder_index}")
    grid = weights.config.image_grid
    paths = []
    for layer, att in enumerate(stream.attention_maps[placeholder_index]):
        m = att.reshape(grid, grid)
        lo, hi = float(m.min()), float(m.max())
        norm = (m - lo) / (hi - lo) if hi > lo else np.full_like(m, 0.5)
        img = np.kron(np.round(norm * 255.0), np.ones((upscale, upscale)))
        path = out / f"attention-layer-{layer:02d}.ppm"
        _write_gray_ppm(path, img)
        paths.append(path)
    return paths
