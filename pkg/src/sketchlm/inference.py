"""Iterative generation loop: sample tokens, close strokes, observe the canvas.

run_command builds the prompt, then alternates sampling with feeding results
back: every completed stroke is painted onto the session canvas and the
updated canvas re-enters the context through a fresh image placeholder, so
the model always sees what it has drawn so far.  Events stream out as they
happen; the stream always terminates with a Done event.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Protocol, Union

import numpy as np

from .canvas import Canvas, apply_stroke, blank_canvas
from .codec import (
    PLACEHOLDER_TOKEN,
    TAG_COMMAND_CLOSE,
    TAG_COMMAND_OPEN,
    TAG_RESPONSE_OPEN,
    MalformedStream,
    ResponseEnd,
    Stroke,
    StrokeComplete,
    Vocab,
    join_words,
    scan_start,
    split_words,
    stream_scan,
)
from .model import ContextOverflow


class TokenStream(Protocol):
    """One in-flight generation context: feed a token, get next-token logits."""

    def append(self, token_id: int, image: Optional[Canvas] = None) -> np.ndarray: ...


class Greedy:
    """Argmax sampling; lowest id wins ties."""

    def pick(self, logits: np.ndarray) -> int:
        return int(np.argmax(logits))


class TopP:
    """Nucleus sampling: smallest probability-sorted prefix with mass >= p.

    Boundary ties are ordered by ascending token id, so the nucleus is
    deterministic; draws come from the policy's own seeded rng.
    """

    def __init__(self, p: float = 0.9, seed: int = 0):
        if not 0.0 < p <= 1.0:
            raise ValueError(f"p must be in (0, 1], got {p}")
        self.p = p
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def nucleus(self, logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        z = np.asarray(logits, np.float64)
        z = z - z.max()
        probs = np.exp(z)
        probs /= probs.sum()
        order = np.argsort(-probs, kind="stable")  # equal probs fall back to id order
        cum = np.cumsum(probs[order])
        cut = min(int(np.searchsorted(cum, self.p, side="left")), len(cum) - 1)
        kept = order[: cut + 1]
        mass = probs[kept]
        return kept, mass / mass.sum()

    def pick(self, logits: np.ndarray) -> int:
        kept, renorm = self.nucleus(logits)
        r = self._rng.random()
        return int(kept[np.searchsorted(np.cumsum(renorm), r, side="right").clip(0, len(kept) - 1)])


SamplingPolicy = Union[Greedy, TopP]


def sample_token(logits: np.ndarray, policy: SamplingPolicy) -> int:
    return policy.pick(logits)


@dataclass(frozen=True)
class Budgets:
    max_tokens: int = 2048
    max_strokes: int = 64


@dataclass(frozen=True)
class TextToken:
    token_id: int
    word: str


@dataclass(frozen=True)
class StrokeEmitted:
    stroke: Stroke
    canvas_after: Canvas


@dataclass(frozen=True)
class Done:
    reason: str  # response-end | max-tokens | max-strokes | context-overflow | cancelled


Event = Union[TextToken, StrokeEmitted, Done]


@dataclass
class Session:
    """One interactive drawing surface; commands run against it in turn.

    Each command opens a fresh token context (matching how training samples
    look) while the canvas carries over, so a remove command really erases
    what an earlier draw command painted.
    """

    canvas: Canvas = field(default_factory=blank_canvas)
    policy: SamplingPolicy = field(default_factory=Greedy)
    budgets: Budgets = field(default_factory=Budgets)
    history: list[tuple[str, str]] = field(default_factory=list)  # (command, done reason)
    strokes_applied: list[Stroke] = field(default_factory=list)
    cancel_requested: bool = False


def run_command(
    session: Session,
    command_text: str,
    stream: TokenStream,
    vocab: Vocab,
    prompt_canvas: Optional[Canvas] = None,
    policy: Optional[SamplingPolicy] = None,
) -> Iterator[Event]:
    """Execute one command; yields TextToken/StrokeEmitted events, then Done.

    prompt_canvas is the image bound to the command's placeholder; by default
    the session's own canvas (reproduce-style commands pass a reference image
    instead while drawing proceeds on the session canvas).
    """
    policy = policy or session.policy
    if prompt_canvas is None:
        prompt_canvas = session.canvas.copy()

    prompt_words = [TAG_COMMAND_OPEN, *split_words(command_text), PLACEHOLDER_TOKEN,
                    TAG_COMMAND_CLOSE, TAG_RESPONSE_OPEN]
    prompt_ids = [vocab.id_of(w) for w in prompt_words]

    done_reason = None
    logits = None
    try:
        for word, tid in zip(prompt_words, prompt_ids):
            logits = stream.append(tid, prompt_canvas if word == PLACEHOLDER_TOKEN else None)
    except ContextOverflow:
        done_reason = "context-overflow"

    scan = scan_start(vocab)
    body_phase = scan.phase
    generated = 0
    strokes = 0

    while done_reason is None:
        if session.cancel_requested:
            done_reason = "cancelled"
            break
        if generated >= session.budgets.max_tokens:
            done_reason = "max-tokens"
            break
        tid = sample_token(logits, policy)
        generated += 1
        was_body = scan.phase == body_phase
        try:
            scan, event = stream_scan(scan, tid)
        except MalformedStream:
            # drop the malformed stroke, stay in the text flow, keep going
            scan = scan_start(vocab)
            event = None
            was_body = False
        if isinstance(event, ResponseEnd):
            done_reason = "response-end"
            break
        try:
            if isinstance(event, StrokeComplete):
                strokes += 1
                session.canvas = apply_stroke(session.canvas, event.stroke)
                session.strokes_applied.append(event.stroke)
                yield StrokeEmitted(event.stroke, session.canvas.copy())
                logits = stream.append(tid)
                if strokes >= session.budgets.max_strokes:
                    done_reason = "max-strokes"
                    break
                logits = stream.append(vocab.placeholder_id, session.canvas)
            else:
                if was_body and scan.phase == body_phase:
                    yield TextToken(tid, vocab.word_of(tid))
                logits = stream.append(tid)
        except ContextOverflow:
            done_reason = "context-overflow"
            break

    session.history.append((command_text, done_reason))
    yield Done(done_reason)


def classify(session: Session, command_text: str, stream: TokenStream, vocab: Vocab,
             prompt_canvas: Optional[Canvas] = None) -> str:
    """Greedy run of the command; returns the generated answer text."""
    words = []
    for ev in run_command(session, command_text, stream, vocab,
                          prompt_canvas=prompt_canvas, policy=Greedy()):
        if isinstance(ev, TextToken):
            words.append(ev.word)
    return join_words(words)
