"""Stroke-language codec.

Strokes, commands and responses travel as HTML-ish tagged text over a
single-space separated word alphabet.  Every tag, keyword, integer literal
and the comma are ordinary words, so a word-level vocabulary round-trips the
whole language exactly.  The stream scanner consumes one token id at a time
and reports completed strokes and the end of a response, which is what the
iterative draw-observe loop keys off.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, NamedTuple, Optional, Union

CANVAS_SIZE = 256

TAG_STROKE_OPEN = "<stroke>"
TAG_STROKE_CLOSE = "</stroke>"
TAG_COMMAND_OPEN = "<command>"
TAG_COMMAND_CLOSE = "</command>"
TAG_RESPONSE_OPEN = "<response>"
TAG_RESPONSE_CLOSE = "</response>"
PLACEHOLDER_TOKEN = "<image-placeholder>"
PAD_TOKEN = "<pad>"


class CodecError(ValueError):
    """Base class for all codec failures."""


class MalformedStroke(CodecError):
    pass


class MalformedTranscript(CodecError):
    pass


class UnknownWord(CodecError):
    def __init__(self, word: str):
        super().__init__(f"word not in vocabulary: {word!r}")
        self.word = word


class MalformedStream(CodecError):
    pass


class Color(NamedTuple):
    r: int
    g: int
    b: int


class Point(NamedTuple):
    x: int
    y: int


BLACK = Color(0, 0, 0)
WHITE = Color(255, 255, 255)


@dataclass(frozen=True)
class Stroke:
    """A colored, width-attributed polyline; the unit of generation."""

    color: Color
    width: int
    points: tuple[Point, ...]

    def __post_init__(self):
        for c in self.color:
            if not 0 <= c <= 255:
                raise ValueError(f"color channel out of range: {c}")
        if self.width not in (1, 2):
            raise ValueError(f"stroke width must be 1 or 2, got {self.width}")
        if not self.points:
            raise ValueError("stroke needs at least one point")
        for p in self.points:
            if not (0 <= p.x < CANVAS_SIZE and 0 <= p.y < CANVAS_SIZE):
                raise ValueError(f"point outside canvas: {p}")


def stroke(color: Color, width: int, points: Iterable[tuple[int, int]]) -> Stroke:
    """Convenience constructor accepting bare (x, y) pairs."""
    return Stroke(Color(*color), width, tuple(Point(x, y) for x, y in points))


def draw_stroke(points: Iterable[tuple[int, int]]) -> Stroke:
    """Black, 1 px wide: the drawing brush."""
    return stroke(BLACK, 1, points)


def erase_stroke(points: Iterable[tuple[int, int]]) -> Stroke:
    """White, 2 px wide: covers a draw_stroke over the same polyline exactly."""
    return stroke(WHITE, 2, points)


def serialize_stroke(s: Stroke) -> str:
    pts = ", ".join(f"{p.x} {p.y}" for p in s.points)
    return (
        f"{TAG_STROKE_OPEN} color {s.color.r} {s.color.g} {s.color.b} "
        f"width {s.width} points {pts} {TAG_STROKE_CLOSE}"
    )


def split_words(text: str) -> list[str]:
    """Whitespace split, with trailing commas peeled off as their own words.

    The surface form writes "x y, x y" (comma glued to the y coordinate) but
    the comma is its own vocabulary word, so "20," becomes ["20", ","].
    """
    words = []
    for raw in text.split():
        k = 0
        while k < len(raw) and raw.endswith(",", 0, len(raw) - k):
            k += 1
        if k == len(raw):  # nothing but commas
            words.extend("," * k)
        else:
            words.append(raw[: len(raw) - k])
            words.extend([","] * k)
    return words


def join_words(words: Iterable[str]) -> str:
    """Inverse of split_words: commas re-attach to the preceding word."""
    out: list[str] = []
    for w in words:
        if w == "," and out:
            out[-1] += ","
        else:
            out.append(w)
    return " ".join(out)


class _Cursor:
    """Token cursor with positional error reporting."""

    def __init__(self, words: list[str], err):
        self.words = words
        self.i = 0
        self._err = err

    def fail(self, msg: str):
        raise self._err(f"token {self.i}: {msg}")

    def next(self, what: str) -> str:
        if self.i >= len(self.words):
            raise self._err(f"token {self.i}: unexpected end of input, expected {what}")
        w = self.words[self.i]
        self.i += 1
        return w

    def expect(self, literal: str):
        w = self.next(repr(literal))
        if w != literal:
            self.i -= 1
            self.fail(f"expected {literal!r}, got {w!r}")

    def integer(self, what: str, lo: int, hi: int) -> int:
        w = self.next(what)
        try:
            v = int(w)
        except ValueError:
            self.i -= 1
            self.fail(f"expected integer for {what}, got {w!r}")
        if not lo <= v <= hi:
            self.i -= 1
            self.fail(f"{what} out of range [{lo},{hi}]: {v}")
        return v


def parse_stroke(text: str) -> Stroke:
    """Inverse of serialize_stroke; accepts any whitespace between words."""
    cur = _Cursor(split_words(text), MalformedStroke)
    cur.expect(TAG_STROKE_OPEN)
    cur.expect("color")
    r = cur.integer("red channel", 0, 255)
    g = cur.integer("green channel", 0, 255)
    b = cur.integer("blue channel", 0, 255)
    cur.expect("width")
    w = cur.integer("width", 1, 2)
    cur.expect("points")
    points = []
    while True:
        x = cur.integer("x coordinate", 0, CANVAS_SIZE - 1)
        y = cur.integer("y coordinate", 0, CANVAS_SIZE - 1)
        points.append(Point(x, y))
        sep = cur.next("',' or " + TAG_STROKE_CLOSE)
        if sep == TAG_STROKE_CLOSE:
            break
        if sep != ",":
            cur.i -= 1
            cur.fail(f"expected ',' or {TAG_STROKE_CLOSE}, got {sep!r}")
    if cur.i != len(cur.words):
        cur.fail(f"trailing content after {TAG_STROKE_CLOSE}")
    return Stroke(Color(r, g, b), w, tuple(points))


@dataclass(frozen=True)
class TextSegment:
    text: str


@dataclass(frozen=True)
class ImagePlaceholder:
    image_index: int


Segment = Union[TextSegment, ImagePlaceholder]


@dataclass(frozen=True)
class Transcript:
    """Interleaved text and image placeholders; the model's I/O sequence.

    `images[i]` is whatever canvas reference placeholder i is bound to
    (None when parsed back from text: the references live outside the text).
    """

    command: tuple[Segment, ...]
    response: tuple[Segment, ...]
    images: tuple[object, ...] = ()

    def __post_init__(self):
        indices = [
            seg.image_index
            for seg in (*self.command, *self.response)
            if isinstance(seg, ImagePlaceholder)
        ]
        if indices != list(range(len(self.images))):
            raise ValueError(
                f"placeholders {indices} do not enumerate images 0..{len(self.images) - 1}"
            )

    @property
    def placeholder_count(self) -> int:
        return len(self.images)


def _render_segments(segments: Iterable[Segment]) -> list[str]:
    out = []
    for seg in segments:
        if isinstance(seg, ImagePlaceholder):
            out.append(PLACEHOLDER_TOKEN)
        elif seg.text:
            out.append(seg.text)
    return out


def serialize_transcript(t: Transcript, close_response: bool = True) -> str:
    """Render to tagged text.

    With close_response=False the trailing </response> is omitted: that is
    the prompt shape handed to the model, which produces the rest itself.
    """
    words = [TAG_COMMAND_OPEN, *_render_segments(t.command), TAG_COMMAND_CLOSE,
             TAG_RESPONSE_OPEN, *_render_segments(t.response)]
    if close_response:
        words.append(TAG_RESPONSE_CLOSE)
    return " ".join(words)


_STRUCTURAL = {TAG_COMMAND_OPEN, TAG_COMMAND_CLOSE, TAG_RESPONSE_OPEN, TAG_RESPONSE_CLOSE}


def parse_transcript(text: str) -> Transcript:
    """Inverse of serialize_transcript up to whitespace normalization.

    Accepts both the closed form and the open prompt form (no </response>).
    Placeholder image references are not recoverable from text, so images
    comes back as a tuple of Nones of the right length.
    """
    words = split_words(text)
    if not words or words[0] != TAG_COMMAND_OPEN:
        raise MalformedTranscript(f"transcript must start with {TAG_COMMAND_OPEN}")

    image_count = 0

    def walk(start: int, closer: str, allow_open_end: bool):
        nonlocal image_count
        segments: list[Segment] = []
        run: list[str] = []
        i = start
        while i < len(words):
            w = words[i]
            if w == closer:
                if run:
                    segments.append(TextSegment(" ".join(run)))
                return tuple(segments), i + 1
            if w in _STRUCTURAL:
                raise MalformedTranscript(f"token {i}: unexpected {w!r} before {closer!r}")
            if w == PLACEHOLDER_TOKEN:
                if run:
                    segments.append(TextSegment(" ".join(run)))
                    run = []
                segments.append(ImagePlaceholder(image_count))
                image_count += 1
            else:
                run.append(w)
            i += 1
        if not allow_open_end:
            raise MalformedTranscript(f"missing {closer!r}")
        if run:
            segments.append(TextSegment(" ".join(run)))
        return tuple(segments), i

    command, i = walk(1, TAG_COMMAND_CLOSE, allow_open_end=False)
    if i >= len(words) or words[i] != TAG_RESPONSE_OPEN:
        raise MalformedTranscript(f"token {i}: expected {TAG_RESPONSE_OPEN}")
    response, i = walk(i + 1, TAG_RESPONSE_CLOSE, allow_open_end=True)
    if i != len(words):
        raise MalformedTranscript(f"token {i}: trailing content after {TAG_RESPONSE_CLOSE}")
    return Transcript(command, response, (None,) * image_count)


# Words every vocabulary carries regardless of corpus: reserved ids first,
# then the grammar alphabet, so token ids for the stroke language never
# depend on which dataset was scanned.
BASE_TOKENS: tuple[str, ...] = (
    PAD_TOKEN,
    PLACEHOLDER_TOKEN,
    TAG_COMMAND_OPEN,
    TAG_COMMAND_CLOSE,
    TAG_RESPONSE_OPEN,
    TAG_RESPONSE_CLOSE,
    TAG_STROKE_OPEN,
    TAG_STROKE_CLOSE,
    "color",
    "width",
    "points",
    ",",
    *(str(i) for i in range(256)),
)


@dataclass(frozen=True)
class Vocab:
    token_to_id: dict
    id_to_token: tuple[str, ...]

    pad_id: int = 0
    placeholder_id: int = 1

    def __len__(self) -> int:
        return len(self.id_to_token)

    def id_of(self, word: str) -> int:
        try:
            return self.token_to_id[word]
        except KeyError:
            raise UnknownWord(word) from None

    def word_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self.id_to_token):
            raise CodecError(f"token id out of range: {token_id}")
        return self.id_to_token[token_id]

    @property
    def response_end_id(self) -> int:
        return self.token_to_id[TAG_RESPONSE_CLOSE]


def build_vocab(corpus: Iterable[str]) -> Vocab:
    """Word vocabulary: base alphabet plus corpus words by first occurrence."""
    id_to_token = list(BASE_TOKENS)
    token_to_id = {w: i for i, w in enumerate(id_to_token)}
    for text in corpus:
        for word in split_words(text):
            if word not in token_to_id:
                token_to_id[word] = len(id_to_token)
                id_to_token.append(word)
    return Vocab(token_to_id, tuple(id_to_token))


def tokenize(text: str, vocab: Vocab) -> list[int]:
    return [vocab.id_of(w) for w in split_words(text)]


def detokenize(ids: Iterable[int], vocab: Vocab) -> str:
    return join_words(vocab.word_of(i) for i in ids)


# --- incremental scanner -------------------------------------------------
#
# Phases walk the stroke grammar; BODY is the response top level where any
# word is plain text.  Grammar violations are only possible once a stroke
# has been opened.

_BODY = 0
_COLOR_KW = 1
_R = 2
_G = 3
_B = 4
_WIDTH_KW = 5
_WIDTH_VAL = 6
_POINTS_KW = 7
_X = 8
_Y = 9
_SEP = 10


@dataclass(frozen=True)
class StrokeComplete:
    stroke: Stroke


@dataclass(frozen=True)
class ResponseEnd:
    pass


ScanEvent = Optional[Union[StrokeComplete, ResponseEnd]]


@dataclass(frozen=True)
class ScanState:
    vocab: Vocab
    phase: int = _BODY
    r: int = 0
    g: int = 0
    b: int = 0
    width: int = 0
    x: int = 0
    points: tuple[Point, ...] = ()


def scan_start(vocab: Vocab) -> ScanState:
    return ScanState(vocab)


def _scan_int(word: str, what: str, lo: int, hi: int) -> int:
    try:
        v = int(word)
    except ValueError:
        raise MalformedStream(f"expected integer for {what}, got {word!r}") from None
    if not lo <= v <= hi:
        raise MalformedStream(f"{what} out of range [{lo},{hi}]: {v}")
    return v


def stream_scan(state: ScanState, token_id: int) -> tuple[ScanState, ScanEvent]:
    """Advance the scanner by one token; returns (new state, event).

    Pure: the input state is never mutated, so a caller can fork or replay.
    Raises MalformedStream when a token breaks the grammar mid-stroke.
    """
    word = state.vocab.word_of(token_id)
    phase = state.phase

    if phase == _BODY:
        if word == TAG_STROKE_OPEN:
            return replace(state, phase=_COLOR_KW, points=()), None
        if word == TAG_RESPONSE_CLOSE:
            return state, ResponseEnd()
        return state, None

    if phase == _COLOR_KW:
        if word != "color":
            raise MalformedStream(f"expected 'color' after {TAG_STROKE_OPEN}, got {word!r}")
        return replace(state, phase=_R), None
    if phase == _R:
        return replace(state, phase=_G, r=_scan_int(word, "red channel", 0, 255)), None
    if phase == _G:
        return replace(state, phase=_B, g=_scan_int(word, "green channel", 0, 255)), None
    if phase == _B:
        return replace(state, phase=_WIDTH_KW, b=_scan_int(word, "blue channel", 0, 255)), None
    if phase == _WIDTH_KW:
        if word != "width":
            raise MalformedStream(f"expected 'width', got {word!r}")
        return replace(state, phase=_WIDTH_VAL), None
    if phase == _WIDTH_VAL:
        return replace(state, phase=_POINTS_KW, width=_scan_int(word, "width", 1, 2)), None
    if phase == _POINTS_KW:
        if word != "points":
            raise MalformedStream(f"expected 'points', got {word!r}")
        return replace(state, phase=_X), None
    if phase == _X:
        return replace(state, phase=_Y, x=_scan_int(word, "x coordinate", 0, CANVAS_SIZE - 1)), None
    if phase == _Y:
        y = _scan_int(word, "y coordinate", 0, CANVAS_SIZE - 1)
        return replace(state, phase=_SEP, points=(*state.points, Point(state.x, y))), None
    if phase == _SEP:
        if word == ",":
            return replace(state, phase=_X), None
        if word == TAG_STROKE_CLOSE:
            done = Stroke(Color(state.r, state.g, state.b), state.width, state.points)
            return replace(state, phase=_BODY, points=()), StrokeComplete(done)
        raise MalformedStream(f"expected ',' or {TAG_STROKE_CLOSE}, got {word!r}")

    raise AssertionError(f"unreachable scanner phase {phase}")
