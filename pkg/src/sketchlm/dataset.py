"""Multi-object sketch dataset synthesis.

Scenes are composed either from a relationship record (two objects placed by
subject/object boxes) or by random low-overlap placement of 1-4 objects with
location tags.  Each scene plus a task yields one training sample: command
text instantiated from the task's template (optionally paraphrased), the
strokes that render the prompt canvas, and the response strokes or answer
text.  Canvases are never stored; samples carry stroke provenance and replay
on demand, which keeps shards small and byte-deterministic.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .canvas import (
    BBox,
    Canvas,
    apply_stroke,
    apply_strokes,
    blank_canvas,
    render_strokes,
    scale_strokes_to_bbox,
)
from .codec import CANVAS_SIZE, Color, Point, Stroke, draw_stroke, erase_stroke
from .templates import (
    LOCATION_TAGS,
    PARAPHRASES,
    TEMPLATES,
    TaskKind,
    article_for,
    match_template,
    objects_list,
    relationship_phrase,
)


class DatasetError(ValueError):
    pass


class ParseError(DatasetError):
    def __init__(self, path, line_no: int, why: str):
        super().__init__(f"{path}:{line_no}: {why}")
        self.line_no = line_no


class UnknownClass(DatasetError):
    pass


class MissingClass(DatasetError):
    pass


class IncompatibleScene(DatasetError):
    pass


@dataclass(frozen=True)
class ObjectSource:
    """One drawable object in source coordinates (0..255 after ingest)."""

    class_name: str
    article: str
    strokes: tuple[Stroke, ...]


@dataclass(frozen=True)
class RelationshipRecord:
    """Subject-predicate-object with boxes in source-image coordinates."""

    subject: str
    predicate: str
    object: str
    subject_box: tuple[int, int, int, int]  # x, y, w, h
    object_box: tuple[int, int, int, int]
    source_w: int
    source_h: int


@dataclass(frozen=True)
class SceneObject:
    class_name: str
    article: str
    bbox: BBox
    strokes: tuple[Stroke, ...]


@dataclass(frozen=True)
class Scene:
    objects: tuple[SceneObject, ...]
    relationship: Optional[tuple[int, str, int]] = None  # subject idx, predicate, object idx

    def __post_init__(self):
        if not 1 <= len(self.objects) <= 4:
            raise ValueError(f"scene needs 1-4 objects, got {len(self.objects)}")
        if self.relationship is not None:
            s, _, o = self.relationship
            if s == o or not (0 <= s < len(self.objects) and 0 <= o < len(self.objects)):
                raise ValueError(f"bad relationship indices {self.relationship}")


# --- procedural objects ---------------------------------------------------

PROCEDURAL_CLASSES = ("circle", "square", "triangle", "star", "house", "tree", "cup", "ladder")


def _pt(x: float, y: float) -> Point:
    v = lambda t: min(max(int(math.floor(t + 0.5)), 0), CANVAS_SIZE - 1)
    return Point(v(x), v(y))


def _jit(rng, lo, hi) -> float:
    return float(rng.uniform(lo, hi))


def _ring(rng, cx, cy, radii, start=-math.pi / 2):
    n = len(radii)
    pts = [
        _pt(cx + r * math.cos(start + 2 * math.pi * i / n), cy + r * math.sin(start + 2 * math.pi * i / n))
        for i, r in enumerate(radii)
    ]
    return tuple(pts) + (pts[0],)


def procedural_object(class_name: str, rng: np.random.Generator) -> ObjectSource:
    """A deterministic-for-seed polyline object drawn in a 256x256 frame."""
    j = lambda a=8: _jit(rng, -a, a)
    if class_name == "circle":
        cx, cy = 128 + j(), 128 + j()
        base = 88 + j(12)
        strokes = (draw_stroke(_ring(rng, cx, cy, [base * (1 + _jit(rng, -0.05, 0.05)) for _ in range(12)])),)
    elif class_name == "square":
        l, t, r, b = 40 + j(), 40 + j(), 216 + j(), 216 + j()
        strokes = (draw_stroke([_pt(l, t), _pt(r, t), _pt(r, b), _pt(l, b), _pt(l, t)]),)
    elif class_name == "triangle":
        apex = _pt(128 + j(), 36 + j())
        right = _pt(222 + j(), 212 + j())
        left = _pt(34 + j(), 212 + j())
        strokes = (draw_stroke([apex, right, left, apex]),)
    elif class_name == "star":
        cx, cy = 128 + j(), 132 + j()
        outer, inner = 104 + j(6), 42 + j(5)
        radii = [outer if i % 2 == 0 else inner for i in range(10)]
        strokes = (draw_stroke(_ring(rng, cx, cy, radii)),)
    elif class_name == "house":
        l, t, r, b = 48 + j(), 110 + j(), 208 + j(), 226 + j()
        apex = _pt((l + r) / 2 + j(), 30 + j())
        body = draw_stroke([_pt(l, t), _pt(r, t), _pt(r, b), _pt(l, b), _pt(l, t)])
        roof = draw_stroke([_pt(l, t), apex, _pt(r, t)])
        dl = (l + r) / 2 - 18 + j(4)
        door = draw_stroke([_pt(dl, b), _pt(dl, b - 52 + j(4)), _pt(dl + 36, b - 52 + j(4)), _pt(dl + 36, b)])
        strokes = (body, roof, door)
    elif class_name == "tree":
        cx = 128 + j()
        trunk = draw_stroke([_pt(cx - 14, 226), _pt(cx - 14, 130 + j(6)), _pt(cx + 14, 130 + j(6)), _pt(cx + 14, 226)])
        crown = draw_stroke(_ring(rng, cx, 92 + j(6), [64 * (1 + _jit(rng, -0.08, 0.08)) for _ in range(10)]))
        strokes = (trunk, crown)
    elif class_name == "cup":
        l, t, r, b = 64 + j(), 64 + j(), 176 + j(), 210 + j()
        body = draw_stroke([_pt(l, t), _pt(l + 14, b), _pt(r - 14, b), _pt(r, t), _pt(l, t)])
        hy = (t + b) / 2 + j(4)
        handle = draw_stroke([_pt(r - 6, hy - 28), _pt(r + 34, hy - 18), _pt(r + 34, hy + 18), _pt(r - 6, hy + 28)])
        strokes = (body, handle)
    elif class_name == "ladder":
        l, r, t, b = 88 + j(), 168 + j(), 24 + j(), 232 + j()
        rails = [draw_stroke([_pt(l, t), _pt(l, b)]), draw_stroke([_pt(r, t), _pt(r, b)])]
        rungs = [
            draw_stroke([_pt(l, t + (b - t) * f + j(4)), _pt(r, t + (b - t) * f + j(4))])
            for f in (0.25, 0.5, 0.75)
        ]
        strokes = tuple(rails + rungs)
    else:
        raise UnknownClass(f"no procedural recipe for {class_name!r}")
    return ObjectSource(class_name, article_for(class_name), strokes)


# --- geometry helpers -----------------------------------------------------


def rdp_simplify(s: Stroke, epsilon: float) -> Stroke:
    """Ramer-Douglas-Peucker point reduction; endpoints always survive."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if epsilon == 0 or len(s.points) <= 2:
        return s

    pts = s.points

    def seg_dist(p: Point, a: Point, b: Point) -> float:
        if a == b:
            return math.hypot(p.x - a.x, p.y - a.y)
        num = abs((b.x - a.x) * (a.y - p.y) - (a.x - p.x) * (b.y - a.y))
        return num / math.hypot(b.x - a.x, b.y - a.y)

    keep = [False] * len(pts)
    keep[0] = keep[-1] = True
    stack = [(0, len(pts) - 1)]
    while stack:
        lo, hi = stack.pop()
        dmax, idx = 0.0, -1
        for i in range(lo + 1, hi):
            d = seg_dist(pts[i], pts[lo], pts[hi])
            if d > dmax:
                dmax, idx = d, i
        if dmax > epsilon:
            keep[idx] = True
            stack.append((lo, idx))
            stack.append((idx, hi))
    return replace(s, points=tuple(p for p, k in zip(pts, keep) if k))


def location_tag(b: BBox) -> str:
    """Classify the box center on a 3x3 grid with thirds at 85 and 171."""
    cx, cy = b.center
    col = 0 if cx < 85 else (1 if cx < 171 else 2)
    row = 0 if cy < 85 else (1 if cy < 171 else 2)
    grid = (
        ("at the top left corner of", "at the top of", "at the top right corner of"),
        ("at the left side of", "at the center of", "at the right side of"),
        ("at the bottom left corner of", "at the bottom of", "at the bottom right corner of"),
    )
    return grid[row][col]


class ObjectPool:
    """Per-class bag of drawable sources."""

    def __init__(self, sources: Iterable[ObjectSource]):
        self.by_class: dict[str, list[ObjectSource]] = {}
        for src in sources:
            self.by_class.setdefault(src.class_name, []).append(src)

    @property
    def classes(self) -> tuple[str, ...]:
        return tuple(self.by_class)

    def pick(self, class_name: str, rng: np.random.Generator) -> ObjectSource:
        try:
            bag = self.by_class[class_name]
        except KeyError:
            raise MissingClass(f"no sources for class {class_name!r}") from None
        return bag[int(rng.integers(0, len(bag)))]


def _fit_span(a0: float, a1: float) -> tuple[int, int]:
    """Clamp a perturbed [a0, a1] span into the canvas with a minimum extent."""
    lo, hi = sorted((a0, a1))
    lo = min(max(lo, 0.0), CANVAS_SIZE - 1)
    hi = min(max(hi, 0.0), CANVAS_SIZE - 1)
    if hi - lo < 7:
        hi = min(lo + 7, CANVAS_SIZE - 1)
        lo = hi - 7
    return int(round(lo)), int(round(hi))


def compose_relationship_scene(
    rec: RelationshipRecord,
    pool: ObjectPool,
    rng: np.random.Generator,
    perturb: float = 0.05,
) -> Scene:
    """Scale the record's boxes onto the canvas, jitter them, place drawings."""
    fx = CANVAS_SIZE / rec.source_w
    fy = CANVAS_SIZE / rec.source_h
    amp = perturb * CANVAS_SIZE
    objs = []
    for name, (bx, by, bw, bh) in (
        (rec.subject, rec.subject_box),
        (rec.object, rec.object_box),
    ):
        x0 = bx * fx + _jit(rng, -amp, amp)
        x1 = (bx + bw) * fx + _jit(rng, -amp, amp)
        y0 = by * fy + _jit(rng, -amp, amp)
        y1 = (by + bh) * fy + _jit(rng, -amp, amp)
        xa, xb = _fit_span(x0, x1)
        ya, yb = _fit_span(y0, y1)
        box = BBox(xa, ya, xb - xa + 1, yb - ya + 1)
        src = pool.pick(name, rng)
        objs.append(SceneObject(name, src.article, box, scale_strokes_to_bbox(src.strokes, box)))
    return Scene(tuple(objs), relationship=(0, rec.predicate, 1))


def compose_location_scene(pool: ObjectPool, n: int, rng: np.random.Generator) -> Scene:
    """n objects with 64-128 px boxes, rejection-sampled to pairwise IoU < 0.1.

    Objects come back in reading order (top-left to bottom-right), so "the
    objects of this scene" is a deterministic function of the picture, not of
    sampling order.
    """
    if not 1 <= n <= 4:
        raise ValueError(f"n must be 1..4, got {n}")
    placed: list[BBox] = []
    objs: list[SceneObject] = []
    classes = pool.classes
    for _ in range(n):
        name = classes[int(rng.integers(0, len(classes)))]
        best: tuple[float, BBox] | None = None
        for _attempt in range(50):
            w = int(rng.integers(64, 129))
            h = int(rng.integers(64, 129))
            x = int(rng.integers(0, CANVAS_SIZE - w + 1))
            y = int(rng.integers(0, CANVAS_SIZE - h + 1))
            box = BBox(x, y, w, h)
            worst = max((box.iou(p) for p in placed), default=0.0)
            if best is None or worst < best[0]:
                best = (worst, box)
            if worst < 0.1:
                break
        box = best[1]
        placed.append(box)
        src = pool.pick(name, rng)
        objs.append(SceneObject(name, src.article, box, scale_strokes_to_bbox(src.strokes, box)))
    objs.sort(key=lambda o: (o.bbox.y, o.bbox.x))
    return Scene(tuple(objs))


# --- prompts and samples --------------------------------------------------


@dataclass(frozen=True)
class PromptScenario:
    key: str
    target: Optional[int]  # object index the command refers to, if any
    location: Optional[str]


def _unique_tag_targets(scene: Scene) -> tuple[list[int], list[str]]:
    tags = [location_tag(o.bbox) for o in scene.objects]
    return [i for i, t in enumerate(tags) if tags.count(t) == 1], tags


def pick_scenario(task: TaskKind, scene: Scene, rng: np.random.Generator) -> PromptScenario:
    n = len(scene.objects)
    coin = bool(rng.random() < 0.5)
    unique, tags = _unique_tag_targets(scene)

    if task is TaskKind.GENERATE_ALL:
        if n == 1:
            if coin:
                return PromptScenario("single-location", 0, tags[0])
            return PromptScenario("single-plain", 0, None)
        if scene.relationship is not None:
            return PromptScenario("multi-relationship", None, None)
        return PromptScenario("multi-plain", None, None)

    if task is TaskKind.GENERATE_PARTIAL:
        if n == 1:
            return PromptScenario("single", 0, None)
        if coin and unique:
            t = unique[int(rng.integers(0, len(unique)))]
            return PromptScenario("multi-location", t, tags[t])
        return PromptScenario("multi-plain", int(rng.integers(0, n)), None)

    if task is TaskKind.REMOVE_ALL:
        if n == 1:
            return PromptScenario("single", 0, None)
        return PromptScenario("multi", None, None)

    if task is TaskKind.REMOVE_PARTIAL:
        if n < 2:
            raise IncompatibleScene("remove-partial needs at least 2 objects")
        if coin and unique:
            t = unique[int(rng.integers(0, len(unique)))]
            return PromptScenario("multi-location", t, tags[t])
        names = [o.class_name for o in scene.objects]
        solo = [i for i, nm in enumerate(names) if names.count(nm) == 1]
        pickable = solo or list(range(n))
        return PromptScenario("multi-plain", pickable[int(rng.integers(0, len(pickable)))], None)

    if task is TaskKind.REPRODUCE:
        return PromptScenario("all", None, None)

    if task is TaskKind.CLASSIFICATION:
        if n == 1:
            return PromptScenario("single", 0, None)
        if coin and unique:
            t = unique[int(rng.integers(0, len(unique)))]
            return PromptScenario("multi-location", t, tags[t])
        return PromptScenario("multi-plain", None, None)

    raise AssertionError(task)


def _slots(scene: Scene, scenario: PromptScenario) -> dict:
    slots: dict[str, str] = {}
    if scenario.target is not None:
        obj = scene.objects[scenario.target]
        slots["article"] = obj.article
        slots["name"] = obj.class_name
    if scenario.location is not None:
        slots["location"] = scenario.location
    if scene.relationship is not None:
        s, pred, o = scene.relationship
        slots["relationship"] = relationship_phrase(
            scene.objects[s].class_name, pred, scene.objects[o].class_name
        )
    slots["objects"] = objects_list([o.class_name for o in scene.objects])
    return slots


def default_prompt(
    task: TaskKind,
    scene: Scene,
    rng: Optional[np.random.Generator] = None,
    scenario: Optional[PromptScenario] = None,
) -> str:
    """Instantiate the task's default template for this scene."""
    if scenario is None:
        if rng is None:
            raise ValueError("need an rng when no scenario is given")
        scenario = pick_scenario(task, scene, rng)
    template = TEMPLATES[task][scenario.key]
    return template.format_map(_slots(scene, scenario))


def paraphrase(prompt: str, task: TaskKind, rng: np.random.Generator) -> str:
    """Swap a default prompt for one of its bundled rephrasings (or keep it)."""
    hit = match_template(prompt, task)
    if hit is None:
        raise DatasetError(f"not a known template instantiation: {prompt!r}")
    scenario, slots = hit
    choices = (TEMPLATES[task][scenario], *PARAPHRASES[(task, scenario)])
    return choices[int(rng.integers(0, len(choices)))].format_map(slots)


@dataclass(frozen=True)
class Sample:
    """One training record: command, prompt strokes, response, provenance.

    Canvases replay from strokes on demand; nothing rasterized is stored.
    """

    task: TaskKind
    command_text: str
    response_text: str
    prompt_strokes: tuple[Stroke, ...]
    response_strokes: tuple[Stroke, ...]
    start_on_blank: bool
    seed: int

    def prompt_canvas(self) -> Canvas:
        return render_strokes(self.prompt_strokes)

    def start_canvas(self) -> Canvas:
        """The canvas generation begins on (blank for reproduce)."""
        return blank_canvas() if self.start_on_blank else self.prompt_canvas()

    def gt_canvas(self) -> Canvas:
        return apply_strokes(self.start_canvas(), self.response_strokes)

    def feedback_canvases(self) -> list[Canvas]:
        """Canvas state after each response stroke, in order."""
        out = []
        c = self.start_canvas()
        for s in self.response_strokes:
            c = apply_stroke(c, s)
            out.append(c)
        return out


def _concat_strokes(scene: Scene, order: Iterable[int]) -> tuple[Stroke, ...]:
    return tuple(s for i in order for s in scene.objects[i].strokes)


def derive_sample(
    task: TaskKind,
    scene: Scene,
    rng: np.random.Generator,
    use_paraphrase: bool = True,
    seed: int = 0,
) -> Sample:
    """Turn a scene plus task into a full supervision record."""
    scenario = pick_scenario(task, scene, rng)
    command = default_prompt(task, scene, scenario=scenario)
    if use_paraphrase:
        command = paraphrase(command, task, rng)

    n = len(scene.objects)
    scene_order = range(n)
    perm = [int(i) for i in rng.permutation(n)]
    response_text = ""
    start_on_blank = False

    if task is TaskKind.GENERATE_ALL:
        prompt_strokes: tuple[Stroke, ...] = ()
        response_strokes = _concat_strokes(scene, perm)
    elif task is TaskKind.GENERATE_PARTIAL:
        if n == 1:
            strokes = scene.objects[0].strokes
            shown = math.ceil(len(strokes) / 2)
            prompt_strokes = strokes[:shown]
            response_strokes = strokes[shown:]
        else:
            t = scenario.target
            prompt_strokes = _concat_strokes(scene, (i for i in scene_order if i != t))
            response_strokes = scene.objects[t].strokes
    elif task is TaskKind.REMOVE_ALL:
        # erase in reading order: derivable from the image, unlike a permutation
        prompt_strokes = _concat_strokes(scene, scene_order)
        response_strokes = tuple(
            erase_stroke(s.points) for i in scene_order for s in scene.objects[i].strokes
        )
    elif task is TaskKind.REMOVE_PARTIAL:
        prompt_strokes = _concat_strokes(scene, scene_order)
        response_strokes = tuple(
            erase_stroke(s.points) for s in scene.objects[scenario.target].strokes
        )
    elif task is TaskKind.REPRODUCE:
        prompt_strokes = _concat_strokes(scene, scene_order)
        response_strokes = _concat_strokes(scene, scene_order)
        start_on_blank = True
    elif task is TaskKind.CLASSIFICATION:
        prompt_strokes = _concat_strokes(scene, scene_order)
        response_strokes = ()
        if scenario.key == "single":
            obj = scene.objects[0]
            response_text = f"{obj.article} {obj.class_name}"
        elif scenario.key == "multi-location":
            obj = scene.objects[scenario.target]
            response_text = f"{obj.article} {obj.class_name}"
        else:
            response_text = objects_list([o.class_name for o in scene.objects])
    else:
        raise AssertionError(task)

    return Sample(
        task=task,
        command_text=command,
        response_text=response_text,
        prompt_strokes=prompt_strokes,
        response_strokes=response_strokes,
        start_on_blank=start_on_blank,
        seed=seed,
    )


# --- ingest ---------------------------------------------------------------


def _clamp_coord(v) -> int:
    return min(max(int(v), 0), CANVAS_SIZE - 1)


def ingest_quickdraw(path) -> list[ObjectSource]:
    """Read an NDJSON drawing file: one object per line, strokes as [xs, ys]."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                name = rec["word"]
                strokes = []
                for xs, ys in rec["drawing"]:
                    if len(xs) != len(ys):
                        raise ValueError("x/y length mismatch")
                    if not xs:
                        continue
                    pts = [Point(_clamp_coord(x), _clamp_coord(y)) for x, y in zip(xs, ys)]
                    strokes.append(draw_stroke(pts))
                if not strokes:
                    raise ValueError("drawing has no points")
            except (KeyError, ValueError, TypeError) as e:
                raise ParseError(path, line_no, str(e)) from None
            out.append(ObjectSource(str(name), article_for(str(name)), tuple(strokes)))
    return out


def load_relationships(path=None) -> list[RelationshipRecord]:
    """Relationship table (CSV); defaults to the bundled one."""
    if path is None:
        ref = resources.files("sketchlm.data").joinpath("relationships.csv")
        text = ref.read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    out = []
    reader = csv.DictReader(text.splitlines())
    for line_no, row in enumerate(reader, start=2):
        try:
            out.append(
                RelationshipRecord(
                    subject=row["subject"],
                    predicate=row["predicate"],
                    object=row["object"],
                    subject_box=(int(row["sx"]), int(row["sy"]), int(row["sw"]), int(row["sh"])),
                    object_box=(int(row["ox"]), int(row["oy"]), int(row["ow"]), int(row["oh"])),
                    source_w=int(row["W"]),
                    source_h=int(row["H"]),
                )
            )
        except (KeyError, ValueError, TypeError) as e:
            raise ParseError(path or "relationships.csv", line_no, str(e)) from None
    return out


# --- shards and builds ----------------------------------------------------


def _stroke_to_json(s: Stroke) -> list:
    coords = [c for p in s.points for c in (p.x, p.y)]
    return [s.color.r, s.color.g, s.color.b, s.width, coords]


def _stroke_from_json(v) -> Stroke:
    r, g, b, w, coords = v
    pts = tuple(Point(coords[i], coords[i + 1]) for i in range(0, len(coords), 2))
    return Stroke(Color(r, g, b), w, pts)


def write_shard(samples: Iterable[Sample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            rec = {
                "task": s.task.value,
                "command": s.command_text,
                "response_text": s.response_text,
                "start_on_blank": s.start_on_blank,
                "seed": s.seed,
                "prompt_strokes": [_stroke_to_json(st) for st in s.prompt_strokes],
                "response_strokes": [_stroke_to_json(st) for st in s.response_strokes],
            }
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def read_shard(path) -> list[Sample]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                out.append(
                    Sample(
                        task=TaskKind(rec["task"]),
                        command_text=rec["command"],
                        response_text=rec["response_text"],
                        prompt_strokes=tuple(_stroke_from_json(v) for v in rec["prompt_strokes"]),
                        response_strokes=tuple(_stroke_from_json(v) for v in rec["response_strokes"]),
                        start_on_blank=rec["start_on_blank"],
                        seed=rec["seed"],
                    )
                )
            except (KeyError, ValueError, TypeError) as e:
                raise ParseError(path, line_no, str(e)) from None
    return out


ALL_TASKS = tuple(TaskKind)


@dataclass(frozen=True)
class BuildConfig:
    classes: tuple[str, ...] = PROCEDURAL_CLASSES
    samples: int = 1000
    seed: int = 0
    tasks: tuple[TaskKind, ...] = ALL_TASKS
    relationship_fraction: float = 0.15
    max_objects: int = 4
    pool_per_class: int = 32
    rdp_epsilon: float = 2.0
    use_paraphrase: bool = True
    quickdraw_paths: tuple[str, ...] = ()

    def __post_init__(self):
        if not 1 <= self.max_objects <= 4:
            raise ValueError("max_objects must be 1..4")
        if TaskKind.REMOVE_PARTIAL in self.tasks and self.max_objects < 2:
            raise ValueError("remove-partial needs max_objects >= 2")
        if not self.classes:
            raise ValueError("need at least one class")


def build_pool(cfg: BuildConfig) -> ObjectPool:
    if cfg.quickdraw_paths:
        sources = []
        for p in cfg.quickdraw_paths:
            sources.extend(ingest_quickdraw(p))
        sources = [s for s in sources if s.class_name in cfg.classes]
        if cfg.rdp_epsilon > 0:
            sources = [
                replace(s, strokes=tuple(rdp_simplify(st, cfg.rdp_epsilon) for st in s.strokes))
                for s in sources
            ]
        if not sources:
            raise MissingClass(f"no drawings for classes {cfg.classes} in {cfg.quickdraw_paths}")
        return ObjectPool(sources)
    sources = []
    for ci, name in enumerate(cfg.classes):
        if name not in PROCEDURAL_CLASSES:
            raise UnknownClass(f"{name!r} is not a procedural class and no NDJSON was given")
        for k in range(cfg.pool_per_class):
            sources.append(procedural_object(name, np.random.default_rng((cfg.seed, 7, ci, k))))
    return ObjectPool(sources)


def build_sample(index: int, cfg: BuildConfig, pool: ObjectPool, relationships) -> Sample:
    rng = np.random.default_rng((cfg.seed, index))
    task = cfg.tasks[int(rng.integers(0, len(cfg.tasks)))]
    use_rel = bool(relationships) and float(rng.random()) < cfg.relationship_fraction
    if use_rel:
        rec = relationships[int(rng.integers(0, len(relationships)))]
        scene = compose_relationship_scene(rec, pool, rng)
    else:
        lo = 2 if task is TaskKind.REMOVE_PARTIAL else 1
        n = int(rng.integers(lo, cfg.max_objects + 1))
        scene = compose_location_scene(pool, n, rng)
    return derive_sample(task, scene, rng, use_paraphrase=cfg.use_paraphrase, seed=index)


def build_dataset(cfg: BuildConfig) -> list[Sample]:
    pool = build_pool(cfg)
    relationships = []
    if cfg.relationship_fraction > 0:
        relationships = [
            r
            for r in load_relationships()
            if r.subject in cfg.classes and r.object in cfg.classes
        ]
    return [build_sample(i, cfg, pool, relationships) for i in range(cfg.samples)]


def write_dataset(cfg: BuildConfig, out_dir) -> dict:
    """Build, write samples.jsonl plus manifest.json, return the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    samples = build_dataset(cfg)
    shard = out / "samples.jsonl"
    write_shard(samples, shard)
    counts: dict[str, int] = {}
    for s in samples:
        counts[s.task.value] = counts.get(s.task.value, 0) + 1
    manifest = {
        "classes": list(cfg.classes),
        "samples": cfg.samples,
        "seed": cfg.seed,
        "tasks": [t.value for t in cfg.tasks],
        "task_counts": dict(sorted(counts.items())),
        "relationship_fraction": cfg.relationship_fraction,
        "max_objects": cfg.max_objects,
        "shards": [shard.name],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest
