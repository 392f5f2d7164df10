"""Task vocabulary and command-text templates.

Each task has one default template per scenario; a scenario captures object
count, relationship presence, and whether a location tag is used.  The
paraphrase table holds hand-written rephrasings of every template so the
same request appears in several surface forms; slots survive rephrasing
untouched, which keeps the substituted class/location text intact.
"""

from __future__ import annotations

import enum
import re


class TaskKind(enum.Enum):
    GENERATE_ALL = "generate-all"
    GENERATE_PARTIAL = "generate-partial"
    REMOVE_ALL = "remove-all"
    REMOVE_PARTIAL = "remove-partial"
    REPRODUCE = "reproduce"
    CLASSIFICATION = "classification"


LOCATION_TAGS: tuple[str, ...] = (
    "at the top of",
    "at the bottom of",
    "at the center of",
    "at the right side of",
    "at the left side of",
    "at the top right corner of",
    "at the top left corner of",
    "at the bottom right corner of",
    "at the bottom left corner of",
)

ARTICLES = ("a", "an", "the")


def article_for(name: str) -> str:
    return "an" if name[:1].lower() in "aeiou" else "a"


TEMPLATES: dict[TaskKind, dict[str, str]] = {
    TaskKind.GENERATE_ALL: {
        "single-plain": "Draw a sketch of {article} {name}",
        "single-location": "Draw {article} {name} {location} this sketch",
        "multi-relationship": "Draw a sketch of {relationship}",
        "multi-plain": "Draw a sketch of {objects}",
    },
    TaskKind.GENERATE_PARTIAL: {
        "single": "Complete this sketch as {article} {name}",
        "multi-location": "Add {article} {name} {location} this sketch",
        "multi-plain": "Add {article} {name} to this sketch",
    },
    TaskKind.REMOVE_ALL: {
        "single": "Remove {article} {name} from this sketch",
        "multi": "Remove all the objects from this sketch",
    },
    TaskKind.REMOVE_PARTIAL: {
        "multi-location": "Remove {article} {name} {location} this sketch",
        "multi-plain": "Remove {article} {name} from this sketch",
    },
    TaskKind.REPRODUCE: {
        "all": "Reproduce this sketch",
    },
    TaskKind.CLASSIFICATION: {
        "single": "What is the class of this sketch",
        "multi-location": "What is the object {location} this sketch",
        "multi-plain": "What are the objects in this sketch",
    },
}

# Rephrasings per (task, scenario); instantiation picks the default template
# (index 0) or one of these, uniformly at random.
PARAPHRASES: dict[tuple[TaskKind, str], tuple[str, ...]] = {
    (TaskKind.GENERATE_ALL, "single-plain"): (
        "Sketch {article} {name}",
        "Please draw {article} {name}",
        "Can you draw a sketch of {article} {name}",
    ),
    (TaskKind.GENERATE_ALL, "single-location"): (
        "Sketch {article} {name} {location} this canvas",
        "Please draw {article} {name} {location} this sketch",
        "Put {article} {name} {location} this sketch",
    ),
    (TaskKind.GENERATE_ALL, "multi-relationship"): (
        "Sketch {relationship}",
        "Please draw a sketch of {relationship}",
        "Can you draw {relationship}",
    ),
    (TaskKind.GENERATE_ALL, "multi-plain"): (
        "Sketch {objects}",
        "Please draw a sketch of {objects}",
        "Can you draw {objects}",
    ),
    (TaskKind.GENERATE_PARTIAL, "single"): (
        "Finish this sketch as {article} {name}",
        "Please complete this drawing as {article} {name}",
        "Turn this sketch into {article} {name}",
    ),
    (TaskKind.GENERATE_PARTIAL, "multi-location"): (
        "Please add {article} {name} {location} this sketch",
        "Draw {article} {name} {location} this sketch too",
        "Put {article} {name} {location} this drawing",
    ),
    (TaskKind.GENERATE_PARTIAL, "multi-plain"): (
        "Please add {article} {name} to this sketch",
        "Draw {article} {name} on this sketch as well",
        "Put {article} {name} into this drawing",
    ),
    (TaskKind.REMOVE_ALL, "single"): (
        "Please remove {article} {name} from this sketch",
        "Erase {article} {name} from this sketch",
        "Wipe {article} {name} off this sketch",
    ),
    (TaskKind.REMOVE_ALL, "multi"): (
        "Please remove all the objects from this sketch",
        "Erase everything from this sketch",
        "Wipe all the objects off this sketch",
    ),
    (TaskKind.REMOVE_PARTIAL, "multi-location"): (
        "Please remove {article} {name} {location} this sketch",
        "Erase {article} {name} {location} this sketch",
        "Wipe off {article} {name} {location} this sketch",
    ),
    (TaskKind.REMOVE_PARTIAL, "multi-plain"): (
        "Please remove {article} {name} from this sketch",
        "Erase {article} {name} from this drawing",
        "Wipe {article} {name} off this sketch",
    ),
    (TaskKind.REPRODUCE, "all"): (
        "Please reproduce this sketch",
        "Copy this sketch",
        "Redraw this sketch",
    ),
    (TaskKind.CLASSIFICATION, "single"): (
        "What is the category of this sketch",
        "What does this sketch show",
        "Can you tell me the class of this sketch",
    ),
    (TaskKind.CLASSIFICATION, "multi-location"): (
        "What is the object {location} this drawing",
        "Which object is {location} this sketch",
        "Can you tell me what is {location} this sketch",
    ),
    (TaskKind.CLASSIFICATION, "multi-plain"): (
        "What are the objects in this drawing",
        "Which objects are in this sketch",
        "Can you list the objects in this sketch",
    ),
}

# A class name is one or more lowercase words, none of which is an article;
# that keeps "{article} {name}" from swallowing a relationship phrase.
_NAME_WORD = r"(?!(?:a|an|the)\b)[a-z]+"
_SLOT_PATTERNS = {
    "article": "|".join(ARTICLES),
    "name": rf"{_NAME_WORD}(?: {_NAME_WORD})*",
    "location": "|".join(re.escape(t) for t in LOCATION_TAGS),
    "relationship": r"(?:a|an|the) .+ (?:a|an|the) .+",
    "objects": r"\d+ .+",
}


def template_regex(template: str) -> re.Pattern:
    """Compile a template into a full-match regex with named slot groups."""
    out = []
    pos = 0
    for m in re.finditer(r"\{(\w+)\}", template):
        out.append(re.escape(template[pos : m.start()]))
        out.append(f"(?P<{m.group(1)}>{_SLOT_PATTERNS[m.group(1)]})")
        pos = m.end()
    out.append(re.escape(template[pos:]))
    return re.compile("^" + "".join(out) + "$")


_COMPILED = {
    (task, scenario): template_regex(tpl)
    for task, scenarios in TEMPLATES.items()
    for scenario, tpl in scenarios.items()
}


def match_template(prompt: str, task: TaskKind) -> tuple[str, dict] | None:
    """Find which of the task's default templates produced this prompt."""
    for scenario in TEMPLATES[task]:
        m = _COMPILED[(task, scenario)].match(prompt)
        if m is not None:
            return scenario, m.groupdict()
    return None


def objects_list(names: list[str]) -> str:
    """Counted object list, e.g. '2 circles and 1 square', first-seen order."""
    order: list[str] = []
    counts: dict[str, int] = {}
    for n in names:
        if n not in counts:
            order.append(n)
            counts[n] = 0
        counts[n] += 1
    parts = [f"{counts[n]} {n}s" if counts[n] > 1 else f"1 {n}" for n in order]
    return " and ".join(parts)


def relationship_phrase(subject: str, predicate: str, obj: str) -> str:
    return f"{article_for(subject)} {subject} {predicate} {article_for(obj)} {obj}"
