"""End-to-end studio check: draw then remove over HTTP with a trained model.

Uses the shared overfit checkpoint; the draw command must stream strokes
whose hash chain a client replay reproduces exactly, and the follow-up
remove command must bring the very same session's canvas back to blank.
"""

import json

import pytest
from fastapi.testclient import TestClient

from conftest import OVERFIT_CLASSES
from sketchlm.canvas import apply_stroke, blank_canvas, canvas_hash, decode_ppm, psnr
from sketchlm.codec import Color, Point, Stroke
from sketchlm.dataset import TaskKind
from sketchlm.service import create_app


def sse_events(resp):
    return [json.loads(line[len("data: "):])
            for line in resp.text.splitlines() if line.startswith("data: ")]


def stroke_of(payload) -> Stroke:
    return Stroke(Color(*payload["color"]), payload["width"],
                  tuple(Point(x, y) for x, y in payload["points"]))


@pytest.mark.slow
def test_criterion_10_studio_coherence(overfit_bundle):
    b = overfit_bundle
    # scene-major sample layout: [generate-all, classification, remove-all, reproduce]
    draw = b.samples[0]
    remove = b.samples[2]
    assert draw.task is TaskKind.GENERATE_ALL and remove.task is TaskKind.REMOVE_ALL

    app = create_app(b.weights, b.vocab, classes=list(OVERFIT_CLASSES))
    client = TestClient(app)
    sid = client.post("/api/session").json()["id"]

    # draw: at least one stroke, hash chain exact under client replay
    replay = blank_canvas()
    r = client.post(f"/api/session/{sid}/command", json={"text": draw.command_text})
    assert r.status_code == 200
    events = sse_events(r)
    strokes = [e for e in events if e["type"] == "stroke"]
    assert len(strokes) >= 1
    assert events[-1]["type"] == "done"
    for e in strokes:
        replay = apply_stroke(replay, stroke_of(e["stroke"]))
        assert f"{canvas_hash(replay):016x}" == e["canvasHash"]

    # the same session now erases; hash chain continues over the same replay
    r2 = client.post(f"/api/session/{sid}/command", json={"text": remove.command_text})
    assert r2.status_code == 200
    events2 = sse_events(r2)
    for e in (x for x in events2 if x["type"] == "stroke"):
        replay = apply_stroke(replay, stroke_of(e["stroke"]))
        assert f"{canvas_hash(replay):016x}" == e["canvasHash"]

    final = decode_ppm(client.get(f"/api/session/{sid}/canvas.ppm").content)
    assert (final == replay).all()
    score = psnr(final, blank_canvas())
    print(f"[criterion 10] PASS: draw streamed {len(strokes)} strokes, hash chain exact, "
          f"after remove the canvas scores {score:.1f} dB vs blank (>= 25)")
    assert score >= 25.0
