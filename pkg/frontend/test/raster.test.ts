import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { fnv1a64Hex } from "../src/fnv.js";
import { blankCanvas, paintStroke, parsePpm, type Stroke } from "../src/raster.js";

interface FixtureStep {
  stroke: Stroke;
  hash: string;
}
interface Fixture {
  blank_hash: string;
  steps: FixtureStep[];
}

const fixture: Fixture = JSON.parse(
  readFileSync(fileURLToPath(new URL("./fixtures/hash_chain.json", import.meta.url)), "utf-8"),
);

describe("canvas replay against the server-generated fixture", () => {
  it("hashes a blank canvas identically", () => {
    expect(fnv1a64Hex(blankCanvas())).toBe(fixture.blank_hash);
  });

  it("reproduces every canvas hash in the stroke chain", () => {
    const canvas = blankCanvas();
    for (const step of fixture.steps) {
      paintStroke(canvas, step.stroke);
      expect(fnv1a64Hex(canvas)).toBe(step.hash);
    }
  });

  it("erase-over-draw in the fixture ends blank", () => {
    // the first two fixture strokes are a draw and its exact white eraser
    expect(fixture.steps[1].hash).toBe(fixture.blank_hash);
  });
});

describe("paintStroke geometry", () => {
  function painted(canvas: Uint8Array): Set<string> {
    const out = new Set<string>();
    for (let i = 0; i < canvas.length; i += 3) {
      if (canvas[i] !== 255 || canvas[i + 1] !== 255 || canvas[i + 2] !== 255) {
        const p = i / 3;
        out.add(`${p % 256},${Math.floor(p / 256)}`);
      }
    }
    return out;
  }

  it("paints a horizontal width-1 run exactly", () => {
    const canvas = blankCanvas();
    paintStroke(canvas, { color: [0, 0, 0], width: 1, points: [[0, 0], [3, 0]] });
    expect(painted(canvas)).toEqual(new Set(["0,0", "1,0", "2,0", "3,0"]));
  });

  it("a single point with width 2 fills a 2x2 block", () => {
    const canvas = blankCanvas();
    paintStroke(canvas, { color: [0, 0, 0], width: 2, points: [[5, 5]] });
    expect(painted(canvas)).toEqual(new Set(["5,5", "6,5", "5,6", "6,6"]));
  });

  it("clips at the canvas border", () => {
    const canvas = blankCanvas();
    paintStroke(canvas, { color: [0, 0, 0], width: 2, points: [[255, 255]] });
    expect(painted(canvas)).toEqual(new Set(["255,255"]));
  });
});

describe("parsePpm", () => {
  it("round-trips a synthetic P6 payload", () => {
    const pixels = new Uint8Array(256 * 256 * 3).fill(7);
    const header = new TextEncoder().encode("P6\n256 256\n255\n");
    const data = new Uint8Array(header.length + pixels.length);
    data.set(header);
    data.set(pixels, header.length);
    expect(parsePpm(data)).toEqual(pixels);
  });

  it("rejects wrong magic", () => {
    expect(() => parsePpm(new TextEncoder().encode("P5\n1 1\n255\n\0"))).toThrow();
  });
});
