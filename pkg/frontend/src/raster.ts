/**
 * Model-space canvas replay: a 256x256 RGB byte buffer plus the exact same
 * integer Bresenham the server rasterizes with (error-accumulation form,
 * width as a w*w block anchored top-left on each line pixel).  Hashing this
 * buffer must reproduce the server's canvasHash after every stroke; the
 * on-screen canvas is just a scaled blit of it.
 */

export const SIZE = 256;

export interface Stroke {
  color: [number, number, number];
  width: number;
  points: [number, number][];
}

export function blankCanvas(): Uint8Array {
  return new Uint8Array(SIZE * SIZE * 3).fill(255);
}

export function paintStroke(img: Uint8Array, s: Stroke): void {
  const [r, g, b] = s.color;
  const w = s.width;
  const pts = s.points;
  const segs = Math.max(pts.length - 1, 1);
  for (let k = 0; k < segs; k++) {
    let [x, y] = pts[k];
    const [x1, y1] = pts.length > 1 ? pts[k + 1] : pts[k];
    const dx = Math.abs(x1 - x);
    const sx = x < x1 ? 1 : -1;
    const dy = -Math.abs(y1 - y);
    const sy = y < y1 ? 1 : -1;
    let err = dx + dy;
    for (;;) {
      for (let oy = 0; oy < w; oy++) {
        const py = y + oy;
        if (py >= 0 && py < SIZE) {
          for (let ox = 0; ox < w; ox++) {
            const px = x + ox;
            if (px >= 0 && px < SIZE) {
              const at = (py * SIZE + px) * 3;
              img[at] = r;
              img[at + 1] = g;
              img[at + 2] = b;
            }
          }
        }
      }
      if (x === x1 && y === y1) break;
      const e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y += sy;
      }
    }
  }
}

/** Parse a binary P6 256x256 PPM into the raw RGB byte buffer. */
export function parsePpm(data: Uint8Array): Uint8Array {
  const text = new TextDecoder("latin1").decode(data.slice(0, 64));
  if (!text.startsWith("P6")) throw new Error("not a P6 PPM");
  let i = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (i < data.length && /\s/.test(text[i])) i++;
    let j = i;
    while (j < data.length && !/\s/.test(text[j])) j++;
    fields.push(parseInt(text.slice(i, j), 10));
    i = j;
  }
  i++; // single whitespace after maxval
  const [w, h, maxval] = fields;
  if (w !== SIZE || h !== SIZE || maxval !== 255) {
    throw new Error(`unexpected PPM geometry ${w}x${h}/${maxval}`);
  }
  const pixels = data.slice(i);
  if (pixels.length !== SIZE * SIZE * 3) {
    throw new Error(`expected ${SIZE * SIZE * 3} pixel bytes, got ${pixels.length}`);
  }
  return pixels;
}
