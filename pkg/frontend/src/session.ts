/**
 * Client session state: the stroke log, the model-space replay buffer, and
 * the hash chain that anchors it to the server.  The replay is display
 * fodder; whenever a server hash disagrees, the caller refetches the
 * server's canvas bytes and adopts them as truth.
 */

import { fnv1a64Hex } from "./fnv.js";
import { blankCanvas, paintStroke, type Stroke } from "./raster.js";

export interface HistoryEntry {
  command: string;
  summary: string;
}

export class UiSession {
  sessionId: string;
  canvas: Uint8Array = blankCanvas();
  strokeLog: Stroke[] = [];
  hashes: string[] = [];
  history: HistoryEntry[] = [];
  mismatches = 0;

  constructor(sessionId: string) {
    this.sessionId = sessionId;
  }

  /** Apply a streamed stroke; returns false when our replay hash disagrees. */
  applyServerStroke(stroke: Stroke, serverHash: string): boolean {
    paintStroke(this.canvas, stroke);
    this.strokeLog.push(stroke);
    const ours = fnv1a64Hex(this.canvas);
    this.hashes.push(ours);
    if (ours !== serverHash) {
      this.mismatches += 1;
      return false;
    }
    return true;
  }

  /** Replace the replay buffer with server truth after a mismatch. */
  adoptServerCanvas(bytes: Uint8Array): void {
    if (bytes.length !== this.canvas.length) {
      throw new Error(`canvas byte length ${bytes.length} unexpected`);
    }
    this.canvas = Uint8Array.from(bytes);
  }

  finishCommand(command: string, summary: string): void {
    this.history.push({ command, summary });
  }
}
