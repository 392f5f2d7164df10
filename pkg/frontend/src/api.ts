/** Thin client for the studio service endpoints. */

import { sseJson } from "./sse.js";
import type { Stroke } from "./raster.js";
import { parsePpm } from "./raster.js";

export interface StrokeEvent {
  type: "stroke";
  stroke: Stroke;
  canvasHash: string;
}
export interface TextEvent {
  type: "text";
  token: string;
}
export interface DoneEvent {
  type: "done";
  reason: string;
}
export type ServerEvent = StrokeEvent | TextEvent | DoneEvent;

export interface Meta {
  classes: string[];
  tasks: string[];
  templates: Record<string, Record<string, string>>;
  location_tags: string[];
}

export interface Policy {
  kind: "greedy" | "top-p";
  p?: number;
  seed?: number;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function expectOk(resp: Response): Promise<Response> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      detail = ((await resp.json()) as { error?: string }).error ?? detail;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(resp.status, detail);
  }
  return resp;
}

export class StudioApi {
  constructor(private base: string = "") {}

  async createSession(): Promise<string> {
    const resp = await expectOk(await fetch(`${this.base}/api/session`, { method: "POST" }));
    return ((await resp.json()) as { id: string }).id;
  }

  async meta(): Promise<Meta> {
    const resp = await expectOk(await fetch(`${this.base}/api/meta`));
    return (await resp.json()) as Meta;
  }

  async *command(sessionId: string, text: string, policy?: Policy): AsyncGenerator<ServerEvent> {
    const resp = await expectOk(
      await fetch(`${this.base}/api/session/${sessionId}/command`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(policy ? { text, policy } : { text }),
      }),
    );
    if (!resp.body) throw new ApiError(0, "response has no body stream");
    for await (const payload of sseJson(resp.body)) {
      yield payload as ServerEvent;
    }
  }

  async cancel(sessionId: string): Promise<void> {
    await expectOk(
      await fetch(`${this.base}/api/session/${sessionId}/command`, { method: "DELETE" }),
    );
  }

  canvasPngUrl(sessionId: string): string {
    return `${this.base}/api/session/${sessionId}/canvas.png`;
  }

  async fetchCanvasBytes(sessionId: string): Promise<Uint8Array> {
    const resp = await expectOk(
      await fetch(`${this.base}/api/session/${sessionId}/canvas.ppm`),
    );
    return parsePpm(new Uint8Array(await resp.arrayBuffer()));
  }
}
