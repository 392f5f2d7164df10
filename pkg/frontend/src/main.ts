/** Studio UI: type or build a command, watch strokes land on the live canvas. */

import { ApiError, StudioApi, type Meta, type Policy } from "./api.js";
import { buildCommand, type Task } from "./templates.js";
import { SIZE } from "./raster.js";
import { UiSession } from "./session.js";

const api = new StudioApi();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const banner = el<HTMLDivElement>("banner");
const hashBadge = el<HTMLSpanElement>("hash-badge");
const answerPanel = el<HTMLDivElement>("answer");
const historyList = el<HTMLUListElement>("history");
const commandBox = el<HTMLInputElement>("command");
const sendButton = el<HTMLButtonElement>("send");
const cancelButton = el<HTMLButtonElement>("cancel");
const display = el<HTMLCanvasElement>("display");
const taskSelect = el<HTMLSelectElement>("task");
const classSelect = el<HTMLSelectElement>("class");
const locationSelect = el<HTMLSelectElement>("location");
const buildButton = el<HTMLButtonElement>("build");
const policySelect = el<HTMLSelectElement>("policy");

const ctx = display.getContext("2d")!;
const backing = document.createElement("canvas");
backing.width = SIZE;
backing.height = SIZE;
const backingCtx = backing.getContext("2d")!;

let session: UiSession | null = null;
let inFlight = false;

function showBanner(text: string, kind: "error" | "info" = "error"): void {
  banner.textContent = text;
  banner.className = text ? `banner ${kind}` : "banner hidden";
}

function render(): void {
  if (!session) return;
  const image = backingCtx.createImageData(SIZE, SIZE);
  const src = session.canvas;
  for (let i = 0, j = 0; i < src.length; i += 3, j += 4) {
    image.data[j] = src[i];
    image.data[j + 1] = src[i + 1];
    image.data[j + 2] = src[i + 2];
    image.data[j + 3] = 255;
  }
  backingCtx.putImageData(image, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, display.width, display.height);
  ctx.drawImage(backing, 0, 0, display.width, display.height);
}

function renderHistory(): void {
  if (!session) return;
  historyList.replaceChildren(
    ...session.history.map((h) => {
      const li = document.createElement("li");
      li.textContent = `${h.command} → ${h.summary}`;
      return li;
    }),
  );
}

async function connect(): Promise<void> {
  try {
    const id = await api.createSession();
    session = new UiSession(id);
    showBanner("");
    render();
  } catch (err) {
    session = null;
    showBanner(`server unreachable (${String(err)}) — retrying in 3s`);
    setTimeout(connect, 3000);
  }
}

function currentPolicy(): Policy | undefined {
  if (policySelect.value === "top-p") return { kind: "top-p", p: 0.9 };
  return undefined; // server default: greedy
}

async function submit(): Promise<void> {
  if (!session || inFlight) return;
  const text = commandBox.value.trim();
  if (!text) return;
  inFlight = true;
  sendButton.disabled = true;
  hashBadge.className = "badge hidden";
  answerPanel.textContent = "";
  const tokens: string[] = [];
  let strokes = 0;
  let reason = "disconnected";
  try {
    for await (const ev of api.command(session.sessionId, text, currentPolicy())) {
      if (ev.type === "stroke") {
        strokes += 1;
        const ok = session.applyServerStroke(ev.stroke, ev.canvasHash);
        if (!ok) {
          hashBadge.className = "badge warn";
          hashBadge.textContent = "replay mismatch — resynced from server";
          session.adoptServerCanvas(await api.fetchCanvasBytes(session.sessionId));
        }
        render();
      } else if (ev.type === "text") {
        tokens.push(ev.token);
        answerPanel.textContent = tokens.join(" ");
      } else {
        reason = ev.reason;
      }
    }
    const summary = tokens.length
      ? `"${tokens.join(" ")}" (${reason})`
      : `${strokes} strokes (${reason})`;
    session.finishCommand(text, summary);
    renderHistory();
  } catch (err) {
    if (err instanceof ApiError && err.status === 409) {
      showBanner("a command is already running in this session");
    } else {
      showBanner(`command failed: ${String(err)}`);
    }
  } finally {
    inFlight = false;
    sendButton.disabled = false;
  }
}

async function boot(): Promise<void> {
  let meta: Meta | null = null;
  try {
    meta = await api.meta();
  } catch {
    showBanner("could not load /api/meta — template builder disabled");
  }
  if (meta) {
    taskSelect.replaceChildren(
      ...meta.tasks.map((t) => new Option(t, t)),
    );
    classSelect.replaceChildren(
      new Option("(none)", ""),
      ...meta.classes.map((c) => new Option(c, c)),
    );
    locationSelect.replaceChildren(
      new Option("(none)", ""),
      ...meta.location_tags.map((t) => new Option(t, t)),
    );
  }
  buildButton.addEventListener("click", () => {
    try {
      commandBox.value = buildCommand(taskSelect.value as Task, {
        className: classSelect.value || undefined,
        location: locationSelect.value || undefined,
      });
      sendButton.disabled = false;
    } catch (err) {
      showBanner(String(err), "info");
    }
  });
  sendButton.addEventListener("click", () => void submit());
  commandBox.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") void submit();
  });
  cancelButton.addEventListener("click", () => {
    if (session && inFlight) void api.cancel(session.sessionId);
  });
  await connect();
}

void boot();
