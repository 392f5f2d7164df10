/** Incremental parser for a text/event-stream body: yields each data: payload. */

export function* feedChunks(state: { buffer: string }, chunk: string): Generator<string> {
  state.buffer += chunk;
  for (;;) {
    const cut = state.buffer.indexOf("\n\n");
    if (cut < 0) break;
    const block = state.buffer.slice(0, cut);
    state.buffer = state.buffer.slice(cut + 2);
    for (const line of block.split("\n")) {
      if (line.startsWith("data: ")) yield line.slice(6);
      else if (line.startsWith("data:")) yield line.slice(5);
    }
  }
}

export async function* sseJson(body: ReadableStream<Uint8Array>): AsyncGenerator<unknown> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  const state = { buffer: "" };
  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    for (const payload of feedChunks(state, decoder.decode(value, { stream: true }))) {
      yield JSON.parse(payload);
    }
  }
}
