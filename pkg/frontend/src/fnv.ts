/** 64-bit FNV-1a, matching the server's canvasHash byte for byte. */

const OFFSET = 0xcbf29ce484222325n;
const PRIME = 0x100000001b3n;
const MASK = 0xffffffffffffffffn;

export function fnv1a64(bytes: Uint8Array): bigint {
  let h = OFFSET;
  for (let i = 0; i < bytes.length; i++) {
    h ^= BigInt(bytes[i]);
    h = (h * PRIME) & MASK;
  }
  return h;
}

export function fnv1a64Hex(bytes: Uint8Array): string {
  return fnv1a64(bytes).toString(16).padStart(16, "0");
}
