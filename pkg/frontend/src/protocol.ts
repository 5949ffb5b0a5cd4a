// Session protocol v1: one JSON object per websocket message, audio as
// base64 little-endian 16-bit PCM. Mirrors the server contract exactly.

export const PROTOCOL_VERSION = 1;

export interface HelloFrame {
  type: "hello";
  version: number;
  sample_rate: number;
  block: number;
}

export interface GridFrame {
  type: "grid";
  n: number;
  mosaic: string | null;
}

export interface AudioFrame {
  type: "audio";
  seq: number;
  pcm: string;
}

export interface ErrorFrame {
  type: "error";
  message: string;
}

export type ServerFrame = HelloFrame | GridFrame | AudioFrame | ErrorFrame;

export type PointerKind = "down" | "move" | "up";

export function parseServerFrame(raw: string): ServerFrame | null {
  let msg: unknown;
  try {
    msg = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  const f = msg as Record<string, unknown>;
  switch (f.type) {
    case "hello":
      if (typeof f.version === "number" && typeof f.sample_rate === "number"
          && typeof f.block === "number") return f as unknown as HelloFrame;
      return null;
    case "grid":
      if (typeof f.n === "number" && (f.mosaic === null || typeof f.mosaic === "string"))
        return f as unknown as GridFrame;
      return null;
    case "audio":
      if (typeof f.seq === "number" && typeof f.pcm === "string")
        return f as unknown as AudioFrame;
      return null;
    case "error":
      if (typeof f.message === "string") return f as unknown as ErrorFrame;
      return null;
    default:
      return null;
  }
}

export function helloMsg(): string {
  return JSON.stringify({ type: "hello", version: PROTOCOL_VERSION });
}

export function pointerMsg(t: number, x: number, y: number, kind: PointerKind): string {
  return JSON.stringify({ type: "pointer", t, x, y, kind });
}

/** base64 PCM16 -> float samples in [-1, 1); null on any malformed input. */
export function decodePcm16(b64: string): Float32Array | null {
  let bin: string;
  try {
    bin = atob(b64);
  } catch {
    return null;
  }
  if (bin.length % 2 !== 0) return null;
  const bytes = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) bytes[i] = bin.charCodeAt(i);
  const view = new DataView(bytes.buffer);
  const out = new Float32Array(bin.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = view.getInt16(i * 2, true) / 32768;
  }
  return out;
}
