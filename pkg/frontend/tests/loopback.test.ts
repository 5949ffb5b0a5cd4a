import { describe, expect, it } from "vitest";

import { GesturePad } from "../src/pad.js";
import { StreamPlayer } from "../src/player.js";
import type { AudioLike, BufferSource, PlayableBuffer } from "../src/player.js";
import { helloMsg, parseServerFrame } from "../src/protocol.js";

// Full client stack against a scripted in-process server: pad -> wire ->
// server -> wire -> frame parser -> player. The server actor speaks the
// real session protocol (hello and grid on open, one audio block per
// trigger) so the latency measured here is the client's own.

const RATE = 16000;
const BLOCK = 256;
const RECT = { left: 0, top: 0, width: 320, height: 320 };

function pcmB64(values: number[]): string {
  const ints = new Int16Array(values);
  return Buffer.from(new Uint8Array(ints.buffer)).toString("base64");
}

class FakeContext implements AudioLike {
  currentTime = 0;
  destination = {};
  startWalls: number[] = [];

  createBuffer(): PlayableBuffer {
    return { copyToChannel() {} };
  }

  createBufferSource(): BufferSource {
    const ctx = this;
    return {
      buffer: null,
      connect() {},
      start() {
        ctx.startWalls.push(performance.now());
      },
    };
  }
}

interface PointerSeen {
  t: number;
  x: number;
  y: number;
  kind: string;
}

class ScriptedServer {
  readonly pointers: PointerSeen[] = [];
  readonly raws: string[] = [];
  private seq = 0;

  constructor(private readonly toClient: (raw: string) => void) {}

  open(): void {
    this.toClient(JSON.stringify({ type: "hello", version: 1, sample_rate: RATE, block: BLOCK }));
    this.toClient(JSON.stringify({ type: "grid", n: 5, mosaic: null }));
  }

  receive(raw: string): void {
    this.raws.push(raw);
    const msg = JSON.parse(raw) as Record<string, unknown>;
    if (msg.type !== "pointer") return;
    this.pointers.push(msg as unknown as PointerSeen);
    if (msg.kind === "down") {
      const ramp = Array.from({ length: BLOCK }, (_, i) => (i * 37) % 2048);
      this.toClient(JSON.stringify({ type: "audio", seq: this.seq++, pcm: pcmB64(ramp) }));
    }
  }
}

interface Rig {
  pad: GesturePad;
  ctx: FakeContext;
  server: ScriptedServer;
  player: StreamPlayer;
}

function connect(): Rig {
  const ctx = new FakeContext();
  const player = new StreamPlayer(ctx, RATE);
  const clientRecv = (raw: string) => {
    const frame = parseServerFrame(raw);
    if (frame && frame.type === "audio") player.push(frame);
  };
  const server = new ScriptedServer(clientRecv);
  const toServer = (raw: string) => server.receive(raw);
  const pad = new GesturePad(toServer);
  server.open();
  toServer(helloMsg());
  pad.sessionStart();
  return { pad, ctx, server, player };
}

describe("loopback", () => {
  it("scripted tap reaches a scheduled audio block in under 250 ms", () => {
    const { pad, ctx } = connect();
    const tapped = performance.now();
    pad.down(1, 160, 160, RECT);
    pad.up(1, 160, 160, RECT);
    expect(ctx.startWalls).toHaveLength(1);
    expect(ctx.startWalls[0] - tapped).toBeLessThan(250);
  });

  it("a tap lands on the server as exactly one down and one up", () => {
    const { pad, server } = connect();
    pad.down(1, 10, 10, RECT);
    pad.up(1, 10, 10, RECT);
    expect(server.pointers.map((p) => p.kind)).toEqual(["down", "up"]);
    for (const p of server.pointers) {
      expect(p.x).toBeGreaterThanOrEqual(0);
      expect(p.x).toBeLessThanOrEqual(1);
      expect(p.y).toBeGreaterThanOrEqual(0);
      expect(p.y).toBeLessThanOrEqual(1);
      expect(p.t).toBeGreaterThanOrEqual(0);
    }
  });

  it("client hello precedes any pointer traffic", () => {
    const { pad, server } = connect();
    pad.down(1, 5, 5, RECT);
    const kinds = server.raws.map((raw) => (JSON.parse(raw) as { type: string }).type);
    expect(kinds[0]).toBe("hello");
    expect(kinds).toContain("pointer");
  });

  it("garbage from the wire is ignored, stream keeps flowing", () => {
    const ctx = new FakeContext();
    const player = new StreamPlayer(ctx, RATE);
    const clientRecv = (raw: string) => {
      const frame = parseServerFrame(raw);
      if (frame && frame.type === "audio") player.push(frame);
    };
    expect(() => clientRecv("\x00]{{garbage")).not.toThrow();
    expect(() => clientRecv('{"type": "audio"}')).not.toThrow();
    clientRecv(JSON.stringify({ type: "audio", seq: 0, pcm: pcmB64([1, 2, 3, 4]) }));
    expect(player.stats().blocks).toBe(1);
  });
});
