import { describe, expect, it } from "vitest";

import { StreamPlayer } from "../src/player.js";
import type { AudioLike, BufferSource, PlayableBuffer } from "../src/player.js";
import type { AudioFrame } from "../src/protocol.js";

const RATE = 16000;
const BLOCK = 256;
const BLOCK_S = BLOCK / RATE;

function pcmB64(values: number[]): string {
  const ints = new Int16Array(values);
  return Buffer.from(new Uint8Array(ints.buffer)).toString("base64");
}

function frame(seq: number, samples = BLOCK): AudioFrame {
  return { type: "audio", seq, pcm: pcmB64(new Array(samples).fill(1000)) };
}

/** Records every schedule instead of making sound. */
class FakeContext implements AudioLike {
  currentTime = 0;
  destination = {};
  starts: number[] = [];
  copied: Float32Array[] = [];

  createBuffer(_channels: number, _frames: number, _rate: number): PlayableBuffer {
    const ctx = this;
    return {
      copyToChannel(data: Float32Array) {
        ctx.copied.push(data);
      },
    };
  }

  createBufferSource(): BufferSource {
    const ctx = this;
    return {
      buffer: null,
      connect() {},
      start(when: number) {
        ctx.starts.push(when);
      },
    };
  }
}

describe("gapless queueing", () => {
  it("schedules contiguous blocks back to back", () => {
    const ctx = new FakeContext();
    const player = new StreamPlayer(ctx, RATE);
    for (let i = 0; i < 4; i++) player.push(frame(i));
    expect(ctx.starts).toHaveLength(4);
    expect(ctx.starts[0]).toBe(0);
    for (let i = 1; i < 4; i++) {
      expect(ctx.starts[i]).toBeCloseTo(ctx.starts[i - 1] + BLOCK_S, 12);
    }
    expect(player.stats()).toEqual({ blocks: 4, dropped: 0, underruns: 0 });
  });

  it("never schedules into the past", () => {
    const ctx = new FakeContext();
    const player = new StreamPlayer(ctx, RATE);
    ctx.currentTime = 0.5; // context was already running before the stream began
    player.push(frame(0));
    expect(ctx.starts[0]).toBe(0.5);
    // a late first block is stream start, not an underrun
    expect(player.stats().underruns).toBe(0);
  });
});

describe("underrun", () => {
  it("inserts silence and keeps the clock monotone", () => {
    const ctx = new FakeContext();
    const player = new StreamPlayer(ctx, RATE);
    player.push(frame(0));
    // playback passes the queued audio: a gap of silence, then the
    // next block starts at the current time rather than overlapping
    ctx.currentTime = 0.1;
    player.push(frame(1));
    expect(ctx.starts[1]).toBe(0.1);
    expect(player.stats().underruns).toBe(1);
    player.push(frame(2));
    expect(ctx.starts[2]).toBeCloseTo(0.1 + BLOCK_S, 12);
    expect(player.stats().underruns).toBe(1);
  });

  it("drains a burst after a stall without overlap", () => {
    const ctx = new FakeContext();
    const player = new StreamPlayer(ctx, RATE);
    player.push(frame(0));
    player.push(frame(1));
    ctx.currentTime = 0.25; // network stall, queue ran dry
    for (let i = 2; i < 10; i++) player.push(frame(i));
    expect(ctx.starts[2]).toBe(0.25);
    for (let i = 1; i < ctx.starts.length; i++) {
      // each block occupies [when, when + BLOCK_S); no two may overlap
      expect(ctx.starts[i]).toBeGreaterThanOrEqual(ctx.starts[i - 1] + BLOCK_S - 1e-9);
    }
    expect(player.stats()).toEqual({ blocks: 10, dropped: 0, underruns: 1 });
  });
});

describe("malformed blocks", () => {
  it("drops garbage base64 and counts it", () => {
    const ctx = new FakeContext();
    const player = new StreamPlayer(ctx, RATE);
    player.push({ type: "audio", seq: 0, pcm: "!!!not base64!!!" });
    expect(player.stats().dropped).toBe(1);
    expect(ctx.starts).toHaveLength(0);
  });

  it("drops odd-length and empty payloads, stream continues", () => {
    const ctx = new FakeContext();
    const player = new StreamPlayer(ctx, RATE);
    player.push(frame(0));
    player.push({ type: "audio", seq: 1, pcm: Buffer.from([1, 2, 3]).toString("base64") });
    player.push({ type: "audio", seq: 2, pcm: "" });
    player.push(frame(3));
    expect(player.stats()).toEqual({ blocks: 2, dropped: 2, underruns: 0 });
    expect(ctx.starts).toHaveLength(2);
    expect(ctx.starts[1]).toBeCloseTo(BLOCK_S, 12);
  });

  it("decodes samples bit-exactly into the buffer", () => {
    const ctx = new FakeContext();
    const player = new StreamPlayer(ctx, RATE);
    const values = [0, 1, -1, 12345, -12345, 32767, -32768];
    player.push({ type: "audio", seq: 0, pcm: pcmB64(values) });
    expect(ctx.copied).toHaveLength(1);
    const got = Array.from(ctx.copied[0]);
    const want = values.map((v) => Math.fround(v / 32768));
    expect(got).toEqual(want);
  });
});
