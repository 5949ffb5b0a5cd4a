import { describe, expect, it } from "vitest";

import { decodePcm16, parseServerFrame, pointerMsg } from "../src/protocol.js";

function b64(values: number[]): string {
  const arr = new Int16Array(values);
  return Buffer.from(new Uint8Array(arr.buffer)).toString("base64");
}

describe("decodePcm16", () => {
  it("decodes little-endian int16 to floats over 32768", () => {
    const out = decodePcm16(b64([0, 32767, -32768, 16384, -16384]));
    expect(out).not.toBeNull();
    expect(Array.from(out!)).toEqual([0, 32767 / 32768, -1, 0.5, -0.5]);
  });

  it("decodes a full 256-sample block", () => {
    const values = Array.from({ length: 256 }, (_, i) => (i * 131) % 65536 - 32768);
    const out = decodePcm16(b64(values));
    expect(out!.length).toBe(256);
    expect(out![17]).toBeCloseTo(values[17] / 32768, 10);
  });

  it("rejects garbage base64", () => {
    expect(decodePcm16("not base64 !!!")).toBeNull();
  });

  it("rejects an odd byte count", () => {
    expect(decodePcm16(Buffer.from([1, 2, 3]).toString("base64"))).toBeNull();
  });
});

describe("parseServerFrame", () => {
  it("accepts the four server frame types", () => {
    expect(parseServerFrame('{"type":"hello","version":1,"sample_rate":16000,"block":256}'))
      .toMatchObject({ type: "hello", version: 1 });
    expect(parseServerFrame('{"type":"grid","n":5,"mosaic":"/mosaic.png"}'))
      .toMatchObject({ type: "grid", n: 5 });
    expect(parseServerFrame('{"type":"grid","n":3,"mosaic":null}'))
      .toMatchObject({ type: "grid", mosaic: null });
    expect(parseServerFrame('{"type":"audio","seq":0,"pcm":"AAA="}'))
      .toMatchObject({ type: "audio", seq: 0 });
    expect(parseServerFrame('{"type":"error","message":"nope"}'))
      .toMatchObject({ type: "error" });
  });

  it("rejects malformed frames instead of throwing", () => {
    expect(parseServerFrame("{oops")).toBeNull();
    expect(parseServerFrame('"a string"')).toBeNull();
    expect(parseServerFrame('{"type":"audio","seq":"x","pcm":3}')).toBeNull();
    expect(parseServerFrame('{"type":"teapot"}')).toBeNull();
  });
});

describe("pointerMsg", () => {
  it("serializes the wire shape", () => {
    expect(JSON.parse(pointerMsg(0.25, 0.1, 0.9, "down")))
      .toEqual({ type: "pointer", t: 0.25, x: 0.1, y: 0.9, kind: "down" });
  });
});
