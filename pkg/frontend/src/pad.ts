// Gesture capture: pixel coordinates in, throttled normalized pointer
// messages out. No DOM here so the geometry and rate logic stay testable;
// main.ts wires the actual PointerEvents.

import { PointerKind, pointerMsg } from "./protocol.js";

export interface PadRect {
  left: number;
  top: number;
  width: number;
  height: number;
}

/** Pixel position -> pad coordinates clamped to [0, 1). */
export function normalize(px: number, py: number, rect: PadRect): { x: number; y: number } {
  const clamp = (v: number) => Math.min(Math.max(v, 0), 0.999999);
  return {
    x: clamp((px - rect.left) / rect.width),
    y: clamp((py - rect.top) / rect.height),
  };
}

/** Same cell convention as the engine: x picks the column, y the row. */
export function cellOf(x: number, y: number, n: number): [number, number] {
  const idx = (v: number) => Math.min(n - 1, Math.max(0, Math.floor(v * n)));
  return [idx(y), idx(x)];
}

const BUFFER_MS = 1000;

interface Pending {
  wall: number;
  x: number;
  y: number;
  kind: PointerKind;
}

export class GesturePad {
  /** Move messages per second; down/up always pass. The default sits
   *  under the 120 msg/s wire budget so a drag plus its down/up
   *  bookends can never exceed it, and still far above display rate. */
  readonly maxRate: number;
  connected = false;
  dropped = 0;

  private readonly send: (raw: string) => void;
  private readonly now: () => number;
  private t0: number | null = null;
  private lastT = 0;
  private lastMoveT = -Infinity;
  private activeId: number | null = null;
  private buffer: Pending[] = [];

  constructor(send: (raw: string) => void,
              opts: { now?: () => number; maxRate?: number } = {}) {
    this.send = send;
    this.now = opts.now ?? (() => performance.now());
    this.maxRate = opts.maxRate ?? 110;
  }

  /** Socket opened: new session, new time origin, replay a short gap. */
  sessionStart(): void {
    this.connected = true;
    this.prune(this.now());
    this.t0 = this.buffer.length ? this.buffer[0].wall : null;
    this.lastT = 0;
    this.lastMoveT = -Infinity;
    for (const p of this.buffer) this.emit(p.wall, p.x, p.y, p.kind);
    this.buffer = [];
  }

  sessionEnd(): void {
    this.connected = false;
  }

  down(id: number, px: number, py: number, rect: PadRect): void {
    if (this.activeId !== null) return; // single pointer instrument
    this.activeId = id;
    const { x, y } = normalize(px, py, rect);
    this.feed(x, y, "down");
  }

  move(id: number, px: number, py: number, rect: PadRect): void {
    if (id !== this.activeId) return;
    const { x, y } = normalize(px, py, rect);
    this.feed(x, y, "move");
  }

  up(id: number, px: number, py: number, rect: PadRect): void {
    if (id !== this.activeId) return;
    this.activeId = null;
    const { x, y } = normalize(px, py, rect);
    this.feed(x, y, "up");
  }

  private feed(x: number, y: number, kind: PointerKind): void {
    const wall = this.now();
    if (!this.connected) {
      this.prune(wall);
      this.buffer.push({ wall, x, y, kind });
      return;
    }
    this.emit(wall, x, y, kind);
  }

  private emit(wall: number, x: number, y: number, kind: PointerKind): void {
    if (this.t0 === null) this.t0 = wall;
    const t = Math.max((wall - this.t0) / 1000, this.lastT);
    if (kind === "move" && t - this.lastMoveT < 1 / this.maxRate) {
      this.dropped++;
      return;
    }
    this.lastT = t;
    if (kind === "move") this.lastMoveT = t;
    this.send(pointerMsg(Number(t.toFixed(4)), x, y, kind));
  }

  private prune(wall: number): void {
    while (this.buffer.length && wall - this.buffer[0].wall > BUFFER_MS) {
      this.buffer.shift();
      this.dropped++;
    }
  }
}
