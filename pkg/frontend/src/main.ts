// Browser entry: wire the pad canvas, the session socket, and WebAudio.
// Everything testable lives in pad.ts / player.ts / protocol.ts.

import { GesturePad, PadRect, cellOf, normalize } from "./pad.js";
import { StreamPlayer } from "./player.js";
import { PROTOCOL_VERSION, helloMsg, parseServerFrame } from "./protocol.js";

const canvas = document.getElementById("pad") as HTMLCanvasElement;
const status = document.getElementById("status") as HTMLElement;
const g = canvas.getContext("2d") as CanvasRenderingContext2D;

let gridN = 5;
let mosaic: HTMLImageElement | null = null;
let player: StreamPlayer | null = null;
let audioCtx: AudioContext | null = null;
let sampleRate = 16000;
let ws: WebSocket | null = null;
let state = "connecting";

interface TrailPoint { x: number; y: number; at: number }
const trail: TrailPoint[] = [];
let hover: TrailPoint | null = null;

const pad = new GesturePad((raw) => { if (ws && ws.readyState === WebSocket.OPEN) ws.send(raw); });

function connect(): void {
  const proto = location.protocol === "https:" ? "wss:" : "ws:";
  ws = new WebSocket(`${proto}//${location.host}/session`);
  state = "connecting";
  ws.onopen = () => {
    state = "connected";
    ws!.send(helloMsg());
    pad.sessionStart();
  };
  ws.onclose = () => {
    state = "reconnecting";
    pad.sessionEnd();
    setTimeout(connect, 1000);
  };
  ws.onmessage = (ev) => {
    const frame = parseServerFrame(String(ev.data));
    if (frame === null) return;
    if (frame.type === "hello") {
      sampleRate = frame.sample_rate;
      if (frame.version !== PROTOCOL_VERSION) {
        state = `protocol mismatch (server v${frame.version})`;
      }
    } else if (frame.type === "grid") {
      gridN = frame.n;
      if (frame.mosaic) {
        mosaic = new Image();
        mosaic.src = frame.mosaic;
        mosaic.onload = () => draw();
      }
    } else if (frame.type === "audio") {
      if (player) player.push(frame);
    } else {
      state = `server error: ${frame.message}`;
    }
  };
}

// WebAudio can only start from a user gesture, so the first press unlocks it
function ensureAudio(): void {
  if (audioCtx === null) {
    audioCtx = new AudioContext({ sampleRate });
    player = new StreamPlayer(audioCtx, sampleRate);
  }
  if (audioCtx.state === "suspended") void audioCtx.resume();
}

function rect(): PadRect {
  const r = canvas.getBoundingClientRect();
  return { left: r.left, top: r.top, width: r.width, height: r.height };
}

canvas.addEventListener("pointerdown", (e) => {
  ensureAudio();
  canvas.setPointerCapture(e.pointerId);
  pad.down(e.pointerId, e.clientX, e.clientY, rect());
  remember(e);
});
canvas.addEventListener("pointermove", (e) => {
  pad.move(e.pointerId, e.clientX, e.clientY, rect());
  remember(e);
});
canvas.addEventListener("pointerup", (e) => {
  pad.up(e.pointerId, e.clientX, e.clientY, rect());
  hover = null;
});
canvas.addEventListener("pointercancel", (e) => {
  pad.up(e.pointerId, e.clientX, e.clientY, rect());
  hover = null;
});

function remember(e: PointerEvent): void {
  const { x, y } = normalize(e.clientX, e.clientY, rect());
  const p = { x, y, at: performance.now() };
  hover = p;
  if (e.buttons || e.pointerType === "touch") trail.push(p);
}

function draw(): void {
  const size = canvas.width;
  g.clearRect(0, 0, size, size);
  if (mosaic && mosaic.complete && mosaic.naturalWidth > 0) {
    g.imageSmoothingEnabled = false;
    g.drawImage(mosaic, 0, 0, size, size);
  } else {
    g.fillStyle = "#181818";
    g.fillRect(0, 0, size, size);
  }
  g.strokeStyle = "rgba(255,255,255,0.35)";
  g.lineWidth = 1;
  for (let k = 1; k < gridN; k++) {
    const v = (k * size) / gridN;
    g.beginPath(); g.moveTo(v, 0); g.lineTo(v, size); g.stroke();
    g.beginPath(); g.moveTo(0, v); g.lineTo(size, v); g.stroke();
  }
  // highlight the cell under the pointer
  if (hover) {
    const [row, col] = cellOf(hover.x, hover.y, gridN);
    g.strokeStyle = "rgba(120,220,140,0.9)";
    g.lineWidth = 2;
    g.strokeRect((col * size) / gridN, (row * size) / gridN, size / gridN, size / gridN);
  }
  // the trail fades out over one second
  const now = performance.now();
  while (trail.length && now - trail[0].at > 1000) trail.shift();
  for (const p of trail) {
    const a = 1 - (now - p.at) / 1000;
    g.fillStyle = `rgba(120,220,140,${a.toFixed(3)})`;
    g.beginPath();
    g.arc(p.x * size, p.y * size, 3, 0, 2 * Math.PI);
    g.fill();
  }
  const s = player ? player.stats() : { blocks: 0, dropped: 0, underruns: 0 };
  status.textContent = `${state}  grid ${gridN}x${gridN}  blocks ${s.blocks}`
    + `  dropped ${s.dropped}  underruns ${s.underruns}`;
  requestAnimationFrame(draw);
}

connect();
requestAnimationFrame(draw);
