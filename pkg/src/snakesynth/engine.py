"""Pointer gestures -> clip triggers -> summed audio.

Trigger policy: a press always fires its cell; a drag fires on every cell
entry, guarded by a 50 ms per-cell refractory window; release fires
nothing. All five canonical gesture behaviors (pluck, bow, direction
change, rhythm, cacophony) emerge from this one rule plus grid geometry.

Mixing is bare summation of equal-length windowed clips at their trigger
samples: overlap deliberately grows amplitude, nothing normalizes it.
The offline renderer and the live block renderer perform the identical
float32 additions in the identical order, so a streamed session equals
its offline render bitwise before quantization.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .config import SynthConfig
from .errors import ShapeError
from .grid import GridSpec

Array = np.ndarray

KINDS = ("down", "move", "up")


@dataclass(frozen=True)
class PointerEvent:
    t: float
    x: float
    y: float
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"pointer kind must be one of {KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class TriggerEvent:
    t: float
    cell: tuple
    gain: float = 1.0

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"trigger time must be non-negative, got {self.t}")
        if self.gain <= 0:
            raise ValueError(f"gain must be positive, got {self.gain}")


@dataclass(frozen=True)
class TriggerPolicy:
    retrigger_s: float = 0.05


def cell_of(x: float, y: float, n: int) -> tuple:
    """Clamped [0,1] pointer coordinates -> (row, col); x maps to columns."""
    j = min(int(min(max(x, 0.0), 1.0) * n), n - 1)
    i = min(int(min(max(y, 0.0), 1.0) * n), n - 1)
    return (i, j)


class GestureTracker:
    """Stateful pointer-event consumer applying the trigger policy."""

    def __init__(self, spec: GridSpec = GridSpec(), policy: TriggerPolicy = TriggerPolicy()):
        self.spec = spec
        self.policy = policy
        self.pressed = False
        self.last_cell: Optional[tuple] = None
        self.last_fire: dict = {}
        self.last_t = -np.inf
        self.dropped = 0

    def feed(self, ev: PointerEvent) -> list[TriggerEvent]:
        if ev.t < self.last_t:
            self.dropped += 1
            return []
        self.last_t = ev.t
        cell = cell_of(ev.x, ev.y, self.spec.n)
        if ev.kind == "down":
            self.pressed = True
            return [self._fire(ev.t, cell)]
        if ev.kind == "up":
            self.pressed = False
            return []
        if not self.pressed:
            return []
        if cell == self.last_cell:
            return []
        if ev.t - self.last_fire.get(cell, -np.inf) < self.policy.retrigger_s:
            return []
        return [self._fire(ev.t, cell)]

    def _fire(self, t: float, cell: tuple) -> TriggerEvent:
        self.last_cell = cell
        self.last_fire[cell] = t
        return TriggerEvent(t, cell)


def pointer_to_triggers(events: Iterable[PointerEvent], spec: GridSpec = GridSpec(),
                        policy: TriggerPolicy = TriggerPolicy()) -> list[TriggerEvent]:
    tracker = GestureTracker(spec, policy)
    out: list[TriggerEvent] = []
    for ev in events:
        out.extend(tracker.feed(ev))
    return out


# ---------------------------------------------------------------------------
# offline rendering

@dataclass
class ScheduledMix:
    triggers: list
    clips: dict                     # (i,j) -> AudioClip or float32 array
    sample_rate: int

    def __post_init__(self):
        self.triggers = sorted(self.triggers, key=lambda e: e.t)   # stable


def _clip_samples(clip) -> Array:
    x = clip.samples if hasattr(clip, "samples") else clip
    return np.asarray(x, dtype=np.float32)


def _clip_length(clips: dict) -> int:
    lengths = {len(_clip_samples(c)) for c in clips.values()}
    if len(lengths) != 1:
        raise ShapeError(f"clips must share one length, got {sorted(lengths)}")
    return lengths.pop()


def render(mix: ScheduledMix, until_t: Optional[float] = None) -> Array:
    """out[n] = sum of gain * clip[n - round(t*sr)]; length = round(t_last*sr) + L.

    No normalization: overlapping triggers add. An empty schedule renders
    round(until_t * sr) samples of silence.
    """
    sr = mix.sample_rate
    if not mix.triggers:
        return np.zeros(int(round((until_t or 0.0) * sr)), dtype=np.float32)
    if until_t is not None:
        late = [e.t for e in mix.triggers if e.t >= until_t]
        if late:
            raise ValueError(f"trigger at t={late[0]} not before until_t={until_t}")
    length = _clip_length(mix.clips)
    last = int(round(mix.triggers[-1].t * sr))
    out = np.zeros(last + length, dtype=np.float32)
    for ev in mix.triggers:
        s = int(round(ev.t * sr))
        out[s:s + length] += _clip_samples(mix.clips[ev.cell]) * np.float32(ev.gain)
    return out


def quantize_pcm16(x: Array) -> Array:
    """float -> int16 the one way both the offline and live paths share."""
    return np.clip(np.rint(np.asarray(x, dtype=np.float64) * 32767.0),
                   -32768, 32767).astype(np.int16)


def envelope_peak(offsets: Iterable[float], sample_rate: int, length: int) -> float:
    """Peak of summed Hann windows shifted to the given second offsets."""
    shifts = sorted(int(round(o * sample_rate)) for o in offsets)
    if not shifts:
        return 0.0
    if shifts[0] < 0:
        raise ValueError("negative offset")
    w = np.hanning(length)
    acc = np.zeros(shifts[-1] + length)
    for s in shifts:
        acc[s:s + length] += w
    return float(acc.max())


# ---------------------------------------------------------------------------
# scripted gestures (tests, demos, CLI)

def simulate_gesture(kind: str, duration: float = 2.0, seed: int = 0,
                     rate: float = 60.0, start=(0.05, 0.5), end=(0.8038, 0.5),
                     center=(0.5, 0.5), radius: float = 0.35,
                     period: float = 1.0, step: float = 0.08) -> list[PointerEvent]:
    """Deterministic pointer streams mimicking the canonical gestures.

    kinds: click (tap, no motion), linear (straight drag start->end),
    direction_change (two perpendicular legs), circular (orbit of the
    given period), chaotic (seeded random walk). Events arrive at `rate`
    per second; down at t=0, up at t=duration. The default linear endpoint
    places the last cell crossing at 99.5% of the drag, inside the final
    tick for durations of 0.5, 1 and 2 s, so the last trigger lands on
    t=duration exactly and drag time maps to audio length sample-exactly.
    """
    if kind == "click":
        return [PointerEvent(0.0, center[0], center[1], "down"),
                PointerEvent(0.05, center[0], center[1], "up")]

    n_ticks = int(round(duration * rate))
    times = [k / rate for k in range(1, n_ticks + 1)]

    if kind == "linear":
        def pos(t):
            a = t / duration
            return (start[0] + (end[0] - start[0]) * a,
                    start[1] + (end[1] - start[1]) * a)
    elif kind == "direction_change":
        corner = (end[0], start[1])
        def pos(t):
            a = t / duration
            if a < 0.5:
                b = a / 0.5
                return (start[0] + (corner[0] - start[0]) * b, start[1])
            b = (a - 0.5) / 0.5
            return (corner[0], corner[1] + (end[1] - corner[1]) * b)
    elif kind == "circular":
        def pos(t):
            ang = 2.0 * np.pi * t / period
            return (center[0] + radius * np.cos(ang),
                    center[1] + radius * np.sin(ang))
    elif kind == "chaotic":
        rng = np.random.default_rng(seed)
        path = [np.asarray(center, dtype=float)]
        for _ in times:
            nxt = np.clip(path[-1] + rng.normal(0.0, step, size=2), 0.0, 1.0)
            path.append(nxt)
        def pos(t):
            return tuple(path[min(int(round(t * rate)), len(path) - 1)])
    else:
        raise ValueError(f"unknown gesture kind {kind!r}")

    x0, y0 = pos(0.0)
    events = [PointerEvent(0.0, x0, y0, "down")]
    for t in times:
        x, y = pos(t)
        events.append(PointerEvent(t, x, y, "move"))
    events.append(PointerEvent(duration, *pos(duration), "up"))
    return events


# ---------------------------------------------------------------------------
# live block renderer

class EventQueue:
    """Thread-safe FIFO of pointer events; producers append, one consumer drains."""

    def __init__(self):
        self._lock = threading.Lock()
        self._items: list[PointerEvent] = []

    def put(self, ev: PointerEvent) -> None:
        with self._lock:
            self._items.append(ev)

    def drain(self) -> list[PointerEvent]:
        with self._lock:
            items, self._items = self._items, []
        return items


class LiveRenderer:
    """Consume pointer events, emit fixed-size float32 blocks.

    Accumulates triggered clips into one timeline buffer with the same
    `buf[s:s+L] += clip * gain` additions as `render`, so block
    concatenation matches the offline result bitwise. While idle the
    cursor jumps forward to the next trigger (leading silence is never
    streamed) and after the last clip decays a fixed silent tail is
    emitted before going idle again.
    """

    def __init__(self, clips: dict, cfg: SynthConfig = SynthConfig(),
                 spec: Optional[GridSpec] = None,
                 policy: Optional[TriggerPolicy] = None,
                 gain: float = 1.0, tail_s: float = 1.0):
        self.clips = clips
        self.cfg = cfg
        self.spec = spec if spec is not None else GridSpec(cfg.grid_n)
        self.tracker = GestureTracker(self.spec, policy or TriggerPolicy(cfg.retrigger_s))
        self.gain = float(gain)
        self.length = _clip_length(clips)
        self.block = cfg.block
        self.sr = cfg.sample_rate
        self.tail = int(round(tail_s * self.sr))
        self._buf = np.zeros(0, dtype=np.float32)
        self._base = 0              # absolute sample index of _buf[0]
        self._cursor = 0            # absolute next sample to emit
        self._active_until = 0      # absolute end of the last scheduled clip
        self.late_triggers = 0

    @property
    def idle(self) -> bool:
        return self._cursor >= self._active_until + (self.tail if self._active_until else 0)

    def push(self, ev: PointerEvent) -> list[TriggerEvent]:
        fired = self.tracker.feed(ev)
        for trig in fired:
            self._schedule(trig)
        return fired

    def _schedule(self, trig: TriggerEvent) -> None:
        s = int(round(trig.t * self.sr))
        if self.idle and s > self._cursor:
            self._cursor = s        # skip leading silence
            if self._base < s and self._base + len(self._buf) <= s:
                self._buf = np.zeros(0, dtype=np.float32)
                self._base = s
        if s < self._cursor:
            self.late_triggers += 1
            s = self._cursor
        end = s + self.length
        self._ensure(end)
        o = s - self._base
        self._buf[o:o + self.length] += _clip_samples(self.clips[trig.cell]) * np.float32(self.gain)
        self._active_until = max(self._active_until, end)

    def _ensure(self, abs_end: int) -> None:
        need = abs_end - self._base
        if need > len(self._buf):
            grown = np.zeros(max(need, 2 * len(self._buf), 4096), dtype=np.float32)
            grown[:len(self._buf)] = self._buf
            self._buf = grown

    def pull_block(self) -> Optional[Array]:
        """Next 256-sample block, or None when idle."""
        if self.idle:
            return None
        out = np.zeros(self.block, dtype=np.float32)
        o = self._cursor - self._base
        have = min(self.block, max(len(self._buf) - o, 0))
        if have > 0:
            out[:have] = self._buf[o:o + have]
        self._cursor += self.block
        return out
