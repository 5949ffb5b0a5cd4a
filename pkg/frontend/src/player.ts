// Gapless PCM16 block playback on a WebAudio-shaped sink. The sink is a
// structural slice of AudioContext so tests can drive a fake clock.

import { AudioFrame, decodePcm16 } from "./protocol.js";

export interface PlayableBuffer {
  copyToChannel(data: Float32Array, channel: number): void;
}

export interface BufferSource {
  buffer: PlayableBuffer | null;
  connect(dest: unknown): void;
  start(when: number): void;
}

export interface AudioLike {
  currentTime: number;
  destination: unknown;
  createBuffer(channels: number, frames: number, sampleRate: number): PlayableBuffer;
  createBufferSource(): BufferSource;
}

export interface PlayerStats {
  blocks: number;
  dropped: number;
  underruns: number;
}

export class StreamPlayer {
  private readonly ctx: AudioLike;
  private readonly sampleRate: number;
  private nextTime = 0;
  private blocks = 0;
  private dropped = 0;
  private underruns = 0;

  constructor(ctx: AudioLike, sampleRate: number) {
    this.ctx = ctx;
    this.sampleRate = sampleRate;
  }

  /** Queue one audio frame; malformed PCM is dropped, never thrown. */
  push(frame: AudioFrame): void {
    const samples = decodePcm16(frame.pcm);
    if (samples === null || samples.length === 0) {
      this.dropped++;
      return;
    }
    // the playback clock only moves forward: a late block starts now
    // (silence filled the gap), it never overlaps what already played
    let when = this.nextTime;
    if (this.ctx.currentTime > when) {
      if (this.blocks > 0) this.underruns++;
      when = this.ctx.currentTime;
    }
    const buf = this.ctx.createBuffer(1, samples.length, this.sampleRate);
    buf.copyToChannel(samples, 0);
    const src = this.ctx.createBufferSource();
    src.buffer = buf;
    src.connect(this.ctx.destination);
    src.start(when);
    this.nextTime = when + samples.length / this.sampleRate;
    this.blocks++;
  }

  stats(): PlayerStats {
    return { blocks: this.blocks, dropped: this.dropped, underruns: this.underruns };
  }
}
