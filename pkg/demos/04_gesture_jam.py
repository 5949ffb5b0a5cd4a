"""
Play the grid with a scripted gesture
=====================================

Drag a circle around the pad for eight seconds: every cell boundary
crossing triggers that cell's clip, and overlapping clips just add.
The first run inverts all 25 cells (a minute or so); the clip cache
makes the second run instant.

Run demos/01_train_tones.py first for musical results.
"""

from pathlib import Path

from snakesynth import (DEFAULT_CONFIG, GridSpec, ScheduledMix, build_models,
                        build_grid_sounds, modelio, pointer_to_triggers,
                        quantize_pcm16, render, simulate_gesture)

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)
cfg = DEFAULT_CONFIG
model_path = OUT / "demo_model.ssyn"

# step 1: generator and the per-cell clip bank (cached on disk)
if model_path.exists():
    state = modelio.load_model(model_path, cfg)
else:
    state = build_models(cfg, seed=0)
spec = GridSpec(cfg.grid_n, cfg.coverage)
digest = modelio.params_digest(state.generator.parameters()
                               + state.discriminator.parameters())
clips = build_grid_sounds(state.generator, spec, cfg,
                          cache_dir=OUT / "clip_cache", model_digest=digest,
                          progress=lambda i, j: print(f"inverting cell ({i},{j})",
                                                      end="\r"))
print()

# step 2: a circular drag, one lap per second, sampled at 60 Hz
events = simulate_gesture("circular", duration=8.0, period=1.0)
triggers = pointer_to_triggers(events, spec)
print(f"{len(events)} pointer events -> {len(triggers)} triggers")

# step 3: schedule, sum, quantize, write
audio = render(ScheduledMix(triggers, clips, cfg.sample_rate))
modelio.write_wav_pcm16(OUT / "gesture.wav", quantize_pcm16(audio),
                        cfg.sample_rate)
print(f"wrote {OUT / 'gesture.wav'} ({len(audio) / cfg.sample_rate:.2f} s)")
