"""
Turn one grid cell back into sound
==================================

Pick the center cell of the grid, generate its mel image, and invert
that image to a one-second windowed clip: mel power -> linear magnitude
via clamped least squares, then 60 rounds of Griffin-Lim phase
recovery, then a Hann taper so clips overlap cleanly.

Run demos/01_train_tones.py first, or hear what an untrained
generator's noise sounds like (it is not pleasant).
"""

from pathlib import Path

import numpy as np

from snakesynth import DEFAULT_CONFIG, GridSpec, build_models, cell_image, modelio
from snakesynth.engine import quantize_pcm16
from snakesynth.inversion import invert_cell

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)
cfg = DEFAULT_CONFIG
model_path = OUT / "demo_model.ssyn"

# step 1: a generator to sample from
if model_path.exists():
    state = modelio.load_model(model_path, cfg)
else:
    state = build_models(cfg, seed=0)

# step 2: the center cell is latent (0, 0) exactly
spec = GridSpec(cfg.grid_n, cfg.coverage)
center = spec.n // 2
image = cell_image(state.generator, center, center, spec)

# step 3: invert and write a 16-bit WAV
clip = invert_cell(image, cfg, source_cell=(center, center))
modelio.write_wav_pcm16(OUT / "center_cell.wav", quantize_pcm16(clip.samples),
                        cfg.sample_rate)
peak = float(np.max(np.abs(clip.samples)))
print(f"wrote {OUT / 'center_cell.wav'}: {len(clip)} samples, peak {peak:.3f}")
