"""
Render the latent grid as a mosaic
==================================

Lay a 5x5 quantile grid over the generator's two-dimensional latent
plane and tile the generated images into one 320x320 grayscale PNG.
Works on a fresh random model too, it just looks like static.

Run demos/01_train_tones.py first for a trained mosaic.
"""

from pathlib import Path

from snakesynth import DEFAULT_CONFIG, GridSpec, build_models, modelio, render_mosaic

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)
cfg = DEFAULT_CONFIG
model_path = OUT / "demo_model.ssyn"

# step 1: load the trained pair, or fall back to fresh random weights
if model_path.exists():
    state = modelio.load_model(model_path, cfg)
    print(f"loaded {model_path} (epoch {state.epoch})")
else:
    state = build_models(cfg, seed=0)
    print("no trained model yet; rendering an untrained generator")

# step 2: one generator forward per grid cell, tiled row-major
mosaic = render_mosaic(state.generator, GridSpec(cfg.grid_n, cfg.coverage))

# step 3: write it as an 8-bit grayscale PNG
modelio.write_png_gray(OUT / "mosaic.png", mosaic)
print(f"wrote {OUT / 'mosaic.png'} ({mosaic.shape[1]}x{mosaic.shape[0]})")
