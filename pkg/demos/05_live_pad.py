"""
Serve the live pad
==================

Start the websocket session server: each connection gets a hello frame,
the grid metadata, and then base64 PCM16 audio blocks in response to
pointer frames. Open http://127.0.0.1:8765/ for the built-in test page,
or point the browser pad in frontend/dist at it:

    python demos/05_live_pad.py          # after demos/01_train_tones.py

Protocol, one JSON object per websocket message:
    server -> {"type": "hello", "version": 1, "sample_rate": 16000, "block": 256}
    server -> {"type": "grid", "n": 5, "mosaic": "/mosaic.png"}
    client -> {"type": "pointer", "t": 0.0, "x": 0.5, "y": 0.5, "kind": "down"}
    server -> {"type": "audio", "seq": 0, "pcm": "<base64 int16 LE>"}
"""

from pathlib import Path

from snakesynth import DEFAULT_CONFIG, GridSpec, build_models, build_grid_sounds, modelio
from snakesynth.grid import render_mosaic
from snakesynth.server import serve

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)
cfg = DEFAULT_CONFIG
model_path = OUT / "demo_model.ssyn"

# step 1: model, clip bank, and the mosaic the pad shows as its skin
if model_path.exists():
    state = modelio.load_model(model_path, cfg)
else:
    state = build_models(cfg, seed=0)
    print("serving an untrained model; run demos/01_train_tones.py for music")
spec = GridSpec(cfg.grid_n, cfg.coverage)
digest = modelio.params_digest(state.generator.parameters()
                               + state.discriminator.parameters())
clips = build_grid_sounds(state.generator, spec, cfg,
                          cache_dir=OUT / "clip_cache", model_digest=digest)
mosaic_png = modelio.png_gray_bytes(render_mosaic(state.generator, spec))

# step 2: serve until interrupted; pass ui_dir="frontend/dist" once built
ui = Path(__file__).resolve().parents[1] / "frontend" / "dist"
print("pad on http://127.0.0.1:8765/  (Ctrl+C to stop)")
serve(clips, cfg, spec, mosaic_png, host="127.0.0.1", port=8765,
      ui_dir=ui if ui.exists() else None)
