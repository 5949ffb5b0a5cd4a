"""
Train the pair on eight pure tones
==================================

The desk-scale recipe: eight log-spaced sine tones become 64x64 mel
images, and the generator/discriminator pair trains on them one image
at a time. The full 300 epochs take a minute or two on a laptop CPU;
pass a smaller epoch count as the first argument to just kick the
tires. Artifacts land in demos/out/.

CLI equivalent:
    snakesynth train <dataset.npz> --epochs 300 --seed 7 --out model.ssyn
"""

import csv
import sys
import time
from pathlib import Path

from snakesynth import DEFAULT_CONFIG, modelio, tone_dataset, train

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)
cfg = DEFAULT_CONFIG
epochs = int(sys.argv[1]) if len(sys.argv) > 1 else cfg.epochs

# step 1: synthesize the training corpus (no audio files needed)
images, freqs = tone_dataset(8, cfg)
print("tones:", " ".join(f"{f:.0f}Hz" for f in freqs))

# step 2: train, batch size 1, printing one line per epoch
t0 = time.time()
state = train(images, cfg, seed=7, epochs=epochs,
              log=lambda s: print(s, end="\r"))
print(f"\ntrained {state.step} steps in {time.time() - t0:.1f} s")

# step 3: persist the checkpoint and the per-step loss history
digest = modelio.save_model(OUT / "demo_model.ssyn", state)
with open(OUT / "demo_losses.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["epoch", "step", "g_loss", "d_loss"])
    w.writerows(state.step_losses)
print(f"saved {OUT / 'demo_model.ssyn'} (digest {digest[:12]})")
