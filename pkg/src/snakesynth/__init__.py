"""snakesynth: a tiny GAN-backed touch instrument.

Train a two-latent DCGAN on mel-spectral images of short clips, lay a
quantile grid over its latent plane, invert each cell back to audio with
Griffin-Lim, and play the grid by pointer gestures that trigger and sum
the clips. Everything numerical is numpy; the only service dependency is
the web layer.
"""

from .config import DEFAULT_CONFIG, SynthConfig, config_from_json
from .errors import (FormatError, GraphError, NotTrainedError, ShapeError,
                     TrainingDiverged)
from .features import (AudioBuffer, MelFilterbank, NormMeta, SpectralImage,
                       build_dataset, build_filterbank, hz_to_mel, mel_image,
                       mel_to_hz, synth_tone, tone_dataset)
from .gan import (Discriminator, Generator, TrainState, build_models,
                  discriminator_forward, generator_forward, param_count, train,
                  train_step)
from .grid import (GridSpec, build_grid_sounds, cell_image, cell_to_latent,
                   generated_ref_power, inverse_normal_cdf, latent_grid, render_mosaic)
from .inversion import (AudioClip, griffin_lim, image_to_mel_power, invert_cell,
                        mel_to_linear, window_clip)
from .engine import (GestureTracker, LiveRenderer, PointerEvent, ScheduledMix,
                     TriggerEvent, TriggerPolicy, envelope_peak, pointer_to_triggers,
                     quantize_pcm16, render, simulate_gesture)
from .modelio import load_dataset, load_model, params_digest, save_dataset, save_model

__version__ = "0.1.0"
