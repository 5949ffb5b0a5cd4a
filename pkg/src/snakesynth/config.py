"""Pipeline configuration and content-addressing.

A single frozen config travels with every persisted artifact (dataset,
model, clip cache) as a SHA-256 hash of its canonical JSON form, so
artifacts built under different settings refuse to load.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class SynthConfig:
    # Audio / spectral front end. 64 frames of 64 mel bands make one image;
    # a clip is exactly (frames-1)*hop + n_fft samples (~1.04 s at defaults).
    sample_rate: int = 16000
    n_fft: int = 512
    hop: int = 256
    n_mels: int = 64
    fmin: float = 40.0
    fmax: float = 7600.0
    db_floor: float = -80.0

    # Image geometry (the GAN's sample space).
    image_size: int = 64

    # Generator latent grid.
    grid_n: int = 5
    coverage: float = 0.95

    # Training.
    epochs: int = 300
    adam_lr: float = 2e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    adam_eps: float = 1e-7
    bn_eps: float = 1e-3
    bn_momentum: float = 0.99
    leaky_slope: float = 0.2

    # Inversion.
    gl_iters: int = 60

    # Interaction / streaming.
    retrigger_s: float = 0.05
    block: int = 256

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    @property
    def n_frames(self) -> int:
        return self.image_size

    @property
    def clip_length(self) -> int:
        """Samples per clip: exactly the audio span of one 64-frame image."""
        return (self.n_frames - 1) * self.hop + self.n_fft

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def with_overrides(self, **kw) -> "SynthConfig":
        return replace(self, **kw)


def config_from_json(text: str) -> SynthConfig:
    return SynthConfig(**json.loads(text))


DEFAULT_CONFIG = SynthConfig()
