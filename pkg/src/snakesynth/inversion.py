"""Generated image -> fixed-length windowed audio clip via Griffin-Lim.

The chain undoes the front end step by step: pixels back to mel power
through the stored meta, mel power to linear power by clamped least
squares against the filterbank, then magnitude-only phase retrieval.
Every stage maps silence to silence without error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import SynthConfig
from .errors import ShapeError
from .features import AudioBuffer, MelFilterbank, SpectralImage, build_filterbank, istft, stft

Array = np.ndarray


@dataclass
class AudioClip:
    """Fixed-length clip ready for the trigger engine (float32, peak <= 1)."""
    samples: Array
    window_applied: bool = False
    source_cell: Optional[tuple] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32)
        peak = float(np.max(np.abs(self.samples))) if self.samples.size else 0.0
        if peak > 1.0 + 1e-5:
            raise ValueError(f"clip peak {peak} exceeds 1")
        if self.window_applied and self.samples.size:
            if self.samples[0] != 0.0 or self.samples[-1] != 0.0:
                raise ValueError("windowed clip must start and end at zero")

    def __len__(self):
        return len(self.samples)


def image_to_mel_power(img: SpectralImage, cfg: SynthConfig = SynthConfig()) -> Array:
    """Undo the [-1,1] pixel map and dB compression; [n_mels, frames] >= 0."""
    if img.meta is None:
        raise ValueError("image has no normalization meta; cannot undo the dB mapping")
    px = np.asarray(img.pixels, dtype=np.float64)
    if px.shape != (cfg.n_mels, cfg.n_frames):
        raise ShapeError(f"image must be {cfg.n_mels}x{cfg.n_frames}, got {tuple(px.shape)}")
    if img.meta.silent or img.meta.ref_power <= 0.0:
        return np.zeros_like(px)
    db = (np.clip(px, -1.0, 1.0) - 1.0) * (-cfg.db_floor / 2.0)
    return img.meta.ref_power * 10.0 ** (db / 10.0)


def mel_to_linear(mel_power: Array, fb: MelFilterbank) -> Array:
    """Least-squares pseudo-inverse of the filterbank, clamped non-negative.

    Input is [n_mels, frames]; output is [frames, n_fft//2 + 1] to match the
    STFT layout downstream.
    """
    mel_power = np.asarray(mel_power, dtype=np.float64)
    if mel_power.shape[0] != fb.weights.shape[0]:
        raise ShapeError(f"{mel_power.shape[0]} mel rows but filterbank has {fb.weights.shape[0]}")
    linear = np.linalg.pinv(fb.weights) @ mel_power      # [bins, frames]
    return np.maximum(linear, 0.0).T


def griffin_lim(mag: Array, cfg: SynthConfig = SynthConfig(), n_iters: Optional[int] = None,
                seed: Optional[int] = None, init: str = "zero"):
    """Phase retrieval: x <- istft(mag * phase(stft(x))), zero-phase start.

    Returns (samples, errors) where errors[i] is the spectral-convergence
    distance ||
    |STFT(x_i)| - mag ||_F / ||mag||_F after iteration i. The sequence is
    non-increasing up to float noise. Output is scaled down to peak <= 1.
    """
    mag = np.asarray(mag, dtype=np.float64)
    if np.any(mag < 0):
        raise ValueError("negative magnitude")
    if n_iters is None:
        n_iters = cfg.gl_iters
    mag_norm = float(np.linalg.norm(mag))
    length = (mag.shape[0] - 1) * cfg.hop + cfg.n_fft
    if mag_norm == 0.0:
        return np.zeros(length), [0.0]

    if init == "random":
        rng = np.random.default_rng(seed)
        spec = mag * np.exp(2j * np.pi * rng.random(mag.shape))
    else:
        spec = mag.astype(np.complex128)        # zero phase
    errors = []
    x = istft(spec, cfg.n_fft, cfg.hop)
    for _ in range(n_iters):
        spec2 = stft(AudioBuffer(x, cfg.sample_rate), cfg.n_fft, cfg.hop)
        est = np.abs(spec2)
        errors.append(float(np.linalg.norm(est - mag) / mag_norm))
        phase = np.where(est > 0, spec2 / np.maximum(est, 1e-300), 1.0 + 0.0j)
        x = istft(mag * phase, cfg.n_fft, cfg.hop)
    peak = float(np.max(np.abs(x)))
    if peak > 1.0:
        x = x / peak
    return x, errors


def window_clip(a: AudioBuffer, cfg: SynthConfig = SynthConfig(),
                source_cell: Optional[tuple] = None) -> AudioClip:
    """Full-length Hann taper: w[n] = 0.5(1 - cos(2 pi n / (L-1)))."""
    x = a.samples
    if len(x) != cfg.clip_length:
        raise ShapeError(f"clip must be {cfg.clip_length} samples, got {len(x)}")
    w = np.hanning(len(x))
    return AudioClip((x * w).astype(np.float32), window_applied=True, source_cell=source_cell)


def invert_cell(img: SpectralImage, cfg: SynthConfig = SynthConfig(),
                fb: Optional[MelFilterbank] = None, n_iters: Optional[int] = None,
                source_cell: Optional[tuple] = None) -> AudioClip:
    """image -> mel power -> linear power -> sqrt -> griffin_lim -> window."""
    if fb is None:
        fb = build_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate, cfg.fmin, cfg.fmax)
    mel_power = image_to_mel_power(img, cfg)
    mag = np.sqrt(mel_to_linear(mel_power, fb))
    x, _ = griffin_lim(mag, cfg, n_iters=n_iters)
    return window_clip(AudioBuffer(x, cfg.sample_rate), cfg, source_cell=source_cell)
