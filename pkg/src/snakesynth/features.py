"""WAV corpus -> square mel-coefficient images in the generator's tanh range.

The front end is fixed-geometry: 64 analysis frames of 64 mel bands make
one 64x64 image, pixel-mapped from [-80, 0] dB (ref = per-image max) onto
[-1, 1]. The per-image reference power is kept as meta so the inversion
stage can undo the mapping exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .config import SynthConfig
from .errors import ShapeError

Array = np.ndarray


@dataclass
class NormMeta:
    """What mel_image did to the dB scale, needed to invert it."""
    db_floor: float = -80.0
    db_ceil: float = 0.0
    ref_power: float = 1.0
    silent: bool = False


@dataclass
class SpectralImage:
    """64x64 mel image in [-1, 1]; rows are mel bands, columns are frames."""
    pixels: Array
    meta: Optional[NormMeta] = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float32)


@dataclass
class AudioBuffer:
    samples: Array
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.size == 0:
            raise ValueError("empty audio buffer")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("audio contains non-finite samples")


@dataclass
class MelFilterbank:
    weights: Array            # [n_mels, n_fft//2 + 1], non-negative triangles
    fmin: float
    fmax: float
    centers_hz: Array = field(default=None)  # type: ignore[assignment]


def hann(n: int, periodic: bool = True) -> Array:
    denom = n if periodic else n - 1
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n) / denom))


# ---------------------------------------------------------------------------
# STFT pair

def stft(a: AudioBuffer, n_fft: int, hop: int, window: Optional[Array] = None) -> Array:
    """Windowed rFFT frames, no padding: 1 + (len - n_fft)//hop frames."""
    if n_fft & (n_fft - 1):
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")
    if hop > n_fft:
        raise ValueError(f"hop {hop} exceeds n_fft {n_fft}")
    x = a.samples
    if len(x) < n_fft:
        raise ShapeError(f"audio of {len(x)} samples is shorter than one {n_fft}-sample frame")
    if window is None:
        window = hann(n_fft)
    n_frames = 1 + (len(x) - n_fft) // hop
    idx = np.arange(n_fft)[None, :] + hop * np.arange(n_frames)[:, None]
    return np.fft.rfft(x[idx] * window, axis=1)


def istft(spec: Array, n_fft: int, hop: int, window: Optional[Array] = None) -> Array:
    """Least-squares inverse of `stft`: windowed overlap-add over sum(w^2)."""
    if window is None:
        window = hann(n_fft)
    frames = np.fft.irfft(spec, n=n_fft, axis=1)
    n_frames = frames.shape[0]
    length = (n_frames - 1) * hop + n_fft
    num = np.zeros(length)
    den = np.zeros(length)
    w2 = window * window
    for t in range(n_frames):
        s = t * hop
        num[s:s + n_fft] += frames[t] * window
        den[s:s + n_fft] += w2
    out = np.zeros(length)
    # below 1% of the plateau weight the LS estimate is pure noise gain
    # (1/w blow-up at the stream edges); those samples read as zero
    ok = den > 1e-2 * den.max()
    out[ok] = num[ok] / den[ok]
    return out


# ---------------------------------------------------------------------------
# mel scale

def hz_to_mel(f):
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("negative frequency")
    return 2595.0 * np.log10(1.0 + f / 700.0)


def mel_to_hz(m):
    m = np.asarray(m, dtype=float)
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def build_filterbank(n_mels: int = 64, n_fft: int = 512, sr: int = 16000,
                     fmin: float = 40.0, fmax: float = 7600.0) -> MelFilterbank:
    """Triangular filters with centers equally spaced on the mel axis."""
    if not fmin < fmax:
        raise ValueError(f"fmin {fmin} must be below fmax {fmax}")
    if fmax > sr / 2:
        raise ValueError(f"fmax {fmax} exceeds Nyquist {sr / 2}")
    mel_pts = np.linspace(float(hz_to_mel(fmin)), float(hz_to_mel(fmax)), n_mels + 2)
    bin_mels = hz_to_mel(np.fft.rfftfreq(n_fft, 1.0 / sr))
    lower, center, upper = mel_pts[:-2, None], mel_pts[1:-1, None], mel_pts[2:, None]
    rising = (bin_mels[None, :] - lower) / (center - lower)
    falling = (upper - bin_mels[None, :]) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    if not np.all(weights.max(axis=1) > 0):
        raise ValueError("a mel filter covers no FFT bin; widen the band or raise n_fft")
    return MelFilterbank(weights=weights, fmin=fmin, fmax=fmax,
                         centers_hz=mel_to_hz(mel_pts[1:-1]))


# ---------------------------------------------------------------------------
# images

def mel_image(a: AudioBuffer, cfg: SynthConfig = SynthConfig(),
              fb: Optional[MelFilterbank] = None) -> SpectralImage:
    """Power spectrogram -> mel -> dB (ref = max, floor -80) -> [-1, 1] pixels."""
    if fb is None:
        fb = build_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate, cfg.fmin, cfg.fmax)
    spec = stft(a, cfg.n_fft, cfg.hop)
    if spec.shape[0] != cfg.n_frames:
        raise ShapeError(f"{spec.shape[0]} frames where exactly {cfg.n_frames} are required; "
                         f"cut or pad the clip first")
    power = np.abs(spec) ** 2                      # [frames, bins]
    mel = power @ fb.weights.T                     # [frames, mels]
    ref = float(mel.max())
    if ref <= 0.0:
        pixels = np.full((cfg.n_mels, cfg.n_frames), -1.0, dtype=np.float32)
        return SpectralImage(pixels, NormMeta(cfg.db_floor, 0.0, 0.0, silent=True))
    floor_power = ref * 10.0 ** (cfg.db_floor / 10.0)
    db = 10.0 * np.log10(np.maximum(mel, floor_power) / ref)
    pixels = (db / (-cfg.db_floor / 2.0) + 1.0).T.astype(np.float32)
    return SpectralImage(pixels, NormMeta(cfg.db_floor, 0.0, ref, silent=False))


# ---------------------------------------------------------------------------
# corpus

def load_wav(path) -> AudioBuffer:
    """RIFF WAV, PCM16/PCM32/float; stereo is averaged to mono."""
    sr, data = wavfile.read(path)
    if data.size == 0:
        raise ValueError(f"{path}: empty audio")
    if data.dtype == np.int16:
        x = data / 32768.0
    elif data.dtype == np.int32:
        x = data / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    else:
        x = data.astype(np.float64)
    if x.ndim == 2:
        x = x.mean(axis=1)
    return AudioBuffer(x, sr)


def resample(a: AudioBuffer, rate: int) -> AudioBuffer:
    if a.sample_rate == rate:
        return a
    g = math.gcd(rate, a.sample_rate)
    return AudioBuffer(resample_poly(a.samples, rate // g, a.sample_rate // g), rate)


def fit_length(x: Array, length: int) -> Array:
    """Center-crop long signals, zero-pad short ones symmetrically."""
    if len(x) > length:
        start = (len(x) - length) // 2
        return x[start:start + length]
    if len(x) < length:
        pad = length - len(x)
        return np.pad(x, (pad // 2, pad - pad // 2))
    return x


def build_dataset(wav_dir, cfg: SynthConfig = SynthConfig()):
    """All readable WAVs under `wav_dir` -> (images, manifest records)."""
    wav_dir = Path(wav_dir)
    fb = build_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate, cfg.fmin, cfg.fmax)
    images: list[SpectralImage] = []
    manifest: list[dict] = []
    for path in sorted(wav_dir.glob("*.wav")):
        try:
            buf = load_wav(path)
        except Exception as exc:
            warnings.warn(f"skipping {path.name}: {exc}")
            continue
        source_rate = buf.sample_rate
        buf = resample(buf, cfg.sample_rate)
        clip = AudioBuffer(fit_length(buf.samples, cfg.clip_length), cfg.sample_rate)
        img = mel_image(clip, cfg, fb)
        if img.meta.silent:
            warnings.warn(f"{path.name}: silent input, image pinned at the dB floor")
        images.append(img)
        manifest.append({
            "file": path.name,
            "source_rate": int(source_rate),
            "ref_power": float(img.meta.ref_power),
            "silent": bool(img.meta.silent),
            "config": cfg.digest(),
        })
    if not images:
        raise ValueError(f"no usable WAV files in {wav_dir}")
    return images, manifest


# ---------------------------------------------------------------------------
# synthetic desk-scale corpus (tests and demos)

def synth_tone(freq: float, cfg: SynthConfig = SynthConfig(), amp: float = 0.8) -> AudioBuffer:
    t = np.arange(cfg.clip_length) / cfg.sample_rate
    return AudioBuffer(amp * np.sin(2.0 * np.pi * freq * t), cfg.sample_rate)


def tone_dataset(n: int = 8, cfg: SynthConfig = SynthConfig(),
                 f_lo: float = 110.0, f_hi: float = 1760.0):
    """n pure tones, log-spaced; the standard tiny training corpus."""
    freqs = np.geomspace(f_lo, f_hi, n)
    fb = build_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate, cfg.fmin, cfg.fmax)
    return [mel_image(synth_tone(f, cfg), cfg, fb) for f in freqs], freqs
