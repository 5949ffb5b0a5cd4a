"""N x N interaction grid over the generator latent plane.

Cells map to latent points through standard-normal quantiles spaced
uniformly in probability across the central 95%: cell extremes land at
z = +-1.95996 (about two deviations), the center of an odd grid at the
origin. The full grid renders to one mosaic image and one clip per cell.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import SynthConfig
from .features import MelFilterbank, NormMeta, SpectralImage, build_filterbank
from .inversion import AudioClip, invert_cell

Array = np.ndarray

# Acklam's rational approximation to the probit function, then one Halley
# step against the exact CDF brings absolute error under 1e-9.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    if p > 1.0 - _P_LOW:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
                 / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    q = p - 0.5
    r = q * q
    return ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
            / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))


def inverse_normal_cdf(p: float) -> float:
    """z with Phi(z) = p for the standard normal; |error| < 1e-9."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie strictly inside (0,1), got {p}")
    x = _acklam(p)
    # Halley refinement: e = Phi(x) - p, u = e / phi(x).
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(x * x / 2.0)
    return x - u / (1.0 + x * u / 2.0)


@dataclass(frozen=True)
class GridSpec:
    n: int = 5
    coverage: float = 0.95

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"grid needs at least one cell per side, got {self.n}")
        if not 0.0 < self.coverage < 1.0:
            raise ValueError(f"coverage must lie in (0,1), got {self.coverage}")

    def probability(self, i: int) -> float:
        if not 0 <= i < self.n:
            raise ValueError(f"cell index {i} outside 0..{self.n - 1}")
        if self.n == 1:
            return 0.5
        return (1.0 - self.coverage) / 2.0 + self.coverage * i / (self.n - 1)


def _cell_quantile(spec: GridSpec, i: int) -> float:
    # mirror the upper half so paired cells are exact negations, not just
    # equal to float rounding
    m = spec.n - 1 - i
    if i > m:
        return -_cell_quantile(spec, m)
    return inverse_normal_cdf(spec.probability(i))


def cell_to_latent(i: int, j: int, spec: GridSpec = GridSpec()) -> Array:
    """Row/column indices -> 2D latent point, equal-probability spacing."""
    return np.array([_cell_quantile(spec, i), _cell_quantile(spec, j)])


def latent_grid(spec: GridSpec = GridSpec()) -> Array:
    """All N*N latent points, shape [n, n, 2]."""
    q = np.array([_cell_quantile(spec, i) for i in range(spec.n)])
    out = np.empty((spec.n, spec.n, 2))
    out[:, :, 0] = q[:, None]
    out[:, :, 1] = q[None, :]
    return out


def _generate_mode(gen) -> str:
    return "infer" if gen.bn1.stats.count > 0 else "batch"


def _grid_images(gen, spec: GridSpec) -> Array:
    """Generator outputs for every cell, [n, n, 64, 64] in [-1, 1].

    Cells go through one at a time so untrained generators (batch-stat
    normalization) produce the same tile here as in `cell_image`.
    """
    z = latent_grid(spec).reshape(-1, 2)
    mode = _generate_mode(gen)
    images = np.stack([gen.generate(z[k:k + 1], mode=mode)[0] for k in range(z.shape[0])])
    n, size = spec.n, images.shape[1]
    return images.reshape(n, n, size, size)


def render_mosaic(gen, spec: GridSpec = GridSpec()) -> Array:
    """Tile (i,j) at rows i*64..(i+1)*64, cols j*64..(j+1)*64, as uint8."""
    tiles = _grid_images(gen, spec)
    n, size = spec.n, tiles.shape[2]
    mosaic = np.empty((n * size, n * size), dtype=np.uint8)
    levels = np.clip(np.round((tiles + 1.0) / 2.0 * 255.0), 0, 255).astype(np.uint8)
    for i in range(n):
        for j in range(n):
            mosaic[i * size:(i + 1) * size, j * size:(j + 1) * size] = levels[i, j]
    return mosaic


def generated_ref_power(cfg: SynthConfig = SynthConfig()) -> float:
    """Power reference attached to generated tiles.

    The dataset's ref-max normalization discards absolute scale, so a
    generated image carries no loudness of its own and one must be
    declared. A full-bright pixel is defined as a half-scale sinusoid:
    under the Hann analysis window an amplitude-a tone peaks at
    |STFT| = a * n_fft / 4, so ref = (n_fft / 8)^2."""
    return (cfg.n_fft / 8.0) ** 2


def cell_image(gen, i: int, j: int, spec: GridSpec = GridSpec(),
               cfg: SynthConfig = SynthConfig()) -> SpectralImage:
    """One generated tile packaged for inversion."""
    z = cell_to_latent(i, j, spec)
    px = gen.generate(z[None, :], mode=_generate_mode(gen))[0]
    return SpectralImage(px, NormMeta(ref_power=generated_ref_power(cfg), silent=False))


def build_grid_sounds(gen, spec: GridSpec = GridSpec(), cfg: SynthConfig = SynthConfig(),
                      fb: Optional[MelFilterbank] = None,
                      cache_dir=None, model_digest: Optional[str] = None,
                      n_iters: Optional[int] = None,
                      progress=None) -> dict:
    """Invert every cell; clips come back keyed (i, j), all length L.

    With `cache_dir` set, a prior build for the same (model digest, config
    digest, n) is loaded back bitwise instead of recomputed.
    """
    if cache_dir is not None:
        if model_digest is None:
            from .modelio import params_digest
            model_digest = params_digest(gen.parameters())
        cached = _cache_load(cache_dir, model_digest, cfg, spec)
        if cached is not None:
            return cached
    if fb is None:
        fb = build_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate, cfg.fmin, cfg.fmax)
    tiles = _grid_images(gen, spec)
    clips: dict = {}
    for i in range(spec.n):
        for j in range(spec.n):
            img = SpectralImage(tiles[i, j], NormMeta(ref_power=generated_ref_power(cfg),
                                                      silent=False))
            clips[(i, j)] = invert_cell(img, cfg, fb, n_iters=n_iters, source_cell=(i, j))
            if progress:
                progress(i, j)
    if cache_dir is not None:
        _cache_store(cache_dir, model_digest, cfg, spec, clips)
    return clips


# ---------------------------------------------------------------------------
# on-disk clip cache: one float32 WAV per cell plus an index file

def _cache_load(cache_dir, digest: str, cfg: SynthConfig, spec: GridSpec) -> Optional[dict]:
    from .modelio import read_wav_f32
    index_path = Path(cache_dir) / "index.json"
    if not index_path.exists():
        return None
    try:
        index = json.loads(index_path.read_text())
    except (OSError, json.JSONDecodeError):
        return None
    if (index.get("model") != digest or index.get("config") != cfg.digest()
            or index.get("n") != spec.n):
        return None
    clips: dict = {}
    for key, fname in index.get("clips", {}).items():
        i, j = (int(v) for v in key.split(","))
        path = Path(cache_dir) / fname
        if not path.exists():
            return None
        samples = read_wav_f32(path)
        if len(samples) != cfg.clip_length:
            return None
        clips[(i, j)] = AudioClip(samples, window_applied=True, source_cell=(i, j))
    if len(clips) != spec.n * spec.n:
        return None
    return clips


def _cache_store(cache_dir, digest: str, cfg: SynthConfig, spec: GridSpec, clips: dict) -> None:
    from .modelio import write_wav_f32
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    entries = {}
    for (i, j), clip in sorted(clips.items()):
        fname = f"cell_{i}_{j}.wav"
        write_wav_f32(cache_dir / fname, clip.samples, cfg.sample_rate)
        entries[f"{i},{j}"] = fname
    index = {"model": digest, "config": cfg.digest(), "n": spec.n, "clips": entries}
    (Path(cache_dir) / "index.json").write_text(json.dumps(index, indent=1, sort_keys=True))
