"""Generator/discriminator pair trained lockstep at batch size one.

The generator maps a 2-vector latent to a 64x64 single-channel image in
[-1, 1]; the discriminator maps such an image to one raw logit. Layer
plan and the resulting budgets (exact, bias included):

    generator                            discriminator
    dense 2 -> 8*8*256        49,152     conv 5x5/2   1 ->  64     1,664
    tconv 5x5/2 256 -> 128   819,200     conv 5x5/2  64 -> 128   204,928
    batchnorm 128                256     dense 32768 -> 1        32,769
    tconv 5x5/2 128 ->  64   204,800     ------------------------------
    batchnorm  64                128     total                  239,361
    tconv 5x5/2  64 ->   1     1,601
    ------------------------------
    total                  1,075,137
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .config import SynthConfig
from .errors import ShapeError, TrainingDiverged
from .tensor import (BatchNorm, Parameter, Tensor, add, add_channel_bias, adam_step,
                     backward, bce_with_logits, conv2d_forward, dense_forward, flatten,
                     leaky_relu, reshape, scale, tanh, tconv2d_forward, zero_grads)

Array = np.ndarray

LATENT_DIM = 2
KERNEL = 5


# ---------------------------------------------------------------------------
# initializers

def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02,
                 dtype=np.float32) -> Array:
    """Normal(0, std) with draws beyond two deviations resampled."""
    out = rng.standard_normal(shape) * std
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum())) * std
        bad = np.abs(out) > 2 * std
    return out.astype(dtype)


def uniform_fan(rng: np.random.Generator, shape, fan_in: int, dtype=np.float32) -> Array:
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


# ---------------------------------------------------------------------------
# networks

class Generator:
    """dense -> reshape 8x8x256 -> two tconv+BN stages -> tconv head -> tanh."""

    def __init__(self, cfg: SynthConfig = SynthConfig(),
                 rng: Optional[np.random.Generator] = None, dtype=np.float32):
        if rng is None:
            rng = np.random.default_rng(0)
        self.cfg = cfg
        size = cfg.image_size
        if size % 8:
            raise ShapeError(f"image size {size} is not divisible by the 8x upsampling chain")
        self.base = size // 8
        n0 = self.base * self.base * 256
        self.dense_w = Parameter(uniform_fan(rng, (LATENT_DIM, n0), LATENT_DIM, dtype), "g.dense.w")
        self.dense_b = Parameter(uniform_fan(rng, (n0,), LATENT_DIM, dtype), "g.dense.b")
        self.t1_k = Parameter(trunc_normal(rng, (KERNEL, KERNEL, 128, 256), dtype=dtype), "g.t1.k")
        self.bn1 = BatchNorm(128, "g.bn1", dtype=dtype, eps=cfg.bn_eps, momentum=cfg.bn_momentum)
        self.t2_k = Parameter(trunc_normal(rng, (KERNEL, KERNEL, 64, 128), dtype=dtype), "g.t2.k")
        self.bn2 = BatchNorm(64, "g.bn2", dtype=dtype, eps=cfg.bn_eps, momentum=cfg.bn_momentum)
        self.head_k = Parameter(trunc_normal(rng, (KERNEL, KERNEL, 1, 64), dtype=dtype), "g.head.k")
        self.head_b = Parameter(np.zeros(1, dtype=dtype), "g.head.b")

    def parameters(self) -> list[Parameter]:
        return [self.dense_w, self.dense_b, self.t1_k, *self.bn1.parameters(),
                self.t2_k, *self.bn2.parameters(), self.head_k, self.head_b]

    def __call__(self, z: Tensor, mode: str = "train") -> Tensor:
        if z.data.ndim != 2 or z.shape[1] != LATENT_DIM:
            raise ShapeError(f"latent batch must be [B, {LATENT_DIM}], got {tuple(z.shape)}")
        slope = self.cfg.leaky_slope
        h = dense_forward(z, self.dense_w, self.dense_b)
        h = reshape(h, (z.shape[0], self.base, self.base, 256))
        h = leaky_relu(h, slope)
        h = leaky_relu(self.bn1(tconv2d_forward(h, self.t1_k, 2), mode), slope)
        h = leaky_relu(self.bn2(tconv2d_forward(h, self.t2_k, 2), mode), slope)
        h = add_channel_bias(tconv2d_forward(h, self.head_k, 2), self.head_b)
        return tanh(h)

    def generate(self, z: Array, mode: str = "infer") -> Array:
        """Latents [B,2] (or a single 2-vector) -> images [B,64,64] in [-1,1]."""
        z = np.asarray(z, dtype=np.float32)
        if z.ndim == 1:
            z = z[None, :]
        return self(Tensor(z), mode).data[:, :, :, 0]


class Discriminator:
    """Two strided conv stages then a single-logit dense readout."""

    def __init__(self, cfg: SynthConfig = SynthConfig(),
                 rng: Optional[np.random.Generator] = None, dtype=np.float32):
        if rng is None:
            rng = np.random.default_rng(0)
        self.cfg = cfg
        size = cfg.image_size
        self.c1_k = Parameter(trunc_normal(rng, (KERNEL, KERNEL, 1, 64), dtype=dtype), "d.c1.k")
        self.c1_b = Parameter(np.zeros(64, dtype=dtype), "d.c1.b")
        self.c2_k = Parameter(trunc_normal(rng, (KERNEL, KERNEL, 64, 128), dtype=dtype), "d.c2.k")
        self.c2_b = Parameter(np.zeros(128, dtype=dtype), "d.c2.b")
        n_flat = (size // 4) * (size // 4) * 128
        self.dense_w = Parameter(uniform_fan(rng, (n_flat, 1), n_flat, dtype), "d.dense.w")
        self.dense_b = Parameter(uniform_fan(rng, (1,), n_flat, dtype), "d.dense.b")

    def parameters(self) -> list[Parameter]:
        return [self.c1_k, self.c1_b, self.c2_k, self.c2_b, self.dense_w, self.dense_b]

    def __call__(self, x: Tensor) -> Tensor:
        size = self.cfg.image_size
        if x.data.ndim != 4 or x.shape[1:] != (size, size, 1):
            raise ShapeError(f"discriminator input must be [B,{size},{size},1], got {tuple(x.shape)}")
        slope = self.cfg.leaky_slope
        h = leaky_relu(add_channel_bias(conv2d_forward(x, self.c1_k, 2), self.c1_b), slope)
        h = leaky_relu(add_channel_bias(conv2d_forward(h, self.c2_k, 2), self.c2_b), slope)
        return dense_forward(flatten(h), self.dense_w, self.dense_b)

    def score(self, images: Array) -> Array:
        """Images [B,64,64] or [64,64] -> raw logits [B]."""
        images = np.asarray(images, dtype=np.float32)
        if images.ndim == 2:
            images = images[None, :, :]
        return self(Tensor(images[:, :, :, None])).data[:, 0]


def param_count(params: Iterable[Parameter]) -> int:
    return sum(p.data.size for p in params)


def generator_forward(gen: Generator, z: Array, mode: str = "infer") -> Array:
    return gen.generate(z, mode)


def discriminator_forward(disc: Discriminator, images: Array) -> Array:
    return disc.score(images)


# ---------------------------------------------------------------------------
# losses

def generator_loss(fake_logit: Tensor, literal: bool = False) -> Tensor:
    """Non-saturating form by default: minimize -log D(G(z)).

    The literal minimax form (minimize log(1 - D(G(z)))) is kept behind a
    flag; it optimizes the same fixed point but starves the generator of
    gradient whenever the discriminator is confident.
    """
    if literal:
        return scale(bce_with_logits(fake_logit, 0.0), -1.0)
    return bce_with_logits(fake_logit, 1.0)


def discriminator_loss(real_logit: Tensor, fake_logit: Tensor) -> Tensor:
    return add(bce_with_logits(real_logit, 1.0), bce_with_logits(fake_logit, 0.0))


# ---------------------------------------------------------------------------
# training

@dataclass
class TrainState:
    generator: Generator
    discriminator: Discriminator
    cfg: SynthConfig
    seed: int = 0
    epoch: int = 0
    step: int = 0
    step_losses: list = field(default_factory=list)   # (epoch, step, g, d)

    def epoch_means(self) -> list[tuple[int, float, float]]:
        out: dict[int, list] = {}
        for epoch, _, g, d in self.step_losses:
            out.setdefault(epoch, []).append((g, d))
        return [(e, float(np.mean([v[0] for v in vals])), float(np.mean([v[1] for v in vals])))
                for e, vals in sorted(out.items())]


def build_models(cfg: SynthConfig = SynthConfig(), seed: int = 0) -> TrainState:
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    return TrainState(Generator(cfg, rng), Discriminator(cfg, rng), cfg, seed=seed)


def _pixels(image) -> Array:
    px = image.pixels if hasattr(image, "pixels") else image
    return np.asarray(px, dtype=np.float32)


def train_step(state: TrainState, image, rng: np.random.Generator,
               literal: bool = False, hook: Optional[Callable] = None) -> tuple[float, float]:
    """One lockstep update: generator first, then the discriminator on the
    very same fake (detached), never a fresh draw."""
    gen, disc = state.generator, state.discriminator
    g_params, d_params = gen.parameters(), disc.parameters()
    px = _pixels(image)
    size = state.cfg.image_size
    if px.shape != (size, size):
        raise ShapeError(f"training image must be {size}x{size}, got {tuple(px.shape)}")

    z = rng.standard_normal((1, LATENT_DIM)).astype(np.float32)
    fake = gen(Tensor(z), mode="train")
    loss_g = generator_loss(disc(fake), literal)
    zero_grads(g_params)
    zero_grads(d_params)
    backward(loss_g, g_params)
    adam_step(g_params, state.cfg.adam_lr, state.cfg.adam_beta1,
              state.cfg.adam_beta2, state.cfg.adam_eps)
    if hook:
        hook("g_step", fake.data)

    fake_detached = Tensor(fake.data)      # same buffer, no graph edge
    real = Tensor(px[None, :, :, None])
    loss_d = discriminator_loss(disc(real), disc(fake_detached))
    zero_grads(d_params)
    backward(loss_d, d_params)
    adam_step(d_params, state.cfg.adam_lr, state.cfg.adam_beta1,
              state.cfg.adam_beta2, state.cfg.adam_eps)
    if hook:
        hook("d_step", fake_detached.data)

    g_val, d_val = float(loss_g.data), float(loss_d.data)
    if not (np.isfinite(g_val) and np.isfinite(d_val)):
        raise TrainingDiverged(f"non-finite loss at step {state.step}: g={g_val} d={d_val}")
    state.step_losses.append((state.epoch, state.step, g_val, d_val))
    state.step += 1
    return g_val, d_val


def train(images, cfg: SynthConfig = SynthConfig(), seed: int = 0,
          epochs: Optional[int] = None, state: Optional[TrainState] = None,
          literal: bool = False, log: Optional[Callable[[str], None]] = None,
          hook: Optional[Callable] = None) -> TrainState:
    """Train to `epochs` total, resumable: each epoch draws from its own
    seed stream, so a run stopped and reloaded replays identically."""
    if state is None:
        state = build_models(cfg, seed)
    total = cfg.epochs if epochs is None else epochs
    pixel_list = [_pixels(im) for im in images]
    if not pixel_list:
        raise ValueError("empty training set")
    while state.epoch < total:
        rng = np.random.default_rng(np.random.SeedSequence([state.seed, state.epoch]))
        order = rng.permutation(len(pixel_list))
        g_vals, d_vals = [], []
        for i in order:
            g_val, d_val = train_step(state, pixel_list[i], rng, literal, hook)
            g_vals.append(g_val)
            d_vals.append(d_val)
        if log:
            log(f"epoch {state.epoch + 1}/{total} g={np.mean(g_vals):.4f} d={np.mean(d_vals):.4f}")
        state.epoch += 1
    return state
