"""Network layout, losses, and the lockstep training loop."""

import numpy as np
import pytest

from snakesynth.config import SynthConfig
from snakesynth.errors import ShapeError, TrainingDiverged
from snakesynth.gan import (Discriminator, Generator, build_models, discriminator_loss,
                            generator_loss, param_count, train, train_step)
from snakesynth.tensor import Tensor, backward

CFG = SynthConfig()


def zero_weights(net):
    for p in net.parameters():
        p.data[...] = 0.0


class TestArchitecture:
    def test_generator_budget_exact(self):
        gen = Generator(CFG, np.random.default_rng(0))
        assert param_count(gen.parameters()) == 1_075_137

    def test_discriminator_budget_exact(self):
        disc = Discriminator(CFG, np.random.default_rng(0))
        assert param_count(disc.parameters()) == 239_361

    def test_per_pixel_ratio(self):
        gen = Generator(CFG, np.random.default_rng(0))
        ratio = param_count(gen.parameters()) / (64 * 64)
        print(f"generator parameters per output pixel: {ratio:.1f}")
        assert 200 < ratio < 300

    def test_layer_breakdown(self):
        gen = Generator(CFG, np.random.default_rng(0))
        sizes = {p.name: p.data.size for p in gen.parameters()}
        assert sizes["g.dense.w"] == 2 * 16384 and sizes["g.dense.b"] == 16384
        assert sizes["g.t1.k"] == 5 * 5 * 128 * 256
        assert sizes["g.t2.k"] == 5 * 5 * 64 * 128
        assert sizes["g.head.k"] == 5 * 5 * 1 * 64 and sizes["g.head.b"] == 1

    def test_init_distributions(self):
        gen = Generator(CFG, np.random.default_rng(3))
        k = gen.t1_k.data
        assert np.abs(k).max() <= 0.04 + 1e-9          # truncated at two devs
        assert abs(k.std() - 0.0176) < 0.001           # std of a +-2 dev truncation
        limit = 1.0 / np.sqrt(2.0)
        assert np.abs(gen.dense_w.data).max() <= limit
        assert np.array_equal(gen.head_b.data, [0.0])
        assert np.all(gen.bn1.gamma.data == 1.0) and np.all(gen.bn1.beta.data == 0.0)


class TestGeneratorForward:
    def test_shape_and_bounds(self):
        gen = Generator(CFG, np.random.default_rng(1))
        out = gen.generate(np.random.default_rng(2).standard_normal((3, 2)), mode="batch")
        assert out.shape == (3, 64, 64)
        assert out.min() >= -1.0 and out.max() <= 1.0

    def test_zero_weights_zero_image(self):
        gen = Generator(CFG, np.random.default_rng(1))
        zero_weights(gen)
        gen.bn1.gamma.data[...] = 1.0
        gen.bn2.gamma.data[...] = 1.0
        out = gen.generate(np.zeros((1, 2)), mode="batch")
        assert np.abs(out).max() == 0.0

    def test_determinism_across_builds(self):
        z = np.array([[0.5, -0.5]], dtype=np.float32)
        a = Generator(CFG, np.random.default_rng(7)).generate(z, mode="batch")
        b = Generator(CFG, np.random.default_rng(7)).generate(z, mode="batch")
        assert a.tobytes() == b.tobytes()

    def test_latent_shape_rejected(self):
        gen = Generator(CFG, np.random.default_rng(1))
        with pytest.raises(ShapeError):
            gen(Tensor(np.zeros((1, 3), dtype=np.float32)))


class TestDiscriminatorForward:
    def test_zero_weights_zero_logit(self):
        disc = Discriminator(CFG, np.random.default_rng(1))
        zero_weights(disc)
        logit = disc.score(np.random.default_rng(2).uniform(-1, 1, (64, 64)))
        assert logit.shape == (1,) and logit[0] == 0.0

    def test_logit_unbounded(self):
        disc = Discriminator(CFG, np.random.default_rng(1))
        disc.dense_b.data[...] = 3.0        # bias is a weight; no clamp may hide it
        logit = disc.score(np.zeros((64, 64), dtype=np.float32))
        assert abs(float(logit[0])) > 1.0

    def test_identical_inputs_identical_logits(self):
        disc = Discriminator(CFG, np.random.default_rng(4))
        img = np.random.default_rng(5).uniform(-1, 1, (64, 64)).astype(np.float32)
        logits = disc.score(np.stack([img, img]))
        assert logits[0] == logits[1]

    def test_wrong_extent_rejected(self):
        disc = Discriminator(CFG, np.random.default_rng(1))
        with pytest.raises(ShapeError):
            disc.score(np.zeros((32, 32), dtype=np.float32))


class TestLosses:
    def test_discriminator_loss_values(self):
        zero = Tensor(np.zeros((1, 1)))
        loss = discriminator_loss(zero, zero)
        assert abs(loss.data.item() - 2.0 * np.log(2.0)) < 1e-9
        sharp = discriminator_loss(Tensor(np.full((1, 1), 20.0)),
                                   Tensor(np.full((1, 1), -20.0)))
        assert sharp.data.item() < 1e-6

    def test_discriminator_loss_naive_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            r, f = rng.standard_normal(2) * 4
            got = discriminator_loss(Tensor(np.full((1, 1), r)),
                                     Tensor(np.full((1, 1), f))).data.item()
            sig = lambda v: 1.0 / (1.0 + np.exp(-v))
            want = -(np.log(sig(r)) + np.log(1.0 - sig(f)))
            assert abs(got - want) < 1e-9

    def test_generator_loss_values(self):
        assert abs(generator_loss(Tensor(np.zeros((1, 1)))).data.item()
                   - np.log(2.0)) < 1e-9
        assert generator_loss(Tensor(np.full((1, 1), 20.0))).data.item() < 1e-6

    def test_generator_gradient_sign(self):
        for logit in np.linspace(-10, 10, 9):
            t = Tensor(np.full((1, 1), logit), requires_grad=True)
            backward(generator_loss(t))
            assert t.grad.item() < 0.0
            t2 = Tensor(np.full((1, 1), logit), requires_grad=True)
            backward(generator_loss(t2, literal=True))
            assert t2.grad.item() < 0.0

    def test_zero_sum_monotonicity(self):
        logits = np.linspace(-6, 6, 25)
        g_losses = [generator_loss(Tensor(np.full((1, 1), l))).data.item() for l in logits]
        fake_terms = [discriminator_loss(Tensor(np.zeros((1, 1))),
                                         Tensor(np.full((1, 1), l))).data.item()
                      for l in logits]
        assert all(a > b for a, b in zip(g_losses, g_losses[1:]))
        assert all(a < b for a, b in zip(fake_terms, fake_terms[1:]))


def _image(seed=0):
    return np.random.default_rng(seed).uniform(-1, 1, (64, 64)).astype(np.float32)


class TestTrainStep:
    def test_updates_both_networks(self):
        state = build_models(CFG, seed=11)
        before_g = state.generator.dense_w.data.copy()
        before_d = state.discriminator.c1_k.data.copy()
        train_step(state, _image(), np.random.default_rng(0))
        assert not np.array_equal(before_g, state.generator.dense_w.data)
        assert not np.array_equal(before_d, state.discriminator.c1_k.data)

    def test_determinism_replay(self):
        runs = []
        for _ in range(2):
            state = build_models(CFG, seed=12)
            losses = train_step(state, _image(), np.random.default_rng(99))
            runs.append(losses)
        assert runs[0] == runs[1]

    def test_same_step_fake_reuse(self):
        state = build_models(CFG, seed=13)
        log = []
        train_step(state, _image(), np.random.default_rng(0),
                   hook=lambda stage, arr: log.append((stage, id(arr))))
        assert [stage for stage, _ in log] == ["g_step", "d_step"]
        assert log[0][1] == log[1][1], "discriminator saw a different fake"

    def test_divergence_detected(self):
        state = build_models(CFG, seed=14)
        state.generator.dense_w.data[...] = np.nan
        with pytest.raises(TrainingDiverged, match="step"):
            train_step(state, _image(), np.random.default_rng(0))

    def test_wrong_image_shape(self):
        state = build_models(CFG, seed=15)
        with pytest.raises(ShapeError):
            train_step(state, np.zeros((32, 32), dtype=np.float32),
                       np.random.default_rng(0))


class TestTrainLoop:
    def test_history_length_and_epochs(self):
        images = [_image(s) for s in range(4)]
        state = train(images, CFG, seed=5, epochs=3)
        assert len(state.step_losses) == 12
        assert state.epoch == 3 and state.step == 12
        assert [e for e, _, _, _ in state.step_losses] == [0] * 4 + [1] * 4 + [2] * 4
        assert all(np.isfinite(g) and np.isfinite(d) for _, _, g, d in state.step_losses)

    def test_shuffle_is_seeded_permutation(self):
        # the loop's epoch streams: SeedSequence([seed, epoch])
        for epoch in range(5):
            rng = np.random.default_rng(np.random.SeedSequence([5, epoch]))
            order = rng.permutation(4)
            assert sorted(order.tolist()) == [0, 1, 2, 3]

    def test_full_train_determinism(self):
        images = [_image(s) for s in range(3)]
        s1 = train(images, CFG, seed=21, epochs=2)
        s2 = train(images, CFG, seed=21, epochs=2)
        assert s1.step_losses == s2.step_losses
        assert s1.generator.dense_w.data.tobytes() == s2.generator.dense_w.data.tobytes()

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            train([], CFG, epochs=1)

    def test_literal_minimax_runs(self):
        state = train([_image()], CFG, seed=8, epochs=2, literal=True)
        assert all(np.isfinite(g) for _, _, g, _ in state.step_losses)

    def test_epoch_means(self):
        state = train([_image(s) for s in range(2)], CFG, seed=9, epochs=2)
        means = state.epoch_means()
        assert len(means) == 2 and means[0][0] == 0 and means[1][0] == 1
