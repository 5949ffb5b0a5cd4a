"""Persistence: checkpoint round-trips, corruption detection, datasets, WAV, PNG."""

import struct
import zlib

import numpy as np
import pytest

from snakesynth.config import SynthConfig
from snakesynth.errors import FormatError
from snakesynth.features import tone_dataset
from snakesynth.gan import build_models, train
from snakesynth.modelio import (MAGIC, VERSION, load_dataset, load_model, params_digest,
                                png_gray_bytes, read_wav_f32, save_dataset, save_model,
                                write_wav_f32, write_wav_pcm16)

CFG = SynthConfig()


def _images(n=2):
    return [np.random.default_rng(s).uniform(-1, 1, (64, 64)).astype(np.float32)
            for s in range(n)]


def _trained_state(epochs=1, seed=3):
    return train(_images(), CFG, seed=seed, epochs=epochs)


def _all_params(state):
    return state.generator.parameters() + state.discriminator.parameters()


class TestModelRoundTrip:
    def test_bitwise_state_recovery(self, tmp_path):
        state = _trained_state()
        digest = save_model(tmp_path / "m.ssyn", state)
        loaded = load_model(tmp_path / "m.ssyn", CFG)
        assert digest == params_digest(_all_params(loaded))
        by_name = {p.name: p for p in _all_params(loaded)}
        for p in _all_params(state):
            q = by_name[p.name]
            assert np.array_equal(p.data, q.data)
            assert np.array_equal(p.adam_m, q.adam_m)
            assert np.array_equal(p.adam_v, q.adam_v)
            assert p.step_count == q.step_count
        for a, b in ((state.generator.bn1, loaded.generator.bn1),
                     (state.generator.bn2, loaded.generator.bn2)):
            assert np.array_equal(a.stats.mean, b.stats.mean)
            assert np.array_equal(a.stats.var, b.stats.var)
            assert a.stats.count == b.stats.count
        assert (loaded.epoch, loaded.step, loaded.seed) == (state.epoch, state.step, state.seed)

    def test_forward_bitwise_after_load(self, tmp_path):
        state = _trained_state()
        save_model(tmp_path / "m.ssyn", state)
        loaded = load_model(tmp_path / "m.ssyn", CFG)
        z = np.array([[0.5, -1.0]], dtype=np.float32)
        a = state.generator.generate(z, mode="infer")
        b = loaded.generator.generate(z, mode="infer")
        assert a.tobytes() == b.tobytes()
        img = _images(1)[0]
        assert (state.discriminator.score(img[None]).tobytes()
                == loaded.discriminator.score(img[None]).tobytes())

    def test_large_seed_survives(self, tmp_path):
        state = build_models(CFG, seed=0xDEADBEEFCAFE)
        save_model(tmp_path / "m.ssyn", state)
        assert load_model(tmp_path / "m.ssyn", CFG).seed == 0xDEADBEEFCAFE


class TestCorruptionDetection:
    def test_truncation_rejected(self, tmp_path):
        state = build_models(CFG, seed=0)
        path = tmp_path / "m.ssyn"
        save_model(path, state)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(FormatError, match="checksum|truncated"):
            load_model(path, CFG)
        path.write_bytes(blob[:8])
        with pytest.raises(FormatError, match="truncated"):
            load_model(path, CFG)

    def test_single_byte_flip_rejected(self, tmp_path):
        state = build_models(CFG, seed=0)
        path = tmp_path / "m.ssyn"
        save_model(path, state)
        blob = bytearray(path.read_bytes())
        blob[len(blob) // 2] ^= 0x40
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="checksum"):
            load_model(path, CFG)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "m.ssyn"
        payload = b"NOPE" + struct.pack("<H", VERSION) + b"\x00" * 16
        path.write_bytes(payload + struct.pack("<I", zlib.crc32(payload)))
        with pytest.raises(FormatError, match="magic"):
            load_model(path, CFG)

    def test_version_mismatch_names_both(self, tmp_path):
        state = build_models(CFG, seed=0)
        path = tmp_path / "m.ssyn"
        save_model(path, state)
        payload = bytearray(path.read_bytes()[:-4])
        payload[4:6] = struct.pack("<H", 2)
        path.write_bytes(bytes(payload) + struct.pack("<I", zlib.crc32(bytes(payload))))
        with pytest.raises(FormatError, match=r"version 2.*version 1"):
            load_model(path, CFG)

    def test_config_mismatch_refused(self, tmp_path):
        state = build_models(CFG, seed=0)
        path = tmp_path / "m.ssyn"
        save_model(path, state)
        with pytest.raises(FormatError, match="config"):
            load_model(path, CFG.with_overrides(epochs=299))

    def test_foreign_tensor_names_rejected(self, tmp_path):
        digest = CFG.digest().encode()
        record_name = b"bogus"
        record = (struct.pack("<I", len(record_name)) + record_name
                  + struct.pack("<B", 1) + struct.pack("<I", 2)
                  + np.zeros(2, dtype="<f4").tobytes())
        payload = (MAGIC + struct.pack("<H", VERSION)
                   + struct.pack("<I", len(digest)) + digest
                   + struct.pack("<I", 1) + record)
        path = tmp_path / "m.ssyn"
        path.write_bytes(payload + struct.pack("<I", zlib.crc32(payload)))
        with pytest.raises(FormatError, match="do not match"):
            load_model(path, CFG)

    def test_trailing_bytes_rejected(self, tmp_path):
        state = build_models(CFG, seed=0)
        path = tmp_path / "m.ssyn"
        save_model(path, state)
        payload = path.read_bytes()[:-4] + b"\x00\x00"
        path.write_bytes(payload + struct.pack("<I", zlib.crc32(payload)))
        with pytest.raises(FormatError, match="trailing"):
            load_model(path, CFG)


class TestResume:
    def test_split_training_matches_straight_run(self, tmp_path):
        images = _images(4)
        full = train(images, CFG, seed=13, epochs=4)

        half = train(images, CFG, seed=13, epochs=2)
        save_model(tmp_path / "half.ssyn", half)
        resumed = load_model(tmp_path / "half.ssyn", CFG)
        assert resumed.epoch == 2
        resumed = train(images, CFG, epochs=4, state=resumed)

        assert params_digest(_all_params(full)) == params_digest(_all_params(resumed))
        tail = [row for row in full.step_losses if row[0] >= 2]
        assert resumed.step_losses == tail


class TestDataset:
    def test_round_trip(self, tmp_path):
        images, freqs = tone_dataset(3, CFG)
        manifest = [{"file": f"tone{f:.0f}.wav", "config": CFG.digest()} for f in freqs]
        save_dataset(tmp_path / "d.npz", images, manifest, CFG)
        loaded = load_dataset(tmp_path / "d.npz", CFG)
        assert len(loaded) == 3
        for a, b in zip(images, loaded):
            assert np.array_equal(a.pixels, b.pixels)
            assert a.meta.ref_power == pytest.approx(b.meta.ref_power)
            assert a.meta.silent == b.meta.silent
        side = (tmp_path / "d.manifest.jsonl").read_text().strip().splitlines()
        assert len(side) == 3

    def test_config_refusal(self, tmp_path):
        images, _ = tone_dataset(2, CFG)
        save_dataset(tmp_path / "d.npz", images, [], CFG)
        with pytest.raises(FormatError, match="config"):
            load_dataset(tmp_path / "d.npz", CFG.with_overrides(fmax=7000.0))


class TestWav:
    def test_f32_bitwise(self, tmp_path):
        x = np.random.default_rng(0).standard_normal(1000).astype(np.float32) * 0.5
        write_wav_f32(tmp_path / "x.wav", x, 16000)
        assert np.array_equal(read_wav_f32(tmp_path / "x.wav"), x)

    def test_f32_reader_rejects_pcm(self, tmp_path):
        write_wav_pcm16(tmp_path / "p.wav", np.zeros(10, dtype=np.int16), 16000)
        with pytest.raises(FormatError, match="float32"):
            read_wav_f32(tmp_path / "p.wav")


class TestPng:
    def _chunks(self, blob):
        assert blob[:8] == b"\x89PNG\r\n\x1a\n"
        pos, out = 8, []
        while pos < len(blob):
            (size,) = struct.unpack(">I", blob[pos:pos + 4])
            tag = blob[pos + 4:pos + 8]
            data = blob[pos + 8:pos + 8 + size]
            (crc,) = struct.unpack(">I", blob[pos + 8 + size:pos + 12 + size])
            assert crc == zlib.crc32(tag + data)
            out.append((tag, data))
            pos += 12 + size
        return out

    def test_structure_and_pixels(self):
        img = np.arange(64 * 32, dtype=np.uint8).reshape(32, 64)
        chunks = self._chunks(png_gray_bytes(img))
        assert [t for t, _ in chunks] == [b"IHDR", b"IDAT", b"IEND"]
        w, h, depth, color = struct.unpack(">IIBB", chunks[0][1][:10])
        assert (w, h, depth, color) == (64, 32, 8, 0)
        raw = zlib.decompress(chunks[1][1])
        rows = np.frombuffer(raw, dtype=np.uint8).reshape(32, 65)
        assert np.all(rows[:, 0] == 0)                 # filter byte per scanline
        assert np.array_equal(rows[:, 1:], img)

    def test_deterministic(self):
        img = np.random.default_rng(1).integers(0, 256, (64, 64)).astype(np.uint8)
        assert png_gray_bytes(img) == png_gray_bytes(img)

    def test_rejects_wrong_dtype(self):
        with pytest.raises(FormatError, match="uint8"):
            png_gray_bytes(np.zeros((4, 4), dtype=np.float32))
