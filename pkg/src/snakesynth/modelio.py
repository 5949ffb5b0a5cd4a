"""Persistence: model checkpoints, datasets, WAV clips, PNG mosaics.

Checkpoint layout (all little-endian):

    "SSYN" | u16 version | u32 config-digest length + utf8 digest
    | u32 tensor count | records | u32 CRC32 of every preceding byte

    record := u32 name length | utf8 name | u8 rank | u32*rank extents
              | float32 payload

Alongside the trainable tensors the file carries batchnorm running stats,
Adam moments, and step/epoch counters as extra records, so a loaded model
resumes training on the exact trajectory it left. Integers ride in
float32 records; counters stay far below 2**24 so the encoding is exact,
and the seed is split into 16-bit limbs.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .config import SynthConfig, config_from_json
from .errors import FormatError
from .gan import TrainState, build_models
from .tensor import Parameter

Array = np.ndarray

MAGIC = b"SSYN"
VERSION = 1
ARCH = "snakesynth-dcgan-v1"

_EXACT_LIMIT = 2 ** 24   # largest integer float32 represents exactly


# ---------------------------------------------------------------------------
# tensor record encoding

def _pack_record(name: str, arr: Array) -> bytes:
    data = np.ascontiguousarray(arr, dtype="<f4")
    nb = name.encode("utf-8")
    head = struct.pack("<I", len(nb)) + nb + struct.pack("<B", data.ndim)
    head += struct.pack(f"<{data.ndim}I", *data.shape)
    return head + data.tobytes()


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise FormatError("model file truncated")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]


def _unpack_record(r: _Reader) -> tuple[str, Array]:
    name = r.take(r.u32()).decode("utf-8")
    rank = r.u8()
    shape = tuple(r.u32() for _ in range(rank))
    count = int(np.prod(shape)) if shape else 1
    data = np.frombuffer(r.take(4 * count), dtype="<f4").reshape(shape)
    return name, data.copy()


def _int_record(value: int) -> Array:
    if not 0 <= value < _EXACT_LIMIT:
        raise FormatError(f"counter {value} too large for exact float32 storage")
    return np.array([value], dtype=np.float32)


def _seed_record(seed: int) -> Array:
    limbs = [(seed >> (16 * k)) & 0xFFFF for k in range(4)]
    return np.array(limbs, dtype=np.float32)


def _seed_from(arr: Array) -> int:
    return sum(int(v) << (16 * k) for k, v in enumerate(arr))


# ---------------------------------------------------------------------------
# model save/load

def _state_tensors(state: TrainState) -> dict:
    out: dict[str, Array] = {}
    for p in state.generator.parameters() + state.discriminator.parameters():
        out[p.name] = p.data
        out[f"adam.m.{p.name}"] = p.adam_m
        out[f"adam.v.{p.name}"] = p.adam_v
        out[f"meta.steps.{p.name}"] = _int_record(p.step_count)
    for label, bn in (("g.bn1", state.generator.bn1), ("g.bn2", state.generator.bn2)):
        out[f"{label}.mean"] = bn.stats.mean
        out[f"{label}.var"] = bn.stats.var
        out[f"{label}.count"] = _int_record(bn.stats.count)
    out["meta.epoch"] = _int_record(state.epoch)
    out["meta.step"] = _int_record(state.step)
    out["meta.seed"] = _seed_record(state.seed)
    return out


def save_model(path, state: TrainState) -> str:
    """Write a checkpoint; returns the digest of the trainable tensors."""
    tensors = _state_tensors(state)
    body = [MAGIC, struct.pack("<H", VERSION)]
    digest = state.cfg.digest().encode("utf-8")
    body.append(struct.pack("<I", len(digest)) + digest)
    body.append(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        body.append(_pack_record(name, tensors[name]))
    blob = b"".join(body)
    Path(path).write_bytes(blob + struct.pack("<I", zlib.crc32(blob)))
    return params_digest(state.generator.parameters() + state.discriminator.parameters())


def load_model(path, cfg: SynthConfig = SynthConfig()) -> TrainState:
    """Checksum-verified load; refuses version or config mismatches."""
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 2 + 4 + 4 + 4:
        raise FormatError("model file truncated")
    payload, stored_crc = blob[:-4], struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(payload) != stored_crc:
        raise FormatError("model file checksum mismatch; refusing partial or corrupt data")
    r = _Reader(payload)
    if r.take(4) != MAGIC:
        raise FormatError("not a model file (bad magic)")
    version = struct.unpack("<H", r.take(2))[0]
    if version != VERSION:
        raise FormatError(f"model file version {version}, this build reads version {VERSION}")
    file_digest = r.take(r.u32()).decode("utf-8")
    if file_digest != cfg.digest():
        raise FormatError(f"model was built under config {file_digest[:12]}..., "
                          f"current config is {cfg.digest()[:12]}...; pass the matching config")
    count = r.u32()
    tensors = dict(_unpack_record(r) for _ in range(count))
    if r.pos != len(payload):
        raise FormatError(f"{len(payload) - r.pos} trailing bytes after tensor records")

    state = build_models(cfg, seed=0)
    expected = _state_tensors(state)
    missing = sorted(set(expected) - set(tensors))
    extra = sorted(set(tensors) - set(expected))
    if missing or extra:
        raise FormatError(f"tensor names do not match {ARCH}: "
                          f"missing {missing[:3]}, unexpected {extra[:3]}")
    for p in state.generator.parameters() + state.discriminator.parameters():
        for label, target in ((p.name, "data"), (f"adam.m.{p.name}", "adam_m"),
                              (f"adam.v.{p.name}", "adam_v")):
            arr = tensors[label]
            if arr.shape != p.data.shape:
                raise FormatError(f"tensor {label} has extents {arr.shape}, "
                                  f"architecture {ARCH} requires {p.data.shape}")
            setattr(p, target, arr.astype(np.float32))
        p.step_count = int(tensors[f"meta.steps.{p.name}"][0])
    for label, bn in (("g.bn1", state.generator.bn1), ("g.bn2", state.generator.bn2)):
        bn.stats.mean = tensors[f"{label}.mean"].astype(np.float32)
        bn.stats.var = tensors[f"{label}.var"].astype(np.float32)
        bn.stats.count = int(tensors[f"{label}.count"][0])
    state.epoch = int(tensors["meta.epoch"][0])
    state.step = int(tensors["meta.step"][0])
    state.seed = _seed_from(tensors["meta.seed"])
    return state


def params_digest(params: list[Parameter]) -> str:
    """Content address of the trainable tensors only."""
    h = hashlib.sha256()
    for p in sorted(params, key=lambda p: p.name):
        h.update(p.name.encode("utf-8"))
        h.update(np.ascontiguousarray(p.data, dtype="<f4").tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# datasets

def save_dataset(path, images, manifest, cfg: SynthConfig = SynthConfig()) -> None:
    """Images -> one .npz plus a JSONL manifest sidecar."""
    path = Path(path)
    pixels = np.stack([np.asarray(im.pixels, dtype=np.float32) for im in images])
    ref = np.array([im.meta.ref_power if im.meta else 1.0 for im in images])
    silent = np.array([bool(im.meta.silent) if im.meta else False for im in images])
    np.savez_compressed(path, pixels=pixels, ref_power=ref, silent=silent,
                        config=np.frombuffer(cfg.to_json().encode("utf-8"), dtype=np.uint8))
    side = path.with_suffix(".manifest.jsonl")
    with open(side, "w") as fh:
        for rec in manifest:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_dataset(path, cfg: SynthConfig = SynthConfig()):
    """Load images saved by save_dataset; refuses config mismatches."""
    from .features import NormMeta, SpectralImage
    path = Path(path)
    if path.suffix != ".npz" and not path.exists():
        path = path.with_suffix(".npz")
    with np.load(path) as z:
        stored = bytes(z["config"]).decode("utf-8")
        if config_from_json(stored).digest() != cfg.digest():
            raise FormatError("dataset was built under a different config; rebuild or pass it")
        pixels, ref, silent = z["pixels"], z["ref_power"], z["silent"]
    return [SpectralImage(px, NormMeta(ref_power=float(r), silent=bool(s)))
            for px, r, s in zip(pixels, ref, silent)]


# ---------------------------------------------------------------------------
# WAV and PNG

def write_wav_f32(path, samples: Array, sample_rate: int) -> None:
    wavfile.write(path, sample_rate, np.asarray(samples, dtype=np.float32))


def read_wav_f32(path) -> Array:
    _, data = wavfile.read(path)
    if data.dtype != np.float32:
        raise FormatError(f"{path}: expected float32 WAV, found {data.dtype}")
    return data


def write_wav_pcm16(path, samples_i16: Array, sample_rate: int) -> None:
    wavfile.write(path, sample_rate, np.asarray(samples_i16, dtype=np.int16))


def png_gray_bytes(img: Array) -> bytes:
    """Deterministic minimal 8-bit grayscale PNG encoding."""
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 2:
        raise FormatError(f"PNG writer needs a 2-D uint8 array, got {img.dtype} rank {img.ndim}")
    h, w = img.shape

    def chunk(tag: bytes, data: bytes) -> bytes:
        return (struct.pack(">I", len(data)) + tag + data
                + struct.pack(">I", zlib.crc32(tag + data)))

    raw = b"".join(b"\x00" + img[row].tobytes() for row in range(h))
    return (b"\x89PNG\r\n\x1a\n"
            + chunk(b"IHDR", struct.pack(">IIBBBBB", w, h, 8, 0, 0, 0, 0))
            + chunk(b"IDAT", zlib.compress(raw, 9))
            + chunk(b"IEND", b""))


def write_png_gray(path, img: Array) -> None:
    Path(path).write_bytes(png_gray_bytes(img))
