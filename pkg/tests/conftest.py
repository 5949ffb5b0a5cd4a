"""Shared fixtures. The desk-scale training run is session-scoped: the CLI
suite and the acceptance gate both read the one 300-epoch artifact."""

import time

import pytest

from snakesynth import modelio
from snakesynth.cli import main
from snakesynth.config import SynthConfig
from snakesynth.features import tone_dataset

CFG = SynthConfig()


class DeskRun:
    """8 synthetic-tone images, batch 1, 300 epochs, seed 7, via the CLI."""

    def __init__(self, root):
        self.root = root
        self.dataset = root / "desk.npz"
        self.model = root / "desk.ssyn"
        self.losses = root / "desk.losses.csv"
        images, freqs = tone_dataset(8, CFG)
        manifest = [{"file": f"tone-{f:.1f}hz", "config": CFG.digest()} for f in freqs]
        modelio.save_dataset(self.dataset, images, manifest, CFG)
        t0 = time.perf_counter()
        rc = main(["train", str(self.dataset), "--epochs", "300", "--seed", "7",
                   "--out", str(self.model), "--losses", str(self.losses)])
        self.train_seconds = time.perf_counter() - t0
        assert rc == 0


@pytest.fixture(scope="session")
def desk(tmp_path_factory):
    return DeskRun(tmp_path_factory.mktemp("desk"))
