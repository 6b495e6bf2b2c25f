"""Named random sub-streams derived from one root seed."""

import zlib
from typing import Dict

import numpy as np


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def named_generator(seed: int, name: str) -> np.random.Generator:
    """Generator for the sub-stream ``name``; independent of which other streams exist."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream_key(name),)))


class RandomStreams:
    """Lazily created, per-name generators of one run.

    Asking for a stream never advances another, so switching a subsystem on or
    off leaves the draws of the others unchanged.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._generators: Dict[str, np.random.Generator] = {}

    def __getitem__(self, name: str) -> np.random.Generator:
        if name not in self._generators:
            self._generators[name] = named_generator(self.seed, name)
        return self._generators[name]

    def sub_seed(self, name: str) -> int:
        """Integer seed for APIs that take a seed (e.g. Monte-Carlo resampling)."""
        return int(np.random.SeedSequence(entropy=self.seed, spawn_key=(stream_key(name),)).generate_state(1)[0])
