"""
Named, independent random streams

Each consumer (noise, subsample, collocation, extraction, init.U, init.N)
draws from its own child of one SeedSequence, so extra draws in one stream
never shift another.
"""

import zlib

import numpy as np

STREAM_NAMES = ("noise", "subsample", "collocation", "extraction", "init.U", "init.N")


def stream_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Generator for stream `name` under the run seed"""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(stream_key(name),)))
