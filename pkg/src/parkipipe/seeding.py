"""Labelled random substreams derived from one integer seed."""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def substream(seed: int, *keys) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``; string keys are hashed with CRC32."""
    return np.random.default_rng(np.random.SeedSequence([int(seed)] + [_key(k) for k in keys]))


def derive_seed(seed: int, *keys) -> int:
    return int(np.random.SeedSequence([int(seed)] + [_key(k) for k in keys]).generate_state(1)[0])
