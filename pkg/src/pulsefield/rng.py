"""Counter-based random substreams.

Every draw in the package comes from a Philox-4x64 generator whose 128-bit
key is ``(seed, tag)``, where ``tag`` is a 64-bit digest of a stream name and
an optional integer label (usually a level index).  Streams with different
names or labels never share state, so materializing more levels leaves the
draws of existing levels untouched.
"""
from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stream_tag(name: str, label: int | None = None) -> int:
    h = hashlib.blake2b(digest_size=8, person=b"pulsefield")
    h.update(name.encode("utf-8"))
    if label is not None:
        h.update(b"/")
        h.update(int(label).to_bytes(8, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def substream(seed: int, name: str, label: int | None = None) -> np.random.Generator:
    """Return an independent generator for ``(seed, name, label)``."""
    if not 0 <= seed <= _MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    key = np.array([seed, stream_tag(name, label)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
