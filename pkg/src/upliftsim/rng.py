"""Seedable counter-based random streams.

All randomness in the library flows through named Philox substreams.  Philox
is a counter-based 64-bit generator, so a stream is fully determined by its
key; we derive one independent key per ``(seed, purpose)`` pair by hashing.
Parallel workers therefore never share a stream as long as they use distinct
purposes, and any stream can be reproduced in isolation.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream_key(seed: int, purpose: str) -> int:
    """Derive a 128-bit Philox key from a base seed and a purpose label."""
    digest = hashlib.sha256(f"{seed}:{purpose}".encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def substream(seed: int, purpose: str) -> np.random.Generator:
    """Return an independent generator for the given (seed, purpose) pair."""
    return np.random.Generator(np.random.Philox(key=substream_key(seed, purpose)))


def substream_id(seed: int, purpose: str) -> str:
    """Human-readable stream identifier recorded in resolved configs."""
    return f"philox:{seed}:{purpose}"
