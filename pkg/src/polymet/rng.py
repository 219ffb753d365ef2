"""Counter-based random streams.

Every randomized check draws from ``Philox4x64-10`` keyed by the 128-bit value
``seed | (stream_id << 64)``, where ``stream_id`` is the first eight bytes
(little endian) of ``blake2b(name, digest_size=8)`` for the dot-joined stream
name.  The counter starts at zero, so a (seed, name) pair names one
reproducible sequence no matter which other streams were consumed before it.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def stream_id(*names):
    label = ".".join(str(n) for n in names).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(label, digest_size=8).digest(), "little")


def generator(seed, *names):
    """Return a numpy Generator for the named substream of ``seed``."""
    key = (int(seed) & _MASK64) | (stream_id(*names) << 64)
    return np.random.Generator(np.random.Philox(key=key))
