"""Reproducible random streams.

Every replicate and every Monte Carlo chunk owns one ``RngStream``. Streams are
keyed by ``(seed, stream_id)`` and built on numpy's counter-based Philox bit
generator seeded through a ``SeedSequence`` spawn key, so two streams with
different ids are independent and any stream can be rebuilt on its own.
"""
import numpy as np

from src.utils.errors import DomainError

_UINT64 = 1 << 64


def _check_uint64(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise DomainError("%s must be an integer, got %r" % (name, value))
    if not 0 <= int(value) < _UINT64:
        raise DomainError("%s must fit in 64 unsigned bits, got %r" % (name, value))
    return int(value)


def stream_id(cell, index):
    """Pack a grid-cell number and a replicate/chunk index into one 64-bit id."""
    cell = _check_uint64("cell", cell)
    index = _check_uint64("index", index)
    if cell >= 1 << 32 or index >= 1 << 32:
        raise DomainError("cell and index must each fit in 32 bits")
    return (cell << 32) | index


class RngStream:
    def __init__(self, seed, stream_id=0):
        self.seed = _check_uint64("seed", seed)
        self.stream_id = _check_uint64("stream_id", stream_id)
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def __repr__(self):
        return "RngStream(seed=%d, stream_id=%d)" % (self.seed, self.stream_id)


def as_generator(rng):
    """Accept an ``RngStream`` or a bare numpy ``Generator``."""
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("expected RngStream or numpy Generator, got %s" % type(rng).__name__)
