"""Seeded random streams.

Every sampler in this package is a deterministic function of a
``RandomStream``: the same (seed, stream_id) pair reproduces the identical
sample sequence, and distinct stream_ids give independent streams.  Streams
are derived through numpy's ``SeedSequence`` spawn-key mechanism, which is
designed exactly for this kind of keyed substream construction.

Streams must not be shared across concurrent callers; parallel work should
allocate one stream per task.
"""

from __future__ import annotations

import numpy as np


class RandomStream:
    """A seeded, keyed source of uniforms and normals.

    Uniform draws are from the open interval (0, 1): a raw 0.0 from the
    bit generator (probability ~2^-53) is redrawn so that log/division
    transforms downstream never see an endpoint.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"

    def uniform(self) -> float:
        u = self._gen.random()
        while u == 0.0:
            u = self._gen.random()
        return u

    def uniforms(self, n: int) -> np.ndarray:
        u = self._gen.random(n)
        mask = u == 0.0
        while mask.any():
            u[mask] = self._gen.random(int(mask.sum()))
            mask = u == 0.0
        return u

    def standard_normal(self) -> float:
        return float(self._gen.standard_normal())

    def standard_normals(self, n: int) -> np.ndarray:
        return self._gen.standard_normal(n)

    def exponential(self) -> float:
        return float(self._gen.standard_exponential())

    def exponentials(self, n: int) -> np.ndarray:
        return self._gen.standard_exponential(n)
