"""Seeded, splittable random source used by the instance generators.

The bit stream is numpy's PCG64 driven by a ``SeedSequence``; both are
versioned, platform-independent algorithms, so a given seed produces the same
uniform doubles everywhere.  Gaussian deviates are produced here with the
basic Box-Muller transform rather than numpy's ziggurat sampler so the
consumption order is explicit:

* each call to :meth:`SpinRNG.normal` that finds no cached deviate draws two
  uniforms ``u1, u2`` (in that order), returns ``r*cos(2*pi*u2)`` and caches
  ``r*sin(2*pi*u2)`` for the next call, with ``r = sqrt(-2 log(1 - u1))``;
* :meth:`SpinRNG.uniform` always consumes exactly one double and does not
  touch the Gaussian cache.
"""

from __future__ import annotations

import math

import numpy as np


class SpinRNG:
    """Deterministic generator of uniforms and Gaussians from an integer seed."""

    def __init__(self, seed: int | np.random.SeedSequence):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            if int(seed) < 0:
                raise ValueError("seed must be non-negative")
            self._seq = np.random.SeedSequence(int(seed))
        self._bits = np.random.Generator(np.random.PCG64(self._seq))
        self._spare: float | None = None

    def uniform(self) -> float:
        """One double in [0, 1)."""
        return float(self._bits.random())

    def normal(self, scale: float = 1.0) -> float:
        """One Normal(0, scale**2) deviate."""
        if self._spare is not None:
            z, self._spare = self._spare, None
            return scale * z
        u1 = self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        theta = 2.0 * math.pi * u2
        self._spare = r * math.sin(theta)
        return scale * r * math.cos(theta)

    def spawn(self, k: int) -> list[SpinRNG]:
        """Independent child streams (SeedSequence spawning)."""
        return [SpinRNG(child) for child in self._seq.spawn(k)]
