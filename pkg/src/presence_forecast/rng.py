"""A small counter-based generator with a fixed, portable definition.

Draw ``i`` (counting from 1) of a stream keyed ``k`` is ``mix(k + i * GAMMA)``
modulo 2**64, where ``mix`` is the SplitMix64 finalizer::

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

Child streams are keyed by mixing the parent key with a label. Labels are
folded byte by byte (UTF-8) so the derivation does not depend on any
language's string hashing. Floats take the top 53 bits of a draw.
"""

from __future__ import annotations

import math
from statistics import NormalDist

MASK = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_STD = NormalDist()


def mix(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def _fold(key: int, label: str | int) -> int:
    data = str(label).encode("utf-8")
    h = mix(key ^ 0x6A09E667F3BCC909)
    for b in data:
        h = mix(h ^ b)
    return mix(h + len(data))


class Rng:
    """Counter-based stream; ``fork`` derives independent named substreams."""

    __slots__ = ("key", "counter")

    def __init__(self, seed: int, counter: int = 0):
        self.key = seed & MASK
        self.counter = counter

    def fork(self, *labels: str | int) -> "Rng":
        key = self.key
        for label in labels:
            key = _fold(key, label)
        return Rng(key)

    def next_u64(self) -> int:
        self.counter += 1
        return mix(self.key + self.counter * GAMMA)

    def random(self) -> float:
        """Uniform on [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def open_random(self) -> float:
        """Uniform on (0, 1)."""
        return ((self.next_u64() >> 11) + 0.5) * (1.0 / (1 << 53))

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        # rejection keeps the result exactly uniform
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def choice(self, seq):
        return seq[self.randbelow(len(seq))]

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def categorical(self, probs) -> int:
        u = self.random() * sum(probs)
        acc = 0.0
        for i, p in enumerate(probs):
            acc += p
            if u < acc:
                return i
        return len(probs) - 1

    def exponential(self, rate: float) -> float:
        return -math.log(self.open_random()) / rate

    def normal(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        # inverse CDF rather than Box-Muller: one draw per variate, no cached state
        return mu + sigma * _STD.inv_cdf(self.open_random())

    def truncated_normal(self, mu: float, sigma: float, lo: float, hi: float) -> float:
        if sigma == 0:
            return min(max(mu, lo), hi)
        a, b = _STD.cdf((lo - mu) / sigma), _STD.cdf((hi - mu) / sigma)
        u = a + (b - a) * self.open_random()
        return min(max(mu + sigma * _STD.inv_cdf(min(max(u, 1e-16), 1 - 1e-16)), lo), hi)

    def lognormal(self, mu: float, sigma: float, lower: float = 0.0) -> float:
        """exp(N(mu, sigma^2)), conditioned to exceed ``lower`` when positive."""
        if lower <= 0 or sigma == 0:
            return math.exp(self.normal(mu, sigma))
        a = _STD.cdf((math.log(lower) - mu) / sigma)
        u = a + (1 - a) * self.open_random()
        if u >= 1.0:
            u = math.nextafter(1.0, 0.0)
        return math.exp(mu + sigma * _STD.inv_cdf(u))
