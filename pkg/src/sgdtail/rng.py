"""Seedable, platform-independent random number generation.

Every source of randomness in the package goes through :class:`SplitMix64`,
a 64-bit mixing generator with a published algorithm (Steele, Lea & Flood,
"Fast splittable pseudorandom number generators", OOPSLA 2014).  It is
implemented here in ~15 lines of integer arithmetic so the exact stream is
reproducible from code inspection alone, independent of numpy version or
platform:

    state  <- state + 0x9E3779B97F4A7C15          (mod 2^64)
    z      <- state
    z      <- (z xor (z >> 30)) * 0xBF58476D1CE4E5B9
    z      <- (z xor (z >> 27)) * 0x94D049BB133111EB
    output <- z xor (z >> 31)

Bounded integers use rejection sampling on the raw 64-bit output, so they
are exactly uniform.  Uniform doubles take the top 53 bits.
"""

import math

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    """SplitMix64 stream seeded with a 64-bit integer."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64
        self._spare_gauss = None

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def randbelow(self, n: int) -> int:
        """Exactly uniform integer in [0, n) via rejection sampling."""
        if n <= 0:
            raise ValueError("randbelow needs n >= 1")
        # Reject draws below 2^64 mod n so every residue class is equally likely.
        threshold = (1 << 64) % n
        while True:
            z = self.next_u64()
            if z >= threshold:
                return z % n

    def uniform(self) -> float:
        """Double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def gauss(self) -> float:
        """Standard normal via Box-Muller (pairs cached)."""
        if self._spare_gauss is not None:
            g, self._spare_gauss = self._spare_gauss, None
            return g
        # u1 in (0, 1] so the log is finite.
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        radius = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare_gauss = radius * math.sin(theta)
        return radius * math.cos(theta)

    def shuffle(self, items) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list:
        perm = list(range(n))
        self.shuffle(perm)
        return perm
