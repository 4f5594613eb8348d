"""Deterministic 64-bit PRNG with per-purpose substreams.

The simulator must replay bit-identically from a seed on any platform, so it
cannot depend on a host RNG whose stream may change between library versions.
This module implements two tiny, fully specified generators:

* ``splitmix64`` -- used once per stream to turn (seed, stream_id) into a
  well-mixed nonzero initial state.
* ``xorshift64*`` -- the running generator: for state ``x``::

      x ^= x >> 12;  x ^= (x << 25) & 2**64-1;  x ^= x >> 27
      output = (x * 0x2545F4914F6CDD1D) mod 2**64

Floats in [0, 1) take the top 53 bits of the output divided by 2**53.
Bounded integers use the fixed-point product ``(output * n) >> 64``.

Streams are independent generators derived from the same seed; the simulator
uses one stream for arrival coin flips and another for group sizes so that
consuming one never perturbs the other.
"""

MASK64 = (1 << 64) - 1

# stream ids used by the package
STREAM_ARRIVAL = 1
STREAM_GROUP_SIZE = 2
STREAM_POLICY = 3

_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_MIX1 = 0xBF58476D1CE4E5B9
_SM_MIX2 = 0x94D049BB133111EB
_XS_MULT = 0x2545F4914F6CDD1D


def splitmix64(x: int) -> int:
    """One splitmix64 output for input ``x`` (finalizer only, no state)."""
    z = (x + _SM_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * _SM_MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _SM_MIX2) & MASK64
    return z ^ (z >> 31)


class Rng:
    """xorshift64* generator seeded from (seed, stream)."""

    __slots__ = ("state",)

    def __init__(self, seed: int, stream: int = 0):
        state = splitmix64((seed & MASK64) ^ splitmix64(stream & MASK64))
        if state == 0:
            state = _SM_GAMMA
        self.state = state

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self.state = x
        return (x * _XS_MULT) & MASK64

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("randrange needs n >= 1")
        return (self.next_u64() * n) >> 64

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] inclusive."""
        return lo + self.randrange(hi - lo + 1)

    def clone(self) -> "Rng":
        other = object.__new__(Rng)
        other.state = self.state
        return other

    def getstate(self) -> int:
        return self.state

    def setstate(self, state: int) -> None:
        self.state = state & MASK64
