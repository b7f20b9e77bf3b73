"""Portable generator for surrogate weights: xorshift64* seeded by splitmix64.

Constants (all arithmetic mod 2**64):

* splitmix64: increment 0x9E3779B97F4A7C15, multipliers 0xBF58476D1CE4E5B9
  and 0x94D049BB133111EB, shifts 30, 27, 31.
* xorshift64*: shifts 12 (right), 25 (left), 27 (right), output multiplier
  0x2545F4914F6CDD1D.
* uniform draw: top 53 bits of the output scaled by 2**-53, in [0, 1).
"""
MASK = (1 << 64) - 1


def splitmix64(state: int) -> tuple[int, int]:
    """Return ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return state, z ^ (z >> 31)


class XorShift64Star:
    def __init__(self, seed: int):
        _, s = splitmix64(seed & MASK)
        self.state = s or 0x9E3779B97F4A7C15  # all-zero state is a fixed point

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & MASK
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & MASK

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * (1.0 / (1 << 53))
        return lo + (hi - lo) * u

    def uniforms(self, n: int, lo: float = 0.0, hi: float = 1.0) -> list[float]:
        return [self.uniform(lo, hi) for _ in range(n)]
