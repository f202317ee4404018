"""Stable integer seed derivation (splitmix64 finalizer, chained over the parts)."""

_MASK = (1 << 64) - 1


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(*parts: int) -> int:
    """Fold integer parts into one 64-bit seed: ``h = splitmix64(h ^ part)`` starting from 0.

    Negative parts are taken modulo 2**64.
    """
    h = 0
    for p in parts:
        h = splitmix64(h ^ (int(p) & _MASK))
    return h
