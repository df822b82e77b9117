"""Primality helpers used to validate field moduli."""
from __future__ import annotations

from typing import List

# Bases that make Miller-Rabin deterministic for every n < 2**64.
_DETERMINISTIC_BASES: List[int] = [2, 325, 9375, 28178, 450775, 9780504, 1795265022]

_SMALL_PRIMES: List[int] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37]

MAX_MODULUS_BITS = 62


def miller_rabin(n: int, bases: List[int] | None = None) -> bool:
    """Miller-Rabin test; deterministic below 2**64 with the default bases."""
    if n < 2:
        return False
    for p in _SMALL_PRIMES:
        if n % p == 0:
            return n == p

    if bases is None:
        bases = _DETERMINISTIC_BASES

    d = n - 1
    s = 0
    while d % 2 == 0:
        d //= 2
        s += 1

    for a in bases:
        if a % n == 0:
            continue
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def is_prime(n: int) -> bool:
    """Return ``True`` if ``n`` is prime.

    Only moduli that fit in :data:`MAX_MODULUS_BITS` bits are accepted by the
    field layer, so the deterministic base set always applies.
    """
    if n.bit_length() > 64:
        raise ValueError(f"primality check limited to 64-bit integers, got {n.bit_length()} bits")
    return miller_rabin(n)
