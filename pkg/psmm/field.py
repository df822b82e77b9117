"""Exact arithmetic in a prime field F_p."""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterator

import galois

from primes import MAX_MODULUS_BITS, is_prime

from .exceptions import DivisionByZeroError, FieldMismatchError, UsageError
from .rng import RngStream


@functools.lru_cache(maxsize=None)
def _galois_field(p: int) -> type:
    # primality is already established by FieldSpec
    return galois.GF(p, verify=False)


@dataclass(frozen=True)
class FieldSpec:
    """The prime modulus defining F_p."""

    p: int

    def __post_init__(self) -> None:
        if not isinstance(self.p, int) or self.p < 2:
            raise UsageError(f"field modulus must be an integer >= 2, got {self.p!r}")
        if self.p.bit_length() > MAX_MODULUS_BITS:
            raise UsageError(f"field modulus must fit in {MAX_MODULUS_BITS} bits")
        if not is_prime(self.p):
            raise UsageError(f"field modulus {self.p} is not prime")

    @property
    def GF(self) -> type:
        """The ``galois`` array class for this field."""
        return _galois_field(self.p)

    @property
    def element_bits(self) -> int:
        """``ceil(log2 p)``: bits needed to transmit one element."""
        return (self.p - 1).bit_length()

    @property
    def element_bytes(self) -> int:
        return (self.element_bits + 7) // 8

    def element(self, value: int) -> "FieldElement":
        """Embed an integer, reducing it into canonical form."""
        return FieldElement(int(value) % self.p, self)

    def zero(self) -> "FieldElement":
        return FieldElement(0, self)

    def one(self) -> "FieldElement":
        return FieldElement(1 % self.p, self)

    def elements(self) -> Iterator["FieldElement"]:
        """Iterate over all ``p`` elements (only sensible for small fields)."""
        for value in range(self.p):
            yield FieldElement(value, self)

    def __str__(self) -> str:  # pragma: no cover - trivial
        return f"F_{self.p}"


@dataclass(frozen=True)
class FieldElement:
    """A canonical residue in ``[0, p)``."""

    value: int
    field: FieldSpec

    def __post_init__(self) -> None:
        if not 0 <= self.value < self.field.p:
            raise UsageError(f"{self.value} is not a canonical residue mod {self.field.p}")

    def __add__(self, other: "FieldElement") -> "FieldElement":
        return add(self, other)

    def __sub__(self, other: "FieldElement") -> "FieldElement":
        return sub(self, other)

    def __neg__(self) -> "FieldElement":
        return neg(self)

    def __mul__(self, other: "FieldElement") -> "FieldElement":
        return mul(self, other)

    def __truediv__(self, other: "FieldElement") -> "FieldElement":
        return mul(self, inv(other))

    def __pow__(self, exponent: int) -> "FieldElement":
        return power(self, exponent)

    def __int__(self) -> int:
        return self.value

    def __repr__(self) -> str:  # pragma: no cover - trivial
        return f"{self.value} (mod {self.field.p})"


def _same_field(a: FieldElement, b: FieldElement) -> FieldSpec:
    if a.field != b.field:
        raise FieldMismatchError(f"operands live in F_{a.field.p} and F_{b.field.p}")
    return a.field


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    field = _same_field(a, b)
    return FieldElement((a.value + b.value) % field.p, field)


def sub(a: FieldElement, b: FieldElement) -> FieldElement:
    field = _same_field(a, b)
    return FieldElement((a.value - b.value) % field.p, field)


def neg(a: FieldElement) -> FieldElement:
    return FieldElement((-a.value) % a.field.p, a.field)


def mul(a: FieldElement, b: FieldElement) -> FieldElement:
    field = _same_field(a, b)
    # Python integers are exact, so the 124-bit intermediate never overflows.
    return FieldElement((a.value * b.value) % field.p, field)


def inv(a: FieldElement) -> FieldElement:
    if a.value == 0:
        raise DivisionByZeroError(f"0 has no inverse in F_{a.field.p}")
    return FieldElement(pow(a.value, -1, a.field.p), a.field)


def power(a: FieldElement, exponent: int) -> FieldElement:
    """Square-and-multiply exponentiation; ``a ** 0 == 1`` even for ``a == 0``."""
    if exponent < 0:
        raise UsageError("exponent must be non-negative")
    result = 1 % a.field.p
    base = a.value
    e = exponent
    while e:
        if e & 1:
            result = (result * base) % a.field.p
        base = (base * base) % a.field.p
        e >>= 1
    return FieldElement(result, a.field)


def sample_uniform(field: FieldSpec, rng: RngStream) -> FieldElement:
    """Draw one element uniformly from ``field`` using rejection sampling."""
    return FieldElement(int(rng.residues(field.p, 1)[0]), field)
