"""Arithmetic in a prime field Z_p.

Scalars are :class:`FieldElement` values bound to a :class:`FieldParams`.
Share vectors and protocol vectors are kept as plain lists of canonical
residues (ints in ``[0, p)``) for speed; the helpers at the bottom of the
module operate on those.
"""

from __future__ import annotations

import functools
import struct
import random
from dataclasses import dataclass

from sif.errors import FieldDivisionByZero, ParameterMismatchError, PolicyError

DEFAULT_MODULUS = 4294967311  # smallest prime above 2**32

# Miller-Rabin with these bases is exact for n < 3.3e24.
_MR_EXACT_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
_MR_EXACT_LIMIT = 3317044064679887385961981
_MR_EXTRA_BASES = (43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113)


def is_prime(n: int) -> bool:
    """Miller-Rabin with fixed bases.

    Exact below 3.3e24. Above that the fixed base set is not a proof, but an
    odd composite passes all 30 bases with probability well under 4**-30.
    """
    if n < 2:
        return False
    for b in _MR_EXACT_BASES:
        if n % b == 0:
            return n == b
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    bases = _MR_EXACT_BASES if n < _MR_EXACT_LIMIT else _MR_EXACT_BASES + _MR_EXTRA_BASES
    for a in bases:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@functools.lru_cache(maxsize=64)
def _checked_prime(n: int) -> bool:
    return is_prime(n)


@dataclass(frozen=True)
class FieldParams:
    modulus: int = DEFAULT_MODULUS

    def __post_init__(self):
        if not isinstance(self.modulus, int) or self.modulus <= 2:
            raise PolicyError(f"field modulus must be an integer > 2, got {self.modulus!r}")
        if not _checked_prime(self.modulus):
            raise PolicyError(f"field modulus {self.modulus} is not prime")

    def __call__(self, value: int) -> FieldElement:
        return FieldElement(value, self)

    @property
    def byte_width(self) -> int:
        """Bytes needed to store one residue, never less than 8."""
        return max(8, (self.modulus.bit_length() + 7) // 8)

    def zero(self) -> FieldElement:
        return FieldElement(0, self)

    def one(self) -> FieldElement:
        return FieldElement(1, self)


DEFAULT_FIELD = FieldParams()


class FieldElement:
    """Immutable canonical residue modulo ``params.modulus``."""

    __slots__ = ("value", "params")

    def __init__(self, value: int, params: FieldParams = DEFAULT_FIELD):
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "value", int(value) % params.modulus)

    def __setattr__(self, name, value):
        raise AttributeError("FieldElement is immutable")

    def _coerce(self, other) -> int:
        if isinstance(other, FieldElement):
            if other.params.modulus != self.params.modulus:
                raise ParameterMismatchError(
                    f"cannot combine elements of Z_{self.params.modulus} and Z_{other.params.modulus}"
                )
            return other.value
        if isinstance(other, int):
            return other % self.params.modulus
        return NotImplemented

    def _new(self, value: int) -> FieldElement:
        return FieldElement(value, self.params)

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._new(self.value + o)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._new(self.value - o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._new(o - self.value)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self._new(self.value * o)

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.value)

    def inverse(self) -> FieldElement:
        if self.value == 0:
            raise FieldDivisionByZero(f"0 has no inverse in Z_{self.params.modulus}")
        return self._new(pow(self.value, -1, self.params.modulus))

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return o
        return self * self._new(o).inverse()

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        return self._new(pow(self.value, e, self.params.modulus))

    def __eq__(self, other):
        if isinstance(other, FieldElement):
            return self.value == other.value and self.params.modulus == other.params.modulus
        if isinstance(other, int):
            return self.value == other % self.params.modulus
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.params.modulus))

    def __int__(self):
        return self.value

    __index__ = __int__

    def __bool__(self):
        return self.value != 0

    def __repr__(self):
        return f"FieldElement({self.value}, p={self.params.modulus})"

    def to_bytes(self) -> bytes:
        """Big-endian, ``params.byte_width`` bytes (8 for any modulus below 2**64)."""
        return self.value.to_bytes(self.params.byte_width, "big")

    @classmethod
    def from_bytes(cls, data: bytes, params: FieldParams = DEFAULT_FIELD) -> FieldElement:
        value = int.from_bytes(data, "big")
        if value >= params.modulus:
            raise ValueError(f"{value} is not a canonical residue mod {params.modulus}")
        return cls(value, params)


def _check(a: FieldElement, b: FieldElement) -> None:
    if a.params.modulus != b.params.modulus:
        raise ParameterMismatchError(
            f"cannot combine elements of Z_{a.params.modulus} and Z_{b.params.modulus}"
        )


def add(a: FieldElement, b: FieldElement) -> FieldElement:
    _check(a, b)
    return a + b


def sub(a: FieldElement, b: FieldElement) -> FieldElement:
    _check(a, b)
    return a - b


def mul(a: FieldElement, b: FieldElement) -> FieldElement:
    _check(a, b)
    return a * b


def neg(a: FieldElement) -> FieldElement:
    return -a


def inv(a: FieldElement) -> FieldElement:
    return a.inverse()


def power(a: FieldElement, e: int) -> FieldElement:
    """Square-and-multiply; ``e`` must be a non-negative integer."""
    if e < 0:
        raise ValueError("exponent must be non-negative")
    p = a.params.modulus
    result, base = 1, a.value
    while e:
        if e & 1:
            result = result * base % p
        base = base * base % p
        e >>= 1
    return FieldElement(result, a.params)


def random_residue(params: FieldParams, rng: random.Random, exclude_zero: bool = False) -> int:
    """Uniform residue by rejection sampling on ``bit_length`` random bits."""
    p = params.modulus
    bits = p.bit_length()
    getrandbits = rng.getrandbits
    while True:
        r = getrandbits(bits)
        if r < p and (r or not exclude_zero):
            return r


def random_element(params: FieldParams, rng: random.Random, exclude_zero: bool = False) -> FieldElement:
    return FieldElement(random_residue(params, rng, exclude_zero), params)


def random_vector(params: FieldParams, n: int, rng: random.Random) -> list[int]:
    """``n`` uniform residues.

    Draws words 64 bits wider than the modulus (8-byte words for moduli
    below 2**56), rejects those at or above the largest multiple of ``p``,
    and reduces the rest; rejections are rare, the result is exactly uniform.
    """
    p = params.modulus
    if p < 1 << 56:
        width, limit = 8, ((1 << 64) // p) * p
        out = []
        while len(out) < n:
            need = n - len(out)
            words = struct.unpack(f">{need}Q", rng.randbytes(8 * need))
            out.extend([w % p for w in words if w < limit])
        return out
    width = (p.bit_length() + 7) // 8 + 8
    limit = ((1 << (8 * width)) // p) * p
    out = []
    while len(out) < n:
        w = int.from_bytes(rng.randbytes(width), "big")
        if w < limit:
            out.append(w % p)
    return out
