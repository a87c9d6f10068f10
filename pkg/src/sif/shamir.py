"""(k, N) polynomial secret sharing and Lagrange weights at zero.

``reconstruct`` and ``enumerate_consistent_secrets`` are test oracles. The
query protocols only ever use :func:`lagrange_basis_at_zero`.
"""

from __future__ import annotations

import functools
import itertools
import random
from dataclasses import dataclass
from typing import Sequence

from sif.errors import (
    DegenerateBasisError,
    FieldTooLargeError,
    InsufficientSharesError,
    ParameterMismatchError,
    PolicyError,
)
from sif.field import DEFAULT_FIELD, FieldElement, FieldParams, random_residue

ENUMERATION_LIMIT = 10**7  # max polynomials the exhaustive oracle will walk


@dataclass(frozen=True)
class SharingPolicy:
    n: int
    k: int
    field: FieldParams = DEFAULT_FIELD
    x_coords: tuple[int, ...] = ()

    def __post_init__(self):
        if not 2 <= self.k <= self.n:
            raise PolicyError(f"need 2 <= k <= N, got k={self.k}, N={self.n}")
        coords = tuple(int(x) for x in self.x_coords) or tuple(range(1, self.n + 1))
        object.__setattr__(self, "x_coords", coords)
        if len(coords) != self.n:
            raise PolicyError(f"expected {self.n} coordinates, got {len(coords)}")
        p = self.field.modulus
        if any(x % p == 0 for x in coords):
            raise PolicyError("coordinates must be nonzero in the field")
        if len({x % p for x in coords}) != self.n:
            raise PolicyError("coordinates must be pairwise distinct in the field")
        if any(not 0 < x < p for x in coords):
            raise PolicyError("coordinates must be canonical residues")

    def coordinate(self, repo_id: int) -> int:
        """Coordinate of repository ``repo_id`` (1-based)."""
        return self.x_coords[repo_id - 1]

    def repo_id(self, x: int) -> int:
        try:
            return self.x_coords.index(x) + 1
        except ValueError:
            raise PolicyError(f"{x} is not a repository coordinate") from None


@dataclass(frozen=True)
class Share:
    x: FieldElement
    y: FieldElement

    def __post_init__(self):
        if self.x.value == 0:
            raise PolicyError("share coordinate must be nonzero")


@dataclass(frozen=True)
class SecretPolynomial:
    """Coefficients ``[d, a_1, ..., a_{k-1}]``; index 0 is the secret."""

    coefficients: tuple[int, ...]
    field: FieldParams = DEFAULT_FIELD

    @classmethod
    def random(cls, secret: int, k: int, field: FieldParams, rng: random.Random) -> SecretPolynomial:
        coeffs = [secret % field.modulus]
        coeffs.extend(random_residue(field, rng) for _ in range(k - 1))
        return cls(tuple(coeffs), field)

    @property
    def secret(self) -> int:
        return self.coefficients[0]

    def __call__(self, x: int) -> int:
        p = self.field.modulus
        y = 0
        for c in reversed(self.coefficients):
            y = (y * x + c) % p
        return y


def _secret_value(secret, policy: SharingPolicy) -> int:
    if isinstance(secret, FieldElement):
        if secret.params.modulus != policy.field.modulus:
            raise ParameterMismatchError("secret is not in the policy's field")
        return secret.value
    return int(secret) % policy.field.modulus


def split(secret, policy: SharingPolicy, rng: random.Random,
          coefficients: Sequence[int] | None = None) -> list[Share]:
    """Share ``secret`` as ``(x_r, p(x_r))`` for every coordinate of the policy.

    ``coefficients`` forces ``a_1..a_{k-1}`` instead of drawing them; used to
    reproduce worked examples.
    """
    d = _secret_value(secret, policy)
    if coefficients is None:
        poly = SecretPolynomial.random(d, policy.k, policy.field, rng)
    else:
        if len(coefficients) != policy.k - 1:
            raise PolicyError(f"expected {policy.k - 1} forced coefficients")
        poly = SecretPolynomial((d, *(c % policy.field.modulus for c in coefficients)), policy.field)
    f = policy.field
    return [Share(FieldElement(x, f), FieldElement(poly(x), f)) for x in policy.x_coords]


def split_values(secret: int, policy: SharingPolicy, rng: random.Random) -> list[int]:
    """Raw share values in coordinate order; the hot path used by archive creation."""
    poly = SecretPolynomial.random(secret, policy.k, policy.field, rng)
    return [poly(x) for x in policy.x_coords]


@functools.lru_cache(maxsize=4096)
def _basis_cached(coords: tuple[int, ...], modulus: int) -> tuple[int, ...]:
    weights = []
    for i, xi in enumerate(coords):
        num, den = 1, 1
        for j, xj in enumerate(coords):
            if i == j:
                continue
            num = num * (-xj) % modulus
            den = den * (xi - xj) % modulus
        weights.append(num * pow(den, -1, modulus) % modulus)
    return tuple(weights)


def lagrange_weights(coords: Sequence[int], modulus: int) -> tuple[int, ...]:
    """Raw-int form of :func:`lagrange_basis_at_zero`."""
    coords = tuple(int(x) % modulus for x in coords)
    if len(set(coords)) != len(coords):
        raise DegenerateBasisError(f"duplicate interpolation coordinates in {list(coords)}")
    if 0 in coords:
        raise DegenerateBasisError("interpolation coordinate 0 is reserved for the secret")
    if not coords:
        raise DegenerateBasisError("empty coordinate list")
    return _basis_cached(coords, modulus)


def lagrange_basis_at_zero(S: Sequence, field: FieldParams = DEFAULT_FIELD) -> list[FieldElement]:
    """Weights ``w_i = prod_{j != i} (0 - x_j) / (x_i - x_j)`` for the ordered list ``S``."""
    coords = [int(x) for x in S]
    return [FieldElement(w, field) for w in lagrange_weights(coords, field.modulus)]


def reconstruct(shares: Sequence[Share], policy: SharingPolicy) -> FieldElement:
    """Interpolate ``p(0)`` from at least ``k`` shares. Oracle only."""
    if len(shares) < policy.k:
        raise InsufficientSharesError(f"need {policy.k} shares, got {len(shares)}")
    p = policy.field.modulus
    coords = [s.x.value for s in shares]
    weights = lagrange_weights(coords, p)
    total = sum(w * s.y.value for w, s in zip(weights, shares)) % p
    return FieldElement(total, policy.field)


def enumerate_consistent_secrets(partial: Sequence[Share], policy: SharingPolicy) -> list[int]:
    """Count, for every candidate secret, the polynomials of degree <= k-1 through ``partial``.

    Walks all ``p**k`` polynomials, so it is restricted to toy fields.
    """
    p = policy.field.modulus
    k = policy.k
    if p > 101 or p**k > ENUMERATION_LIMIT:
        raise FieldTooLargeError(f"refusing to enumerate {p}**{k} polynomials")
    points = [(s.x.value, s.y.value) for s in partial]
    counts = [0] * p
    for coeffs in itertools.product(range(p), repeat=k):
        for x, y in points:
            acc = 0
            for c in reversed(coeffs):
                acc = (acc * x + c) % p
            if acc != y:
                break
        else:
            counts[coeffs[0]] += 1
    return counts
