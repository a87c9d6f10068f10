import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from sif.errors import DegenerateBasisError, FieldTooLargeError, InsufficientSharesError, PolicyError
from sif.field import DEFAULT_FIELD, DEFAULT_MODULUS, FieldElement, FieldParams
from sif.shamir import (
    SecretPolynomial,
    Share,
    SharingPolicy,
    enumerate_consistent_secrets,
    lagrange_basis_at_zero,
    reconstruct,
    split,
)

from conftest import CHRISTINE_SHARES

P = DEFAULT_MODULUS


def christine_policy():
    return SharingPolicy(n=5, k=3)


def test_christine_shares_match_hand_evaluation(rng):
    hand = [854 + 276 * x + 53 * x * x for x in range(1, 6)]
    assert hand == CHRISTINE_SHARES
    shares = split(854, christine_policy(), rng, coefficients=[276, 53])
    assert [s.x.value for s in shares] == [1, 2, 3, 4, 5]
    assert [s.y.value for s in shares] == CHRISTINE_SHARES


def test_policy_rejects_k_below_two_and_above_n():
    with pytest.raises(PolicyError):
        SharingPolicy(n=5, k=1)
    with pytest.raises(PolicyError):
        SharingPolicy(n=3, k=4)


@pytest.mark.parametrize("coords", [(1, 1, 2), (0, 1, 2), (1, 2, 7 + 1)])
def test_policy_rejects_bad_coordinates(coords):
    with pytest.raises(PolicyError):
        SharingPolicy(n=3, k=2, field=FieldParams(7), x_coords=coords)


def test_split_never_emits_zero_coordinate(rng):
    policy = SharingPolicy(n=7, k=4)
    for _ in range(50):
        assert all(s.x.value != 0 for s in split(rng.randrange(P), policy, rng))
    with pytest.raises(PolicyError):
        Share(FieldElement(0), FieldElement(1))


def test_basis_at_zero_for_1_2_3_matches_hand_formula():
    x1, x2, x3 = 1, 2, 3
    hand = [
        Fraction(x2 * x3, (x1 - x2) * (x1 - x3)),
        Fraction(x1 * x3, (x2 - x1) * (x2 - x3)),
        Fraction(x1 * x2, (x3 - x1) * (x3 - x2)),
    ]
    assert hand == [3, -3, 1]
    weights = lagrange_basis_at_zero([1, 2, 3])
    assert [w.value for w in weights] == [3, P - 3, 1]


def test_basis_rejects_duplicates():
    with pytest.raises(DegenerateBasisError):
        lagrange_basis_at_zero([1, 2, 2])


def test_basis_reproduces_intercept_on_random_polynomials():
    r = random.Random(3)
    for _ in range(100):
        k = r.randint(2, 7)
        poly = SecretPolynomial.random(r.randrange(P), k, DEFAULT_FIELD, r)
        S = r.sample(range(1, 50), k)
        weights = lagrange_basis_at_zero(S)
        direct = sum(c * 0**i for i, c in enumerate(poly.coefficients)) % P
        assert sum(w.value * poly(x) for w, x in zip(weights, S)) % P == direct == poly.secret


@pytest.mark.parametrize("k", range(2, 9))
def test_basis_weights_sum_to_one(k):
    assert sum(w.value for w in lagrange_basis_at_zero(range(1, k + 1))) % P == 1


def _christine_shares(rng):
    return split(854, christine_policy(), rng, coefficients=[276, 53])


def test_reconstruct_christine(rng):
    shares = _christine_shares(rng)
    assert reconstruct(shares[:3], christine_policy()).value == 854
    subset = [shares[1], shares[3], shares[4]]
    assert [(s.x.value, s.y.value) for s in subset] == [(2, 1618), (4, 2806), (5, 3559)]
    assert reconstruct(subset, christine_policy()).value == 854


def test_reconstruct_needs_k_shares(rng):
    shares = _christine_shares(rng)
    with pytest.raises(InsufficientSharesError):
        reconstruct(shares[:2], christine_policy())


def test_reconstruct_rejects_duplicate_x(rng):
    s = _christine_shares(rng)
    with pytest.raises(DegenerateBasisError):
        reconstruct([s[0], s[0], s[1]], christine_policy())


def test_round_trip_any_k_subset_1000_instances():
    r = random.Random(99)
    for _ in range(1000):
        n = r.randint(2, 8)
        k = r.randint(2, n)
        policy = SharingPolicy(n, k)
        d = r.randrange(P)
        shares = split(d, policy, r)
        subset = r.sample(shares, k)
        assert reconstruct(subset, policy).value == d


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10), st.integers(0, 2**32))
def test_privacy_flat_histogram_gf11_k3(secret, seed):
    policy = SharingPolicy(5, 3, FieldParams(11))
    shares = split(secret, policy, random.Random(seed))
    for pair in itertools.combinations(shares, 2):
        assert enumerate_consistent_secrets(list(pair), policy) == [1] * 11


def test_privacy_gf7_k2_one_share():
    policy = SharingPolicy(4, 2, FieldParams(7))
    shares = split(5, policy, random.Random(1))
    assert enumerate_consistent_secrets([shares[2]], policy) == [1] * 7


def test_enumeration_with_k_shares_is_point_mass():
    policy = SharingPolicy(5, 3, FieldParams(11))
    shares = split(6, policy, random.Random(2))
    hist = enumerate_consistent_secrets(shares[:3], policy)
    assert hist == [1 if d == 6 else 0 for d in range(11)]


def test_enumeration_refuses_large_fields():
    with pytest.raises(FieldTooLargeError):
        enumerate_consistent_secrets([], SharingPolicy(3, 2))


def test_random_polynomial_degree_at_most_k_minus_1():
    r = random.Random(4)
    poly = SecretPolynomial.random(9, 4, FieldParams(11), r)
    assert len(poly.coefficients) == 4 and poly.secret == 9
