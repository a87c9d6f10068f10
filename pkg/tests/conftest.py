import random

import pytest

from sif.csif_protocol import TOY_GROUP, GroupParams
from sif.field import FieldParams

# safe prime P = 2q + 1 with q just above 2**61; g = 4 generates the order-q subgroup
MID_GROUP = GroupParams(P=4611686018427394499, q=2305843009213697249, g=4)

CHRISTINE_SHARES = [1183, 1618, 2159, 2806, 3559]


@pytest.fixture
def rng():
    return random.Random(20160205)


@pytest.fixture
def toy_group():
    return TOY_GROUP


@pytest.fixture
def mid_group():
    return MID_GROUP


@pytest.fixture
def gf7():
    return FieldParams(7)


@pytest.fixture
def gf11():
    return FieldParams(11)
