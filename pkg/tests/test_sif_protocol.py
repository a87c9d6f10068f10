import random

import pytest
from hypothesis import given, settings, strategies as st

from sif.adversary import ZeroNonceRandom
from sif.errors import AlignmentError, InvalidChainError, RoutingError
from sif.field import DEFAULT_MODULUS
from sif.sif_protocol import continue_chain, finalize_query, initiate_query, run_query
from sif.transport import wire
from sif.transport.messages import MsgType, new_txn
from sif.transport.sim import SimNetwork, Tap

from helpers import christine_archive, seeded_archive

P = DEFAULT_MODULUS


def _chain(repos, Z, S, rng=None):
    by = {r.coordinate: r for r in repos}
    init = initiate_query(by[S[0]], Z, S, rng)
    gammas = [init.chain.gamma]
    msg = init.chain
    for x in S[1:-1]:
        msg = continue_chain(by[x], msg)
        gammas.append(msg.gamma)
    return init, msg, by[S[-1]], gammas


def test_christine_chain_with_zero_nonce_matches_hand_trace():
    repos = christine_archive()
    init, last, rk, gammas = _chain(repos, 854, [1, 2, 3], ZeroNonceRandom())
    # w = [3, -3, 1]; shares 1183, 1618, 2159
    assert gammas[0] == (3 * 1183,)
    assert gammas[1] == ((3 * 1183 - 3 * 1618) % P,)
    assert init.qterm.Q == (854,)
    assert finalize_query(rk, last, init.qterm).result is True


def test_christine_chain_with_real_nonce():
    repos = christine_archive()
    init, last, rk, gammas = _chain(repos, 854, [1, 2, 3], random.Random(5))
    nu = (init.qterm.Q[0] - 854) % P
    assert gammas[0] == ((3 * 1183 + nu) % P,)
    assert gammas[1] == ((gammas[0][0] + (P - 3) * 1618) % P,)
    assert finalize_query(rk, last, init.qterm).result is True


@pytest.mark.parametrize("Z,expected", [(854, True), (855, False), (0, False)])
def test_christine_membership(Z, expected):
    assert run_query(christine_archive(), Z, [1, 2, 3]) is expected


@pytest.mark.parametrize("S", [[2, 4, 5], [5, 1, 3], [4, 3, 2]])
def test_any_chain_order_works(S):
    assert run_query(christine_archive(), 854, S) is True
    assert run_query(christine_archive(), 853, S) is False


def test_k_equals_two_has_no_intermediate_hop():
    repos = seeded_archive([10, 20, 30], 3, 2, seed=1)
    net = SimNetwork(repos, seed=2)
    assert run_query(net, 20, [3, 1]) is True
    assert net.sent_by_type[MsgType.CHAIN] == 1
    assert run_query(net, 21, [1, 2]) is False


def test_empty_archive_queries_false():
    repos = seeded_archive([], 4, 3, seed=1)
    assert run_query(repos, 0, [1, 2, 3]) is False


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_membership_is_exact(data):
    n = data.draw(st.integers(2, 7))
    k = data.draw(st.integers(2, n))
    elements = data.draw(st.lists(st.integers(0, P - 1), max_size=30))
    seed = data.draw(st.integers(0, 2**32))
    repos = seeded_archive(elements, n, k, seed)
    r = random.Random(seed)
    S = r.sample(range(1, n + 1), k)
    probe = data.draw(st.integers(0, P - 1))
    assert run_query(repos, probe, S) is (probe in elements)
    if elements:
        assert run_query(repos, data.draw(st.sampled_from(elements)), S) is True


def test_chain_length_must_equal_k():
    repos = christine_archive()
    with pytest.raises(InvalidChainError):
        initiate_query(repos[0], 854, [1, 2])
    with pytest.raises(InvalidChainError):
        initiate_query(repos[0], 854, [1, 2, 3, 4])


def test_chain_rejects_repeats_and_unknowns():
    repos = christine_archive()
    with pytest.raises(InvalidChainError):
        initiate_query(repos[0], 854, [1, 2, 2])
    with pytest.raises(RoutingError):
        initiate_query(repos[0], 854, [1, 2, 9])


def test_initiator_must_lead_chain():
    with pytest.raises(InvalidChainError):
        initiate_query(christine_archive()[0], 854, [2, 1, 3])


def test_vector_length_mismatch_is_alignment_error():
    repos = christine_archive()
    init = initiate_query(repos[0], 854, [1, 2, 3])
    repos[1].shares.append(1)
    with pytest.raises(AlignmentError):
        continue_chain(repos[1], init.chain)


def test_wrong_hop_is_routing_error():
    repos = christine_archive()
    init = initiate_query(repos[0], 854, [1, 2, 3])
    with pytest.raises(RoutingError):
        continue_chain(repos[2], init.chain)
    with pytest.raises(RoutingError):
        continue_chain(repos[3], init.chain)


def test_txn_ids_unique_over_a_million():
    r = random.Random(7)
    assert len({new_txn(r) for _ in range(1_000_000)}) == 1_000_000


def test_chain_and_qterm_from_different_queries_do_not_pair():
    repos = christine_archive()
    a, last_a, rk, _ = _chain(repos, 854, [1, 2, 3])
    b, _, _, _ = _chain(repos, 854, [1, 2, 3])
    with pytest.raises(RoutingError):
        finalize_query(rk, last_a, b.qterm)


def test_query_sends_k_plus_one_messages_of_lawful_size():
    for n, k, size in [(5, 3, 40), (7, 7, 0), (4, 2, 200)]:
        repos = seeded_archive(list(range(size)), n, k, seed=k)
        tap = Tap()
        net = SimNetwork(repos, seed=3, tap=tap)
        S = list(range(1, k + 1))
        run_query(net, 1, S)
        types = [r.message.msg_type for r in tap]
        assert len(tap) == k + 1
        assert types.count(MsgType.CHAIN) == k - 1
        assert types.count(MsgType.QUERY_TERM) == 1
        assert types.count(MsgType.RESULT) == 1
        for rec in tap:
            if rec.message.msg_type == MsgType.CHAIN:
                assert len(rec.frame) == wire.HEADER_SIZE + 4 + 8 * size + 2 + 8 * k
            if rec.message.msg_type == MsgType.QUERY_TERM:
                assert len(rec.frame) == wire.HEADER_SIZE + 4 + 8 * size


def test_result_only_reveals_a_boolean():
    repos = seeded_archive([1, 2, 3], 3, 2, seed=9)
    tap = Tap()
    net = SimNetwork(repos, seed=1, tap=tap)
    run_query(net, 2, [1, 3])
    result = [r for r in tap if r.message.msg_type == MsgType.RESULT]
    assert len(result) == 1 and len(result[0].frame) == wire.HEADER_SIZE + 1


def test_nonce_erased_by_default_and_kept_when_switched_off():
    repos = christine_archive()
    init = initiate_query(repos[0], 854, [1, 2, 3])
    assert init.session.nonce is None
    repos[0].erase_nonce = False
    init = initiate_query(repos[0], 854, [1, 2, 3])
    assert init.session.nonce == [(init.qterm.Q[0] - 854) % P]


def test_session_cleaned_after_query():
    repos = christine_archive()
    run_query(repos, 854, [1, 2, 3])
    assert all(not r.sessions and not r.pending for r in repos)
