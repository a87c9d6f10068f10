import io
import struct

import pytest
from hypothesis import given, strategies as st

from sif.errors import DecodeError
from sif.transport import wire
from sif.transport.messages import (
    ChainMessage,
    ErrorMessage,
    InsertMessage,
    MsgType,
    QueryRequest,
    QueryTermMessage,
    ResultMessage,
    Scheme,
    StatusReply,
    StatusRequest,
)

TXN = bytes(range(16))

txns = st.binary(min_size=16, max_size=16)
u64 = st.integers(0, 2**64 - 1)
big = st.integers(0, 2**2048)
coords = st.lists(u64, max_size=8).map(tuple)


def _vec(scheme):
    return st.lists(u64 if scheme == Scheme.SIF else big, max_size=20).map(tuple)


def _messages(scheme):
    scalar = u64 if scheme == Scheme.SIF else big
    return st.one_of(
        st.builds(ChainMessage, txns, _vec(scheme), coords, st.just(scheme)),
        st.builds(QueryTermMessage, txns, _vec(scheme), st.just(scheme)),
        st.builds(ResultMessage, txns, st.booleans(), st.just(scheme)),
        st.builds(InsertMessage, txns, u64, scalar, scalar, st.just(scheme)),
        st.builds(ErrorMessage, txns, st.integers(0, 65535), st.text(max_size=40), st.just(scheme)),
        st.builds(QueryRequest, txns, scalar, scalar, coords, st.just(scheme)),
        st.builds(StatusRequest, txns, st.just(scheme)),
        st.builds(StatusReply, txns, u64, scalar, u64, st.just(scheme)),
    )


@given(st.one_of(_messages(Scheme.SIF), _messages(Scheme.CSIF)))
def test_round_trip(msg):
    frame = wire.encode(msg)
    assert wire.decode(frame) == msg
    assert struct.unpack(">I", frame[:4])[0] == len(frame) - 4


def test_chain_frame_matches_hand_layout():
    msg = ChainMessage(TXN, (1, 2**40), (1, 3), Scheme.SIF)
    expected = (
        (4 + 1 + 16 + 1 + 4 + 16 + 2 + 16).to_bytes(4, "big")
        + b"SIF1" + b"\x01" + TXN + b"\x00"
        + b"\x00\x00\x00\x02" + (1).to_bytes(8, "big") + (2**40).to_bytes(8, "big")
        + b"\x00\x02" + (1).to_bytes(8, "big") + (3).to_bytes(8, "big")
    )
    assert wire.encode(msg) == expected
    assert wire.HEADER_SIZE == 26


def test_csif_scalars_are_length_prefixed():
    frame = wire.encode(QueryTermMessage(TXN, (0x0102,), Scheme.CSIF))
    assert frame[26:] == b"\x00\x00\x00\x01" + b"\x00\x02\x01\x02"


@pytest.mark.parametrize("D,k", [(0, 2), (1, 3), (100, 5), (10_000, 7)])
def test_chain_size_law(D, k):
    msg = ChainMessage(TXN, tuple(range(D)), tuple(range(1, k + 1)))
    assert len(wire.encode(msg)) == 26 + 4 + 8 * D + 2 + 8 * k


def test_empty_vectors():
    msg = QueryTermMessage(TXN, ())
    assert wire.decode(wire.encode(msg)) == msg


def test_every_truncation_is_rejected():
    frame = wire.encode(ChainMessage(TXN, (5, 6, 7), (1, 2)))
    for cut in range(len(frame)):
        with pytest.raises(DecodeError):
            wire.decode(frame[:cut])


def test_truncated_body_with_consistent_length():
    frame = wire.encode(ChainMessage(TXN, (5, 6, 7), (1, 2)))
    body = frame[4:-3]
    with pytest.raises(DecodeError) as err:
        wire.decode(struct.pack(">I", len(body)) + body)
    assert err.value.offset > 26


def test_trailing_bytes_rejected():
    frame = wire.encode(ResultMessage(TXN, True))
    padded = struct.pack(">I", len(frame) - 4 + 1) + frame[4:] + b"\0"
    with pytest.raises(DecodeError, match="trailing"):
        wire.decode(padded)


def test_bad_magic_type_scheme_flag():
    frame = bytearray(wire.encode(ResultMessage(TXN, True)))
    for pos, val in [(4, ord("X")), (8, 99), (25, 7), (26, 2)]:
        bad = bytearray(frame)
        bad[pos] = val
        with pytest.raises(DecodeError):
            wire.decode(bytes(bad))


def test_sif_scalar_overflow_refused():
    with pytest.raises(ValueError):
        wire.encode(QueryTermMessage(TXN, (2**64,)))
    with pytest.raises(ValueError):
        wire.encode(ResultMessage(b"short", True))


def test_read_frame_from_stream():
    frames = [wire.encode(ResultMessage(TXN, b)) for b in (True, False)]
    stream = io.BytesIO(b"".join(frames))
    assert [wire.read_frame(stream.read) for _ in frames] == frames
    assert MsgType(frames[0][8]) == MsgType.RESULT


def test_read_frame_refuses_huge_length():
    stream = io.BytesIO(struct.pack(">I", 1 << 30))
    with pytest.raises(DecodeError):
        wire.read_frame(stream.read)
