"""In-memory forms of the wire messages.

Vectors are tuples of canonical ints. For ``Scheme.SIF`` they are residues of
the sharing field; for ``Scheme.CSIF`` the chain and query-term vectors are
members of the order-q subgroup.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Union

TXN_BYTES = 16


class Scheme(enum.IntEnum):
    SIF = 0
    CSIF = 1


class MsgType(enum.IntEnum):
    CHAIN = 1
    QUERY_TERM = 2
    RESULT = 3
    INSERT = 4
    ERROR = 5
    # daemon-mode client control
    QUERY_REQUEST = 6
    STATUS_REQUEST = 7
    STATUS_REPLY = 8


class ErrorCode(enum.IntEnum):
    MALFORMED = 1
    PARAMETER_MISMATCH = 2
    ALIGNMENT = 3
    ROUTING = 4
    INVALID_CHAIN = 5
    SUBGROUP = 6
    INTERNAL = 99


def new_txn(rng: random.Random) -> bytes:
    return rng.getrandbits(8 * TXN_BYTES).to_bytes(TXN_BYTES, "big")


@dataclass(frozen=True)
class ChainMessage:
    txn: bytes
    gamma: tuple[int, ...]
    S: tuple[int, ...]
    scheme: Scheme = Scheme.SIF
    msg_type = MsgType.CHAIN


@dataclass(frozen=True)
class QueryTermMessage:
    txn: bytes
    Q: tuple[int, ...]
    scheme: Scheme = Scheme.SIF
    msg_type = MsgType.QUERY_TERM


@dataclass(frozen=True)
class ResultMessage:
    txn: bytes
    result: bool
    scheme: Scheme = Scheme.SIF
    msg_type = MsgType.RESULT


@dataclass(frozen=True)
class InsertMessage:
    """One share of a new element, stamped with its row index.

    ``modulus`` lets the receiver reject shares cut for another field.
    """

    txn: bytes
    index: int
    share: int
    modulus: int
    scheme: Scheme = Scheme.SIF
    msg_type = MsgType.INSERT


@dataclass(frozen=True)
class ErrorMessage:
    txn: bytes
    code: int
    detail: str
    scheme: Scheme = Scheme.SIF
    msg_type = MsgType.ERROR


@dataclass(frozen=True)
class QueryRequest:
    """Client asks the repository at ``S[0]`` to initiate a membership query for ``Z``."""

    txn: bytes
    modulus: int
    Z: int
    S: tuple[int, ...]
    scheme: Scheme = Scheme.SIF
    msg_type = MsgType.QUERY_REQUEST


@dataclass(frozen=True)
class StatusRequest:
    txn: bytes
    scheme: Scheme = Scheme.SIF
    msg_type = MsgType.STATUS_REQUEST


@dataclass(frozen=True)
class StatusReply:
    txn: bytes
    count: int
    modulus: int
    x: int
    scheme: Scheme = Scheme.SIF
    msg_type = MsgType.STATUS_REPLY


Message = Union[
    ChainMessage, QueryTermMessage, ResultMessage, InsertMessage, ErrorMessage,
    QueryRequest, StatusRequest, StatusReply,
]
