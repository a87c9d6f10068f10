"""Message dispatch for one repository actor.

``handle`` is the only entry point the substrates use. It mutates the
repository's session tables and returns the messages to send as
``(destination, message)`` pairs. Destinations are repository coordinates,
or the opaque ``sender`` token for replies to a client.
"""

from __future__ import annotations

from typing import Hashable

from sif.archive import PendingHalf, RepositoryState, element_count
from sif.csif_protocol import csif_continue, csif_finalize, csif_initiate
from sif.errors import ParameterMismatchError, RoutingError
from sif.sif_protocol import chain_position, continue_chain, finalize_query, initiate_query, validate_chain
from sif.transport.messages import (
    ChainMessage,
    ErrorMessage,
    InsertMessage,
    Message,
    QueryRequest,
    QueryTermMessage,
    ResultMessage,
    Scheme,
    StatusReply,
    StatusRequest,
)

DEFAULT_TIMEOUT_STEPS = 1000

Outgoing = list[tuple[Hashable, Message]]


def _finish(repo: RepositoryState, chain: ChainMessage, qterm: QueryTermMessage) -> Outgoing:
    if chain.scheme != qterm.scheme:
        raise ParameterMismatchError("chain and query-term use different schemes")
    if chain.scheme == Scheme.CSIF:
        result = csif_finalize(repo, chain, qterm)
    else:
        result = finalize_query(repo, chain, qterm)
    return [(chain.S[0], result)]


def _on_chain(repo: RepositoryState, msg: ChainMessage, now: int) -> Outgoing:
    S = validate_chain(msg.S, repo)
    i = chain_position(repo, S)
    if i < len(S) - 1:
        nxt = csif_continue(repo, msg) if msg.scheme == Scheme.CSIF else continue_chain(repo, msg)
        return [(S[i + 1], nxt)]
    half = repo.pending.get(msg.txn)
    if half is not None and half.qterm is not None:
        del repo.pending[msg.txn]
        return _finish(repo, msg, half.qterm)
    if half is not None and half.chain is not None:
        raise RoutingError(f"duplicate chain message for {msg.txn.hex()}")
    repo.pending[msg.txn] = PendingHalf(since=now, chain=msg)
    return []


def _on_qterm(repo: RepositoryState, msg: QueryTermMessage, now: int) -> Outgoing:
    half = repo.pending.get(msg.txn)
    if half is not None and half.chain is not None:
        del repo.pending[msg.txn]
        return _finish(repo, half.chain, msg)
    if half is not None:
        raise RoutingError(f"duplicate query-term for {msg.txn.hex()}")
    repo.pending[msg.txn] = PendingHalf(since=now, qterm=msg)
    return []


def _on_result(repo: RepositoryState, msg: ResultMessage) -> Outgoing:
    session = repo.sessions.get(msg.txn)
    if session is None:
        # late result for an abandoned query
        return []
    session.result = msg.result
    if session.reply_to is not None:
        del repo.sessions[msg.txn]
        return [(session.reply_to, msg)]
    return []


def _on_request(repo: RepositoryState, msg: QueryRequest, sender, now: int) -> Outgoing:
    if msg.modulus != repo.modulus:
        raise ParameterMismatchError(f"query for field {msg.modulus}, repository uses {repo.modulus}")
    if msg.scheme == Scheme.CSIF:
        init = csif_initiate(repo, msg.Z, msg.S, txn=msg.txn, now=now)
    else:
        init = initiate_query(repo, msg.Z, msg.S, txn=msg.txn, now=now)
    init.session.reply_to = sender
    S = init.session.S
    return [(S[1], init.chain), (S[-1], init.qterm)]


def handle(repo: RepositoryState, msg: Message, sender: Hashable, now: int = 0,
           timeout: float = DEFAULT_TIMEOUT_STEPS) -> Outgoing:
    """Process one message at ``repo``; returns what to send next."""
    if repo.pending:
        repo.expire(now, timeout)
    if isinstance(msg, ChainMessage):
        return _on_chain(repo, msg, now)
    if isinstance(msg, QueryTermMessage):
        return _on_qterm(repo, msg, now)
    if isinstance(msg, ResultMessage):
        return _on_result(repo, msg)
    if isinstance(msg, InsertMessage):
        repo.apply_insert(msg)
        return [(sender, ResultMessage(msg.txn, True, msg.scheme))]
    if isinstance(msg, QueryRequest):
        return _on_request(repo, msg, sender, now)
    if isinstance(msg, StatusRequest):
        return [(sender, StatusReply(msg.txn, element_count(repo), repo.modulus, repo.coordinate, msg.scheme))]
    if isinstance(msg, ErrorMessage):
        return []
    raise RoutingError(f"repository cannot handle {type(msg).__name__}")
