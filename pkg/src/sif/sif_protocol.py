"""Serial interpolation membership query with nonce blinding.

Chain of ``k`` repositories ``S = [x_1, ..., x_k]``:

* ``R_1`` draws a fresh nonce vector ``nu`` and sends
  ``gamma_1 = w_1 * p(x_1) + nu`` to ``R_2`` and ``Q = Z + nu`` to ``R_k``.
* ``R_i`` adds ``w_i * p(x_i)`` and forwards.
* ``R_k`` adds its own term and answers whether ``gamma_k[l] == Q[l]`` for some ``l``.

``w_i`` is the Lagrange weight of ``x_i`` at zero over ``S``, so ``gamma_k = d + nu``.
"""

from __future__ import annotations

import operator
import random
from typing import NamedTuple, Sequence

from sif.archive import InitiatorSession, RepositoryState, element_count
from sif.errors import (
    AlignmentError,
    InvalidChainError,
    QueryTimeout,
    RoutingError,
)
from sif.field import FieldElement, random_vector
from sif.shamir import lagrange_weights
from sif.transport.messages import (
    ChainMessage,
    QueryTermMessage,
    ResultMessage,
    Scheme,
    new_txn,
)


class Initiation(NamedTuple):
    chain: ChainMessage
    qterm: QueryTermMessage
    session: InitiatorSession


def _coord(r) -> int:
    if isinstance(r, RepositoryState):
        return r.coordinate
    return int(r)


def validate_chain(S: Sequence, repo: RepositoryState) -> tuple[int, ...]:
    """Check length, distinctness and membership of every coordinate in ``S``."""
    S = tuple(_coord(x) for x in S)
    policy = repo.policy
    if len(S) != policy.k:
        raise InvalidChainError(f"chain must list exactly k={policy.k} repositories, got {len(S)}")
    if len(set(S)) != len(S):
        raise InvalidChainError(f"chain {list(S)} repeats a repository")
    unknown = [x for x in S if x not in policy.x_coords]
    if unknown:
        raise RoutingError(f"unknown repository coordinate(s) {unknown}")
    return S


def chain_position(repo: RepositoryState, S: Sequence[int]) -> int:
    try:
        return S.index(repo.coordinate)
    except ValueError:
        raise RoutingError(f"repository {repo.coordinate} is not in chain {list(S)}") from None


def _query_value(Z, repo: RepositoryState) -> int:
    if isinstance(Z, FieldElement):
        if Z.params.modulus != repo.modulus:
            raise AlignmentError("query value is not in the archive's field")
        return Z.value
    return int(Z) % repo.modulus


def initiate_query(initiator: RepositoryState, Z, S_choice: Sequence, rng: random.Random | None = None,
                   txn: bytes | None = None, now: int = 0) -> Initiation:
    """Steps 1-3 at ``R_1``. The nonce vector is dropped once both messages exist
    unless ``initiator.erase_nonce`` is off."""
    S = validate_chain(S_choice, initiator)
    if S[0] != initiator.coordinate:
        raise InvalidChainError("the initiating repository must be first in the chain")
    rng = rng if rng is not None else initiator.rng
    p = initiator.modulus
    z = _query_value(Z, initiator)
    txn = txn if txn is not None else new_txn(rng)
    w1 = lagrange_weights(S, p)[0]
    shares = initiator.shares.entries
    nu = random_vector(initiator.policy.field, len(shares), rng)
    gamma = tuple([(w1 * s + n) % p for s, n in zip(shares, nu)])
    Q = tuple([(z + n) % p for n in nu])
    session = InitiatorSession(txn, S, Scheme.SIF, now, nonce=None if initiator.erase_nonce else nu)
    initiator.sessions[txn] = session
    return Initiation(ChainMessage(txn, gamma, S, Scheme.SIF), QueryTermMessage(txn, Q, Scheme.SIF), session)


def _check_length(repo: RepositoryState, vec) -> None:
    if len(vec) != element_count(repo):
        raise AlignmentError(
            f"repository {repo.coordinate} holds {element_count(repo)} shares, vector has {len(vec)}"
        )


def continue_chain(repo: RepositoryState, msg: ChainMessage) -> ChainMessage:
    """Step 4 at an intermediate repository: ``gamma_i = w_i * p(x_i) + gamma_{i-1}``."""
    S = validate_chain(msg.S, repo)
    i = chain_position(repo, S)
    if not 0 < i < len(S) - 1:
        raise RoutingError(f"repository {repo.coordinate} is not an intermediate hop of {list(S)}")
    _check_length(repo, msg.gamma)
    p = repo.modulus
    w = lagrange_weights(S, p)[i]
    gamma = tuple([(w * s + g) % p for s, g in zip(repo.shares.entries, msg.gamma)])
    return ChainMessage(msg.txn, gamma, S, Scheme.SIF)


def final_gamma(repo: RepositoryState, chain: ChainMessage) -> tuple[int, ...]:
    S = validate_chain(chain.S, repo)
    if chain_position(repo, S) != len(S) - 1:
        raise RoutingError(f"repository {repo.coordinate} is not the last hop of {list(S)}")
    _check_length(repo, chain.gamma)
    p = repo.modulus
    w = lagrange_weights(S, p)[-1]
    return tuple([(w * s + g) % p for s, g in zip(repo.shares.entries, chain.gamma)])


def finalize_query(repo_k: RepositoryState, chain: ChainMessage, qterm: QueryTermMessage) -> ResultMessage:
    """Steps 5-6 at ``R_k``: finish the interpolation and compare index by index."""
    if chain.txn != qterm.txn:
        raise RoutingError("chain and query-term belong to different transactions")
    gamma = final_gamma(repo_k, chain)
    _check_length(repo_k, qterm.Q)
    if repo_k.retain_final_gamma:
        repo_k.retained_gamma[chain.txn] = gamma
    hit = any(map(operator.eq, gamma, qterm.Q))
    return ResultMessage(chain.txn, hit, Scheme.SIF)


def choose_chain(repositories: Sequence[RepositoryState], rng: random.Random) -> tuple[int, ...]:
    k = repositories[0].policy.k
    return tuple(r.coordinate for r in rng.sample(list(repositories), k))


def run_query(archive, Z, S_choice: Sequence | None = None, rng: random.Random | None = None, *,
              network=None, scheme: Scheme = Scheme.SIF, max_steps: int | None = None) -> bool:
    """Answer ``Z in D`` end to end over a simulated network.

    ``archive`` is the list of repositories (or a SimNetwork already wrapping
    them). ``rng`` picks the chain when ``S_choice`` is omitted and, if given,
    also supplies the nonces; otherwise the initiator's own generator does.
    """
    from sif.transport.sim import SimNetwork

    if network is None:
        if isinstance(archive, SimNetwork):
            network = archive
        else:
            network = SimNetwork(archive)
    repos = network.repositories
    if S_choice is None:
        S_choice = choose_chain(list(repos.values()), rng or random.SystemRandom())
    S = tuple(_coord(x) for x in S_choice)
    if not S or S[0] not in repos:
        raise RoutingError(f"initiator {S[0] if S else None} is not part of the network")
    initiator = repos[S[0]]
    txn = network.new_txn()
    if scheme == Scheme.CSIF:
        from sif.csif_protocol import csif_initiate
        init = csif_initiate(initiator, Z, S, rng, txn=txn, now=network.clock)
    else:
        init = initiate_query(initiator, Z, S, rng, txn=txn, now=network.clock)
    network.deliver(init.chain, S[0], S[1])
    network.deliver(init.qterm, S[0], S[-1])
    session = init.session
    try:
        network.run(until=lambda: session.result is not None, max_steps=max_steps)
    finally:
        initiator.sessions.pop(txn, None)
    if session.result is None:
        raise QueryTimeout(f"query {txn.hex()} produced no result")
    return session.result
