"""Serial interpolation carried in the exponent of a prime-order subgroup.

Same chain as the field protocol, but every partial sum travels as
``g ** (partial sum)``; combining two hops is componentwise multiplication.
The sharing field must be ``Z_q`` where ``q`` is the subgroup order, so that
exponent arithmetic agrees with share arithmetic.
"""

from __future__ import annotations

import operator
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from sif.archive import InitiatorSession, RepositoryState
from sif.errors import (
    AlignmentError,
    InvalidChainError,
    ParameterMismatchError,
    PolicyError,
    RoutingError,
    SubgroupError,
)
from sif.field import FieldElement, FieldParams, is_prime, random_vector
from sif.shamir import lagrange_weights
from sif.sif_protocol import (
    Initiation,
    _check_length,
    _query_value,
    chain_position,
    validate_chain,
)
from sif.transport.messages import ChainMessage, QueryTermMessage, ResultMessage, Scheme, new_txn


@dataclass(frozen=True)
class GroupParams:
    """Order-``q`` subgroup of ``Z_P^*`` generated by ``g``."""

    P: int
    q: int
    g: int

    def __post_init__(self):
        P, q, g = self.P, self.q, self.g
        if not is_prime(P):
            raise PolicyError(f"group modulus {P} is not prime")
        if not is_prime(q):
            raise PolicyError(f"subgroup order {q} is not prime")
        if (P - 1) % q:
            raise PolicyError(f"q={q} does not divide P-1")
        if not 1 < g < P or pow(g, q, P) != 1:
            raise PolicyError(f"g={g} does not generate the order-{q} subgroup")

    @property
    def field(self) -> FieldParams:
        """The sharing field that exponents live in."""
        return FieldParams(self.q)

    @property
    def generator(self) -> GroupElement:
        return GroupElement(self.g, self)

    def contains(self, v: int) -> bool:
        return 0 < v < self.P and pow(v, self.q, self.P) == 1

    def check_vector(self, vec: Sequence[int]) -> None:
        for v in vec:
            if not self.contains(v):
                raise SubgroupError(f"{v} is not in the order-{self.q} subgroup of Z_{self.P}*")


class GroupElement:
    __slots__ = ("value", "params")

    def __init__(self, value: int, params: GroupParams):
        if not params.contains(value):
            raise SubgroupError(f"{value} is not in the order-{params.q} subgroup")
        self.value = value
        self.params = params

    def __mul__(self, other: GroupElement) -> GroupElement:
        if other.params != self.params:
            raise ParameterMismatchError("group elements from different groups")
        return GroupElement(self.value * other.value % self.params.P, self.params)

    def __eq__(self, other):
        if isinstance(other, GroupElement):
            return self.value == other.value and self.params == other.params
        if isinstance(other, int):
            return self.value == other
        return NotImplemented

    def __hash__(self):
        return hash((self.value, self.params.P))

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"GroupElement({self.value}, P={self.params.P})"


TOY_GROUP = GroupParams(P=23, q=11, g=2)

# 2048-bit MODP group 14 (RFC 3526): safe prime P, q = (P-1)/2, g = 2.
_MODP_2048 = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74020BBEA63B139B22514A08798E3404DD"
    "EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF0598DA48361C55D39A69163FA8FD24CF5F"
    "83655D23DCA3AD961C62F356208552BB9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B"
    "E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF6955817183995497CEA956AE515D2261898FA0510"
    "15728E5A8AACAA68FFFFFFFFFFFFFFFF",
    16,
)


def default_group() -> GroupParams:
    return GroupParams(P=_MODP_2048, q=(_MODP_2048 - 1) // 2, g=2)


def load_group(path: str | Path) -> GroupParams:
    """Read ``P``, ``q``, ``g`` from a text file: three integers, decimal or 0x-hex,
    separated by whitespace; ``#`` starts a comment."""
    tokens = []
    for line in Path(path).read_text().splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if len(tokens) != 3:
        raise PolicyError(f"{path}: expected 3 integers (P q g), found {len(tokens)}")
    P, q, g = (int(t, 0) for t in tokens)
    return GroupParams(P, q, g)


def exp(base: GroupElement, e) -> GroupElement:
    """``base ** e`` with the exponent reduced mod ``q``."""
    params = base.params
    if isinstance(e, FieldElement):
        if e.params.modulus != params.q:
            raise ParameterMismatchError("exponent is not in Z_q")
        e = e.value
    return GroupElement(pow(base.value, int(e) % params.q, params.P), params)


def hadamard(a: Sequence[GroupElement], b: Sequence[GroupElement]) -> list[GroupElement]:
    """Componentwise product."""
    if len(a) != len(b):
        raise AlignmentError(f"vector lengths differ: {len(a)} vs {len(b)}")
    return [x * y for x, y in zip(a, b)]


def _group_of(repo: RepositoryState) -> GroupParams:
    group = repo.group
    if group is None:
        raise PolicyError(f"repository {repo.coordinate} has no group parameters configured")
    if group.q != repo.modulus:
        raise PolicyError(f"sharing field Z_{repo.modulus} is not the exponent field Z_{group.q}")
    return group


def csif_initiate(initiator: RepositoryState, Z, S_choice: Sequence, rng: random.Random | None = None,
                  txn: bytes | None = None, now: int = 0) -> Initiation:
    """``gamma_1 = g^(w_1 p(x_1) + nu)`` and ``Q = g^(Z + nu)``."""
    group = _group_of(initiator)
    S = validate_chain(S_choice, initiator)
    if S[0] != initiator.coordinate:
        raise InvalidChainError("the initiating repository must be first in the chain")
    rng = rng if rng is not None else initiator.rng
    q, P, g = group.q, group.P, group.g
    z = _query_value(Z, initiator)
    txn = txn if txn is not None else new_txn(rng)
    w1 = lagrange_weights(S, q)[0]
    shares = initiator.shares.entries
    nu = random_vector(initiator.policy.field, len(shares), rng)
    gamma = tuple([pow(g, (w1 * s + n) % q, P) for s, n in zip(shares, nu)])
    Q = tuple([pow(g, (z + n) % q, P) for n in nu])
    session = InitiatorSession(txn, S, Scheme.CSIF, now, nonce=None if initiator.erase_nonce else nu)
    initiator.sessions[txn] = session
    return Initiation(ChainMessage(txn, gamma, S, Scheme.CSIF),
                      QueryTermMessage(txn, Q, Scheme.CSIF), session)


def _weighted_powers(repo: RepositoryState, group: GroupParams, w: int) -> list[int]:
    q, P, g = group.q, group.P, group.g
    return [pow(g, w * s % q, P) for s in repo.shares.entries]


def csif_continue(repo: RepositoryState, msg: ChainMessage) -> ChainMessage:
    """``gamma_i = gamma_{i-1} (.) g^(w_i p(x_i))``."""
    group = _group_of(repo)
    S = validate_chain(msg.S, repo)
    i = chain_position(repo, S)
    if not 0 < i < len(S) - 1:
        raise RoutingError(f"repository {repo.coordinate} is not an intermediate hop of {list(S)}")
    _check_length(repo, msg.gamma)
    group.check_vector(msg.gamma)
    w = lagrange_weights(S, group.q)[i]
    P = group.P
    gamma = tuple([a * b % P for a, b in zip(msg.gamma, _weighted_powers(repo, group, w))])
    return ChainMessage(msg.txn, gamma, S, Scheme.CSIF)


def csif_final_gamma(repo: RepositoryState, chain: ChainMessage) -> tuple[int, ...]:
    group = _group_of(repo)
    S = validate_chain(chain.S, repo)
    if chain_position(repo, S) != len(S) - 1:
        raise RoutingError(f"repository {repo.coordinate} is not the last hop of {list(S)}")
    _check_length(repo, chain.gamma)
    group.check_vector(chain.gamma)
    w = lagrange_weights(S, group.q)[-1]
    P = group.P
    return tuple([a * b % P for a, b in zip(chain.gamma, _weighted_powers(repo, group, w))])


def csif_finalize(repo_k: RepositoryState, chain: ChainMessage, qterm: QueryTermMessage) -> ResultMessage:
    if chain.txn != qterm.txn:
        raise RoutingError("chain and query-term belong to different transactions")
    gamma = csif_final_gamma(repo_k, chain)
    _check_length(repo_k, qterm.Q)
    _group_of(repo_k).check_vector(qterm.Q)
    if repo_k.retain_final_gamma:
        repo_k.retained_gamma[chain.txn] = gamma
    hit = any(map(operator.eq, gamma, qterm.Q))
    return ResultMessage(chain.txn, hit, Scheme.CSIF)


def run_csif_query(archive, Z, S_choice: Sequence | None = None, rng: random.Random | None = None,
                   **kwargs) -> bool:
    from sif.sif_protocol import run_query
    return run_query(archive, Z, S_choice, rng, scheme=Scheme.CSIF, **kwargs)
