"""Repository state and archive lifecycle.

Each repository keeps only its own column of shares. Rows are index-aligned
across repositories: row ``l`` at every repository is a point on the
polynomial of the ``l``-th inserted element.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Iterator, Sequence

from sif.errors import AlignmentError, ParameterMismatchError, PolicyError
from sif.field import FieldElement, FieldParams
from sif.shamir import SharingPolicy, split_values
from sif.transport.messages import InsertMessage, Scheme, new_txn

if TYPE_CHECKING:
    from sif.csif_protocol import GroupParams


class ShareVector:
    """The repository's private column ``p(x_r)``: one residue per archived element."""

    __slots__ = ("entries", "field")

    def __init__(self, field: FieldParams, entries: Iterable[int] = ()):
        self.field = field
        self.entries: list[int] = [int(e) for e in entries]
        p = field.modulus
        if any(not 0 <= e < p for e in self.entries):
            raise PolicyError("share vector entries must be canonical residues")

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, index: int) -> FieldElement:
        return FieldElement(self.entries[index], self.field)

    def __iter__(self) -> Iterator[FieldElement]:
        return (FieldElement(e, self.field) for e in self.entries)

    def append(self, share: int) -> None:
        self.entries.append(share)

    def __repr__(self):
        return f"ShareVector(len={len(self.entries)}, p={self.field.modulus})"


@dataclass
class InitiatorSession:
    """What the initiating repository keeps while a query is in flight."""

    txn: bytes
    S: tuple[int, ...]
    scheme: Scheme
    started: int
    result: bool | None = None
    nonce: list[int] | None = None  # only when nonce erasure is disabled
    reply_to: object = None  # client to forward the result to (daemon mode)


@dataclass
class PendingHalf:
    """The last repository's buffer for whichever of chain/query-term arrived first."""

    since: int
    chain: object = None
    qterm: object = None


@dataclass
class RepositoryState:
    repo_id: int
    x: FieldElement
    shares: ShareVector
    policy: SharingPolicy
    sessions: dict = field(default_factory=dict)
    pending: dict = field(default_factory=dict)
    rng: random.Random = field(default_factory=random.SystemRandom, repr=False)
    group: GroupParams | None = None
    # instrumentation switches used by the adversary harness
    erase_nonce: bool = True
    retain_final_gamma: bool = False
    retained_gamma: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.x.value != self.policy.coordinate(self.repo_id):
            raise PolicyError(
                f"repository {self.repo_id} has coordinate {self.x.value}, "
                f"policy says {self.policy.coordinate(self.repo_id)}"
            )
        if self.shares.field.modulus != self.policy.field.modulus:
            raise ParameterMismatchError("share vector field differs from policy field")

    @property
    def coordinate(self) -> int:
        return self.x.value

    @property
    def modulus(self) -> int:
        return self.policy.field.modulus

    def apply_insert(self, msg: InsertMessage) -> None:
        """Append one share. The stamped index must equal the current length."""
        if msg.modulus != self.modulus:
            raise ParameterMismatchError(
                f"insert for field {msg.modulus} sent to repository over field {self.modulus}"
            )
        if msg.index != len(self.shares):
            raise AlignmentError(
                f"repository {self.repo_id}: insert index {msg.index} but holds {len(self.shares)} shares"
            )
        if not 0 <= msg.share < self.modulus:
            raise ParameterMismatchError("share is not a canonical residue")
        self.shares.append(msg.share)

    def expire(self, now: int, timeout: float) -> list[bytes]:
        """Drop half-paired query sessions older than ``timeout``; returns dropped txns."""
        stale = [t for t, h in self.pending.items() if now - h.since > timeout]
        for t in stale:
            del self.pending[t]
        return stale


def element_count(repository: RepositoryState) -> int:
    return len(repository.shares)


def empty_repositories(policy: SharingPolicy, rngs: Sequence[random.Random] | None = None,
                       group: GroupParams | None = None) -> list[RepositoryState]:
    repos = []
    for r in range(1, policy.n + 1):
        kwargs = {}
        if rngs is not None:
            kwargs["rng"] = rngs[r - 1]
        repos.append(RepositoryState(
            repo_id=r,
            x=FieldElement(policy.coordinate(r), policy.field),
            shares=ShareVector(policy.field),
            policy=policy,
            group=group,
            **kwargs,
        ))
    return repos


def create_archive(policy: SharingPolicy, initial_elements: Iterable, rng: random.Random,
                   rngs: Sequence[random.Random] | None = None,
                   group: GroupParams | None = None) -> list[RepositoryState]:
    """Split every element and hand one share of each to each repository.

    The elements themselves are not kept anywhere in the returned state.
    ``rngs`` optionally seeds each repository's own nonce source.
    """
    repos = empty_repositories(policy, rngs, group)
    columns = [r.shares.entries for r in repos]
    for element in initial_elements:
        value = _element_value(element, policy.field)
        for col, share in zip(columns, split_values(value, policy, rng)):
            col.append(share)
    return repos


def _element_value(element, field: FieldParams) -> int:
    if isinstance(element, FieldElement):
        if element.params.modulus != field.modulus:
            raise ParameterMismatchError("element is not in the archive's field")
        return element.value
    value = int(element)
    if not 0 <= value < field.modulus:
        raise PolicyError(f"element {value} is outside the field Z_{field.modulus}")
    return value


def make_insert_messages(element, policy: SharingPolicy, index: int, rng: random.Random,
                         txn: bytes | None = None,
                         scheme: Scheme = Scheme.SIF) -> list[InsertMessage]:
    """One stamped share per repository, in repository order."""
    value = _element_value(element, policy.field)
    txn = txn if txn is not None else new_txn(rng)
    return [
        InsertMessage(txn, index, share, policy.field.modulus, scheme)
        for share in split_values(value, policy, rng)
    ]


def insert(element, repositories: Sequence[RepositoryState], rng: random.Random,
           network=None) -> list[InsertMessage]:
    """Insert ``element`` as a new row; returns the N messages that were sent.

    With ``network`` (a SimNetwork) the messages travel over it from the
    client address 0; otherwise they are applied directly.
    """
    counts = {element_count(r) for r in repositories}
    if len(counts) != 1:
        raise AlignmentError(f"repositories disagree on element count: {sorted(counts)}")
    policy = repositories[0].policy
    msgs = make_insert_messages(element, policy, counts.pop(), rng)
    for repo, msg in zip(repositories, msgs):
        if network is None:
            repo.apply_insert(msg)
        else:
            network.deliver(msg, 0, repo.coordinate)
    if network is not None:
        network.run()
    return msgs
