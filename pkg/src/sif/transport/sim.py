"""Deterministic in-process network.

Every message is encoded to its wire frame on ``deliver`` and decoded again
on ``step``, so tests exercise the same bytes the daemons exchange. Links are
FIFO per ordered (sender, receiver) pair; which non-empty link fires next is
drawn from a seeded generator, so a seed fixes the whole interleaving.
"""

from __future__ import annotations

import random
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

from sif.archive import RepositoryState
from sif.errors import QueryTimeout, RoutingError
from sif.node import DEFAULT_TIMEOUT_STEPS, handle
from sif.transport import wire
from sif.transport.messages import Message, MsgType, TXN_BYTES

CLIENT = 0  # address of the external user / insert client


class TapRecord(NamedTuple):
    sender: int
    receiver: int
    frame: bytes
    step: int

    @property
    def message(self) -> Message:
        return wire.decode(self.frame)


@dataclass
class Tap:
    """Records every frame put on the wire, in send order."""

    records: list = field(default_factory=list)

    def record(self, sender: int, receiver: int, frame: bytes, step: int) -> None:
        self.records.append(TapRecord(sender, receiver, frame, step))

    def clear(self) -> None:
        self.records.clear()

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


class Delivery(NamedTuple):
    sender: int
    receiver: int
    message: Message


class SimNetwork:
    def __init__(self, repositories: Iterable[RepositoryState], seed: int = 0, tap: Tap | None = None,
                 timeout_steps: int = DEFAULT_TIMEOUT_STEPS):
        self.repositories: dict[int, RepositoryState] = {r.coordinate: r for r in repositories}
        self.rng = random.Random(seed)
        self.tap = tap
        self.timeout_steps = timeout_steps
        self.clock = 0
        self.queues: dict[tuple[int, int], deque] = {}
        self.client_inbox: list[Delivery] = []
        self.sent_by_type: Counter = Counter()
        self.bytes_sent = 0

    def new_txn(self) -> bytes:
        return self.rng.getrandbits(8 * TXN_BYTES).to_bytes(TXN_BYTES, "big")

    @property
    def messages_sent(self) -> int:
        return sum(self.sent_by_type.values())

    def reset_counters(self) -> None:
        self.sent_by_type.clear()
        self.bytes_sent = 0

    def pending(self) -> int:
        return sum(len(q) for q in self.queues.values())

    def deliver(self, message: Message, sender: int, receiver: int) -> None:
        if receiver != CLIENT and receiver not in self.repositories:
            raise RoutingError(f"no repository at coordinate {receiver}")
        frame = wire.encode(message)
        if self.tap is not None:
            self.tap.record(sender, receiver, frame, self.clock)
        self.sent_by_type[MsgType(message.msg_type)] += 1
        self.bytes_sent += len(frame)
        self.queues.setdefault((sender, receiver), deque()).append(frame)

    def step(self, link: tuple[int, int] | None = None) -> list[Delivery]:
        """Deliver one frame (from ``link`` if given); returns what was delivered."""
        if link is None:
            live = sorted(k for k, q in self.queues.items() if q)
            if not live:
                return []
            link = live[0] if len(live) == 1 else self.rng.choice(live)
        queue = self.queues.get(link)
        if not queue:
            raise RoutingError(f"nothing queued on link {link}")
        frame = queue.popleft()
        sender, receiver = link
        msg = wire.decode(frame)
        self.clock += 1
        delivered = Delivery(sender, receiver, msg)
        if receiver == CLIENT:
            self.client_inbox.append(delivered)
            return [delivered]
        out = handle(self.repositories[receiver], msg, sender, now=self.clock, timeout=self.timeout_steps)
        for dest, reply in out:
            self.deliver(reply, receiver, dest)
        return [delivered]

    def run(self, until: Callable[[], bool] | None = None, max_steps: int | None = None) -> int:
        """Step until ``until()`` holds or nothing is queued; returns steps taken."""
        limit = self.timeout_steps if max_steps is None else max_steps
        steps = 0
        while until is None or not until():
            if not any(self.queues.values()):
                break
            if steps >= limit:
                raise QueryTimeout(f"no quiescence after {steps} simulation steps")
            self.step()
            steps += 1
        return steps
