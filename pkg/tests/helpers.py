"""Shared builders for protocol tests."""

from __future__ import annotations

import random

from sif.archive import create_archive, empty_repositories
from sif.shamir import SharingPolicy

from conftest import CHRISTINE_SHARES


def christine_archive(seed: int = 0):
    """Five repositories holding the single element 854 split with p(x) = 854 + 276x + 53x^2."""
    policy = SharingPolicy(5, 3)
    repos = empty_repositories(policy, [random.Random(seed + r) for r in range(5)])
    for repo, share in zip(repos, CHRISTINE_SHARES):
        repo.shares.append(share)
    return repos


def seeded_archive(elements, n, k, seed, field=None, group=None):
    policy = SharingPolicy(n, k, field) if field is not None else SharingPolicy(n, k)
    rng = random.Random(seed)
    rngs = [random.Random(seed * 1000 + r) for r in range(n)]
    return create_archive(policy, elements, rng, rngs=rngs, group=group)


def start_cluster(repos, timeout=5.0, tap=None):
    """One loopback daemon per repository on ephemeral ports; returns (daemons, endpoints)."""
    from sif.transport.daemon import RepositoryDaemon

    daemons = [RepositoryDaemon(r, ("127.0.0.1", 0), timeout=timeout, tap=tap) for r in repos]
    endpoints = {r.coordinate: d.endpoint for r, d in zip(repos, daemons)}
    for d in daemons:
        d.peers.update(endpoints)
        d.start()
    return daemons, endpoints


def stop_cluster(daemons):
    for d in daemons:
        d.stop()


def link_sequences(records):
    """Per-link decoded messages with transaction ids zeroed."""
    import dataclasses
    from collections import defaultdict

    from sif.transport import wire

    out = defaultdict(list)
    for rec in records:
        msg = wire.decode(rec.frame)
        out[(rec.sender, rec.receiver)].append(dataclasses.replace(msg, txn=bytes(16)))
    return dict(out)
