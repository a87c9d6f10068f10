"""Threat-model harness: transcript statistics and collusion drivers.

Everything here runs on :class:`~sif.transport.sim.SimNetwork`. Nothing in
this module is needed by an honest deployment.
"""

from __future__ import annotations

import csv
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from scipy import stats

from sif.archive import RepositoryState
from sif.csif_protocol import csif_initiate
from sif.errors import NonceUnavailableError, QueryTimeout, SifError
from sif.sif_protocol import initiate_query
from sif.transport.messages import ChainMessage, Message, QueryTermMessage, Scheme
from sif.transport.sim import SimNetwork, Tap

SIGNIFICANCE = 1e-3
MIN_QUERIES = 10_000
MAX_BINS = 1000


class InsufficientSamplesError(SifError, ValueError):
    pass


class TranscriptEvent(NamedTuple):
    sender: int
    receiver: int
    message: Message
    step: int


@dataclass
class Transcript:
    """Decoded view of tapped traffic, in send order."""

    events: list = field(default_factory=list)

    @classmethod
    def from_tap(cls, tap: Tap) -> Transcript:
        return cls([TranscriptEvent(r.sender, r.receiver, r.message, r.step) for r in tap.records])

    def extend(self, other: Transcript) -> None:
        self.events.extend(other.events)

    def involving(self, members: Iterable[int]) -> list[TranscriptEvent]:
        members = set(members)
        return [e for e in self.events if e.sender in members or e.receiver in members]


class ZeroNonceRandom(random.Random):
    """Broken nonce source: every draw is zero. Negative control only."""

    def getrandbits(self, k):
        return 0

    def randbytes(self, n):
        return bytes(n)


# -- honest-but-curious statistics --------------------------------------------


def wire_positions(transcript: Transcript) -> dict[tuple, list[int]]:
    """Group every observed vector component by wire position.

    Positions are ``("chain", i, l)`` for component ``l`` of ``gamma_i``
    (``i`` is the 1-based chain position of the sender) and ``("qterm", l)``.
    """
    samples: dict[tuple, list[int]] = defaultdict(list)
    for ev in transcript.events:
        msg = ev.message
        if isinstance(msg, ChainMessage):
            i = msg.S.index(ev.sender) + 1
            for l, v in enumerate(msg.gamma):
                samples[("chain", i, l)].append(v)
        elif isinstance(msg, QueryTermMessage):
            for l, v in enumerate(msg.Q):
                samples[("qterm", l)].append(v)
    return dict(samples)


class PositionStat(NamedTuple):
    position: tuple
    samples: int
    statistic: float
    p_value: float
    flagged: bool


@dataclass
class UniformityReport:
    modulus: int
    significance: float
    rows: list

    @property
    def flagged(self) -> list[PositionStat]:
        return [r for r in self.rows if r.flagged]

    def lines(self) -> list[str]:
        out = [f"position,samples,chi2,p_value,flagged  (uniform over Z_{self.modulus}, alpha={self.significance:g})"]
        for r in self.rows:
            out.append(f"{':'.join(map(str, r.position))},{r.samples},{r.statistic:.3f},{r.p_value:.4g},"
                       f"{'FLAG' if r.flagged else 'ok'}")
        out.append(f"{len(self.flagged)} of {len(self.rows)} positions flagged")
        return out

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["position", "samples", "chi2", "p_value", "flagged"])
            for r in self.rows:
                w.writerow([":".join(map(str, r.position)), r.samples, f"{r.statistic:.6f}", f"{r.p_value:.6g}",
                            int(r.flagged)])


def chi_square_uniform(values: Sequence[int], modulus: int) -> tuple[float, float]:
    counts = Counter(values)
    observed = [counts.get(v, 0) for v in range(modulus)]
    res = stats.chisquare(observed)
    return float(res.statistic), float(res.pvalue)


def hbc_uniformity_report(transcript: Transcript, modulus: int, significance: float = SIGNIFICANCE,
                          min_queries: int = MIN_QUERIES) -> UniformityReport:
    """Chi-square test of every wire position against the uniform distribution on Z_p."""
    if modulus > MAX_BINS:
        raise InsufficientSamplesError(f"field Z_{modulus} too large for a per-value chi-square test")
    queries = {ev.message.txn for ev in transcript.events if isinstance(ev.message, QueryTermMessage)}
    if len(queries) < min_queries:
        raise InsufficientSamplesError(f"need {min_queries} queries, transcript has {len(queries)}")
    rows = []
    for pos, values in sorted(wire_positions(transcript).items(), key=lambda kv: repr(kv[0])):
        stat, pval = chi_square_uniform(values, modulus)
        rows.append(PositionStat(pos, len(values), stat, pval, pval < significance))
    return UniformityReport(modulus, significance, rows)


def two_sample_test(a: Sequence[int], b: Sequence[int], modulus: int) -> float:
    """p-value of a chi-square homogeneity test between two samples over Z_p."""
    ca, cb = Counter(a), Counter(b)
    table = [[ca.get(v, 0), cb.get(v, 0)] for v in range(modulus) if ca.get(v, 0) + cb.get(v, 0)]
    if len(table) < 2:
        return 1.0
    return float(stats.chi2_contingency(table, correction=False).pvalue)


def observe_queries(network: SimNetwork, Z, S: Sequence[int], count: int,
                    nonce_rng: random.Random | None = None) -> Transcript:
    """Run ``count`` queries for ``Z`` along ``S`` with the network tapped."""
    tap = network.tap if network.tap is not None else Tap()
    network.tap = tap
    start = len(tap.records)
    for _ in range(count):
        _drive_query(network, Z, S, nonce_rng=nonce_rng)
    return Transcript([TranscriptEvent(r.sender, r.receiver, r.message, r.step) for r in tap.records[start:]])


# -- collusion -----------------------------------------------------------------


def _drive_query(network: SimNetwork, Z, S: Sequence[int], scheme: Scheme = Scheme.SIF,
                 nonce_rng: random.Random | None = None):
    S = tuple(S)
    initiator = network.repositories[S[0]]
    txn = network.new_txn()
    start = csif_initiate if scheme == Scheme.CSIF else initiate_query
    init = start(initiator, Z, S, nonce_rng, txn=txn, now=network.clock)
    network.deliver(init.chain, S[0], S[1])
    network.deliver(init.qterm, S[0], S[-1])
    network.run(until=lambda: init.session.result is not None)
    initiator.sessions.pop(txn, None)
    if init.session.result is None:
        raise QueryTimeout("query produced no result")
    return init.session


@dataclass
class CollusionCoalition:
    """Repositories pooling everything they hold or saw during one query.

    ``field_values`` records every Z_p-domain value the coalition holds,
    tagged with where it came from; ``observed`` is the traffic touching a
    member.
    """

    members: frozenset
    S: tuple = ()
    scheme: Scheme = Scheme.SIF
    field_values: list = field(default_factory=list)  # (provenance, row, value)
    nonce: list | None = None
    final_gamma: tuple | None = None
    observed: list = field(default_factory=list)
    result: bool | None = None

    def pooled_shares(self, repo_id: int) -> list[int]:
        return [v for prov, _, v in self.field_values if prov == ("share", repo_id)]


def run_coalition_query(network: SimNetwork, S: Sequence[int], Z, members: Iterable[int],
                        erase_nonce: bool = False, scheme: Scheme = Scheme.SIF) -> CollusionCoalition:
    """Run one query while the repositories in ``members`` (coordinates) collude.

    A colluding initiator keeps its nonce vector unless ``erase_nonce``; a
    colluding last hop keeps ``gamma_k``.
    """
    S = tuple(S)
    members = frozenset(members)
    repos = network.repositories
    saved = {c: (repos[c].erase_nonce, repos[c].retain_final_gamma) for c in members}
    first, last = repos[S[0]], repos[S[-1]]
    if S[0] in members:
        first.erase_nonce = erase_nonce
    if S[-1] in members:
        last.retain_final_gamma = True
    tap = Tap()
    old_tap, network.tap = network.tap, tap
    try:
        session = _drive_query(network, Z, S, scheme)
    finally:
        network.tap = old_tap
        for c, (erase, retain) in saved.items():
            repos[c].erase_nonce, repos[c].retain_final_gamma = erase, retain
    coalition = CollusionCoalition(members, S, scheme, result=session.result)
    for c in sorted(members):
        for row, v in enumerate(repos[c].shares.entries):
            coalition.field_values.append((("share", repos[c].repo_id), row, v))
    if S[0] in members and session.nonce is not None:
        coalition.nonce = list(session.nonce)
        coalition.field_values.extend((("nonce",), row, v) for row, v in enumerate(session.nonce))
    if S[-1] in members:
        coalition.final_gamma = last.retained_gamma.pop(session.txn, None)
        if scheme == Scheme.SIF and coalition.final_gamma is not None:
            coalition.field_values.extend((("gamma", len(S)),  row, v)
                                          for row, v in enumerate(coalition.final_gamma))
    transcript = Transcript.from_tap(tap)
    coalition.observed = transcript.involving(members)
    if scheme == Scheme.SIF:
        for ev in coalition.observed:
            msg = ev.message
            if isinstance(msg, ChainMessage):
                tag = ("gamma", msg.S.index(ev.sender) + 1)
                coalition.field_values.extend((tag, row, v) for row, v in enumerate(msg.gamma))
            elif isinstance(msg, QueryTermMessage):
                coalition.field_values.extend((("qterm",), row, v) for row, v in enumerate(msg.Q))
    return coalition


@dataclass
class CollusionResult:
    recovered: list
    nonce_available: bool
    has_final_gamma: bool

    @property
    def count(self) -> int:
        return len(self.recovered)


def sif_collusion_attack(coalition: CollusionCoalition, modulus: int) -> CollusionResult:
    """``gamma_k - nu`` for a coalition holding both; empty when either is missing."""
    has_nu = coalition.nonce is not None
    has_gamma = coalition.final_gamma is not None
    if not (has_nu and has_gamma):
        return CollusionResult([], has_nu, has_gamma)
    recovered = [(g - n) % modulus for g, n in zip(coalition.final_gamma, coalition.nonce)]
    return CollusionResult(recovered, True, True)


def best_partial_unblinding(coalition: CollusionCoalition, modulus: int) -> list[int]:
    """What a coalition without the last hop can compute: its latest ``gamma_i - nu``.

    This is a partial interpolation sum, not the stored element.
    """
    if coalition.nonce is None:
        raise NonceUnavailableError("coalition does not hold the nonce vector")
    latest = None
    for ev in coalition.observed:
        if isinstance(ev.message, ChainMessage):
            latest = ev.message.gamma
    if latest is None:
        raise NonceUnavailableError("coalition saw no chain message")
    return [(g - n) % modulus for g, n in zip(latest, coalition.nonce)]


class ProbeHit(NamedTuple):
    row: int
    hits: list


def csif_collusion_probe(coalition: CollusionCoalition, group, candidate_domain: Iterable[int]) -> list[ProbeHit]:
    """Dictionary test of ``g^d_l = gamma_k[l] * g^(-nu_l)`` against each candidate.

    Requires the coalition to hold both the nonce and ``gamma_k``.
    """
    if coalition.nonce is None or coalition.final_gamma is None:
        raise NonceUnavailableError("probe needs the initiator's nonces and the final gamma")
    P, q, g = group.P, group.q, group.g
    table: dict[int, list[int]] = defaultdict(list)
    for c in candidate_domain:
        table[pow(g, int(c) % q, P)].append(int(c))
    out = []
    for row, (gk, nu) in enumerate(zip(coalition.final_gamma, coalition.nonce)):
        g_d = gk * pow(g, (-nu) % q, P) % P
        out.append(ProbeHit(row, table.get(g_d, [])))
    return out


@dataclass
class AuditReport:
    members: frozenset
    non_members: tuple
    leaked: list  # (repo_id, row) pairs whose share value appears in the pool
    foreign_provenance: list  # field-domain entries not owned by a member

    @property
    def clean(self) -> bool:
        return not self.leaked and not self.foreign_provenance


def audit_coalition_state(coalition: CollusionCoalition, repositories: Sequence[RepositoryState]) -> AuditReport:
    """Check that no non-member share value is present in the coalition's field-domain pool."""
    member_ids = {r.repo_id for r in repositories if r.coordinate in coalition.members}
    non_members = tuple(r for r in repositories if r.coordinate not in coalition.members)
    foreign = [prov for prov, _, _ in coalition.field_values
               if prov[0] == "share" and prov[1] not in member_ids]
    pooled = {v for _, _, v in coalition.field_values}
    leaked = [(r.repo_id, row) for r in non_members for row, v in enumerate(r.shares.entries) if v in pooled]
    return AuditReport(coalition.members, tuple(r.repo_id for r in non_members), leaked, foreign)
