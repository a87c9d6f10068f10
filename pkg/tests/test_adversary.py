import random

import pytest

from sif.adversary import (
    InsufficientSamplesError,
    Transcript,
    ZeroNonceRandom,
    audit_coalition_state,
    best_partial_unblinding,
    chi_square_uniform,
    csif_collusion_probe,
    hbc_uniformity_report,
    observe_queries,
    run_coalition_query,
    sif_collusion_attack,
    two_sample_test,
    wire_positions,
)
from sif.csif_protocol import TOY_GROUP
from sif.errors import NonceUnavailableError
from sif.field import DEFAULT_MODULUS, FieldParams
from sif.transport.messages import Scheme
from sif.transport.sim import SimNetwork

from conftest import MID_GROUP
from helpers import seeded_archive

GF11 = FieldParams(11)


def _gf11_network(elements=(2, 5, 9), seed=1):
    return SimNetwork(seeded_archive(list(elements), 5, 3, seed=seed, field=GF11), seed=seed)


def test_wire_positions_layout():
    net = _gf11_network()
    t = observe_queries(net, 4, [1, 2, 3], 5)
    pos = wire_positions(t)
    assert set(pos) == {("chain", i, l) for i in (1, 2) for l in range(3)} | {("qterm", l) for l in range(3)}
    assert all(len(v) == 5 for v in pos.values())


def test_chi_square_against_scipy_free_oracle():
    # counts 2,0,...: statistic by hand = sum (o-e)^2/e with e = 2/11
    stat, _ = chi_square_uniform([0, 0], 11)
    e = 2 / 11
    assert stat == pytest.approx((2 - e) ** 2 / e + 10 * e)


def test_honest_transcript_not_flagged_zero_nonce_flagged():
    net = _gf11_network()
    honest = observe_queries(net, 5, [1, 2, 3], 3000)
    report = hbc_uniformity_report(honest, 11, min_queries=3000)
    assert report.flagged == [] and len(report.rows) == 9

    broken = observe_queries(_gf11_network(), 5, [1, 2, 3], 3000, nonce_rng=ZeroNonceRandom())
    report = hbc_uniformity_report(broken, 11, min_queries=3000)
    assert len(report.flagged) == len(report.rows) == 9
    assert report.lines()[-1] == "9 of 9 positions flagged"


def test_report_refuses_small_samples_and_big_fields():
    t = observe_queries(_gf11_network(), 5, [1, 2, 3], 10)
    with pytest.raises(InsufficientSamplesError):
        hbc_uniformity_report(t, 11)
    with pytest.raises(InsufficientSamplesError):
        hbc_uniformity_report(Transcript(), DEFAULT_MODULUS, min_queries=0)


def test_report_csv(tmp_path):
    t = observe_queries(_gf11_network(), 5, [1, 2, 3], 50)
    path = tmp_path / "r.csv"
    hbc_uniformity_report(t, 11, min_queries=50).to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "position,samples,chi2,p_value,flagged" and len(lines) == 10


def test_member_and_non_member_transcripts_indistinguishable():
    net = _gf11_network(elements=(2, 5, 9))
    a = wire_positions(observe_queries(net, 5, [1, 2, 3], 2000))
    b = wire_positions(observe_queries(net, 6, [1, 2, 3], 2000))
    for pos in a:
        assert two_sample_test(a[pos], b[pos], 11) > 1e-3


def test_sif_collusion_recovers_every_element():
    r = random.Random(11)
    elements = [r.randrange(DEFAULT_MODULUS) for _ in range(100)]
    net = SimNetwork(seeded_archive(elements, 5, 3, seed=11))
    coalition = run_coalition_query(net, [2, 4, 5], 0, members={2, 5})
    result = sif_collusion_attack(coalition, DEFAULT_MODULUS)
    assert result.recovered == elements


def test_single_element_attack():
    net = SimNetwork(seeded_archive([854], 5, 3, seed=1))
    coalition = run_coalition_query(net, [1, 2, 3], 17, members={1, 3})
    assert sif_collusion_attack(coalition, DEFAULT_MODULUS).recovered == [854]


def test_nonce_erasure_defeats_attack():
    elements = list(range(100))
    net = SimNetwork(seeded_archive(elements, 5, 3, seed=11))
    coalition = run_coalition_query(net, [2, 4, 5], 0, members={2, 5}, erase_nonce=True)
    result = sif_collusion_attack(coalition, DEFAULT_MODULUS)
    assert result.count == 0 and not result.nonce_available and result.has_final_gamma
    # instrumentation switches are restored
    assert net.repositories[2].erase_nonce and not net.repositories[5].retain_final_gamma


def test_coalition_without_last_hop_sees_only_uniform_partials():
    # fix d = 3 and re-split many times: R1 and R2 together learn w1 p(x1) + w2 p(x2),
    # which is d - w3 p(x3) and so uniform over the field
    partials = []
    for seed in range(2000):
        net = SimNetwork(seeded_archive([3], 5, 3, seed=seed, field=GF11))
        coalition = run_coalition_query(net, [1, 2, 3], 0, members={1, 2})
        assert sif_collusion_attack(coalition, 11).count == 0
        partials.extend(best_partial_unblinding(coalition, 11))
    _, pval = chi_square_uniform(partials, 11)
    assert pval > 1e-3


def test_partial_unblinding_needs_nonce():
    net = _gf11_network()
    coalition = run_coalition_query(net, [1, 2, 3], 0, members={2, 3})
    with pytest.raises(NonceUnavailableError):
        best_partial_unblinding(coalition, 11)


def test_csif_probe_finds_planted_secret_in_toy_domain():
    net = SimNetwork(seeded_archive([3], 3, 2, seed=1, field=TOY_GROUP.field, group=TOY_GROUP))
    coalition = run_coalition_query(net, [1, 2], 0, members={1, 2}, scheme=Scheme.CSIF)
    assert coalition.field_values and all(p[0] in ("share", "nonce") for p, _, _ in coalition.field_values)
    hits = csif_collusion_probe(coalition, TOY_GROUP, range(11))
    assert [h.hits for h in hits] == [[3]]


def test_csif_probe_requires_nonce_and_final_gamma():
    net = SimNetwork(seeded_archive([3], 3, 2, seed=1, field=TOY_GROUP.field, group=TOY_GROUP))
    coalition = run_coalition_query(net, [1, 2], 0, members={1, 2}, scheme=Scheme.CSIF, erase_nonce=True)
    with pytest.raises(NonceUnavailableError):
        csif_collusion_probe(coalition, TOY_GROUP, range(11))


def test_csif_audit_finds_no_foreign_share():
    r = random.Random(2)
    elements = [r.randrange(MID_GROUP.q) for _ in range(30)]
    repos = seeded_archive(elements, 5, 3, seed=2, field=MID_GROUP.field, group=MID_GROUP)
    net = SimNetwork(repos)
    coalition = run_coalition_query(net, [1, 2, 3], elements[0], members={1, 3}, scheme=Scheme.CSIF)
    assert coalition.result is True and coalition.final_gamma is not None
    report = audit_coalition_state(coalition, repos)
    assert report.clean and report.non_members == (2, 4, 5)


def test_sif_audit_exposes_what_the_attack_uses():
    # in SIF the pooled gamma_k - nu equals the elements; audit still sees no foreign share
    repos = seeded_archive([7, 8], 5, 3, seed=3)
    coalition = run_coalition_query(SimNetwork(repos), [1, 2, 3], 0, members={1, 3})
    assert audit_coalition_state(coalition, repos).clean
