import random

import pytest

from slidenet.auth import Theta
from slidenet.crypto import keygen
from slidenet.localize import (LocalizationError, NodeReport, ReportValue,
                               StatusReportSet, Verdict, audit_consistency,
                               classify_failure, localize_f2, localize_f3,
                               localize_f4, run_localization)

N = 4
T_FAIL = 3
LABEL = (1, 17)


@pytest.fixture(scope="module")
def ring():
    return keygen(list(range(N)), seed=5)


def s1_evidence(ring, signer, sig1, rise, r, sigp=None):
    key = ring.keypair(signer)
    return ring.sign(key, ("s1", T_FAIL, r, 0, 0, sig1, rise, sigp))


def s2_evidence(ring, signer, sig1, drop, r, sigp=None):
    key = ring.keypair(signer)
    return ring.sign(key, ("s2", T_FAIL, r, None, 0, sig1, 0, drop, sigp))


def build_reports(ring, reason, edges):
    """Construct a mutually-consistent report set.  edges maps directed
    (a, b) to dict(sig1=..., drop=..., rise=..., sigp=..., r=round); both
    endpoints report matching, properly-evidenced values."""
    rs = StatusReportSet(
        failed_T=T_FAIL, reason=reason, n=N, sender=0, receiver=N - 1,
        participants=list(range(N)), eliminated=frozenset())
    for node in range(N):
        rep = NodeReport(node)
        if reason[0] == "f2" and node != 0:
            rep.sig_nn = ReportValue(0, (T_FAIL, 0), None)
        rs.reports[node] = rep
    for (a, b), spec in sorted(edges.items()):
        sig1 = spec.get("sig1", 0)
        drop = spec.get("drop", 0)
        rise = spec.get("rise", 0)
        sigp = spec.get("sigp")
        r = spec.get("r", 10)
        label_pair = (LABEL, sigp) if sigp is not None else None
        ev1 = s1_evidence(ring, b, sig1, rise, r, label_pair)
        ev2 = s2_evidence(ring, a, sig1, drop, r, label_pair)
        out = rs.reports[a].out_edges.setdefault(b, {})
        out["sig1"] = ReportValue(sig1, (T_FAIL, r), ev1)
        out["sig2"] = ReportValue(rise, (T_FAIL, r), ev1)
        out["sig3"] = ReportValue(drop, (T_FAIL, r), None)
        if sigp is not None:
            out["sigp"] = ReportValue(sigp, (T_FAIL, r), ev1)
        inn = rs.reports[b].in_edges.setdefault(a, {})
        inn["sig1"] = ReportValue(sig1, (T_FAIL, r), ev2)
        inn["sig2"] = ReportValue(drop, (T_FAIL, r), ev2)
        inn["sig3"] = ReportValue(rise, (T_FAIL, r), None)
        if sigp is not None:
            inn["sigp"] = ReportValue(sigp, (T_FAIL, r), ev2)
    return rs


def honest_chain_edges(count=5, drop=4, rise=3):
    """Packets flowing 0 -> 1 -> 2 -> 3, every node one-in-one-out."""
    return {
        (0, 1): dict(sig1=count, drop=drop * count, rise=rise * count),
        (1, 2): dict(sig1=count, drop=rise * count, rise=2 * count),
        (2, 3): dict(sig1=count, drop=2 * count, rise=count),
    }


class TestClassify:
    def test_success(self):
        assert classify_failure(10, 1024, Theta(True, None, 1)) == ("ok",)

    def test_duplicate_wins(self):
        reason = classify_failure(1024, 1024, Theta(False, LABEL, 1))
        assert reason == ("f4", LABEL)

    def test_underinsertion(self):
        assert classify_failure(1000, 1024, Theta(False, None, 1)) == ("f2",)

    def test_flow_deficit(self):
        assert classify_failure(1024, 1024, Theta(False, None, 1)) == ("f3",)


class TestConsistency:
    def test_honest_reports_pass(self, ring):
        rs = build_reports(ring, ("f3",), honest_chain_edges())
        assert audit_consistency(rs, ring) is None

    def test_negative_reshuffle_ledger(self, ring):
        rs = build_reports(ring, ("f2",), honest_chain_edges())
        rs.reports[2].sig_nn = ReportValue(-3, (T_FAIL, 0), None)
        verdict = audit_consistency(rs, ring)
        assert verdict is not None
        assert verdict.node == 2 and verdict.kind == "malformed-report"

    def test_unevidenced_value(self, ring):
        rs = build_reports(ring, ("f3",), honest_chain_edges())
        rs.reports[2].in_edges[1]["sig1"] = ReportValue(99, (T_FAIL, 10),
                                                        None)
        verdict = audit_consistency(rs, ring)
        assert verdict is not None and verdict.node == 2

    def test_flow_mismatch_blames_staler_stamp(self, ring):
        edges = honest_chain_edges()
        rs = build_reports(ring, ("f3",), edges)
        # node 2 reports an outdated (genuinely signed) value from round 4
        stale = s2_evidence(ring, 1, 3, 2, 4)
        rs.reports[2].in_edges[1]["sig1"] = ReportValue(3, (T_FAIL, 4), stale)
        verdict = audit_consistency(rs, ring)
        assert verdict is not None
        assert verdict.kind == "pairwise-inconsistency"
        assert verdict.node == 2

    def test_overclaimed_potential_blames_signer(self, ring):
        edges = honest_chain_edges()
        # node 1 holds a genuine node-2 statement whose rise exceeds what
        # node 2's own report admits by more than 2n
        edges[(2, 3)] = dict(sig1=5, drop=1, rise=1)
        rs = build_reports(ring, ("f2",), edges)
        big = s2_evidence(ring, 2, 5, 60, 12)
        rs.reports[3].in_edges[2]["sig2"] = ReportValue(60, (T_FAIL, 12), big)
        rs.reports[3].in_edges[2]["sig1"] = ReportValue(5, (T_FAIL, 12), big)
        verdict = audit_consistency(rs, ring)
        assert verdict is not None and verdict.node == 2


class TestF2:
    def test_honest_ledgers_unsatisfiable(self, ring):
        rs = build_reports(ring, ("f2",), honest_chain_edges())
        assert localize_f2(rs) is None

    def test_overdrawn_potential_found(self, ring):
        # node 2's signed potential drops vastly exceed its starting
        # potential plus everything it admits receiving
        edges = honest_chain_edges()
        edges[(2, 3)] = dict(sig1=300, drop=900, rise=300)
        edges[(2, 1)] = dict(sig1=300, drop=900, rise=300)
        rs = build_reports(ring, ("f2",), edges)
        verdict = localize_f2(rs)
        assert verdict is not None and verdict.node == 2
        assert verdict.kind == "F2-potential"
        assert "4n^3-4n^2" in verdict.inequality

    def test_brute_force_honest_walks_never_flagged(self, ring):
        # independent oracle: simulate random honest packet journeys and
        # accumulate the exact ledger updates; the incrimination
        # inequality must stay unsatisfiable for every node
        rng = random.Random(11)
        for trial in range(25):
            edges = {}

            def bump(a, b, h_out, h_in):
                spec = edges.setdefault((a, b),
                                        dict(sig1=0, drop=0, rise=0))
                spec["sig1"] += 1
                spec["drop"] += h_out
                spec["rise"] += h_in

            for _ in range(rng.randrange(1, 60)):
                h = rng.randrange(1, 2 * N + 1)
                node = rng.choice([1, 2])
                bump(0, node, 2 * N, h)
                while node != N - 1 and rng.random() < 0.8:
                    nxt = rng.choice([x for x in range(1, N) if x != node])
                    h_next = rng.randrange(1, h + 1) if nxt != N - 1 else 0
                    bump(node, nxt, h, h_next)
                    node, h = nxt, h_next
            rs = build_reports(ring, ("f2",), edges)
            assert audit_consistency(rs, ring) is None
            assert localize_f2(rs) is None, f"trial {trial}"


class TestF3:
    def test_reference_threshold(self, ring):
        # 4n^2 - 8n = 32 for n = 4: inflow 33 with no outflow is corrupt
        edges = honest_chain_edges(count=0)
        edges[(0, 2)] = dict(sig1=33, drop=99, rise=33)
        rs = build_reports(ring, ("f3",), edges)
        verdict = localize_f3(rs)
        assert verdict is not None and verdict.node == 2
        assert "4n^2-8n = 32" in verdict.inequality

    def test_full_buffers_not_flagged(self, ring):
        edges = honest_chain_edges(count=0)
        edges[(0, 2)] = dict(sig1=32, drop=99, rise=32)
        rs = build_reports(ring, ("f3",), edges)
        assert localize_f3(rs) is None

    def test_empty_ledgers(self, ring):
        rs = build_reports(ring, ("f3",), honest_chain_edges(count=0))
        assert localize_f3(rs) is None


class TestF4:
    def test_one_in_one_out_sums_to_zero(self, ring):
        edges = {
            (0, 1): dict(sig1=1, drop=2, rise=2, sigp=1),
            (1, 2): dict(sig1=1, drop=2, rise=1, sigp=1),
            (2, 3): dict(sig1=1, drop=1, rise=1, sigp=1),
        }
        rs = build_reports(ring, ("f4", LABEL), edges)
        assert audit_consistency(rs, ring) is None
        assert localize_f4(rs) is None

    def test_duplicating_node_found(self, ring):
        # node 2 output the labelled packet three times, received it once
        edges = {
            (0, 2): dict(sig1=1, drop=2, rise=2, sigp=1),
            (2, 3): dict(sig1=3, drop=6, rise=3, sigp=3),
        }
        rs = build_reports(ring, ("f4", LABEL), edges)
        verdict = localize_f4(rs)
        assert verdict is not None and verdict.node == 2
        assert verdict.kind == "F4-duplication"

    def test_receiver_pins_duplicator_through_honest_relay(self, ring):
        # duplicate copies all flow through honest node 1; the averaging
        # still lands on node 2 because node 1's in/out counts match
        edges = {
            (0, 2): dict(sig1=1, drop=2, rise=2, sigp=1),
            (2, 1): dict(sig1=2, drop=4, rise=2, sigp=2),
            (1, 3): dict(sig1=2, drop=2, rise=2, sigp=2),
        }
        rs = build_reports(ring, ("f4", LABEL), edges)
        assert audit_consistency(rs, ring) is None
        verdict = localize_f4(rs)
        assert verdict is not None and verdict.node == 2


class TestPipeline:
    def test_consistency_runs_before_flow(self, ring):
        rs = build_reports(ring, ("f3",), honest_chain_edges())
        rs.reports[1].sig_nn = None
        rs.reports[2].in_edges[1]["sig1"] = ReportValue(-1, (T_FAIL, 9), None)
        verdict = run_localization(rs, ring)
        assert verdict.kind == "malformed-report" and verdict.node == 2

    def test_no_verdict_is_an_error(self, ring):
        rs = build_reports(ring, ("f3",), honest_chain_edges())
        with pytest.raises(LocalizationError):
            run_localization(rs, ring)

    def test_verdict_reproducible(self, ring):
        edges = honest_chain_edges(count=0)
        edges[(0, 2)] = dict(sig1=40, drop=99, rise=40)
        rs = build_reports(ring, ("f3",), edges)
        v1 = run_localization(rs, ring)
        v2 = run_localization(rs, ring)
        assert v1 == v2
