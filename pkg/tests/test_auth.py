import pytest

from slidenet.auth import (AuthNode, BlacklistParcel, ElimParcel, Omega,
                           ReasonParcel, RemoveParcel, SenderAuth, Theta,
                           REASON_F3)
from slidenet.crypto import keygen
from slidenet.engine import Scenario, run_scenario

IDS = [0, 1, 2, 3]


@pytest.fixture
def ring():
    return keygen(IDS, seed=2)


def deliver(src, dst, parcel_signed, T=1, r=1):
    hop = src.wrap_hop(parcel_signed, T, r)
    return dst.on_parcel(src.node_id, hop, T, r)


def make_nodes(ring):
    sender = SenderAuth(0, ring, IDS, 0, 3)
    internal = AuthNode(1, ring, IDS, 0, 3)
    return sender, internal


class TestGates:
    def test_blocked_until_full_sot_passes_the_link(self, ring):
        sender, node = make_nodes(ring)
        assert not node.okay_to_send(2)          # no omega yet
        omega = sender.bb[("omega", 1)][0]
        deliver(sender, node, omega)
        assert node.sot_complete(1)              # empty broadcast follows
        # the omega has passed the sender link but not the link to node 2
        assert node.okay_to_send(0)
        assert not node.okay_to_send(2)
        node.bb[("omega", 1)][1].add(2)
        assert node.okay_to_send(2)

    def test_blacklisted_peer_blocks_transfer(self, ring):
        sender, node = make_nodes(ring)
        deliver(sender, node, sender.bb[("omega", 1)][0])
        node.bb[("omega", 1)][1].add(2)
        node.bl[2] = 1
        assert not node.okay_to_send(2)
        del node.bl[2]
        node.bl[node.node_id] = 1                # self-blacklisted
        assert not node.okay_to_send(2)

    def test_pending_theta_blocks_until_passed(self, ring):
        sender, node = make_nodes(ring)
        deliver(sender, node, sender.bb[("omega", 1)][0])
        node.bb[("omega", 1)][1].add(2)
        theta = node.ring.sign(node.ring.keypair(3), Theta(False, None, 1))
        node._add_parcel(theta)
        assert not node.okay_to_send(2)
        node.bb[("theta", 1)][1].add(2)
        assert node.okay_to_send(2)

    def test_eliminated_peer_never_ok(self, ring):
        sender, node = make_nodes(ring)
        deliver(sender, node, sender.bb[("omega", 1)][0])
        node.bb[("omega", 1)][1].add(2)
        node.en[2] = 1
        assert not node.okay_to_send(2)


class TestSotOrdering:
    def build_sot(self, ring):
        sender = SenderAuth(0, ring, IDS, 0, 3)
        sender.bb = {}
        sender._install_sot(2, Omega(1, 1, 1, REASON_F3, 2), [2],
                            [(1, REASON_F3)], [(1, 1)])
        return sender

    def parcels(self, sender):
        return {key: entry[0] for key, entry in sender.bb.items()}

    def test_out_of_order_rejected_then_accepted(self, ring):
        sender = self.build_sot(ring)
        node = AuthNode(1, ring, IDS, 0, 3)
        node.current_T = 2
        ps = self.parcels(sender)
        # blacklist parcel before omega/elims/reasons: ignored, unconfirmed
        deliver(sender, node, ps[("bl", 1, 1, 2)], T=2)
        assert ("bl", 1, 1, 2) not in node.bb and node.cbp_out[0] == 0
        deliver(sender, node, ps[("omega", 2)], T=2)
        deliver(sender, node, ps[("reason", 1, 2)], T=2)
        assert ("reason", 1, 2) not in node.bb    # elimination still missing
        deliver(sender, node, ps[("elim", 2, 2)], T=2)
        deliver(sender, node, ps[("reason", 1, 2)], T=2)
        deliver(sender, node, ps[("bl", 1, 1, 2)], T=2)
        assert node.sot_complete(2)
        assert node.bl == {1: 1}

    def test_elimination_wipes_state(self, ring):
        sender = self.build_sot(ring)
        node = AuthNode(1, ring, IDS, 0, 3)
        node.current_T = 2
        node.claims[(2, 3, 1)] = True
        ps = self.parcels(sender)
        deliver(sender, node, ps[("omega", 2)], T=2)
        events = deliver(sender, node, ps[("elim", 2, 2)], T=2)
        assert ("wipe", 2) in events
        assert node.en == {2: 2} and node.claims == {}

    def test_own_blacklist_parcel_generates_report(self, ring):
        sender = self.build_sot(ring)
        node = AuthNode(1, ring, IDS, 0, 3)
        node.current_T = 2
        ps = self.parcels(sender)
        deliver(sender, node, ps[("omega", 2)], T=2)
        deliver(sender, node, ps[("elim", 2, 2)], T=2)
        deliver(sender, node, ps[("reason", 1, 2)], T=2)
        deliver(sender, node, ps[("bl", 1, 1, 2)], T=2)
        own = [k for k in node.bb if k[0] == "status" and k[1] == 1]
        # one parcel per non-eliminated neighbor (0 and 3; 2 was eliminated)
        assert len(own) == 2
        assert ("know", 1, 1, 1) in node.bb

    def test_removal_prunes_and_unblacklists(self, ring):
        sender = self.build_sot(ring)
        node = AuthNode(1, ring, IDS, 0, 3)
        node.current_T = 2
        ps = self.parcels(sender)
        for key in (("omega", 2), ("elim", 2, 2), ("reason", 1, 2),
                    ("bl", 1, 1, 2)):
            deliver(sender, node, ps[key], T=2)
        assert 1 in node.bl
        removal = sender.sign(RemoveParcel(1, 2))
        deliver(sender, node, removal, T=2)
        assert 1 not in node.bl
        assert not [k for k in node.bb if k[0] == "status"]


@pytest.fixture(scope="module")
def outcome():
    sc = Scenario(n=4, mode="auth", messages=2, max_transmissions=3,
                  checks="full")
    return run_scenario(sc)


class TestHonestAuthRun:
    def test_delivery(self, outcome):
        report, eng = outcome
        assert [d["message"] for d in report["delivered"]] == [1, 2]
        assert all(t["result"] == "ok" for t in report["transmissions"])

    def test_sender_inserted_full_codeword(self, outcome):
        report, _ = outcome
        assert all(t["kappa"] == 1024 for t in report["transmissions"])

    def test_eot_parcel_latency(self, outcome):
        report, eng = outcome
        for t in report["transmissions"]:
            assert t["theta_created"] == eng.L - eng.n + 1
            assert t["theta_arrival"] is not None
            assert t["theta_arrival"] - t["theta_created"] <= eng.n

    def test_wasted_rounds_bound(self, outcome):
        report, eng = outcome
        for t in report["transmissions"]:
            assert t["wasted"] <= 4 * eng.n**3

    def test_signature_buffer_budget(self, outcome):
        report, eng = outcome
        for stats in report["memory"].values():
            assert stats["sig_entries_per_edge"] <= eng.D + 3
            assert stats["broadcast_buffer"] <= eng.n**2 + 5 * eng.n

    def test_churn_auth_delivery(self):
        sc = Scenario(n=4, mode="auth", messages=1, max_transmissions=2,
                      schedule_kind="churn", schedule_p=0.2,
                      schedule_seed=11, checks="full")
        report, _ = run_scenario(sc)
        assert len(report["delivered"]) == 1
