"""Authenticated routing extension: signature ledgers on every edge, the
broadcast subsystem (start/end-of-transmission parcels, blacklist, status
reports), packet-transfer gating, and the sender's failure lifecycle.

Every packet transfer is wrapped in a signed seven-item statement whose
counters must advance consistently with the receiver's ledger; the signed
statements double as evidence in status reports when a transmission fails.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .crypto import Signed
from .util import register_packer

REASON_OK = ("ok",)
REASON_F2 = ("f2",)
REASON_F3 = ("f3",)


def reason_f4(label):
    return ("f4", label)


# ---------------------------------------------------------------------------
# broadcast parcels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Theta:
    """Receiver's end-of-transmission parcel: decode bit plus the label of
    a packet received twice, if any."""
    decoded: bool
    dup_label: object
    T: int


@dataclass(frozen=True)
class Omega:
    """First start-of-transmission parcel: how many elimination, failure
    reason, and blacklist parcels follow, plus the previous outcome."""
    en_count: int
    bl_count: int
    f_count: int
    reason: tuple
    T: int


@dataclass(frozen=True)
class ElimParcel:
    node: object
    T: int


@dataclass(frozen=True)
class ReasonParcel:
    failed_T: int
    reason: tuple
    T: int


@dataclass(frozen=True)
class BlacklistParcel:
    node: object
    failed_T: int
    T: int


@dataclass(frozen=True)
class RemoveParcel:
    node: object
    T: int


@dataclass(frozen=True)
class KnowledgeParcel:
    claimant: object
    target: object
    failed_T: int


@dataclass(frozen=True)
class StatusParcel:
    """One slice of a node's status report: the signed ledger values for
    both directions of the edge pair with one neighbor (or the node's own
    re-shuffle ledger).  payload is a tuple of
    (field, label, value, stamp_T, stamp_r, evidence) records."""
    origin: object
    failed_T: int
    reason: tuple
    part: tuple                   # ("edge", peer) or ("self",)
    payload: tuple


_PARCEL_TYPES = (Theta, Omega, ElimParcel, ReasonParcel, BlacklistParcel,
                 RemoveParcel, KnowledgeParcel, StatusParcel)

register_packer(Theta, lambda p: ("~theta", p.decoded, p.dup_label, p.T))
register_packer(Omega, lambda p: ("~omega", p.en_count, p.bl_count, p.f_count,
                                  p.reason, p.T))
register_packer(ElimParcel, lambda p: ("~elim", p.node, p.T))
register_packer(ReasonParcel, lambda p: ("~reason", p.failed_T, p.reason, p.T))
register_packer(BlacklistParcel, lambda p: ("~bl", p.node, p.failed_T, p.T))
register_packer(RemoveParcel, lambda p: ("~rm", p.node, p.T))
register_packer(KnowledgeParcel, lambda p: ("~know", p.claimant, p.target,
                                            p.failed_T))
register_packer(StatusParcel, lambda p: ("~status", p.origin, p.failed_T,
                                         p.reason, p.part, p.payload))


def parcel_key(p):
    if isinstance(p, Theta):
        return ("theta", p.T)
    if isinstance(p, Omega):
        return ("omega", p.T)
    if isinstance(p, ElimParcel):
        return ("elim", p.node, p.T)
    if isinstance(p, ReasonParcel):
        return ("reason", p.failed_T, p.T)
    if isinstance(p, BlacklistParcel):
        return ("bl", p.node, p.failed_T, p.T)
    if isinstance(p, RemoveParcel):
        return ("rm", p.node, p.T)
    if isinstance(p, KnowledgeParcel):
        return ("know", p.claimant, p.target, p.failed_T)
    if isinstance(p, StatusParcel):
        return ("status", p.origin, p.failed_T, p.part)
    raise TypeError(type(p).__name__)


def _priority(p):
    """Transfer priority class; lower sends first."""
    if isinstance(p, Theta):
        return (0, 0)
    if isinstance(p, Omega):
        return (1, 0)
    if isinstance(p, ElimParcel):
        return (1, 1)
    if isinstance(p, ReasonParcel):
        return (1, 2)
    if isinstance(p, BlacklistParcel):
        return (1, 3)
    if isinstance(p, RemoveParcel):
        return (2, 0)
    if isinstance(p, KnowledgeParcel):
        return (3, 0)
    if isinstance(p, StatusParcel):
        return (5, 0)
    raise TypeError(type(p).__name__)


# ---------------------------------------------------------------------------
# per-edge signature ledgers
# ---------------------------------------------------------------------------

class LedgerEntry:
    __slots__ = ("value", "stamp", "evidence")

    def __init__(self, value=0, stamp=(0, 0), evidence=None):
        self.value = value
        self.stamp = stamp
        self.evidence = evidence

    def set(self, value, stamp, evidence):
        self.value = value
        self.stamp = stamp
        self.evidence = evidence

    def report(self):
        return (self.value, self.stamp, self.evidence)


class EdgeLedger:
    """Running signed totals for one directed edge, from one endpoint's
    point of view.  sig1: net current-codeword packets across the edge;
    sig2: the counterpart's signed potential change; sig3: own potential
    change; sigp: per-fragment net crossings."""

    __slots__ = ("sig1", "sig2", "sig3", "sigp")

    def __init__(self):
        self.clear(0)

    def clear(self, T):
        self.sig1 = LedgerEntry(0, (T, 0), None)
        self.sig2 = LedgerEntry(0, (T, 0), None)
        self.sig3 = LedgerEntry(0, (T, 0), None)
        self.sigp = {}

    def sigp_value(self, label) -> int:
        entry = self.sigp.get(label)
        return entry.value if entry is not None else 0

    def entries(self) -> int:
        return 3 + len(self.sigp)


# ---------------------------------------------------------------------------
# node-level authenticated state
# ---------------------------------------------------------------------------

class AuthNode:
    """Broadcast buffer, data buffer, blacklist and ledgers for one node,
    plus the signing/verification hooks used during packet exchange."""

    def __init__(self, node_id, ring, ids, sender_id, receiver_id):
        self.node_id = node_id
        self.ring = ring
        self.key = ring.keypair(node_id)
        self.ids = sorted(ids)
        self.n = len(ids)
        self.sender_id = sender_id
        self.receiver_id = receiver_id
        self.peers = [p for p in self.ids if p != node_id]

        self.out_led = {}
        self.in_led = {}
        if node_id != receiver_id:
            for p in self.peers:
                if p != sender_id:
                    self.out_led[p] = EdgeLedger()
        if node_id != sender_id:
            for p in self.peers:
                if p != receiver_id:
                    self.in_led[p] = EdgeLedger()
        self.sig_nn = 0

        self.bb = {}                  # parcel_key -> [Signed, passed:set, seq]
        self._seq = 0
        self.bl = {}                  # node -> failed transmission
        self.en = {}                  # node -> transmission eliminated
        self.claims = {}              # (claimant, target, failed_T) -> True
        self.last_sent = {p: None for p in self.peers}
        self.cbp_out = {p: 0 for p in self.peers}
        self.alpha_in = {p: None for p in self.peers}
        self.sot = {}                 # T -> {"omega", "elims", "reasons", "bls"}
        self.current_T = 1
        self.reported_for = set()
        self.relaxed_verify = False   # corrupt nodes may skip delta checks
        self.report_hook = None       # corrupt nodes may forge own reports
        # high-water marks
        self.max_bb = 0
        self.max_db = 0
        self.max_sig_entries = 0

    # -- small helpers ----------------------------------------------------

    def sign(self, value) -> Signed:
        return self.ring.sign(self.key, value)

    def _sot_state(self, T):
        st = self.sot.get(T)
        if st is None:
            st = {"omega": None, "elims": set(), "reasons": set(), "bls": set()}
            self.sot[T] = st
        return st

    def sot_complete(self, T=None) -> bool:
        T = self.current_T if T is None else T
        st = self.sot.get(T)
        if st is None or st["omega"] is None:
            return False
        om = st["omega"]
        return (len(st["elims"]) >= om.en_count
                and len(st["reasons"]) >= om.f_count
                and len(st["bls"]) >= om.bl_count)

    def _add_parcel(self, signed_parcel, mark_peer=None) -> bool:
        key = parcel_key(signed_parcel.value)
        entry = self.bb.get(key)
        added = False
        if entry is None:
            self.bb[key] = entry = [signed_parcel, set(), self._seq]
            self._seq += 1
            added = True
        if mark_peer is not None:
            entry[1].add(mark_peer)
        return added

    def note_watermarks(self):
        self.max_bb = max(self.max_bb, len(self.bb))
        db = len(self.bl) + len(self.en) + len(self.claims)
        self.max_db = max(self.max_db, db)
        for led in list(self.out_led.values()) + list(self.in_led.values()):
            self.max_sig_entries = max(self.max_sig_entries, led.entries())

    # -- stage 1: signed height replies ------------------------------------

    def build_stage1_reply(self, ib, T, r, height=None) -> Signed:
        """The receiving side's signed seven items for edge E(peer, self):
        (T, round, height, round-received, net packets, own potential
        change, per-packet count for the most recent packet)."""
        led = self.in_led[ib.peer]
        last = getattr(ib, "last_label", None)
        if last is None or getattr(ib, "last_was_stale", False):
            sigp = None
        else:
            sigp = (last, led.sigp_value(last))
        h = ib.H if height is None else height
        return self.sign(("s1", T, r, h, ib.RR, led.sig1.value,
                          led.sig3.value, sigp))

    def verify_stage1_reply(self, ob, signed, T, r):
        """Check the peer's signed stage-1 reply against our outgoing
        ledger.  Returns the (height, round-received) pair to fold, or
        None to treat the exchange as an edge failure."""
        if not self.ring.verify_as(signed, ob.peer):
            return None
        v = signed.value
        if not (isinstance(v, tuple) and len(v) == 8 and v[0] == "s1"):
            return None
        _, mT, mr, h, rr, sig1, sig3, sigp = v
        if mT != T or mr != r:
            return None
        if self.relaxed_verify:
            return (h, rr)
        led = self.out_led[ob.peer]
        claimed = (ob.FR is not None and rr is not None and rr != -1
                   and rr >= ob.FR)
        if claimed:
            fresh = ob.p_tilde is not None and ob.p_tilde.fresh
            delta2 = sig3 - led.sig2.value
            if not (0 <= delta2 <= (ob.H_FP or 0)):
                return None
            if fresh:
                label = ob.p_tilde.packet.label()
                if sig1 != led.sig1.value + 1:
                    return None
                if sigp is None or sigp[0] != label \
                        or sigp[1] != led.sigp_value(label) + 1:
                    return None
            else:
                if sig1 != led.sig1.value or sigp is not None:
                    return None
        else:
            if sig1 != led.sig1.value or sig3 != led.sig2.value:
                return None
        return (h, rr)

    def sync_on_confirm(self, ob, signed, confirmed, confirmed_height, slide,
                        T, r) -> None:
        """After confirmation of receipt, adopt the receiver's signed
        counters and record our own potential drop."""
        led = self.out_led[ob.peer]
        if self.relaxed_verify:
            v = signed.value
            led.sig1.set(v[5], (T, r), signed)
            led.sig2.set(v[6], (T, r), signed)
            if v[7] is not None:
                led.sigp.setdefault(v[7][0], LedgerEntry()).set(
                    v[7][1], (T, r), signed)
        else:
            v = signed.value
            led.sig1.set(v[5], (T, r), signed)
            led.sig2.set(v[6], (T, r), signed)
            if confirmed is not None and confirmed.fresh:
                label = confirmed.packet.label()
                led.sigp.setdefault(label, LedgerEntry()).set(
                    led.sigp_value(label) + 1, (T, r), signed)
        led.sig3.set(led.sig3.value + confirmed_height, (T, r), None)
        self.sig_nn += slide

    # -- stage 2: signed packet transfers -----------------------------------

    def build_packet_msg(self, ob, T, r, stored=None) -> Signed:
        """Wrap the flagged packet (or a substitute chosen by a corrupt
        behavior) in the signed seven items of a transfer."""
        stored = ob.p_tilde if stored is None else stored
        led = self.out_led[ob.peer]
        label = stored.packet.label()
        if stored.fresh:
            body = ("s2", T, r, stored.packet, ob.FR, led.sig1.value + 1,
                    led.sig2.value, led.sig3.value + ob.H_FP,
                    (label, led.sigp_value(label) + 1))
        else:
            body = ("s2", T, r, stored.packet, ob.FR, led.sig1.value,
                    led.sig2.value, led.sig3.value + ob.H_FP, None)
        return self.sign(body)

    def verify_packet_msg(self, ib, signed, T, r):
        """Validate an incoming transfer; returns (Stored, flagged_round)
        or None if the transfer must be treated as undelivered."""
        if not self.ring.verify_as(signed, ib.peer):
            return None
        v = signed.value
        if not (isinstance(v, tuple) and len(v) == 9 and v[0] == "s2"):
            return None
        _, mT, mr, packet, fr, sig1, _sig2own, sig3, sigp = v
        if mT != T or mr != r or fr is None:
            return None
        if not self.ring.verify_as(packet.sender_signature, self.sender_id):
            return None
        if packet.sender_signature.value != packet.signed_body():
            return None
        from .buffers import Stored
        fresh = sigp is not None
        if self.relaxed_verify:
            return (Stored(packet, fresh), fr)
        led = self.in_led[ib.peer]
        land = ib.H_GP if ib.H_GP is not None else ib.H + 1
        if sig3 - led.sig2.value < land:
            return None
        if fresh:
            label = packet.label()
            if sig1 != led.sig1.value + 1:
                return None
            if sigp[0] != label or sigp[1] != led.sigp_value(label) + 1:
                return None
        else:
            if sig1 != led.sig1.value:
                return None
        return (Stored(packet, fresh), fr)

    def sync_on_accept(self, ib, signed, stored, land, T, r) -> None:
        led = self.in_led[ib.peer]
        v = signed.value
        led.sig1.set(v[5], (T, r), signed)
        led.sig2.set(v[7], (T, r), signed)
        if v[8] is not None:
            led.sigp.setdefault(v[8][0], LedgerEntry()).set(
                v[8][1], (T, r), signed)
        if self.node_id != self.receiver_id:
            led.sig3.set(led.sig3.value + land, (T, r), None)
        ib.last_label = stored.packet.label()
        ib.last_was_stale = not stored.fresh

    # -- transfer gating ----------------------------------------------------

    def _blocking_bl_info(self, peer) -> bool:
        for key, (signed, passed, _) in self.bb.items():
            if key[0] in ("rm", "know") and peer not in passed:
                return True
        return False

    def okay_to_transfer(self, peer) -> bool:
        """Shared clause list of Okay-to-Send / Okay-to-Receive for the
        link to `peer`."""
        T = self.current_T
        if peer in self.en:
            return False
        if not self.sot_complete(T):
            return False
        for key, (signed, passed, _) in self.bb.items():
            if key[0] in ("omega", "elim", "reason", "bl") and key[-1] == T \
                    and peer not in passed:
                return False
        if self.node_id in self.bl or peer in self.bl:
            return False
        theta = self.bb.get(("theta", T))
        if theta is not None and peer not in theta[1]:
            return False
        if self._blocking_bl_info(peer):
            return False
        return True

    okay_to_send = okay_to_transfer
    okay_to_receive = okay_to_transfer

    # -- broadcast: control channel (stage 1) --------------------------------

    def make_request(self, peer) -> Optional[tuple]:
        """alpha: ask `peer` for a specific missing status report parcel."""
        if peer in self.bl:
            missing = self._missing_part(peer, self.bl[peer])
            if missing is not None:
                return (peer, self.bl[peer], missing)
        for (claimant, target, failed_T) in sorted(self.claims):
            if claimant == peer and target in self.bl \
                    and self.bl[target] == failed_T:
                missing = self._missing_part(target, failed_T)
                if missing is not None:
                    return (target, failed_T, missing)
        return None

    def _missing_part(self, origin, failed_T) -> Optional[tuple]:
        reason = self._reason_for(failed_T)
        if reason is None:
            return None
        expected = self._expected_parts(origin, reason)
        for part in expected:
            if ("status", origin, failed_T, part) not in self.bb:
                return part
        return None

    def _reason_for(self, failed_T) -> Optional[tuple]:
        for key, (signed, _, _) in self.bb.items():
            if key[0] == "reason" and key[1] == failed_T:
                return signed.value.reason
        return None

    def _expected_parts(self, origin, reason):
        parts = [("edge", p) for p in self.ids
                 if p != origin and p not in self.en]
        if reason[0] == "f2":
            parts.append(("self",))
        return parts

    def has_complete_report(self, origin, failed_T) -> bool:
        return self._missing_part(origin, failed_T) is None \
            and self._reason_for(failed_T) is not None

    def on_request(self, peer, alpha) -> None:
        self.alpha_in[peer] = alpha

    def take_cbp(self, peer) -> int:
        bit = self.cbp_out[peer]
        self.cbp_out[peer] = 0
        return bit

    def on_cbp(self, peer, bit) -> None:
        if bit == 1 and self.last_sent[peer] is not None:
            entry = self.bb.get(self.last_sent[peer])
            if entry is not None:
                entry[1].add(peer)
        self.last_sent[peer] = None

    # -- broadcast: parcel channel (stage 2) ----------------------------------

    def choose_parcel(self, peer) -> Optional[Signed]:
        """Pick the highest-priority parcel not yet passed over the link to
        `peer`; the peer's alpha request promotes one status parcel."""
        alpha = self.alpha_in[peer]
        best = None
        best_rank = None
        for key, (signed, passed, seq) in self.bb.items():
            if peer in passed:
                continue
            parcel = signed.value
            rank = _priority(parcel)
            if isinstance(parcel, StatusParcel):
                if alpha is not None and (parcel.origin, parcel.failed_T,
                                          parcel.part) == (alpha[0], alpha[1],
                                                           alpha[2]):
                    rank = (4, 0)
                elif parcel.origin not in self.bl:
                    continue
            tie = (rank, seq, str(key))
            if best_rank is None or tie < best_rank:
                best_rank = tie
                best = signed
        if best is not None:
            self.last_sent[peer] = parcel_key(best.value)
        return best

    def wrap_hop(self, signed_parcel, T, r) -> Signed:
        return self.sign(("hop", T, r, signed_parcel))

    def unwrap_hop(self, hop, peer, T, r) -> Optional[Signed]:
        if not self.ring.verify_as(hop, peer):
            return None
        v = hop.value
        if not (isinstance(v, tuple) and len(v) == 4 and v[0] == "hop"):
            return None
        if v[1] != T or v[2] != r:
            return None
        inner = v[3]
        if not isinstance(inner, Signed) or not self.ring.verify(inner):
            return None
        return inner

    def _origin_ok(self, parcel, signed) -> bool:
        if isinstance(parcel, (Omega, ElimParcel, ReasonParcel,
                               BlacklistParcel, RemoveParcel)):
            return signed.signer == self.sender_id
        if isinstance(parcel, Theta):
            return signed.signer == self.receiver_id
        if isinstance(parcel, KnowledgeParcel):
            return signed.signer == parcel.claimant
        if isinstance(parcel, StatusParcel):
            return signed.signer == parcel.origin
        return False

    def _sot_orderly(self, parcel) -> bool:
        """Start-of-transmission parcels are only accepted in the order
        omega, eliminations, failure reasons, blacklist entries."""
        st = self._sot_state(parcel.T)
        om = st["omega"]
        if isinstance(parcel, Omega):
            return True
        if om is None:
            return False
        if isinstance(parcel, ElimParcel):
            return True
        if isinstance(parcel, ReasonParcel):
            return len(st["elims"]) >= om.en_count
        if isinstance(parcel, BlacklistParcel):
            return (len(st["elims"]) >= om.en_count
                    and len(st["reasons"]) >= om.f_count)
        return True

    def on_parcel(self, peer, hop, T, r, sig_clear_hook=None):
        """Validate and absorb a broadcast parcel arriving from `peer`.
        Returns a list of protocol events for the engine ("eliminated",
        node) when an elimination parcel wipes state, etc."""
        inner = self.unwrap_hop(hop, peer, T, r)
        if inner is None:
            return []
        parcel = inner.value
        if not isinstance(parcel, _PARCEL_TYPES) or not self._origin_ok(parcel, inner):
            return []
        is_sot = isinstance(parcel, (Omega, ElimParcel, ReasonParcel,
                                     BlacklistParcel))
        if is_sot:
            if parcel.T < self.current_T or not self._sot_orderly(parcel):
                return []
        self.cbp_out[peer] = 1
        return self._absorb(parcel, inner, peer, sig_clear_hook)

    def _absorb(self, parcel, inner, peer, sig_clear_hook):
        events = []
        if isinstance(parcel, Theta):
            if parcel.T == self.current_T:
                self._add_parcel(inner, mark_peer=peer)
        elif isinstance(parcel, Omega):
            st = self._sot_state(parcel.T)
            st["omega"] = parcel
            added = self._add_parcel(inner, mark_peer=peer)
            if added and parcel.bl_count == 0 and parcel.T >= self.current_T:
                self._clear_sig_buffers(parcel.T, sig_clear_hook)
        elif isinstance(parcel, ElimParcel):
            st = self._sot_state(parcel.T)
            st["elims"].add(parcel.node)
            self._add_parcel(inner, mark_peer=peer)
            if parcel.node not in self.en:
                self.en[parcel.node] = parcel.T
                events.append(("wipe", parcel.node))
                self._clear_sig_buffers(parcel.T, sig_clear_hook)
                self._wipe_for_elimination()
        elif isinstance(parcel, ReasonParcel):
            self._sot_state(parcel.T)["reasons"].add(parcel.failed_T)
            self._add_parcel(inner, mark_peer=peer)
        elif isinstance(parcel, BlacklistParcel):
            st = self._sot_state(parcel.T)
            st["bls"].add(parcel.node)
            added = self._add_parcel(inner, mark_peer=peer)
            if added:
                if ("rm", parcel.node, parcel.T) not in self.bb:
                    self.bl[parcel.node] = parcel.failed_T
                self._prune_outdated(parcel.node, parcel.failed_T)
                if parcel.node == self.node_id \
                        and parcel.failed_T not in self.reported_for:
                    reason = self._reason_for(parcel.failed_T)
                    if reason is not None:
                        self._add_own_report(parcel.failed_T, reason)
                om = st["omega"]
                if om is not None and len(st["bls"]) >= om.bl_count:
                    self._clear_sig_buffers(parcel.T, sig_clear_hook)
        elif isinstance(parcel, RemoveParcel):
            if parcel.T == self.current_T:
                self._add_parcel(inner, mark_peer=peer)
                if parcel.node in self.bl:
                    self.bl.pop(parcel.node)
                    self._prune_outdated(parcel.node, None)
        elif isinstance(parcel, KnowledgeParcel):
            if parcel.target in self.bl \
                    and self.bl[parcel.target] == parcel.failed_T:
                self.claims[(inner.signer, parcel.target, parcel.failed_T)] = True
        elif isinstance(parcel, StatusParcel):
            if parcel.origin in self.bl \
                    and self.bl[parcel.origin] == parcel.failed_T \
                    and self._status_shape_ok(parcel):
                added = self._add_parcel(inner, mark_peer=peer)
                if added and self.has_complete_report(parcel.origin,
                                                      parcel.failed_T):
                    know = KnowledgeParcel(self.node_id, parcel.origin,
                                           parcel.failed_T)
                    self._add_parcel(self.sign(know))
        return events

    def _status_shape_ok(self, parcel: StatusParcel) -> bool:
        reason = self._reason_for(parcel.failed_T)
        if reason is None or parcel.reason != reason:
            return False
        return parcel.part in self._expected_parts(parcel.origin, reason)

    def _clear_sig_buffers(self, T, sig_clear_hook) -> None:
        for led in list(self.out_led.values()) + list(self.in_led.values()):
            led.clear(T)
        self.sig_nn = 0
        if sig_clear_hook is not None:
            sig_clear_hook()

    def _wipe_for_elimination(self) -> None:
        """A newly-learned elimination wipes routing state: broadcast
        buffer except start-of-transmission parcels, claims, blacklist."""
        keep = {}
        for key, entry in self.bb.items():
            if key[0] in ("omega", "elim", "reason", "bl"):
                keep[key] = entry
        self.bb = keep
        self.claims = {}
        self.bl = {}

    def _prune_outdated(self, node, keep_failed_T) -> None:
        """Blacklist news about `node` invalidates status data from other
        transmissions."""
        drop = []
        for key in self.bb:
            if key[0] == "status" and key[1] == node \
                    and key[2] != keep_failed_T:
                drop.append(key)
            elif key[0] == "know" and key[2] == node \
                    and key[3] != keep_failed_T:
                drop.append(key)
        for key in drop:
            del self.bb[key]
        for ck in [c for c in self.claims
                   if c[1] == node and c[2] != keep_failed_T]:
            del self.claims[ck]

    # -- own status report ----------------------------------------------------

    def _report_payload(self, peer, reason):
        led_out = self.out_led.get(peer)
        led_in = self.in_led.get(peer)
        records = []

        def rec(side, field, entry, label=None):
            if entry is None:
                return
            records.append((side, field, label, entry.value,
                            entry.stamp[0], entry.stamp[1], entry.evidence))

        if reason[0] == "f2":
            if led_out is not None:
                rec("out", "sig2", led_out.sig2)
                rec("out", "sig3", led_out.sig3)
            if led_in is not None:
                rec("in", "sig2", led_in.sig2)
                rec("in", "sig3", led_in.sig3)
        elif reason[0] == "f3":
            if led_out is not None:
                rec("out", "sig1", led_out.sig1)
            if led_in is not None:
                rec("in", "sig1", led_in.sig1)
        else:
            label = reason[1]
            if led_out is not None:
                rec("out", "sigp", led_out.sigp.get(label, LedgerEntry()), label)
            if led_in is not None:
                rec("in", "sigp", led_in.sigp.get(label, LedgerEntry()), label)
        return tuple(records)

    def make_own_report(self, failed_T, reason):
        parcels = []
        for peer in self.peers:
            if peer in self.en:
                continue
            parcels.append(StatusParcel(self.node_id, failed_T, reason,
                                        ("edge", peer),
                                        self._report_payload(peer, reason)))
        if reason[0] == "f2":
            parcels.append(StatusParcel(self.node_id, failed_T, reason,
                                        ("self",),
                                        (("self", "sig_nn", None, self.sig_nn,
                                          0, 0, None),)))
        return parcels

    def _add_own_report(self, failed_T, reason) -> None:
        self.reported_for.add(failed_T)
        parcels = self.make_own_report(failed_T, reason)
        if self.report_hook is not None:
            parcels = self.report_hook(parcels, self)
        for parcel in parcels:
            self._add_parcel(self.sign(parcel))
        know = KnowledgeParcel(self.node_id, self.node_id, failed_T)
        self._add_parcel(self.sign(know))

    # -- transmission boundary --------------------------------------------------

    def end_of_transmission(self) -> None:
        """Drop this transmission's broadcast parcels and blacklist; keep
        status reports, knowledge claims, and early-arrived parcels of the
        next start-of-transmission broadcast."""
        T = self.current_T
        drop = []
        for key in self.bb:
            kind = key[0]
            if kind == "theta":
                drop.append(key)
            elif kind in ("omega", "elim", "reason", "bl", "rm") \
                    and key[-1] <= T:
                drop.append(key)
        for key in drop:
            del self.bb[key]
        self.bl = {}
        self.sot.pop(T, None)
        self.alpha_in = {p: None for p in self.alpha_in}
        self.last_sent = {p: None for p in self.last_sent}
        self.cbp_out = {p: 0 for p in self.cbp_out}
        self.current_T = T + 1


class SenderAuth(AuthNode):
    """The sender's side of the authenticated protocol: master blacklist
    and elimination list, start-of-transmission broadcasts, status-report
    collection, and the failure records feeding localization."""

    def __init__(self, node_id, ring, ids, sender_id, receiver_id):
        super().__init__(node_id, ring, ids, sender_id, receiver_id)
        self.F = 0
        self.beta = 0
        self.halted = False
        self.theta = None
        self.theta_round = None
        self.participants = {}        # failed_T -> list of nodes
        self.failure_records = {}     # failed_T -> record dict
        self.reports = {}             # (origin, failed_T) -> {part: Signed}
        self._install_sot(1, Omega(0, 0, 0, REASON_OK, 1), [], [], [])

    # -- SOT construction -------------------------------------------------

    def _install_sot(self, T, omega, elim_nodes, reason_items, bl_items):
        """Sign and queue the start-of-transmission broadcast, recording
        it in our own SOT state so the completeness predicates hold."""
        st = self._sot_state(T)
        st["omega"] = omega
        self._add_parcel(self.sign(omega))
        for node in sorted(elim_nodes):
            st["elims"].add(node)
            self._add_parcel(self.sign(ElimParcel(node, T)))
        for failed_T, reason in sorted(reason_items):
            st["reasons"].add(failed_T)
            self._add_parcel(self.sign(ReasonParcel(failed_T, reason, T)))
        for node, failed_T in sorted(bl_items):
            st["bls"].add(node)
            self._add_parcel(self.sign(BlacklistParcel(node, failed_T, T)))

    def _archive_own_evidence(self, failed_T) -> dict:
        own = {}
        for peer, led in sorted(self.out_led.items()):
            own[peer] = {
                "sig1": led.sig1.report(),
                "sig2": led.sig2.report(),
                "sig3": led.sig3.report(),
                "sigp": {lab: e.report() for lab, e in led.sigp.items()},
            }
        return own

    def prepare_sot(self, kappa: int, packets_per_codeword: int) -> tuple:
        """End-of-transmission processing: classify the outcome, blacklist
        participants of a failure, archive own evidence, and queue the next
        start-of-transmission broadcast.  Returns (reason, participants)."""
        from .localize import classify_failure
        T = self.current_T
        assert self.theta is not None and self.theta.T == T, \
            "end-of-transmission parcel missing"
        reason = classify_failure(kappa, packets_per_codeword, self.theta)
        self.last_blacklist = sorted(self.bl)
        participants = [i for i in self.ids
                        if i not in self.en and i not in self.bl]
        if reason != REASON_OK:
            self.F += 1
            self.participants[T] = participants
            self.failure_records[T] = {
                "reason": reason,
                "participants": participants,
                "eliminated": frozenset(self.en),
                "kappa": kappa,
                "own": self._archive_own_evidence(T),
            }
            for node in participants:
                if node != self.node_id:
                    self.bl[node] = T
        omega = Omega(len(self.en), len(self.bl), self.F,
                      REASON_OK if reason == REASON_OK else reason, T + 1)
        for led in self.out_led.values():
            led.clear(T + 1)
        self.bb = {}
        self._seq = 0
        reason_items = [(fT, rec["reason"])
                        for fT, rec in sorted(self.failure_records.items())]
        bl_items = sorted(self.bl.items())
        self._install_sot(T + 1, omega, sorted(self.en), reason_items,
                          bl_items)
        self.theta = None
        self.theta_round = None
        self.beta = 0
        return reason, participants

    def eliminate(self, node, T) -> None:
        """Permanently remove a node: wipe collected state, reset failure
        accounting, and queue a fresh start-of-transmission broadcast."""
        self.en[node] = T
        self.bb = {}
        self._seq = 0
        self.bl = {}
        self.claims = {}
        self.reports = {}
        self.failure_records = {}
        self.participants = {}
        self.theta = None
        self.theta_round = None
        self.F = 0
        self.beta = 0
        for led in self.out_led.values():
            led.clear(T + 1)
        self.sig_nn = 0
        self.halted = True
        self._install_sot(T + 1, Omega(len(self.en), 0, 0, REASON_OK, T + 1),
                          sorted(self.en), [], [])

    # -- receiving broadcast parcels ---------------------------------------

    def on_parcel(self, peer, hop, T, r, sig_clear_hook=None):
        inner = self.unwrap_hop(hop, peer, T, r)
        if inner is None:
            return []
        parcel = inner.value
        if not isinstance(parcel, _PARCEL_TYPES) \
                or not self._origin_ok(parcel, inner):
            return []
        self.cbp_out[peer] = 1
        if self.halted:
            # after eliminating a node the sender disregards everything
            # else until the next transmission begins
            return []
        events = []
        if isinstance(parcel, Theta):
            if parcel.T == self.current_T and self.theta is None:
                self.theta = parcel
                self.theta_round = r
                events.append(("theta", r))
        elif isinstance(parcel, KnowledgeParcel):
            if parcel.target in self.bl \
                    and self.bl[parcel.target] == parcel.failed_T:
                self.claims[(inner.signer, parcel.target, parcel.failed_T)] = True
        elif isinstance(parcel, StatusParcel):
            events.extend(self._on_status_parcel(parcel, inner))
        return events

    def _on_status_parcel(self, parcel: StatusParcel, inner) -> list:
        origin, failed_T = parcel.origin, parcel.failed_T
        if origin not in self.bl or self.bl[origin] != failed_T:
            return []
        record = self.failure_records.get(failed_T)
        if record is None:
            return []
        if parcel.reason != record["reason"] \
                or not self._status_part_ok(parcel, record):
            return [("eliminate", origin,
                     f"node {origin} returned a mismatched status parcel "
                     f"for transmission {failed_T}")]
        slot = self.reports.setdefault((origin, failed_T), {})
        if parcel.part in slot:
            return []
        slot[parcel.part] = inner
        events = []
        if self._report_complete(origin, failed_T, record):
            self._add_parcel(self.sign(RemoveParcel(origin, self.current_T)))
            del self.bl[origin]
            for ck in [c for c in self.claims if c[1] == origin]:
                del self.claims[ck]
            done = [fT for fT in self.failure_records
                    if self._all_reports_complete(fT)]
            if done:
                events.append(("localize", min(done)))
        return events

    def _status_part_ok(self, parcel: StatusParcel, record) -> bool:
        expected = [("edge", p) for p in self.ids
                    if p != parcel.origin and p not in record["eliminated"]]
        if record["reason"][0] == "f2":
            expected.append(("self",))
        return parcel.part in expected

    def _report_complete(self, origin, failed_T, record) -> bool:
        have = self.reports.get((origin, failed_T), {})
        expected = [("edge", p) for p in self.ids
                    if p != origin and p not in record["eliminated"]]
        if record["reason"][0] == "f2":
            expected.append(("self",))
        return all(part in have for part in expected)

    def _all_reports_complete(self, failed_T) -> bool:
        record = self.failure_records.get(failed_T)
        if record is None:
            return False
        for node in record["participants"]:
            if node == self.node_id:
                continue
            if not self._report_complete(node, failed_T, record):
                return False
        return True

    def note_watermarks(self):
        """The sender's data buffer counts status-report parcels, failure
        records (participating list, reason, own archived report), the
        blacklist, eliminated list, knowledge claims, and the pending
        end-of-transmission parcel."""
        self.max_bb = max(self.max_bb, len(self.bb))
        db = (len(self.bl) + len(self.en) + len(self.claims)
              + (1 if self.theta is not None else 0)
              + sum(len(parts) for parts in self.reports.values())
              + len(self.failure_records) * (2 * self.n + 1))
        self.max_db = max(self.max_db, db)
        for led in self.out_led.values():
            self.max_sig_entries = max(self.max_sig_entries, led.entries())

    def end_of_transmission(self) -> None:
        """The sender's blacklist and broadcast buffer persist across the
        boundary; only the per-transmission channel state resets."""
        T = self.current_T
        self.sot.pop(T, None)
        self.alpha_in = {p: None for p in self.alpha_in}
        self.last_sent = {p: None for p in self.last_sent}
        self.cbp_out = {p: 0 for p in self.cbp_out}
        self.current_T = T + 1
        self.halted = False

    # -- assembling the localization input -----------------------------------

    def build_report_set(self, failed_T, n):
        from .localize import NodeReport, ReportValue, StatusReportSet
        record = self.failure_records[failed_T]
        rs = StatusReportSet(
            failed_T=failed_T, reason=record["reason"], n=n,
            sender=self.node_id, receiver=self.receiver_id,
            participants=list(record["participants"]),
            eliminated=record["eliminated"])
        own = NodeReport(self.node_id)
        label = record["reason"][1] if record["reason"][0] == "f4" else None
        for peer, fields in record["own"].items():
            out = {}
            for name in ("sig1", "sig2", "sig3"):
                out[name] = ReportValue(*fields[name])
            if label is not None:
                rep = fields["sigp"].get(label, (0, (failed_T, 0), None))
                out["sigp"] = ReportValue(*rep)
            own.out_edges[peer] = out
        rs.reports[self.node_id] = own
        for node in record["participants"]:
            if node == self.node_id:
                continue
            rep = NodeReport(node)
            for part, signed in sorted(self.reports[(node, failed_T)].items()):
                parcel = signed.value
                for side, name, lab, value, sT, sr, evidence in parcel.payload:
                    rv = ReportValue(value, (sT, sr), evidence)
                    if side == "self":
                        rep.sig_nn = rv
                    else:
                        peer = part[1]
                        target = rep.out_edges if side == "out" else rep.in_edges
                        target.setdefault(peer, {})[name] = rv
            rs.reports[node] = rep
        return rs
