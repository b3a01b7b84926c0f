"""Synchronous round executor.

Each round has two stages.  Stage 1 exchanges height advertisements and
signed replies (plus broadcast confirmations/requests in authenticated
mode); stage 2 exchanges broadcast parcels and then packets, followed by
the local re-shuffle.  All messages of a stage are computed from
pre-stage state and exchanged at a barrier, so node handlers never see a
neighbor's mid-stage updates.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import codec
from .adversary import (ConfigError, Corruption, EdgeSchedule,
                        find_honest_path, generate_schedule,
                        validate_conforming)
from .auth import REASON_OK, AuthNode, SenderAuth, Theta
from .buffers import Stored
from .crypto import keygen
from .localize import LocalizationError, run_localization
from .node import INTERNAL, RECEIVER, SENDER, NodeState
from .util import digest, parse_fraction


class InvariantError(RuntimeError):
    """A protocol invariant failed where honest behavior guarantees it."""


class ConformingError(RuntimeError):
    def __init__(self, violation):
        super().__init__(str(violation))
        self.round_index = violation.round_index


@dataclass
class Scenario:
    n: int = 4
    mode: str = "slide"             # "slide" or "auth"
    lam: str = "3/8"
    sigma: str = None
    fragment_bytes: int = 2
    messages: int = 1
    max_transmissions: int = None
    schedule_kind: str = "static"
    schedule_p: float = 0.0
    schedule_seed: int = 0
    schedule_script: list = None
    backbone: list = None
    schedule_repair: bool = True
    corruptions: list = field(default_factory=list)
    crypto_backend: str = "oracle"
    seed: int = 0
    checks: str = "full"            # "full" | "light" | "off"
    trace: bool = False

    def to_dict(self) -> dict:
        out = {
            "n": self.n, "mode": self.mode, "lam": str(self.lam),
            "sigma": None if self.sigma is None else str(self.sigma),
            "fragment_bytes": self.fragment_bytes,
            "messages": self.messages,
            "max_transmissions": self.max_transmissions,
            "schedule": {
                "kind": self.schedule_kind, "p": self.schedule_p,
                "seed": self.schedule_seed, "script": self.schedule_script,
                "backbone": self.backbone, "repair": self.schedule_repair,
            },
            "corruptions": [
                {"node": c.node, "round": c.round_index,
                 "behavior": c.behavior, "params": c.params}
                for c in self.corruptions
            ],
            "crypto_backend": self.crypto_backend,
            "seed": self.seed, "checks": self.checks, "trace": self.trace,
        }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        sched = data.get("schedule", {})
        corruptions = [
            Corruption(node=c["node"], round_index=c.get("round", 1),
                       behavior=c["behavior"], params=c.get("params", {}))
            for c in data.get("corruptions", [])
        ]
        return cls(
            n=data["n"], mode=data.get("mode", "slide"),
            lam=data.get("lam", "3/8"), sigma=data.get("sigma"),
            fragment_bytes=data.get("fragment_bytes", 2),
            messages=data.get("messages", 1),
            max_transmissions=data.get("max_transmissions"),
            schedule_kind=sched.get("kind", "static"),
            schedule_p=sched.get("p", 0.0),
            schedule_seed=sched.get("seed", 0),
            schedule_script=sched.get("script"),
            backbone=sched.get("backbone"),
            schedule_repair=sched.get("repair", True),
            corruptions=corruptions,
            crypto_backend=data.get("crypto_backend", "oracle"),
            seed=data.get("seed", 0),
            checks=data.get("checks", "full"),
            trace=data.get("trace", False),
        )

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("trace", None)
        return digest(_canon(d))


def _canon(obj):
    if isinstance(obj, dict):
        return tuple((k, _canon(v)) for k, v in sorted(obj.items()))
    if isinstance(obj, (list, tuple)):
        return tuple(_canon(v) for v in obj)
    if isinstance(obj, float):
        return repr(obj)
    return obj


def message_payload(seed, index: int, size: int) -> bytes:
    rng = random.Random(f"{seed}:payload:{index}")
    return bytes(rng.getrandbits(8) for _ in range(size))


class Engine:
    def __init__(self, scenario: Scenario):
        sc = scenario
        self.sc = sc
        self.params = codec.derive_params(sc.n, sc.lam, sc.sigma,
                                          fragment_bytes=sc.fragment_bytes)
        self.n = sc.n
        self.D = self.params.packets_per_codeword
        self.auth_mode = sc.mode == "auth"
        if sc.mode not in ("slide", "auth"):
            raise ConfigError(f"unknown mode {sc.mode!r}")
        self.L = 4 * self.D if self.auth_mode else 3 * self.D
        self.ids = list(range(sc.n))
        self.S = 0
        self.R = sc.n - 1

        self.corrupt_nodes = {}
        for c in sc.corruptions:
            if c.node in (self.S, self.R):
                raise ConfigError("sender and receiver cannot be corrupted")
            if c.node not in self.ids:
                raise ConfigError(f"unknown node {c.node}")
            if not self.auth_mode:
                raise ConfigError("corruptions require authenticated mode")
            self.corrupt_nodes[c.node] = (c.round_index, c.make())

        budget = sc.max_transmissions
        if budget is None:
            budget = sc.messages + (0 if not self.corrupt_nodes
                                    else sc.n * sc.n)
        self.max_transmissions = budget
        total_rounds = budget * self.L
        self.schedule = generate_schedule(
            sc.schedule_kind, sc.n, total_rounds, seed=sc.schedule_seed,
            p=sc.schedule_p, backbone=sc.backbone,
            corrupt_nodes=set(self.corrupt_nodes),
            script=sc.schedule_script, repair=sc.schedule_repair)
        violation = validate_conforming(self.schedule,
                                        set(self.corrupt_nodes),
                                        self.S, self.R)
        if violation is not None:
            raise ConformingError(violation)

        self.nodes = {}
        for i in self.ids:
            role = SENDER if i == self.S else (
                RECEIVER if i == self.R else INTERNAL)
            self.nodes[i] = NodeState(i, role, self.ids, self.S, self.R)

        self.auth = None
        self.ring = None
        if self.auth_mode:
            self.ring = keygen(self.ids, backend=sc.crypto_backend,
                               seed=sc.seed)
            self.auth = {}
            for i in self.ids:
                cls = SenderAuth if i == self.S else AuthNode
                self.auth[i] = cls(i, self.ring, self.ids, self.S, self.R)

        # packet channels: every directed edge except into the sender or
        # out of the receiver
        self.packet_edges = [(a, b) for a in self.ids for b in self.ids
                             if a != b and a != self.R and b != self.S]
        self.all_pairs = [(a, b) for a in self.ids for b in self.ids
                          if a != b]

        self.T = 1
        self.delivered = []           # (message_index, global_round, T)
        self.transmissions = []       # per-transmission records
        self.eliminations = []        # (T, node, kind, inequality)
        self.trace = [] if sc.trace else None
        self.max_packets = {i: 0 for i in self.ids}
        self._copy = None
        self._expected = {}           # message index -> payload

    # -- helpers -----------------------------------------------------------

    def _behavior(self, node):
        entry = self.corrupt_nodes.get(node)
        if entry is None:
            return None
        act, beh = entry
        return beh if self.g_round >= act else None

    def _activate_behaviors(self):
        for node, (act, beh) in self.corrupt_nodes.items():
            if self.g_round >= act and not getattr(beh, "_attached", False):
                beh.attach(self.nodes[node], self.auth[node])
                self.auth[node].relaxed_verify = beh.relaxed_verify
                self.auth[node].report_hook = beh.forge_report
                beh._attached = True
                self._emit("corrupt", node=node, behavior=beh.name)

    def _suppressed(self, node) -> bool:
        beh = self._behavior(node)
        if beh is not None and beh.suppress_output():
            return True
        return self.auth_mode and node in self.auth[node].en

    def _ignores(self, node, peer) -> bool:
        return self.auth_mode and peer in self.auth[node].en

    def _refresh_delivery(self):
        """Cache the per-round delivery predicate for every ordered pair:
        edge active, sending side not silenced, neither side treating the
        other as eliminated."""
        cache = {}
        suppressed = {x: self._suppressed(x) for x in self.ids}
        for a, b in self.all_pairs:
            cache[(a, b)] = (self.schedule.active(self.g_round, a, b)
                             and not suppressed[a]
                             and not self._ignores(b, a)
                             and not self._ignores(a, b))
        self._delivery = cache

    def _delivered_msg(self, a, b) -> bool:
        return self._delivery[(a, b)]

    def _is_honest(self, node) -> bool:
        return self._behavior(node) is None

    def _emit(self, kind, **fields):
        if self.trace is not None:
            rec = {"k": kind, "T": self.T, "r": self.r_local}
            rec.update(fields)
            self.trace.append(rec)

    # -- message supply -----------------------------------------------------

    def _load_transmission(self):
        node = self.nodes[self.S]
        msg_index = len(self.delivered) + 1
        retry = self.auth_mode and self._copy is not None \
            and self._copy[0] == msg_index
        if retry:
            fragments = self._copy[1]
        else:
            payload = message_payload(self.sc.seed, msg_index,
                                      self.params.message_bytes)
            self._expected[msg_index] = payload
            sign = None
            if self.auth_mode:
                skey = self.ring.keypair(self.S)
                sign = lambda body: self.ring.sign(skey, body)
            cw = codec.encode(codec.Message(msg_index, payload), self.params,
                              sign=sign)
            fragments = cw.fragments
            self._copy = (msg_index, fragments)
        for buf in node.out_buffers.values():
            buf.slots.clear()
            buf.H = 0
            buf.sb = 0
            buf.d = 0
            buf.FR = None
            buf.H_FP = None
            buf.p_tilde = None
            buf.flag_accepted = False
        node.load_reservoir(Stored(p, True) for p in fragments)
        node.sender_refill()

    # -- main loop ------------------------------------------------------------

    def run(self) -> dict:
        while self.T <= self.max_transmissions \
                and len(self.delivered) < self.sc.messages:
            self._run_transmission()
            self.T += 1
        return self._report()

    def _run_transmission(self):
        self._load_transmission()
        tm = {
            "T": self.T, "message": len(self.delivered) + 1,
            "blocked": 0, "beta": 0, "wasted": 0, "insert_gain": 0,
            "phi_start": self._potential()[0], "theta_created": None,
            "theta_arrival": None, "result": None,
        }
        self.tm = tm
        for r in range(1, self.L + 1):
            self.r_local = r
            self.g_round = (self.T - 1) * self.L + r
            self._activate_behaviors()
            self._refresh_delivery()
            self._stage1()
            self._stage2()
            self._post_round()
            if not self.auth_mode \
                    and len(self.delivered) >= self.sc.messages:
                break
        self._end_transmission()

    # -- stage 1 ---------------------------------------------------------------

    def _stage1(self):
        r = self.r_local
        if self.auth_mode:
            self._broadcast_control()
        adverts = {}
        replies = {}
        for a, b in self.packet_edges:
            if not self._delivered_msg(a, b) and not self._delivered_msg(b, a):
                continue
            ob = self.nodes[a].out_buffers[b]
            ib = self.nodes[b].in_buffers[a]
            msg = ob.stage1_msg()
            beh = self._behavior(a)
            if beh is not None:
                msg = beh.stage1_advert(ob, msg)
            adverts[(a, b)] = msg
            height = ib.H
            beh_b = self._behavior(b)
            if beh_b is not None:
                height = beh_b.stage1_reply_height(ib, height)
            if self.auth_mode:
                replies[(a, b)] = self.auth[b].build_stage1_reply(
                    ib, self.T, r, height=height)
            else:
                replies[(a, b)] = (height, ib.RR)

        for a, b in self.packet_edges:
            ob = self.nodes[a].out_buffers[b]
            ib = self.nodes[b].in_buffers[a]
            # advert a -> b
            ib.fold_stage1(adverts.get((a, b))
                           if self._delivered_msg(a, b) else None)
            # reply b -> a, then reset outgoing variables
            reply = replies.get((a, b)) if self._delivered_msg(b, a) else None
            signed = None
            if reply is not None and self.auth_mode:
                signed = reply
                reply = self.auth[a].verify_stage1_reply(ob, signed, self.T, r)
            confirmed, height, slide = ob.fold_reply(reply)
            if confirmed is not None:
                if self.auth_mode:
                    self.auth[a].sync_on_confirm(ob, signed, confirmed,
                                                 height, slide, self.T, r)
                    self._check_ledger_pairing(a, b)
                if a == self.S:
                    self.nodes[a].kappa += 1
                beh = self._behavior(a)
                if beh is not None:
                    beh.after_forward(confirmed,
                                      getattr(ob, "_substituted", False))
                self._emit("confirm", e=[a, b], h=height)

    def _broadcast_control(self):
        r = self.r_local
        msgs = {}
        for x, y in self.all_pairs:
            if not self._delivered_msg(x, y):
                continue
            ax = self.auth[x]
            msgs[(x, y)] = (ax.take_cbp(y), ax.make_request(y))
        for x, y in self.all_pairs:
            ay = self.auth[y]
            got = msgs.get((x, y))
            if got is None:
                ay.on_cbp(x, 0)
                ay.on_request(x, None)
            else:
                cbp, alpha = got
                ay.on_cbp(x, cbp)
                ay.on_request(x, alpha)

    def _check_ledger_pairing(self, a, b):
        """After a confirmation the two ledgers for edge (a,b) agree
        exactly; asserted for honest pairs when checks are on."""
        if self.sc.checks == "off":
            return
        if not (self._is_honest(a) and self._is_honest(b)):
            return
        la = self.auth[a].out_led[b]
        lb = self.auth[b].in_led[a]
        ok = (la.sig1.value == lb.sig1.value
              and la.sig2.value == lb.sig3.value
              and la.sig3.value == lb.sig2.value)
        if ok:
            for label, entry in la.sigp.items():
                if lb.sigp_value(label) != entry.value:
                    ok = False
                    break
        if not ok:
            raise InvariantError(
                f"ledger mismatch on edge ({a},{b}) after confirmation")

    # -- stage 2 -----------------------------------------------------------------

    def _stage2(self):
        r = self.r_local
        self._round_wasted = False
        if self.auth_mode:
            self._broadcast_parcels()
            self._count_wasted()
        sends = {}
        s_node = self.nodes[self.S]
        self._s_had_packets = any(ob.H > 0
                                  for ob in s_node.out_buffers.values())
        for a, b in self.packet_edges:
            ob = self.nodes[a].out_buffers[b]
            if ob.H_IN is None:
                continue
            ob.create_flag(r)
            if not ob.should_send():
                continue
            ob.mark_sent()
            beh = self._behavior(a)
            if self.auth_mode:
                if a == self.S and self.auth[a].halted:
                    continue
                gate_ok = (beh is not None) or self.auth[a].okay_to_send(b)
                if not gate_ok:
                    continue
                substitute = beh.substitute_send(ob) if beh else None
                msg = self.auth[a].build_packet_msg(ob, self.T, r,
                                                    stored=substitute)
                ob._substituted = substitute is not None
                sends[(a, b)] = (msg, substitute is not None)
            else:
                ob._substituted = False
                sends[(a, b)] = ((ob.p_tilde, ob.FR), False)

        insert_gain = 0
        inserted = False
        for a, b in self.packet_edges:
            ib = self.nodes[b].in_buffers[a]
            entry = sends.get((a, b)) if self._delivered_msg(a, b) else None
            blocked = False
            parsed = None
            signed = None
            if self.auth_mode:
                beh_b = self._behavior(b)
                blocked = beh_b is None and not self.auth[b].okay_to_receive(a)
                if entry is not None:
                    signed = entry[0]
                    parsed = self.auth[b].verify_packet_msg(ib, signed,
                                                            self.T, r)
            else:
                parsed = entry[0] if entry is not None else None
            res = ib.receive(parsed, r, blocked=blocked)
            if res[0] == "accept":
                _, stored, land = res
                if self.auth_mode:
                    self.auth[b].sync_on_accept(ib, signed, stored, land,
                                                self.T, r)
                ob = self.nodes[a].out_buffers[b]
                sent_fr = (signed.value[4] if self.auth_mode
                           else entry[0][1])
                if ob.FR == sent_fr:
                    ob.flag_accepted = True
                if a == self.S:
                    inserted = True
                    if b != self.R:
                        insert_gain += land
                self._emit("accept", e=[a, b], h=land,
                           p=list(stored.packet.label()))
                beh_b = self._behavior(b)
                if beh_b is not None and not beh_b.after_accept(ib, stored,
                                                                land):
                    ib.slots.put(land, None)
                    ib.slots.collapse_above(land)
                    ib.H -= 1
            elif res[0] == "dup" or res[0] == "idle":
                if self.auth_mode and res[1]:
                    self.auth[b].sig_nn += res[1]
        self.tm["insert_gain"] += insert_gain
        self._round_blocked = not inserted and self._s_had_packets
        if self._round_blocked:
            self.tm["blocked"] += 1
        self._round_gain = insert_gain

    def _broadcast_parcels(self):
        r = self.r_local
        chosen = {}
        for x, y in self.all_pairs:
            if not self._delivered_msg(x, y):
                continue
            parcel = self.auth[x].choose_parcel(y)
            if parcel is not None:
                chosen[(x, y)] = self.auth[x].wrap_hop(parcel, self.T, r)
        events = []
        for (x, y), hop in sorted(chosen.items()):
            ay = self.auth[y]
            clear_hook = None
            evs = ay.on_parcel(x, hop, self.T, r, sig_clear_hook=clear_hook)
            for ev in evs:
                events.append((y, ev))
        for y, ev in events:
            if ev[0] == "wipe":
                self._wipe_buffers(y)
            elif ev[0] == "theta":
                self.tm["theta_arrival"] = self.r_local
            elif ev[0] == "eliminate":
                self._eliminate(ev[1], f"malformed-report: {ev[2]}",
                                "malformed-report")
            elif ev[0] == "localize":
                self._localize(ev[1])

    def _wipe_buffers(self, node_id):
        node = self.nodes[node_id]
        for buf in node.all_buffers():
            buf.slots.clear()
            buf.H = 0
        for ob in node.out_buffers.values():
            ob.sb = 0
            ob.d = 0
            ob.FR = None
            ob.H_FP = None
            ob.p_tilde = None
            ob.flag_accepted = False
        for ib in node.in_buffers.values():
            ib.H_GP = None
            ib.sb = 0

    def _eliminate(self, node, inequality, kind, margin=0):
        sender = self.auth[self.S]
        if sender.halted:
            return
        if self._is_honest(node):
            raise InvariantError(
                f"honest node {node} eliminated: {inequality}")
        sender.eliminate(node, self.T)
        self.eliminations.append({
            "T": self.T, "round": self.r_local, "node": node,
            "kind": kind, "inequality": inequality, "margin": margin,
        })
        self._emit("eliminate", node=node, verdict=kind)

    def _localize(self, failed_T):
        sender = self.auth[self.S]
        if sender.halted:
            return
        rs = sender.build_report_set(failed_T, self.n)
        verdict = run_localization(rs, self.ring)
        self._eliminate(verdict.node, verdict.inequality, verdict.kind,
                        verdict.margin)

    def _count_wasted(self):
        path = find_honest_path(self.schedule, self.g_round,
                                set(self.corrupt_nodes), self.S, self.R)
        for u, v in zip(path, path[1:]):
            if not self.auth[u].okay_to_send(v) \
                    or not self.auth[v].okay_to_receive(u):
                self.tm["wasted"] += 1
                self._round_wasted = True
                return

    # -- post-round ---------------------------------------------------------------

    def _post_round(self):
        r = self.r_local
        for i in self.ids:
            node = self.nodes[i]
            if node.role == INTERNAL:
                if self.auth_mode and not self.auth[i].sot_complete():
                    continue
                drop = node.reshuffle()
                if self.auth_mode:
                    self.auth[i].sig_nn += drop
            elif node.role == RECEIVER:
                if self.auth_mode and not self.auth[i].sot_complete():
                    continue
                node.receiver_drain(
                    self.params, self._on_message,
                    plain_mode=not self.auth_mode,
                    decode_fn=lambda frags: codec.decode(frags, self.params))
            else:
                node.sender_refill()
                # keep every outgoing buffer supplied once the reservoir
                # runs dry, so packets never strand on a dead edge while an
                # active edge starves (the insertion-rate bound relies on it)
                node.sender_redistribute()
                node.reshuffle()
                if self.auth_mode:
                    vals = [ob.H_IN for ob in node.out_buffers.values()
                            if ob.H_IN is not None]
                    if all(v == 2 * self.n for v in vals):
                        self.auth[i].beta += 1
                        self.tm["beta"] += 1

        if self.auth_mode and self.r_local == self.L - self.n + 1:
            rauth = self.auth[self.R]
            rnode = self.nodes[self.R]
            theta = Theta(rnode.decoded, rnode.duplicate_label, self.T)
            rauth._add_parcel(rauth.sign(theta))
            self.tm["theta_created"] = self.r_local
            self._emit("theta", decoded=rnode.decoded)

        self._check_round()

    def _on_message(self, msg):
        expected = self._expected.get(msg.index)
        if msg.index != len(self.delivered) + 1 or msg.payload != expected:
            raise InvariantError(
                f"receiver output out of order or corrupted at message "
                f"{msg.index}")
        self.delivered.append((msg.index, self.g_round, self.T))
        self._emit("deliver", m=msg.index)

    # -- metrics / invariant checking ------------------------------------------------

    def potential_snapshot(self):
        """Current (non-duplicated, duplication) network potential: each
        internal buffer contributes the heights of its packets, with
        accepted-but-unconfirmed flagged copies counted as duplication."""
        return self._potential()

    def _potential(self):
        phi_nd = 0
        phi_dup = 0
        for i in self.ids:
            node = self.nodes[i]
            if node.role != INTERNAL:
                continue
            for ib in node.in_buffers.values():
                for h in ib.slots.occupied():
                    phi_nd += h
            for ob in node.out_buffers.values():
                for h in ob.slots.occupied():
                    if h == ob.H_FP and ob.flag_accepted:
                        phi_dup += h
                    else:
                        phi_nd += h
        return phi_nd, phi_dup

    def _check_round(self):
        level = self.sc.checks
        for i in self.ids:
            node = self.nodes[i]
            self.max_packets[i] = max(self.max_packets[i],
                                      node.total_packets())
            if self.auth_mode:
                self.auth[i].note_watermarks()
        if level == "off" and self.trace is None:
            return
        honest_run = not self.corrupt_nodes
        phi_nd, phi_dup = self._potential()
        if level != "off":
            for i in self.ids:
                if self._is_honest(i):
                    if not (self.auth_mode
                            and not self.auth[i].sot_complete()):
                        self.nodes[i].check_invariants()
            if honest_run:
                prev = getattr(self, "_phi_prev", None)
                if prev is not None and phi_nd - prev > self._round_gain:
                    raise InvariantError(
                        f"non-duplicated potential rose by {phi_nd - prev} "
                        f"with insertions only {self._round_gain} in round "
                        f"{self.g_round}")
                bound = 2 * self.n**3 - 8 * self.n**2 + 8 * self.n
                if not 0 <= phi_dup <= bound:
                    raise InvariantError(
                        f"duplication potential {phi_dup} outside "
                        f"[0, {bound}]")
            if level == "full" and honest_run and not self.auth_mode \
                    and self.r_local % 8 == 0:
                self._check_conservation()
        self._phi_prev = phi_nd
        if self.trace is not None:
            self._emit_state_row(phi_nd)

    def _emit_state_row(self, phi_nd):
        nodes = {}
        for i in self.ids:
            node = self.nodes[i]
            bufs = []
            for peer in sorted(node.in_buffers):
                ib = node.in_buffers[peer]
                bufs.append(["in", peer, ib.H, ib.H_GP, False])
            for peer in sorted(node.out_buffers):
                ob = node.out_buffers[peer]
                bufs.append(["out", peer, ob.H, ob.H_FP, ob.flag_accepted])
            nodes[str(i)] = bufs
        self.trace.append({
            "k": "state", "g": self.g_round, "T": self.T, "r": self.r_local,
            "gain": self._round_gain, "blocked": int(self._round_blocked),
            "wasted": int(self._round_wasted), "nd": phi_nd, "nodes": nodes,
        })

    def _check_conservation(self):
        """Every live packet of the current codeword exists in at most one
        non-flagged copy network-wide."""
        counts = {}
        for i in self.ids:
            node = self.nodes[i]
            if node.role == SENDER:
                continue
            for ib in node.in_buffers.values():
                for h in ib.slots.occupied():
                    item = ib.slots.get(h)
                    counts[item.packet.label()] = \
                        counts.get(item.packet.label(), 0) + 1
            for ob in node.out_buffers.values():
                for h in ob.slots.occupied():
                    if h == ob.H_FP:
                        continue
                    item = ob.slots.get(h)
                    counts[item.packet.label()] = \
                        counts.get(item.packet.label(), 0) + 1
        bad = [lab for lab, c in counts.items() if c > 1]
        if bad:
            raise InvariantError(f"duplicated live packets: {bad[:3]}")

    # -- transmission boundary ----------------------------------------------------------

    def _end_transmission(self):
        tm = self.tm
        phi_end = self._potential()[0]
        tm["phi_end"] = phi_end
        drop = tm["phi_start"] + tm["insert_gain"] - phi_end
        tm["potential_drop"] = drop
        tm["kappa"] = self.nodes[self.S].kappa
        if not self.corrupt_nodes and self.sc.checks != "off":
            need = self.n * max(0, tm["blocked"] - tm["wasted"])
            if drop < need:
                raise InvariantError(
                    f"transmission {self.T}: potential drop {drop} below "
                    f"n*blocked = {need}")

        if self.auth_mode:
            sender = self.auth[self.S]
            if not sender.halted:
                if sender.theta is None:
                    raise InvariantError(
                        f"transmission {self.T}: end-of-transmission parcel "
                        f"never reached the sender")
                reason, participants = sender.prepare_sot(
                    self.nodes[self.S].kappa, self.D)
                tm["result"] = "ok" if reason == REASON_OK else reason[0]
                tm["blacklist_before"] = sender.last_blacklist
                tm["participants"] = participants
                if reason != REASON_OK:
                    self._emit("failed", reason=reason[0])
            else:
                tm["result"] = "eliminated"
            for i in self.ids:
                self.nodes[i].end_of_transmission_adjust()
                self.nodes[i].mark_all_stale()
                for ib in self.nodes[i].in_buffers.values():
                    ib.last_label = None
                    ib.last_was_stale = False
                self.auth[i].end_of_transmission()
            rnode = self.nodes[self.R]
            if rnode.decoded:
                rnode.advance_codeword()
            else:
                rnode.reset_codeword_state()
        else:
            tm["result"] = "ok"
            if self.sc.checks != "off" \
                    and len(self.delivered) < min(self.sc.messages, self.T):
                raise InvariantError(
                    f"message {self.T} not delivered within its "
                    f"transmission")
            for i in self.ids:
                self.nodes[i].end_of_transmission_adjust()
        self.transmissions.append(tm)
        if self.trace is not None:
            self.trace.append({"k": "endT", "T": self.T,
                               "result": tm["result"]})

    # -- report -----------------------------------------------------------------------

    def _report(self) -> dict:
        sc = self.sc
        report = {
            "scenario_digest": sc.digest(),
            "params": {
                "n": self.n, "D": self.D,
                "decode_threshold": self.params.decode_threshold,
                "transmission_rounds": self.L,
                "mode": sc.mode,
            },
            "messages_requested": sc.messages,
            "delivered": [
                {"message": m, "round": r, "T": t}
                for m, r, t in self.delivered
            ],
            "transmissions": self.transmissions,
            "failures": [t["T"] for t in self.transmissions
                         if t["result"] not in ("ok", None)],
            "eliminations": self.eliminations,
            "max_packets_per_node": {str(k): v
                                     for k, v in self.max_packets.items()},
        }
        if self.auth_mode:
            report["memory"] = {
                str(i): {
                    "broadcast_buffer": self.auth[i].max_bb,
                    "data_buffer": self.auth[i].max_db,
                    "sig_entries_per_edge": self.auth[i].max_sig_entries,
                } for i in self.ids
            }
        return report


def run_scenario(scenario: Scenario):
    engine = Engine(scenario)
    report = engine.run()
    return report, engine
