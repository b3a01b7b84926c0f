"""Conforming adversary machinery: per-round edge schedules, corruption
plans, the conforming-constraint validator, and malicious node behaviors.

The edge scheduler and the node corrupter are fused into one Scenario-level
plan; the validator enforces that every round keeps an active path between
sender and receiver through nodes that are never corrupted.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ConformingViolation:
    round_index: int

    def __str__(self):
        return f"no active honest sender-receiver path in round {self.round_index}"


def edge_key(a, b):
    return (a, b) if a < b else (b, a)


class EdgeSchedule:
    """Per-round active undirected edge sets over the complete graph on n
    nodes, stored as bitmasks.  An edge active in a round is active for
    both stages of that round."""

    def __init__(self, n: int, masks):
        self.n = n
        self.edges = [(a, b) for a in range(n) for b in range(a + 1, n)]
        self.bit = {e: i for i, e in enumerate(self.edges)}
        self.masks = list(masks)

    @property
    def rounds(self) -> int:
        return len(self.masks)

    def _mask(self, r: int) -> int:
        if r < 1 or r > len(self.masks):
            raise ConfigError(f"schedule does not cover round {r}")
        return self.masks[r - 1]

    def active(self, r: int, a, b) -> bool:
        return bool(self._mask(r) >> self.bit[edge_key(a, b)] & 1)

    def active_edges(self, r: int):
        m = self._mask(r)
        return [e for e in self.edges if m >> self.bit[e] & 1]

    def neighbors(self, r: int, v):
        m = self._mask(r)
        out = []
        for u in range(self.n):
            if u != v and m >> self.bit[edge_key(u, v)] & 1:
                out.append(u)
        return out


def full_mask(n: int) -> int:
    return (1 << (n * (n - 1) // 2)) - 1


def path_mask(schedule_edges_bit, path) -> int:
    m = 0
    for a, b in zip(path, path[1:]):
        m |= 1 << schedule_edges_bit[edge_key(a, b)]
    return m


def default_backbone(n: int, corrupt_nodes) -> list:
    """Lexicographically smallest honest simple path from sender (0) to
    receiver (n-1): route through the smallest never-corrupted internal
    node, or directly if none exists."""
    for mid in range(1, n - 1):
        if mid not in corrupt_nodes:
            return [0, mid, n - 1]
    return [0, n - 1]


def generate_schedule(kind: str, n: int, rounds: int, seed=0, p=0.0,
                      backbone: Optional[list] = None,
                      corrupt_nodes=(), script=None,
                      repair: bool = True) -> EdgeSchedule:
    """Build a schedule of one of three kinds.

    static: every potential edge is active every round.
    churn: each non-backbone edge toggles with probability p per round,
      then the backbone path is forced active so the schedule conforms.
    scripted: explicit per-round edge lists, cycled to cover `rounds`,
      with the backbone forced active.

    With repair=False the backbone is not forced, so the result may
    violate the conforming constraint (callers must validate).
    """
    if n < 4:
        raise ConfigError("need at least 4 nodes")
    probe = EdgeSchedule(n, [])
    if backbone is None:
        backbone = default_backbone(n, set(corrupt_nodes))
    for node in backbone[1:-1]:
        if node in corrupt_nodes:
            raise ConfigError(f"backbone node {node} is corrupted")
    if backbone[0] != 0 or backbone[-1] != n - 1:
        raise ConfigError("backbone must run from the sender to the receiver")
    forced = path_mask(probe.bit, backbone) if repair else 0

    masks = []
    if kind == "static":
        masks = [full_mask(n)] * rounds
    elif kind == "churn":
        rng = random.Random(f"churn:{seed}:{n}")
        state = full_mask(n)
        nbits = n * (n - 1) // 2
        for _ in range(rounds):
            flip = 0
            for i in range(nbits):
                if rng.random() < p:
                    flip |= 1 << i
            state ^= flip
            masks.append(state | forced)
    elif kind == "scripted":
        if not script:
            raise ConfigError("scripted schedule needs per-round edge lists")
        pattern = []
        for edge_list in script:
            m = 0
            for a, b in edge_list:
                m |= 1 << probe.bit[edge_key(a, b)]
            pattern.append(m | forced)
        masks = [pattern[i % len(pattern)] for i in range(rounds)]
    else:
        raise ConfigError(f"unknown schedule kind {kind!r}")
    sched = EdgeSchedule(n, masks)
    sched.backbone = list(backbone)
    return sched


def find_honest_path(schedule: EdgeSchedule, r: int, corrupt_nodes,
                     sender, receiver) -> Optional[list]:
    """Shortest active path from sender to receiver avoiding every node the
    plan ever corrupts; deterministic BFS with ascending neighbor order."""
    if getattr(schedule, "backbone", None):
        bb = schedule.backbone
        if all(node not in corrupt_nodes for node in bb[1:-1]) and \
                all(schedule.active(r, a, b) for a, b in zip(bb, bb[1:])):
            return list(bb)
    prev = {sender: None}
    frontier = [sender]
    while frontier:
        nxt = []
        for v in frontier:
            for u in schedule.neighbors(r, v):
                if u in prev or u in corrupt_nodes:
                    continue
                prev[u] = v
                if u == receiver:
                    path = [u]
                    while prev[path[-1]] is not None:
                        path.append(prev[path[-1]])
                    return path[::-1]
                nxt.append(u)
        frontier = nxt
    return None


def validate_conforming(schedule: EdgeSchedule, corrupt_nodes, sender,
                        receiver, rounds=None) -> Optional[ConformingViolation]:
    """Check every round has an active sender-receiver path through nodes
    that are never corrupted; report the first round lacking one."""
    rounds = schedule.rounds if rounds is None else rounds
    for r in range(1, rounds + 1):
        if find_honest_path(schedule, r, corrupt_nodes, sender, receiver) is None:
            return ConformingViolation(r)
    return None


# ---------------------------------------------------------------------------
# corrupt behaviors
# ---------------------------------------------------------------------------

class Behavior:
    """Hooks a corrupted node's behavior into the engine.  The default
    implementation is fully honest; subclasses override the few points
    where the adversary deviates.  Corrupt nodes keep their own signing
    keys but can never sign as anyone else."""

    name = "honest"
    relaxed_verify = False     # skip own delta checks on neighbors' claims

    def __init__(self, params=None):
        self.params = dict(params or {})

    def attach(self, node, auth):
        self.node = node
        self.auth = auth

    def suppress_output(self) -> bool:
        """Ghost nodes answer nothing on any edge."""
        return False

    def stage1_advert(self, buf, honest_msg):
        return honest_msg

    def stage1_reply_height(self, buf, honest_height):
        return honest_height

    def substitute_send(self, buf):
        """Return a Stored item to send in place of the flagged packet, or
        None to send honestly."""
        return None

    def after_accept(self, buf, stored, land) -> bool:
        """Called after this node accepts a packet.  Returning True keeps
        it; False silently deletes it from the buffer."""
        return True

    def after_forward(self, stored, substituted) -> None:
        """Called when a packet this node sent is confirmed received;
        substituted marks sends the behavior replaced."""

    def forge_report(self, parcels, auth):
        """Chance to replace the node's own status-report parcels."""
        return parcels


class Deleter(Behavior):
    """Accepts packets normally (signing honest receipts) and then drops
    them on the floor, leaving a net-flow deficit in its own ledgers."""

    name = "deleter"

    def after_accept(self, buf, stored, land) -> bool:
        return False


class Liar(Behavior):
    """Misreports its incoming-buffer heights as empty to attract traffic,
    then discards what it attracted."""

    name = "liar"

    def stage1_reply_height(self, buf, honest_height):
        return 0

    def after_accept(self, buf, stored, land) -> bool:
        return False


class Duplicator(Behavior):
    """Retains the first packet it handles and re-sends copies of it in
    place of every packet it should forward, jamming the network with
    duplicates."""

    name = "duplicator"
    relaxed_verify = True

    def __init__(self, params=None):
        super().__init__(params)
        self.retained = None

    def after_accept(self, buf, stored, land) -> bool:
        if self.retained is None:
            self.retained = stored
        return True

    def substitute_send(self, buf):
        return self.retained


class Replacer(Behavior):
    """Swaps each outgoing packet for an old packet it already forwarded,
    so net flow and potential look honest while the receiver collects
    duplicates."""

    name = "replacer"
    relaxed_verify = True

    def __init__(self, params=None):
        super().__init__(params)
        self.pool = []
        self._cursor = 0

    def after_forward(self, stored, substituted) -> None:
        if not substituted:
            self.pool.append(stored)

    def substitute_send(self, buf):
        if not self.pool:
            return None
        item = self.pool[self._cursor % len(self.pool)]
        self._cursor += 1
        return item


class Ghost(Behavior):
    """Plays dead: sends nothing on any edge in either stage."""

    name = "ghost"

    def suppress_output(self) -> bool:
        return True


class ReportForger(Behavior):
    """Deletes traffic like a deleter, then answers the sender's status
    request with stale (but genuinely signed) ledger snapshots taken early
    in the failed transmission."""

    name = "report-forger"

    def __init__(self, params=None):
        super().__init__(params)
        self.snapshots = {}

    def after_accept(self, buf, stored, land) -> bool:
        self.maybe_snapshot()
        return False

    def maybe_snapshot(self) -> None:
        auth = self.auth
        for peer, led in list(auth.in_led.items()):
            key = ("in", peer)
            if key not in self.snapshots and led.sig1.value > 0:
                self.snapshots[key] = (led.sig1.value, led.sig1.stamp,
                                       led.sig1.evidence)

    def forge_report(self, parcels, auth):
        from .auth import StatusParcel
        forged = []
        for parcel in parcels:
            if parcel.part[0] == "edge":
                peer = parcel.part[1]
                snap = self.snapshots.get(("in", peer))
                if snap is not None and parcel.reason[0] == "f3":
                    payload = []
                    for rec in parcel.payload:
                        if rec[0] == "in" and rec[1] == "sig1":
                            payload.append(("in", "sig1", rec[2], snap[0],
                                            snap[1][0], snap[1][1], snap[2]))
                        else:
                            payload.append(rec)
                    parcel = StatusParcel(parcel.origin, parcel.failed_T,
                                          parcel.reason, parcel.part,
                                          tuple(payload))
            forged.append(parcel)
        return forged


BEHAVIORS = {cls.name: cls for cls in
             (Behavior, Deleter, Liar, Duplicator, Replacer, Ghost,
              ReportForger)}


@dataclass
class Corruption:
    node: int
    round_index: int
    behavior: str
    params: dict = field(default_factory=dict)

    def make(self) -> Behavior:
        if self.behavior not in BEHAVIORS:
            raise ConfigError(f"unknown behavior {self.behavior!r}")
        return BEHAVIORS[self.behavior](self.params)
