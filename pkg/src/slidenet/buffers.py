"""Per-edge buffer state machines for the Slide routing core.

Each directed edge E(A,B) has an OutgoingBuffer at A and an IncomingBuffer
at B, each holding up to 2n packets in stack slots indexed by height
1..2n.  Flagged packets (sent but unconfirmed copies) live in outgoing
buffers; ghost slots (space reserved for a possibly-lost packet) live in
incoming buffers and do not count toward height.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Stored:
    """A packet held in a buffer.  `fresh` marks packets inserted by the
    sender during the current transmission; packets held over from an
    earlier transmission are stale and are excluded from the per-packet
    and net-packet signature counters."""

    packet: object
    fresh: bool = True

    def as_stale(self):
        return Stored(self.packet, False) if self.fresh else self


class SlotArray:
    """Height-indexed slot storage shared by both buffer kinds."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self._slots = [None] * capacity

    def get(self, h: int):
        return self._slots[h - 1]

    def put(self, h: int, item) -> None:
        self._slots[h - 1] = item

    def clear(self) -> None:
        self._slots = [None] * self.capacity

    def occupied(self):
        return [h for h in range(1, self.capacity + 1) if self._slots[h - 1] is not None]

    def count(self) -> int:
        return sum(1 for s in self._slots if s is not None)

    def collapse_above(self, h: int) -> int:
        """Slot h just became empty; slide every occupied slot above it
        down one, preserving order.  Returns the number of packets moved
        (each drops in height by exactly one)."""
        moved = 0
        for j in range(h, self.capacity):
            item = self._slots[j]
            self._slots[j - 1] = item
            if item is not None:
                moved += 1
        self._slots[self.capacity - 1] = None
        return moved


class OutgoingBuffer:
    def __init__(self, owner, peer, capacity: int):
        self.owner = owner
        self.peer = peer
        self.slots = SlotArray(capacity)
        self.capacity = capacity
        self.H = 0
        self.sb = 0
        self.p_tilde = None          # Stored copy of the packet in flight
        self.d = 0                   # sent a packet last round
        self.FR = None               # round the current packet was flagged
        self.H_FP = None             # height of the flagged packet
        self.RR = None               # peer's last reported round-received
        self.H_IN = None             # peer's last reported height
        self.flag_accepted = False   # peer accepted the in-flight copy

    # -- stage 1 --------------------------------------------------------

    def stage1_msg(self):
        """Height advertisement: (H, _, _) normally, (H-1, H_FP, FR) when
        a flagged packet exists (its height is reported separately)."""
        if self.H_FP is None:
            return (self.H, None, None)
        return (self.H - 1, self.H_FP, self.FR)

    def fold_reply(self, reply):
        """Absorb the peer's stage-1 reply (H_IN, RR), or None if the edge
        was down, then reset outgoing variables.  Returns the confirmed
        Stored item if this reply confirmed receipt of the flagged packet,
        along with the number of packets that slid down filling its gap.
        """
        if reply is None:
            self.H_IN, self.RR = None, None
        else:
            self.H_IN, self.RR = reply
        confirmed = None
        slide = 0
        if self.d == 1:
            self.d = 0
            if self.RR is None or (self.FR is not None and self.FR > self.RR):
                self.sb = 1
        if self.RR is not None and self.FR is not None and self.FR <= self.RR:
            confirmed = self.p_tilde
            confirmed_height = self.H_FP
            self.slots.put(self.H_FP, None)
            slide = self.slots.collapse_above(self.H_FP)
            self.FR = None
            self.p_tilde = None
            self.H_FP = None
            self.sb = 0
            self.H -= 1
            self.flag_accepted = False
            return confirmed, confirmed_height, slide
        if (self.RR is not None and self.FR is not None and self.RR < self.FR
                and self.H_FP is not None and self.H_FP < self.H):
            # peer did not get the copy; re-shuffling may have buried it,
            # so swap it back to the top
            top = self.slots.get(self.H)
            self.slots.put(self.H, self.slots.get(self.H_FP))
            self.slots.put(self.H_FP, top)
            self.H_FP = self.H
        return None, None, 0

    # -- stage 2 --------------------------------------------------------

    def create_flag(self, round_index: int) -> bool:
        if self.sb == 0 and self.H_IN is not None and self.H > self.H_IN:
            self.p_tilde = self.slots.get(self.H)
            self.H_FP = self.H
            self.FR = round_index
            self.flag_accepted = False
            return True
        return False

    def should_send(self) -> bool:
        return self.sb == 1 or (self.sb == 0 and self.H_IN is not None
                                and self.H > self.H_IN)

    def mark_sent(self) -> None:
        self.d = 1

    # -- transmission boundary ------------------------------------------

    def eot_adjust(self) -> None:
        if self.H_FP is not None:
            self.slots.put(self.H_FP, None)
            self.slots.collapse_above(self.H_FP)
            self.H -= 1
        self.d = 0
        self.sb = 0
        self.FR = None
        self.H_FP = None
        self.p_tilde = None
        self.flag_accepted = False

    def check(self) -> None:
        """Structural invariants: height matches occupancy; slot layout is
        contiguous except for the single flagged-packet gap."""
        occ = set(self.slots.occupied())
        assert len(occ) == self.H, (self.owner, self.peer, occ, self.H)
        assert 0 <= self.H <= self.capacity
        if self.H_FP is None or self.H_FP <= self.H:
            assert occ == set(range(1, self.H + 1)), (occ, self.H, self.H_FP)
        else:
            assert occ == set(range(1, self.H)) | {self.H_FP}, (occ, self.H, self.H_FP)
        if self.H_FP is None:
            assert self.sb == 0 and self.FR is None
        else:
            assert self.slots.get(self.H_FP) is not None


class IncomingBuffer:
    def __init__(self, owner, peer, capacity: int):
        self.owner = owner
        self.peer = peer
        self.slots = SlotArray(capacity)
        self.capacity = capacity
        self.H = 0
        self.sb = 0
        self.RR = -1                 # round a packet was last accepted
        self.H_GP = None             # ghost slot height
        self.H_OUT = None            # peer's advertised height
        self.sb_OUT = 0              # peer's status bit (inferred)
        self.FR = None               # peer's advertised flagged round

    # -- stage 1 --------------------------------------------------------

    def stage1_msg(self):
        return (self.H, self.RR)

    def fold_stage1(self, msg) -> None:
        """Absorb the peer's height advertisement (h, h_fp, fr), or None
        if the edge was down."""
        self.sb_OUT = 0
        self.FR = None
        if msg is None:
            self.sb_OUT = 1
            self.H_OUT = None
            return
        h, h_fp, fr = msg
        self.FR = fr
        if fr is not None and fr > self.RR:
            self.sb_OUT = 1
            self.H_OUT = h_fp
        else:
            self.sb_OUT = 0
            self.H_OUT = h

    # -- stage 2 --------------------------------------------------------

    def _reserve_ghost(self) -> None:
        if (self.H_GP is not None and self.H_GP > self.H) or \
                (self.H_GP is None and self.H < self.capacity):
            self.H_GP = self.H + 1

    def _clear_ghost_gap(self) -> int:
        gap = self.H_GP
        self.H_GP = None
        if gap is not None and gap <= self.H:
            return self.slots.collapse_above(gap)
        return 0

    def receive(self, msg, round_index: int, blocked: bool = False):
        """Process the stage-2 packet slot for this edge.

        msg is (Stored, flagged_round) if a packet arrived and passed
        whatever validity checks the caller applies, else None.  `blocked`
        marks rounds where broadcast gating forbids packet receipt, which
        behaves exactly like not having heard the peer's stage-1 info.

        Returns one of:
            ("accept", stored, landing_height)
            ("dup", slide_count)
            ("idle", slide_count)
            ("hold",)        -- ghost slot reserved, problem status
        """
        if self.H_OUT is None or blocked:
            self.sb = 1
            self._reserve_ghost()
            return ("hold",)
        if self.sb_OUT == 1 or self.H_OUT > self.H:
            # a packet should have arrived
            if msg is None:
                self.sb = 1
                self._reserve_ghost()
                return ("hold",)
            stored, fr = msg
            if self.RR < fr:
                if self.H_GP is None:
                    self.H_GP = self.H + 1
                land = self.H_GP
                self.slots.put(land, stored)
                self.sb = 0
                self.H += 1
                self.H_GP = None
                self.RR = round_index
                return ("accept", stored, land)
            # the peer re-sent a packet we already stored
            self.sb = 0
            return ("dup", self._clear_ghost_gap())
        # no packet was expected; drop any stale reservation
        self.sb = 0
        return ("idle", self._clear_ghost_gap())

    # -- transmission boundary ------------------------------------------

    def eot_adjust(self) -> None:
        self._clear_ghost_gap()
        self.sb = 0
        self.RR = -1

    def check(self) -> None:
        occ = set(self.slots.occupied())
        assert len(occ) == self.H, (self.owner, self.peer, occ, self.H)
        assert 0 <= self.H <= self.capacity
        if self.H_GP is None or self.H_GP > self.H:
            assert occ == set(range(1, self.H + 1)), (occ, self.H, self.H_GP)
            if self.H_GP is not None:
                assert self.H_GP == self.H + 1
        else:
            expect = set(range(1, self.H + 2)) - {self.H_GP}
            assert occ == expect, (occ, self.H, self.H_GP)
        if self.H_GP is not None:
            assert 1 <= self.H_GP <= self.capacity
