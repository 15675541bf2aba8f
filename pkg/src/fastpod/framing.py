"""Slotted frame layout and gap-timing arithmetic.

A time slot carries N-1 fixed-size data cells plus exactly two materialized
control gaps (one where the sender transmits its request, one held open for
the arbiter's schedule cell). Gap position p sits immediately before data
slot p for p < N-1, and position N-1 follows the last data slot. Only the two
chosen positions are materialized, so the slot duration is a constant
independent of which positions they are:

    slot = (N-1)*data_cell + 2*(ctrl_cell + guard_ctrl) + guard_slot

When both chosen positions coincide, two control widths are materialized
back-to-back at that position (request first, schedule gap second). Missing
data cells in a partial frame stay as idle time of one data-cell width each so
the gap offsets of every stream are identical across senders -- the arbiter's
injection-time math depends on that.

A materialized gap is one control cell plus the control guard band; the
control transmission nominally starts half a guard into the gap, so under
perfect synchronization it sits strictly inside the gap with slack on both
sides for clock error.
"""

from __future__ import annotations

from dataclasses import dataclass

from .topology import PodTopology, serialization_ps

# cell kinds (plain ints: these are compared in the hottest paths)
DATA_SCHEDULED = 0
DATA_UNSCHEDULED = 1
RTS = 2
SCHD = 3

KIND_NAMES = ("DATA_SCHEDULED", "DATA_UNSCHEDULED", "RTS", "SCHD")


def is_protected(kind: int) -> bool:
    """Scheduled data and control cells must never be harmed by contention."""
    return kind != DATA_UNSCHEDULED


@dataclass(frozen=True)
class FrameLayout:
    n_positions: int           # N = k/2 control gap positions per slot
    data_cell_bytes: int
    ctrl_cell_bytes: int
    data_cell_ps: int
    ctrl_cell_ps: int
    guard_slot_ps: int
    guard_ctrl_ps: int

    @property
    def gap_width_ps(self) -> int:
        return self.ctrl_cell_ps + self.guard_ctrl_ps

    @property
    def slot_ps(self) -> int:
        return (
            (self.n_positions - 1) * self.data_cell_ps
            + 2 * self.gap_width_ps
            + self.guard_slot_ps
        )

    def validate(self) -> None:
        if self.n_positions < 2:
            raise ValueError("need at least 2 gap positions per slot")
        if 2 * self.ctrl_cell_bytes >= self.data_cell_bytes:
            raise ValueError(
                "two control cells must be smaller than one data cell "
                f"(2*{self.ctrl_cell_bytes} >= {self.data_cell_bytes})"
            )
        # adjacent gap positions are one data-cell width apart; a shifted gap
        # plus its control transmission must still clear the next position
        if self.gap_width_ps + self.ctrl_cell_ps > self.data_cell_ps:
            raise ValueError(
                "control gap too wide for staggering: "
                f"2*{self.ctrl_cell_ps} + {self.guard_ctrl_ps} > {self.data_cell_ps}"
            )
        if min(self.guard_slot_ps, self.guard_ctrl_ps) < 0:
            raise ValueError("guard bands must be non-negative")


def make_layout(
    k: int,
    link_rate_bps: int,
    data_cell_bytes: int = 1500,
    ctrl_cell_bytes: int = 64,
    guard_slot_ps: int = 0,
    guard_ctrl_ps: int = 0,
) -> FrameLayout:
    layout = FrameLayout(
        n_positions=k // 2,
        data_cell_bytes=data_cell_bytes,
        ctrl_cell_bytes=ctrl_cell_bytes,
        data_cell_ps=serialization_ps(data_cell_bytes, link_rate_bps),
        ctrl_cell_ps=serialization_ps(ctrl_cell_bytes, link_rate_bps),
        guard_slot_ps=guard_slot_ps,
        guard_ctrl_ps=guard_ctrl_ps,
    )
    layout.validate()
    return layout


def slot_duration(layout: FrameLayout) -> int:
    return layout.slot_ps


# -- gap/data offsets within one egress frame -------------------------------
#
# i = sender's relative index under its ToR (request position)
# j = receiver's relative index under its ToR (schedule-gap position)
# Offsets shift by one gap width for every materialized gap that precedes the
# element; with i == j the request gap comes first.

def rts_gap_offset(layout: FrameLayout, i: int, j: int | None) -> int:
    """Start of the request gap; j is None for a frame with no data stream."""
    _check_pos(layout, i)
    if j is not None:
        _check_pos(layout, j)
    shift = layout.gap_width_ps if (j is not None and j < i) else 0
    return i * layout.data_cell_ps + shift


def schd_gap_offset(layout: FrameLayout, i: int | None, j: int) -> int:
    """Start of the schedule gap; i is None for an idle (no-sender) stream."""
    _check_pos(layout, j)
    if i is None:
        return j * layout.data_cell_ps
    _check_pos(layout, i)
    shift = layout.gap_width_ps if i <= j else 0
    return j * layout.data_cell_ps + shift


def data_offset(layout: FrameLayout, i: int, j: int, p: int) -> int:
    _check_pos(layout, i)
    _check_pos(layout, j)
    if not 0 <= p < layout.n_positions - 1:
        raise ValueError(f"data slot {p} out of range")
    shift = (1 if i <= p else 0) + (1 if j <= p else 0)
    return p * layout.data_cell_ps + shift * layout.gap_width_ps


def ctrl_tx_offset(gap_offset: int, layout: FrameLayout) -> int:
    """Nominal control transmission start inside a materialized gap."""
    return gap_offset + layout.guard_ctrl_ps // 2


def _check_pos(layout: FrameLayout, p: int) -> None:
    if not 0 <= p < layout.n_positions:
        raise ValueError(f"gap position {p} out of range 0..{layout.n_positions - 1}")


def frame_offsets(layout: FrameLayout, i: int, j: int, n_data: int) -> list:
    """Ordered (element, start_offset) layout of one egress frame.

    Elements are ("rts", off), ("schd_gap", off), ("data", p, off) and
    ("idle", p, off); gaps are materialized only at positions i and j.
    """
    _check_pos(layout, i)
    _check_pos(layout, j)
    if not 0 <= n_data <= layout.n_positions - 1:
        raise ValueError(f"n_data {n_data} out of range")
    out = []
    off = 0
    for p in range(layout.n_positions):
        if p == i and p == j:
            out.append(("rts", off))
            off += layout.gap_width_ps
            out.append(("schd_gap", off))
            off += layout.gap_width_ps
        elif p == i:
            out.append(("rts", off))
            off += layout.gap_width_ps
        elif p == j:
            out.append(("schd_gap", off))
            off += layout.gap_width_ps
        if p < layout.n_positions - 1:
            out.append(("data" if p < n_data else "idle", p, off))
            off += layout.data_cell_ps
    assert off + layout.guard_slot_ps == layout.slot_ps
    return out


def schd_injection_time(
    layout: FrameLayout,
    slot_start: int,
    sender_rel: int | None,
    receiver_rel: int,
    topology: PodTopology,
    cut_through_ps: int,
) -> int:
    """Arbiter transmit start so the schedule cell's first bit reaches the
    destination ToR's host-facing output exactly at the gap's insertion point.

    The stream reserving the gap left its sender 3 hops earlier (sender link,
    ToR uplink, Agg downlink), so the gap appears at the ToR output lagged by
    3*(prop + cut_through) relative to the sender's frame; the arbiter's own
    path contributes one propagation leg plus one cut-through.
    """
    gap = schd_gap_offset(layout, sender_rel, receiver_rel)
    hop = topology.prop_delay_ps + cut_through_ps
    target = slot_start + ctrl_tx_offset(gap, layout) + 3 * hop
    return target - topology.prop_delay_ps - cut_through_ps


# -- cells -------------------------------------------------------------------

class Cell:
    """One fixed-size transmitted unit (data cell or control cell).

    `route` is a tuple of directed-link ids; `seq` is the cell index within
    its flow (byte offset // data cell size), shared between scheduled and
    unscheduled copies so the receiver can deduplicate.
    """

    __slots__ = (
        "cell_id", "kind", "flow_id", "seq", "size_bytes", "ser_ps",
        "route", "src", "dst", "send_time", "slot_id", "payload", "dropped",
    )

    def __init__(self, cell_id, kind, flow_id, seq, size_bytes, ser_ps,
                 route, src, dst, slot_id, payload=None):
        self.cell_id = cell_id
        self.kind = kind
        self.flow_id = flow_id
        self.seq = seq
        self.size_bytes = size_bytes
        self.ser_ps = ser_ps
        self.route = route
        self.src = src
        self.dst = dst
        self.send_time = -1
        self.slot_id = slot_id
        self.payload = payload
        self.dropped = False

    @property
    def trace_label(self) -> str:
        return f"{KIND_NAMES[self.kind]}#{self.cell_id}(f{self.flow_id},s{self.seq})"


class RtsPayload:
    """Request-to-send content: optional new demand, aggregate backlog,
    heartbeat, and the delivery report used for failure localization."""

    __slots__ = ("new_flow", "pending_bytes", "report_slot", "report_received")

    def __init__(self, new_flow, pending_bytes, report_slot, report_received):
        self.new_flow = new_flow          # (flow_id, dst, size_bytes) or None
        self.pending_bytes = pending_bytes
        self.report_slot = report_slot    # slot the delivery report covers
        self.report_received = report_received


class SchdPayload:
    """Schedule content: the grant (if any) plus the arbiter's timestamp."""

    __slots__ = ("grant", "timestamp")

    def __init__(self, grant, timestamp):
        self.grant = grant                # (slot_id, dst, agg_index, n_cells) or None
        self.timestamp = timestamp
