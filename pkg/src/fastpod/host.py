"""Endpoint state machines.

The slotted (gap-filling) host builds one egress frame per slot: up to N-1
data cells on the granted route, its request cell at gap position i (its own
relative index under its ToR), and the schedule gap held open at position j
(the relative index of the stream's destination). Without a grant, an
optimistically-sent demand may fill the data slots with droppable unscheduled
cells over a per-slot random path, under the same gap discipline.

Optimistic eligibility is decided once, at demand arrival (the destination's
VOQ was empty), and ends at the demand's first grant or at the first schedule
cell received at or after the analytic host-arbiter round trip has elapsed
since its request went out. Bytes leave a VOQ only via scheduled grants:
optimistic copies never dequeue, so after a grant the whole demand is resent
from the start and the receiver deduplicates by cell sequence number.

The baseline host (buffered scheme) has no frame discipline: requests leave
immediately on arrival and granted cells go out back-to-back at the granted
slot boundary, queueing at the egress like everything else.
"""

from __future__ import annotations

from collections import deque

from .framing import (Cell, DATA_SCHEDULED, DATA_UNSCHEDULED, RTS, RtsPayload,
                      ctrl_tx_offset, data_offset, rts_gap_offset)
from .metrics import FlowRecord

# demand phases
OPT_ELIGIBLE = 0
AWAITING = 1
SCHEDULED = 2
DONE_SENDING = 3

PHASE_NAMES = ("OPTIMISTIC_ELIGIBLE", "AWAITING", "SCHEDULED", "DONE_SENDING")


class SenderFlow:
    __slots__ = ("flow_id", "dst", "size", "sched_sent", "opt_sent", "phase",
                 "rts_tx_ps", "deadline_ps", "record")

    def __init__(self, flow_id, dst, size, phase, record):
        self.flow_id = flow_id
        self.dst = dst
        self.size = size
        self.sched_sent = 0
        self.opt_sent = 0
        self.phase = phase
        self.rts_tx_ps = None
        self.deadline_ps = None
        self.record = record


class ReceiverFlow:
    __slots__ = ("seqs", "bytes_unique", "record")

    def __init__(self, record):
        self.seqs = set()
        self.bytes_unique = 0
        self.record = record


class HostClock:
    """Modeled local clock: constant startup offset plus linear drift,
    re-synchronized from the arbiter timestamp carried in every schedule cell
    (one-way-delay deltas against the startup baseline cancel the drift)."""

    __slots__ = ("offset0_ps", "drift_ppm", "corr_ps", "baseline", "synced")

    def __init__(self, offset0_ps: int, drift_ppm: float, synced: bool = True):
        self.offset0_ps = offset0_ps
        self.drift_ppm = drift_ppm
        self.corr_ps = 0
        self.baseline = None
        self.synced = synced

    def error_ps(self, t: int) -> int:
        return self.offset0_ps + int(self.drift_ppm * t) // 10**6 - self.corr_ps

    def sync(self, t_arrival: int, arbiter_timestamp: int) -> None:
        measured = (t_arrival + self.error_ps(t_arrival)) - arbiter_timestamp
        if self.baseline is None:
            self.baseline = measured
        elif self.synced:
            self.corr_ps += measured - self.baseline


class BaseHost:
    """Receive-side bookkeeping shared by both host variants."""

    def __init__(self, sim, topo, layout, fabric, plan, host_id, state,
                 records, latency):
        self.sim = sim
        self.topo = topo
        self.layout = layout
        self.fabric = fabric
        self.plan = plan
        self.id = host_id
        self.state = state            # shared RunState (stopping flag, counters)
        self.records = records        # flow_id -> FlowRecord
        self.latency = latency
        self.voqs: dict = {}          # dst -> deque[SenderFlow]
        self.recv: dict = {}          # flow_id -> ReceiverFlow
        self.sched_pending = 0
        self.rts_sent = 0
        self.late_grants = 0
        self.trace_label = topo.node_names[host_id]

    def _new_cell_id(self) -> int:
        return self.state.next_cell_id()

    def on_data(self, t: int, cell: Cell) -> None:
        rf = self.recv.get(cell.flow_id)
        if rf is None:
            rf = ReceiverFlow(self.records[cell.flow_id])
            self.recv[cell.flow_id] = rf
        payload_bytes = cell.payload
        if cell.seq in rf.seqs:
            rf.record.redundant_bytes_received += payload_bytes
        else:
            rf.seqs.add(cell.seq)
            rf.bytes_unique += payload_bytes
            if rf.bytes_unique == rf.record.size and not rf.record.completed:
                rf.record.completion = t
                self.state.flow_completed()
        self.latency.add(cell.kind == DATA_SCHEDULED, t - cell.send_time)


class Host(BaseHost):
    """Slotted gap-filling endpoint."""

    def __init__(self, sim, topo, layout, fabric, plan, host_id, state,
                 records, latency, rng, optimistic: bool,
                 clock: HostClock | None = None):
        super().__init__(sim, topo, layout, fabric, plan, host_id, state,
                         records, latency)
        self.rng = rng
        self.optimistic = optimistic
        self.clock = clock
        self.unreported: deque = deque()
        self.opt_queue: deque = deque()   # eligible demands, arrival order
        self.pending_grants: dict = {}    # slot -> (slot, dst, agg, n_cells)
        self.received_sched_slots: set = set()
        self.rel = topo.relative_index(host_id)

    def start(self) -> None:
        s = self.plan.protocol_start_slot
        self.sim.schedule(self._local_fire_time(s), self.on_frame, s)

    def _local_fire_time(self, slot: int) -> int:
        nominal = self.plan.slot_start(slot)
        if self.clock is None:
            return nominal
        return max(self.sim.now, nominal - self.clock.error_ps(self.sim.now))

    # -- demand intake -------------------------------------------------------

    def on_flow_arrival(self, t: int, flow_id: int, dst: int, size: int) -> None:
        record = self.records[flow_id]
        q = self.voqs.get(dst)
        if q is None:
            q = deque()
            self.voqs[dst] = q
        voq_was_empty = not q
        phase = OPT_ELIGIBLE if (self.optimistic and voq_was_empty) else AWAITING
        sf = SenderFlow(flow_id, dst, size, phase, record)
        q.append(sf)
        self.unreported.append(sf)
        self.sched_pending += size
        if phase == OPT_ELIGIBLE:
            self.opt_queue.append(sf)

    # -- per-slot frame ---------------------------------------------------------

    def on_frame(self, t: int, slot: int) -> None:
        if self.state.should_stop(t):
            return
        grant = self.pending_grants.pop(slot, None)
        stream_j = None
        if grant is not None:
            stream_j = self._send_scheduled(t, slot, grant)
        elif self.optimistic:
            stream_j = self._send_optimistic(t, slot)
        self._send_rts(t, slot, stream_j)
        self.sim.schedule(self._local_fire_time(slot + 1), self.on_frame, slot + 1)

    def _send_scheduled(self, t: int, slot: int, grant) -> int:
        # grants are pair-level; within the VOQ, cells round-robin over the
        # unfinished flows (one cell each per turn) so a short flow is never
        # stuck behind an elephant to the same destination
        _, dst, agg, n_cells = grant
        j = self.topo.relative_index(dst)
        route = self.topo.data_route(self.id, dst, agg)
        q = self.voqs[dst]
        layout = self.layout
        for idx in range(n_cells):
            if not q:
                raise AssertionError(
                    f"{self.trace_label}: grant for {n_cells} cells exceeds VOQ"
                )
            sf = q[0]
            payload = min(layout.data_cell_bytes, sf.size - sf.sched_sent)
            seq = sf.sched_sent // layout.data_cell_bytes
            cell = Cell(self._new_cell_id(), DATA_SCHEDULED, sf.flow_id, seq,
                        layout.data_cell_bytes, layout.data_cell_ps, route,
                        self.id, dst, slot, payload)
            tx = t + data_offset(layout, self.rel, j, idx)
            cell.send_time = tx
            self.sim.schedule(tx, self.fabric.transmit, cell, 0)
            sf.sched_sent += payload
            self.sched_pending -= payload
            if sf.sched_sent >= sf.size:
                sf.phase = DONE_SENDING
                q.popleft()
            else:
                q.rotate(-1)
        return j

    def _send_optimistic(self, t: int, slot: int) -> int | None:
        opt = self.opt_queue
        while opt and (opt[0].phase != OPT_ELIGIBLE or opt[0].opt_sent >= opt[0].size):
            opt.popleft()
        if not opt:
            return None
        sf = opt[0]
        j = self.topo.relative_index(sf.dst)
        agg = self.rng.randrange(self.topo.k // 2)
        route = self.topo.data_route(self.id, sf.dst, agg)
        layout = self.layout
        n_cells = min(layout.n_positions - 1,
                      -(-(sf.size - sf.opt_sent) // layout.data_cell_bytes))
        for idx in range(n_cells):
            payload = min(layout.data_cell_bytes, sf.size - sf.opt_sent)
            seq = sf.opt_sent // layout.data_cell_bytes
            cell = Cell(self._new_cell_id(), DATA_UNSCHEDULED, sf.flow_id, seq,
                        layout.data_cell_bytes, layout.data_cell_ps, route,
                        self.id, sf.dst, slot, payload)
            tx = t + data_offset(layout, self.rel, j, idx)
            cell.send_time = tx
            self.sim.schedule(tx, self.fabric.transmit, cell, 0)
            sf.opt_sent += payload
            sf.record.optimistic_bytes_sent += payload
        return j

    def _send_rts(self, t: int, slot: int, stream_j: int | None) -> None:
        layout = self.layout
        new_flow = None
        sf = None
        if self.unreported:
            sf = self.unreported.popleft()
            new_flow = (sf.flow_id, sf.dst, sf.size)
        q = slot - self.plan.report_lag
        received = False
        if q >= self.plan.protocol_start_slot:
            received = q in self.received_sched_slots
            self.received_sched_slots.discard(q)
        payload = RtsPayload(new_flow, self.sched_pending,
                             q if q >= self.plan.protocol_start_slot else None,
                             received)
        cell = Cell(self._new_cell_id(), RTS, -1, 0, layout.ctrl_cell_bytes,
                    layout.ctrl_cell_ps, self.topo.rts_route(self.id),
                    self.id, self.topo.arbiter, slot, payload)
        tx = t + ctrl_tx_offset(rts_gap_offset(layout, self.rel, stream_j), layout)
        cell.send_time = tx
        self.rts_sent += 1
        if sf is not None:
            sf.rts_tx_ps = tx
            sf.deadline_ps = tx + self.plan.arbiter_rtt_ps
        self.sim.schedule(tx, self.fabric.transmit, cell, 0)

    # -- schedule-cell handling --------------------------------------------------

    def on_schd(self, t: int, cell: Cell) -> None:
        p = cell.payload
        if self.clock is not None:
            self.clock.sync(t, p.timestamp)
        grant = p.grant
        if grant is not None:
            slot_id, dst, agg, n_cells = grant
            if t >= self.plan.slot_start(slot_id):
                self.late_grants += 1
            else:
                self.pending_grants[slot_id] = grant
            q = self.voqs.get(dst)
            if q:
                # at most one demand per VOQ can still be optimistic: it was
                # alone when it arrived, and anything after it is AWAITING
                for sf in q:
                    if sf.phase == OPT_ELIGIBLE:
                        sf.phase = SCHEDULED
                        break
        # an empty schedule cell past the round-trip deadline means the fabric
        # may be allocated to others: stop being optimistic
        for sf in self.opt_queue:
            if (sf.phase == OPT_ELIGIBLE and sf.deadline_ps is not None
                    and t >= sf.deadline_ps):
                sf.phase = AWAITING


class FastpassHost(BaseHost):
    """Baseline endpoint: on-demand control, slot-aligned data, FIFO egress."""

    def on_flow_arrival(self, t: int, flow_id: int, dst: int, size: int) -> None:
        record = self.records[flow_id]
        q = self.voqs.setdefault(dst, deque())
        sf = SenderFlow(flow_id, dst, size, AWAITING, record)
        q.append(sf)
        self.sched_pending += size
        layout = self.layout
        payload = RtsPayload((flow_id, dst, size), self.sched_pending,
                             None, False)
        cell = Cell(self._new_cell_id(), RTS, -1, 0, layout.ctrl_cell_bytes,
                    layout.ctrl_cell_ps, self.topo.rts_route(self.id),
                    self.id, self.topo.arbiter, t // self.plan.slot_ps, payload)
        cell.send_time = t
        self.rts_sent += 1
        self.fabric.transmit(t, cell, 0)

    def on_schd(self, t: int, cell: Cell) -> None:
        grant = cell.payload.grant
        if grant is None:
            return
        slot_id = grant[0]
        start = self.plan.slot_start(slot_id)
        if t >= start:
            self.late_grants += 1
            self._exec_grant(t, grant)
        else:
            self.sim.schedule(start, self._exec_grant, grant)

    def _exec_grant(self, t: int, grant) -> None:
        slot_id, dst, agg, n_cells = grant
        route = self.topo.data_route(self.id, dst, agg)
        q = self.voqs[dst]
        layout = self.layout
        for idx in range(n_cells):
            if not q:
                raise AssertionError(
                    f"{self.trace_label}: grant for {n_cells} cells exceeds VOQ"
                )
            sf = q[0]
            payload = min(layout.data_cell_bytes, sf.size - sf.sched_sent)
            seq = sf.sched_sent // layout.data_cell_bytes
            cell = Cell(self._new_cell_id(), DATA_SCHEDULED, sf.flow_id, seq,
                        layout.data_cell_bytes, layout.data_cell_ps, route,
                        self.id, dst, slot_id, payload)
            tx = t + idx * layout.data_cell_ps
            cell.send_time = tx
            self.sim.schedule(tx, self.fabric.transmit, cell, 0)
            sf.sched_sent += payload
            self.sched_pending -= payload
            if sf.sched_sent >= sf.size:
                sf.phase = DONE_SENDING
                q.popleft()
            else:
                q.rotate(-1)
