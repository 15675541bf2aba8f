"""Switch models: zero-buffer cut-through with selective dropping, and a
buffered FIFO variant for the baseline scheme.

Per-switch state is the set of its output ports; an output port is exactly one
directed link, so port state lives in flat per-link arrays shared through a
fabric object. Hosts and the arbiter transmit through the same fabric, which
gives one uniform contention/occupancy code path and one audit stream.

Zero-buffer semantics: a cell arriving at a switch either starts on its output
port after the cut-through latency or it is destroyed. Unscheduled data loses
every contention; if an unscheduled cell is mid-transmission when a scheduled
or control cell needs the port, the unscheduled cell is truncated (dropped in
full) so protected traffic is never harmed. Two protected cells contending is
a protocol violation: fatal in strict mode, counted in permissive mode.
"""

from __future__ import annotations

from collections import deque

from .framing import Cell, DATA_UNSCHEDULED, KIND_NAMES
from .topology import PodTopology

NEVER = 1 << 62


class ProtocolViolation(RuntimeError):
    """Two protected cells required the same port at overlapping times."""


class NodeCounters:
    __slots__ = ("cells_in", "forwarded", "drop_contention", "drop_preempted",
                 "drop_link_down", "drop_buffer_full", "violations")

    def __init__(self):
        self.cells_in = 0
        self.forwarded = 0
        self.drop_contention = 0
        self.drop_preempted = 0
        self.drop_link_down = 0
        self.drop_buffer_full = 0
        self.violations = 0

    @property
    def dropped(self):
        return (self.drop_contention + self.drop_preempted
                + self.drop_link_down + self.drop_buffer_full)

    def as_dict(self):
        return {
            "cells_in": self.cells_in,
            "forwarded": self.forwarded,
            "drop_contention": self.drop_contention,
            "drop_preempted": self.drop_preempted,
            "drop_link_down": self.drop_link_down,
            "drop_buffer_full": self.drop_buffer_full,
            "violations": self.violations,
        }


class Fabric:
    """Shared transmission machinery: per-link busy state, drop accounting,
    occupancy recording, and the hop-by-hop event chain."""

    def __init__(self, sim, topo: PodTopology, audit, cut_through_ps: int = 0,
                 strict: bool = True):
        self.sim = sim
        self.topo = topo
        self.audit = audit
        self.cut_through_ps = cut_through_ps
        self.strict = strict
        n = topo.n_links
        self.busy_until = [0] * n
        self.occupant = [None] * n
        self.dead_from = [NEVER] * n
        self.counters = [NodeCounters() for _ in range(topo.n_nodes)]
        self.deliver_fn = None  # set by the simulation: fn(t, cell)
        self.prop = topo.prop_delay_ps

    def kill_link(self, link: int, at_ps: int) -> None:
        self.dead_from[link] = at_ps

    def node_summary(self) -> dict:
        out = {}
        for node, ctr in enumerate(self.counters):
            if ctr.cells_in:
                out[self.topo.node_names[node]] = ctr.as_dict()
        return out

    def total(self, attr: str) -> int:
        return sum(getattr(c, attr) for c in self.counters)

    # -- common pieces -----------------------------------------------------

    def _occupy_and_forward(self, t: int, cell: Cell, hop: int, link: int) -> None:
        end = t + cell.ser_ps
        self.busy_until[link] = end
        self.occupant[link] = cell
        if hop == 0:
            # actual first-bit-out instant; in buffered mode the egress queue
            # may have shifted it past the nominal request time
            cell.send_time = t
        self.audit.record(link, t, end, cell.cell_id, cell.kind)
        self.counters[self.topo.link_src[link]].forwarded += 1
        nxt = hop + 1
        if nxt < len(cell.route):
            self.sim.schedule(t + self.prop + self.cut_through_ps,
                              self.transmit, cell, nxt)
        else:
            self.sim.schedule(t + self.prop + cell.ser_ps, self.deliver_fn, cell)

    def _drop(self, cell: Cell, node: int, cause: str) -> None:
        cell.dropped = True
        ctr = self.counters[node]
        setattr(ctr, cause, getattr(ctr, cause) + 1)
        self.audit.note_drop(cell.cell_id)


class ZeroBufferFabric(Fabric):

    def transmit(self, t: int, cell: Cell, hop: int) -> None:
        """Require output start at `t` on hop `hop` of the cell's route."""
        if cell.dropped:
            return
        link = cell.route[hop]
        node = self.topo.link_src[link]
        self.counters[node].cells_in += 1
        if t >= self.dead_from[link]:
            self._drop(cell, node, "drop_link_down")
            return
        if t < self.busy_until[link]:
            if cell.kind == DATA_UNSCHEDULED:
                self._drop(cell, node, "drop_contention")
                return
            occ = self.occupant[link]
            if occ is not None and occ.kind == DATA_UNSCHEDULED and not occ.dropped:
                # protected traffic preempts: the in-flight unscheduled cell
                # is truncated and counts as dropped in full
                self._drop(occ, node, "drop_preempted")
                self.audit.truncate(link, t)
                self.busy_until[link] = t
            else:
                self.counters[node].violations += 1
                if self.strict:
                    other = occ.trace_label if occ is not None else "?"
                    raise ProtocolViolation(
                        f"{KIND_NAMES[cell.kind]}#{cell.cell_id} needs "
                        f"{self.topo.link_name(link)} at t={t} but it is busy "
                        f"until {self.busy_until[link]} with {other}"
                    )
                self._drop(cell, node, "drop_contention")
                return
        self._occupy_and_forward(t, cell, hop, link)


class BufferedFabric(Fabric):
    """Baseline FIFO output queues with byte capacity and drop-tail."""

    def __init__(self, sim, topo, audit, cut_through_ps: int = 0,
                 buffer_bytes: int = 4 * 1024 * 1024):
        super().__init__(sim, topo, audit, cut_through_ps, strict=False)
        self.buffer_bytes = buffer_bytes
        self.queues = [deque() for _ in range(topo.n_links)]
        self.queued_bytes = [0] * topo.n_links
        self.max_queued_bytes = [0] * topo.n_links

    def transmit(self, t: int, cell: Cell, hop: int) -> None:
        if cell.dropped:
            return
        link = cell.route[hop]
        node = self.topo.link_src[link]
        self.counters[node].cells_in += 1
        if t >= self.dead_from[link]:
            self._drop(cell, node, "drop_link_down")
            return
        if t >= self.busy_until[link] and not self.queues[link]:
            self._start(t, cell, hop, link)
            return
        if self.queued_bytes[link] + cell.size_bytes > self.buffer_bytes:
            self._drop(cell, node, "drop_buffer_full")
            return
        self.queues[link].append((cell, hop))
        self.queued_bytes[link] += cell.size_bytes
        if self.queued_bytes[link] > self.max_queued_bytes[link]:
            self.max_queued_bytes[link] = self.queued_bytes[link]

    def _start(self, t: int, cell: Cell, hop: int, link: int) -> None:
        self._occupy_and_forward(t, cell, hop, link)
        # every transmission end re-checks the queue, so a cell queued behind
        # an in-flight one is always picked up
        self.sim.schedule(t + cell.ser_ps, self._drain, link)

    def _drain(self, t: int, link: int) -> None:
        q = self.queues[link]
        while q:
            cell, hop = q.popleft()
            self.queued_bytes[link] -= cell.size_bytes
            if cell.dropped:
                continue
            self._start(t, cell, hop, link)
            return
