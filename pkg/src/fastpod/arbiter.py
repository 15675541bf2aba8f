"""Central controller: demand ingestion, per-slot matching and path
assignment, precisely timed schedule-cell emission, failure monitoring.

Scheduling is two-phase. Timeslot allocation greedily builds a maximal
matching over pending (src, dst) pairs processed least-recently-granted
first (fresh demands carry their arrival stamp, so older demands lead) with
a per-slot rotation over hosts as the tie-break; granted pairs move to the
back, which round-robins service among demands sharing an endpoint. Path
assignment then edge-colors the slot's ToR-to-ToR demand multigraph with the
k/2 aggregation switches as colors, using greedy first-fit plus alternating
augmenting-path recoloring; per-ToR degree is at most k/2, so a coloring
always exists.

The arbiter pipelines: one allocation per slot, computed far enough ahead
that its schedule cells can ride the control gaps of earlier frames and still
arrive before the granted slot begins.
"""

from __future__ import annotations

from collections import deque

from .framing import (Cell, RTS, SCHD, SchdPayload, ctrl_tx_offset,
                      schd_injection_time)


class ProtocolError(RuntimeError):
    """Malformed control traffic reached the arbiter."""


class Demand:
    __slots__ = ("flow_id", "src", "dst", "size", "pending", "stamp_slot")

    def __init__(self, flow_id, src, dst, size, stamp_slot):
        self.flow_id = flow_id
        self.src = src
        self.dst = dst
        self.size = size
        self.pending = size
        self.stamp_slot = stamp_slot


class Grant:
    __slots__ = ("slot_id", "src", "dst", "agg", "n_cells", "bytes_granted")

    def __init__(self, slot_id, src, dst, n_cells, bytes_granted):
        self.slot_id = slot_id
        self.src = src
        self.dst = dst
        self.agg = -1
        self.n_cells = n_cells
        self.bytes_granted = bytes_granted


class TimeslotAllocation:
    __slots__ = ("slot_id", "grants", "by_src", "by_dst")

    def __init__(self, slot_id, grants):
        self.slot_id = slot_id
        self.grants = grants
        self.by_src = {g.src: g for g in grants}
        self.by_dst = {g.dst: g for g in grants}


class DemandBook:
    """Pending demands per (src, dst) pair, FIFO within a pair."""

    def __init__(self):
        self.pairs: dict = {}        # (src, dst) -> deque[Demand]
        self.stamp: dict = {}        # (src, dst) -> last-service slot
        self.granted_bytes: dict = {}  # flow_id -> bytes granted so far

    def add(self, flow_id, src, dst, size, stamp_slot) -> None:
        key = (src, dst)
        q = self.pairs.get(key)
        if q is None:
            q = deque()
            self.pairs[key] = q
        if not q:
            self.stamp[key] = stamp_slot
        q.append(Demand(flow_id, src, dst, size, stamp_slot))
        self.granted_bytes.setdefault(flow_id, 0)

    def pending_pairs(self):
        return [k for k, q in self.pairs.items() if q]

    def total_pending(self) -> int:
        return sum(d.pending for q in self.pairs.values() for d in q)

    def plan_grant(self, key, max_cells: int, cell_bytes: int):
        """Cells/bytes a grant of up to `max_cells` would take from this pair."""
        cells = 0
        total = 0
        for dem in self.pairs[key]:
            if cells == max_cells:
                break
            want = -(-dem.pending // cell_bytes)
            take_cells = min(max_cells - cells, want)
            take_bytes = min(dem.pending, take_cells * cell_bytes)
            cells += take_cells
            total += take_bytes
        return cells, total

    def deduct(self, key, bytes_granted: int) -> None:
        q = self.pairs[key]
        left = bytes_granted
        while left > 0:
            dem = q[0]
            take = min(dem.pending, left)
            dem.pending -= take
            self.granted_bytes[dem.flow_id] += take
            left -= take
            if dem.pending == 0:
                q.popleft()


def allocate_timeslot(book: DemandBook, slot_id: int, n_hosts: int,
                      max_cells: int, cell_bytes: int) -> TimeslotAllocation:
    """Maximal matching over pending pairs, deducting granted bytes.

    Pairs are taken greedily in least-recently-granted order, then unmatched
    sources are completed with augmenting paths, so the matching has maximum
    cardinality while the greedy fairness order decides who keeps their first
    choice. Granted pairs are restamped with this slot, which round-robins
    service among demands sharing an endpoint.
    """
    order = sorted(
        book.pending_pairs(),
        key=lambda p: (book.stamp[p], (p[0] - slot_id) % n_hosts,
                       (p[1] - slot_id) % n_hosts),
    )
    match_src: dict = {}
    match_dst: dict = {}
    adj: dict = {}
    for s, d in order:
        adj.setdefault(s, []).append(d)
        if s not in match_src and d not in match_dst:
            match_src[s] = d
            match_dst[d] = s

    def augment(s, banned) -> bool:
        for d in adj[s]:
            if d in banned:
                continue
            banned.add(d)
            if d not in match_dst or augment(match_dst[d], banned):
                match_src[s] = d
                match_dst[d] = s
                return True
        return False

    for s in list(adj):
        if s not in match_src:
            augment(s, set())

    grants = []
    granted_src = set()
    for key in order:
        s, d = key
        if s in granted_src or match_src.get(s) != d:
            continue
        cells, total = book.plan_grant(key, max_cells, cell_bytes)
        if cells == 0:
            continue
        book.deduct(key, total)
        book.stamp[key] = slot_id
        granted_src.add(s)
        grants.append(Grant(slot_id, s, d, cells, total))
    return TimeslotAllocation(slot_id, grants)


def assign_paths(alloc: TimeslotAllocation, n_colors: int, tor_of_host) -> None:
    """Edge-color the slot's ToR-level demand multigraph with the aggs.

    Greedy first-fit; when the two endpoints have no common free color, an
    alternating-path recolor frees one (always possible in a bipartite
    multigraph with max degree <= n_colors).
    """
    src_edges: dict = {}   # src-ToR -> {color: Grant}
    dst_edges: dict = {}   # dst-ToR -> {color: Grant}
    for g in alloc.grants:
        u = tor_of_host(g.src)
        v = tor_of_host(g.dst)
        su = src_edges.setdefault(u, {})
        dv = dst_edges.setdefault(v, {})
        free_u = [c for c in range(n_colors) if c not in su]
        free_v = [c for c in range(n_colors) if c not in dv]
        if not free_u or not free_v:
            raise AssertionError("ToR degree exceeds color count: matching invariant broken")
        common = [c for c in free_u if c not in dv]
        if common:
            color = common[0]
        else:
            a, b = free_u[0], free_v[0]
            _recolor_chain(v, a, b, src_edges, dst_edges, tor_of_host)
            color = a
        g.agg = color
        su[color] = g
        dv[color] = g


def _recolor_chain(v, a, b, src_edges, dst_edges, tor_of_host) -> None:
    """Swap colors a<->b along the alternating chain that starts with the
    a-colored edge at dst-ToR v, freeing color a at v (b is free at v)."""
    path = []
    node, on_dst, color = v, True, a
    while True:
        table = dst_edges.get(node) if on_dst else src_edges.get(node)
        e = None if table is None else table.get(color)
        if e is None:
            break
        path.append(e)
        node = tor_of_host(e.src) if on_dst else tor_of_host(e.dst)
        on_dst = not on_dst
        color = b if color == a else a
    for e in path:
        del src_edges[tor_of_host(e.src)][e.agg]
        del dst_edges[tor_of_host(e.dst)][e.agg]
        e.agg = b if e.agg == a else a
    for e in path:
        src_edges[tor_of_host(e.src)][e.agg] = e
        dst_edges[tor_of_host(e.dst)][e.agg] = e


class Arbiter:
    """Event-driven controller for the gap-filling (slotted) scheme."""

    trace_label = "arbiter"

    def __init__(self, sim, topo, layout, fabric, plan, state,
                 record_schd_log=False, allocation_log=None, strict=True):
        self.sim = sim
        self.topo = topo
        self.layout = layout
        self.fabric = fabric
        self.plan = plan
        self.state = state
        self.strict = strict
        self.book = DemandBook()
        self.allocations: dict = {}
        self.last_rts: dict = {h: 0 for h in range(topo.n_hosts)}
        self.reports: dict = {}           # slot -> {host: received_bool}
        self.suspected_hosts: dict = {}   # host -> {missed_slot, detected_ps}
        self.suspected_links: dict = {}   # link -> {slot, detected_ps}
        self.protocol_violations = 0
        self.schd_sent = 0
        self.next_cell_id_fn = None       # wired by the simulation
        self.schd_log = [] if record_schd_log else None
        self.allocation_log = allocation_log
        self._next_alloc_slot = plan.alloc_start_slot
        self._next_hb_slot = 1

    # -- control-plane input -------------------------------------------------

    def on_rts(self, t: int, cell: Cell) -> None:
        if cell.kind != RTS or cell.payload is None:
            self.protocol_violations += 1
            if self.strict:
                raise ProtocolError(f"malformed RTS {cell.trace_label} at t={t}")
            return
        p = cell.payload
        host = cell.src
        if cell.slot_id > self.last_rts[host]:
            self.last_rts[host] = cell.slot_id
        if p.new_flow is not None:
            flow_id, dst, size = p.new_flow
            # stamp with the slot the demand was reported in, so never-served
            # demands sort oldest-first against recently-granted pairs
            self.book.add(flow_id, host, dst, size, cell.slot_id)
        if p.report_slot is not None:
            self.reports.setdefault(p.report_slot, {})[host] = p.report_received

    # -- allocation pipeline ---------------------------------------------------

    def start(self) -> None:
        self.sim.schedule(self.plan.alloc_time(self._next_alloc_slot),
                          self.on_alloc_tick)
        self.sim.schedule(self.plan.rts_deadline(self._next_hb_slot),
                          self.on_heartbeat_check)

    def on_alloc_tick(self, t: int) -> None:
        if self.state.should_stop(t):
            return
        slot = self._next_alloc_slot
        self._next_alloc_slot = slot + 1
        alloc = allocate_timeslot(self.book, slot, self.topo.n_hosts,
                                  self.layout.n_positions - 1,
                                  self.layout.data_cell_bytes)
        assign_paths(alloc, self.topo.k // 2, self.topo.tor_index_of_host)
        self.allocations[slot] = alloc
        if self.allocation_log is not None:
            for g in alloc.grants:
                self.allocation_log.append((slot, g.src, g.dst, g.agg, g.n_cells))
        self._emit_schds(t, grant_slot=slot, frame_slot=slot - self.plan.ride_lag)
        self._prune(slot)
        self.sim.schedule(self.plan.alloc_time(self._next_alloc_slot),
                          self.on_alloc_tick)

    def _emit_schds(self, now: int, grant_slot: int, frame_slot: int) -> None:
        """One SCHD per host, riding the control gaps of `frame_slot` streams."""
        alloc_grants = self.allocations[grant_slot]
        stream_alloc = self.allocations.get(frame_slot)
        frame_start = frame_slot * self.plan.slot_ps
        rel = self.topo.relative_index
        for host in range(self.topo.n_hosts):
            g = alloc_grants.by_src.get(host)
            incoming = stream_alloc.by_dst.get(host) if stream_alloc else None
            sender_rel = rel(incoming.src) if incoming is not None else None
            tx = schd_injection_time(self.layout, frame_start, sender_rel,
                                     rel(host), self.topo,
                                     self.fabric.cut_through_ps)
            grant = (g.slot_id, g.dst, g.agg, g.n_cells) if g is not None else None
            payload = SchdPayload(grant=grant, timestamp=tx)
            cell = Cell(self.next_cell_id_fn(), SCHD, -1, 0,
                        self.layout.ctrl_cell_bytes, self.layout.ctrl_cell_ps,
                        self.topo.schd_route(host), self.topo.arbiter, host,
                        frame_slot, payload)
            cell.send_time = tx
            if self.schd_log is not None:
                self.schd_log.append((cell.cell_id, frame_slot, sender_rel,
                                      rel(host), host, tx))
            self.schd_sent += 1
            self.sim.schedule(tx, self.fabric.transmit, cell, 0)

    def _prune(self, newest_slot: int) -> None:
        horizon = newest_slot - self.plan.retention_slots
        for s in [s for s in self.allocations if s < horizon]:
            del self.allocations[s]
        for s in [s for s in self.reports if s < horizon]:
            del self.reports[s]

    # -- failure detection -----------------------------------------------------

    def on_heartbeat_check(self, t: int) -> None:
        if self.state.should_stop(t):
            return
        slot = self._next_hb_slot
        self._next_hb_slot = slot + 1
        for host in range(self.topo.n_hosts):
            if self.last_rts[host] < slot and host not in self.suspected_hosts:
                self.suspected_hosts[host] = {"missed_slot": slot, "detected_ps": t}
        self._localize(slot, t)
        self.sim.schedule(self.plan.rts_deadline(self._next_hb_slot),
                          self.on_heartbeat_check)

    def _localize(self, rts_slot: int, t: int) -> None:
        """Cross-check delivery reports covering slot q against the stored
        allocation for q; suspect the above-ToR links of undelivered grants
        that no healthy delivery vouches for."""
        q = rts_slot - self.plan.report_lag
        if q < 1:
            return
        alloc = self.allocations.get(q)
        reports = self.reports.pop(q, {})
        if alloc is None or not alloc.grants:
            return
        healthy = set()
        candidates = []
        for g in alloc.grants:
            links = self._above_tor_links(g)
            if reports.get(g.dst) is True:
                healthy.update(links)
            elif reports.get(g.dst) is False:
                if g.src in self.suspected_hosts or g.dst in self.suspected_hosts:
                    continue  # explained by an endpoint failure
                candidates.append((g, links))
        for g, links in candidates:
            for link in links:
                if link not in healthy and link not in self.suspected_links:
                    self.suspected_links[link] = {"slot": q, "detected_ps": t}

    def _above_tor_links(self, g: Grant):
        tor_s = self.topo.tor_of(g.src)
        tor_d = self.topo.tor_of(g.dst)
        agg = self.topo.agg_node(g.agg)
        return (self.topo.link_id(tor_s, agg), self.topo.link_id(agg, tor_d))

    def suspect_summary(self) -> dict:
        return {
            "hosts": {
                self.topo.node_names[h]: info
                for h, info in sorted(self.suspected_hosts.items())
            },
            "links": {
                self.topo.link_name(l): info
                for l, info in sorted(self.suspected_links.items())
            },
        }

class FastpassArbiter(Arbiter):
    """Same allocator, strawman control plane: schedule cells leave on demand
    right after each allocation instead of riding reserved gaps."""

    def start(self) -> None:
        self.sim.schedule(self.plan.alloc_time(self._next_alloc_slot),
                          self.on_alloc_tick)
        # no heartbeat chain: control traffic has no slot cadence here

    def _emit_schds(self, now: int, grant_slot: int, frame_slot: int) -> None:
        ready = now + self.plan.process_ps
        for g in self.allocations[grant_slot].grants:
            payload = SchdPayload(grant=(g.slot_id, g.dst, g.agg, g.n_cells),
                                  timestamp=ready)
            cell = Cell(self.next_cell_id_fn(), SCHD, -1, 0,
                        self.layout.ctrl_cell_bytes, self.layout.ctrl_cell_ps,
                        self.topo.schd_route(g.src), self.topo.arbiter, g.src,
                        grant_slot, payload)
            cell.send_time = ready
            self.schd_sent += 1
            self.sim.schedule(ready, self.fabric.transmit, cell, 0)
