"""Wires one simulation run: topology, fabric, hosts, arbiter, workload,
collectors; executes to completion and assembles the metrics bundle."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .arbiter import Arbiter, FastpassArbiter
from .config import RunConfig
from .engine import Simulator
from .framing import RTS, SCHD, make_layout
from .host import FastpassHost, Host, HostClock
from .metrics import (CollisionAudit, FlowRecord, LatencyCollector,
                      audit_collision_free, goodput_fraction, latency_cdf,
                      slowdown_stats)
from .switch import BufferedFabric, ZeroBufferFabric
from .timing import compute_plan
from .topology import build_pod
from .workload import SizeDistribution, default_cdf_path, generate


class RunState:
    """Shared run lifecycle: cell-id counter, completion tracking, stop flag."""

    __slots__ = ("n_flows", "completed", "stopping", "cap_ps", "capped", "_cell_id")

    def __init__(self, n_flows: int, cap_ps: int):
        self.n_flows = n_flows
        self.completed = 0
        self.stopping = False
        self.cap_ps = cap_ps
        self.capped = False
        self._cell_id = 0

    def next_cell_id(self) -> int:
        self._cell_id += 1
        return self._cell_id

    def flow_completed(self) -> None:
        self.completed += 1
        if self.completed >= self.n_flows:
            self.stopping = True

    def should_stop(self, t: int) -> bool:
        if self.stopping:
            return True
        if t > self.cap_ps:
            self.stopping = True
            self.capped = True
            return True
        return False


@dataclass
class RunResult:
    scheme: str
    config: dict
    records: list
    audit_report: dict
    switch_summary: dict
    totals: dict
    latency: LatencyCollector
    suspects: dict
    plan_echo: dict
    counters: dict
    makespan_ps: int
    offered_load: float
    sim_end_ps: int
    flows_completed: int
    capped: bool
    layout: object
    topology: object
    cut_through_ps: int
    short_flow_bytes: int
    trace_lines: list = field(default_factory=list)
    allocation_log: list | None = None
    schd_log: list | None = None
    audit: CollisionAudit | None = None

    def slowdowns(self) -> dict:
        return slowdown_stats(self.records, self.layout, self.topology,
                              self.cut_through_ps, self.short_flow_bytes)

    def goodput(self) -> float:
        return goodput_fraction(self.records, self.topology, self.makespan_ps)

    def summary(self) -> dict:
        sched = self.latency.scheduled
        distinct = sorted(set(sched))
        return {
            "scheme": self.scheme,
            "config": self.config,
            "flows": {
                "total": len(self.records),
                "completed": self.flows_completed,
                "incomplete": len(self.records) - self.flows_completed,
            },
            "fct": self.slowdowns(),
            "goodput": {
                "fraction": self.goodput(),
                "offered_fraction": self.offered_load,
                "makespan_ps": self.makespan_ps,
            },
            "latency": {
                "scheduled_samples": len(sched),
                "scheduled_distinct_values": len(distinct),
                "scheduled_value_ps": distinct[0] if len(distinct) == 1 else None,
                "scheduled_min_ps": distinct[0] if distinct else None,
                "scheduled_max_ps": distinct[-1] if distinct else None,
                "unscheduled_samples": len(self.latency.unscheduled),
            },
            "audit": self.audit_report,
            "counters": self.counters,
            "switches": self.switch_summary,
            "suspects": self.suspects,
            "timing": self.plan_echo,
            "run": {
                "sim_end_ps": self.sim_end_ps,
                "capped": self.capped,
            },
        }


class PodSimulation:

    def __init__(self, config: RunConfig, flows=None, dist: SizeDistribution | None = None):
        config.validate()
        self.config = config
        scheme = config.scheme
        t = config.topology
        self.topo = build_pod(t.k, t.link_rate_bps, t.prop_delay_ps)
        lay = config.layout
        self.layout = make_layout(t.k, t.link_rate_bps, lay.data_cell_bytes,
                                  lay.ctrl_cell_bytes, lay.guard_slot_ps,
                                  lay.guard_ctrl_ps)
        process = config.arbiter.process_ps
        max_err = 0
        if config.clock.enabled:
            max_err = config.clock.max_offset_ps + int(
                config.clock.drift_ppm * self.layout.slot_ps * 4 / 1e6) + 1
        self.plan = compute_plan(self.layout, self.topo,
                                 config.switch.cut_through_ps, process,
                                 config.arbiter.extra_pipeline_slots, max_err,
                                 gap_filling=(scheme != "fastpass_mode"))
        self.sim = Simulator(trace=config.debug.trace_events)
        self.audit = CollisionAudit(self.topo.n_links, config.audit_mode)

        if scheme == "fastpass_mode":
            self.fabric = BufferedFabric(self.sim, self.topo, self.audit,
                                         config.switch.cut_through_ps,
                                         config.switch.buffer_bytes)
        else:
            self.fabric = ZeroBufferFabric(self.sim, self.topo, self.audit,
                                           config.switch.cut_through_ps,
                                           config.switch.strict)
        self.fabric.deliver_fn = self._deliver

        if dist is None:
            dist = SizeDistribution.from_csv(config.workload.cdf_file
                                             or default_cdf_path())
        self.dist = dist
        w = config.workload
        if flows is None:
            flows = generate(w.seed, w.load, w.n_flows, self.topo, dist)
        self.flows = flows

        total_bits = sum(f.size for f in flows) * 8
        span = max(1, flows[-1].arrival - flows[0].arrival)
        self.offered_load = (total_bits * 10**12
                             / (span * self.topo.n_hosts * t.link_rate_bps))
        drain = total_bits * 10**12 // (self.topo.n_hosts * t.link_rate_bps)
        cap = int(config.run_cap_multiplier
                  * (flows[-1].arrival + drain + 200 * self.layout.slot_ps))
        self.state = RunState(len(flows), cap)

        self.records = {
            f.flow_id: FlowRecord(f.flow_id, f.src, f.dst, f.size, f.arrival)
            for f in flows
        }
        self.latency = LatencyCollector()

        allocation_log = [] if config.debug.allocation_log else None
        arb_cls = FastpassArbiter if scheme == "fastpass_mode" else Arbiter
        self.arbiter = arb_cls(self.sim, self.topo, self.layout, self.fabric,
                               self.plan, record_schd_log=config.debug.schd_log,
                               allocation_log=allocation_log,
                               strict=config.switch.strict, state=self.state)
        self.arbiter.next_cell_id_fn = self.state.next_cell_id

        clock_rng = random.Random(w.seed * 7919 + 13)
        self.hosts = []
        for h in range(self.topo.n_hosts):
            if scheme == "fastpass_mode":
                host = FastpassHost(self.sim, self.topo, self.layout,
                                    self.fabric, self.plan, h, self.state,
                                    self.records, self.latency)
            else:
                clock = None
                if config.clock.enabled:
                    off = clock_rng.randint(-config.clock.max_offset_ps,
                                            config.clock.max_offset_ps)
                    drift = clock_rng.uniform(-config.clock.drift_ppm,
                                              config.clock.drift_ppm)
                    clock = HostClock(off, drift, config.clock.sync)
                host = Host(self.sim, self.topo, self.layout, self.fabric,
                            self.plan, h, self.state, self.records,
                            self.latency,
                            rng=random.Random(w.seed * 1_000_003 + h),
                            optimistic=(scheme == "fastpod"), clock=clock)
            self.hosts.append(host)

        for f in flows:
            self.sim.schedule(f.arrival, self.hosts[f.src].on_flow_arrival,
                              f.flow_id, f.dst, f.size)
        if scheme != "fastpass_mode":
            for host in self.hosts:
                host.start()
        self.arbiter.start()

        names = {name: node for node, name in enumerate(self.topo.node_names)}
        for fault in config.faults:
            link = self.topo.link_id(names[fault.src], names[fault.dst])
            self.fabric.kill_link(link, fault.at_ps)

    def _deliver(self, t: int, cell) -> None:
        if cell.dropped:
            return
        if cell.kind == RTS:
            self.arbiter.on_rts(t, cell)
        elif cell.kind == SCHD:
            self.hosts[cell.dst].on_schd(t, cell)
        else:
            self.hosts[cell.dst].on_data(t, cell)

    def run(self) -> RunResult:
        self.sim.run()
        return self._result()

    def _result(self) -> RunResult:
        records = [self.records[f.flow_id] for f in self.flows]
        completions = [r.completion for r in records if r.completed]
        makespan = 0
        if completions:
            makespan = max(completions) - self.flows[0].arrival
        totals = {
            "forwarded": self.fabric.total("forwarded"),
            "drop_contention": self.fabric.total("drop_contention"),
            "drop_preempted": self.fabric.total("drop_preempted"),
            "drop_link_down": self.fabric.total("drop_link_down"),
            "drop_buffer_full": self.fabric.total("drop_buffer_full"),
            "violations": self.fabric.total("violations"),
        }
        counters = {
            "rts_cells": sum(h.rts_sent for h in self.hosts),
            "schd_cells": self.arbiter.schd_sent,
            "control_bytes": (sum(h.rts_sent for h in self.hosts)
                              + self.arbiter.schd_sent) * self.layout.ctrl_cell_bytes,
            "late_grants": sum(h.late_grants for h in self.hosts),
            "optimistic_bytes_sent": sum(r.optimistic_bytes_sent for r in records),
            "redundant_bytes_received": sum(r.redundant_bytes_received for r in records),
            "granted_bytes": sum(self.arbiter.book.granted_bytes.values()),
            "arbiter_protocol_violations": self.arbiter.protocol_violations,
        }
        return RunResult(
            scheme=self.config.scheme,
            config=self.config.to_dict(),
            records=records,
            audit_report=audit_collision_free(self.audit),
            switch_summary=self.fabric.node_summary(),
            totals=totals,
            latency=self.latency,
            suspects=self.arbiter.suspect_summary(),
            plan_echo=self.plan.echo(),
            counters=counters,
            makespan_ps=makespan,
            offered_load=self.offered_load,
            sim_end_ps=self.sim.now,
            flows_completed=self.state.completed,
            capped=self.state.capped,
            layout=self.layout,
            topology=self.topo,
            cut_through_ps=self.config.switch.cut_through_ps,
            short_flow_bytes=self.config.short_flow_bytes,
            trace_lines=self.sim.trace_lines(),
            allocation_log=allocation_log_of(self.arbiter),
            schd_log=self.arbiter.schd_log,
            audit=self.audit,
        )


def allocation_log_of(arbiter) -> list | None:
    return arbiter.allocation_log


def run_simulation(config: RunConfig, flows=None, dist=None) -> RunResult:
    return PodSimulation(config, flows=flows, dist=dist).run()
