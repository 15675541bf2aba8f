"""Two-tier pod topology: hosts, ToR and Agg switches, and an attached arbiter.

Node and link identifiers are small consecutive integers so the hot paths can
index flat arrays. Hosts are numbered consecutively per ToR (ToR t owns hosts
t*(k/2) .. t*(k/2)+k/2-1), which makes a host's relative index under its ToR
simply ``host % (k/2)``.

A source route is a tuple of directed-link ids, one per hop, consumed one per
switch. Host-to-host routes always have exactly 4 hops (host, ToR, Agg, ToR,
host) -- intra-ToR pairs are not reflected at the ToR, they detour through an
Agg like everyone else so slot alignment stays uniform. Control routes
(host<->arbiter) have exactly 2 hops.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field


PS_PER_SECOND = 10**12


def serialization_ps(size_bytes: int, rate_bps: int) -> int:
    """Exact wire time of `size_bytes` at `rate_bps`; rejects inexact results."""
    num = size_bytes * 8 * PS_PER_SECOND
    if num % rate_bps:
        raise ValueError(
            f"{size_bytes} B at {rate_bps} bps is not an integer number of picoseconds"
        )
    return num // rate_bps


@dataclass
class PodTopology:
    k: int
    link_rate_bps: int
    prop_delay_ps: int
    n_hosts: int = 0
    n_tors: int = 0
    n_aggs: int = 0
    arbiter: int = 0
    n_nodes: int = 0
    node_names: list = field(default_factory=list)
    # directed links: parallel arrays indexed by link id
    link_src: list = field(default_factory=list)
    link_dst: list = field(default_factory=list)
    _link_ids: dict = field(default_factory=dict)

    # -- node helpers ------------------------------------------------------

    def is_host(self, node: int) -> bool:
        return node < self.n_hosts

    def tor_of(self, host: int) -> int:
        return self.n_hosts + host // (self.k // 2)

    def tor_node(self, tor_index: int) -> int:
        return self.n_hosts + tor_index

    def agg_node(self, agg_index: int) -> int:
        return self.n_hosts + self.n_tors + agg_index

    def tor_index_of_host(self, host: int) -> int:
        return host // (self.k // 2)

    def relative_index(self, host: int) -> int:
        """Position of `host` among the k/2 hosts of its ToR."""
        return host % (self.k // 2)

    def hosts_of_tor(self, tor_index: int) -> range:
        half = self.k // 2
        return range(tor_index * half, (tor_index + 1) * half)

    # -- links -------------------------------------------------------------

    def _add_link(self, u: int, v: int) -> int:
        lid = len(self.link_src)
        self.link_src.append(u)
        self.link_dst.append(v)
        self._link_ids[(u, v)] = lid
        return lid

    def link_id(self, u: int, v: int) -> int:
        return self._link_ids[(u, v)]

    @property
    def n_links(self) -> int:
        return len(self.link_src)

    def link_name(self, lid: int) -> str:
        return f"{self.node_names[self.link_src[lid]]}->{self.node_names[self.link_dst[lid]]}"

    # -- routes ------------------------------------------------------------

    def data_route(self, src: int, dst: int, agg_index: int) -> tuple:
        """4-hop source route src -> ToR -> Agg -> ToR -> dst through the chosen Agg."""
        if src == dst:
            raise ValueError("source and destination host must differ")
        if not 0 <= agg_index < self.k // 2:
            raise ValueError(f"agg_index {agg_index} out of range")
        tor_s = self.tor_of(src)
        tor_d = self.tor_of(dst)
        agg = self.agg_node(agg_index)
        return (
            self.link_id(src, tor_s),
            self.link_id(tor_s, agg),
            self.link_id(agg, tor_d),
            self.link_id(tor_d, dst),
        )

    def rts_route(self, host: int) -> tuple:
        tor = self.tor_of(host)
        return (self.link_id(host, tor), self.link_id(tor, self.arbiter))

    def schd_route(self, host: int) -> tuple:
        tor = self.tor_of(host)
        return (self.link_id(self.arbiter, tor), self.link_id(tor, host))

    def to_json(self) -> str:
        links = [
            {
                "id": lid,
                "src": self.node_names[self.link_src[lid]],
                "dst": self.node_names[self.link_dst[lid]],
                "rate_bps": self.link_rate_bps,
                "prop_delay_ps": self.prop_delay_ps,
            }
            for lid in range(self.n_links)
        ]
        doc = {
            "k": self.k,
            "hosts": self.node_names[: self.n_hosts],
            "tors": self.node_names[self.n_hosts : self.n_hosts + self.n_tors],
            "aggs": self.node_names[
                self.n_hosts + self.n_tors : self.n_hosts + self.n_tors + self.n_aggs
            ],
            "arbiter": self.node_names[self.arbiter],
            "links": links,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def build_pod(k: int, link_rate_bps: int, prop_delay_ps: int) -> PodTopology:
    """Build a k-port Fattree pod: (k/2)^2 hosts, k/2 ToRs, k/2 Aggs, one arbiter.

    The arbiter attaches with one dedicated port per ToR. Every link is
    full-duplex and modeled as two independent directed links, all at the same
    rate (control links run at the data rate).
    """
    if k < 4 or k % 2:
        raise ValueError(f"k must be an even integer >= 4, got {k}")
    if prop_delay_ps < 0 or link_rate_bps <= 0:
        raise ValueError("link rate must be positive and propagation non-negative")

    half = k // 2
    topo = PodTopology(k=k, link_rate_bps=link_rate_bps, prop_delay_ps=prop_delay_ps)
    topo.n_hosts = half * half
    topo.n_tors = half
    topo.n_aggs = half
    topo.arbiter = topo.n_hosts + topo.n_tors + topo.n_aggs
    topo.n_nodes = topo.arbiter + 1

    names = [f"host{h}" for h in range(topo.n_hosts)]
    names += [f"tor{t}" for t in range(half)]
    names += [f"agg{a}" for a in range(half)]
    names.append("arbiter")
    topo.node_names = names

    for t in range(half):
        tor = topo.tor_node(t)
        for h in topo.hosts_of_tor(t):
            topo._add_link(h, tor)
            topo._add_link(tor, h)
        for a in range(half):
            agg = topo.agg_node(a)
            topo._add_link(tor, agg)
            topo._add_link(agg, tor)
        topo._add_link(tor, topo.arbiter)
        topo._add_link(topo.arbiter, tor)

    return topo
