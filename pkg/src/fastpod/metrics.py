"""Collision audit, flow-completion accounting, and run summarization.

The audit is purely observational: entities report every actual transmission
interval on every directed link, and the audit proves (or refutes) pairwise
disjointness. In `online` mode it checks intervals as they stream in (records
arrive in non-decreasing start order because transmissions are dispatched in
time order) and keeps O(1) state per link; in `full` mode it additionally
keeps every interval so a complete post-run replay is possible.

Latency is measured per cell from first bit out at the sender host to last bit
in at the receiver.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass


class CollisionAudit:

    def __init__(self, n_links: int, mode: str = "online"):
        if mode not in ("online", "full"):
            raise ValueError(f"unknown audit mode {mode!r}")
        self.mode = mode
        self.n_links = n_links
        self.last_end = [0] * n_links
        self.last_meta: list = [None] * n_links
        self.overlaps: list = []           # (link, prev meta, new meta)
        self.dropped_cells: set = set()
        self.intervals_recorded = 0
        if mode == "full":
            self.starts = [array("q") for _ in range(n_links)]
            self.ends = [array("q") for _ in range(n_links)]
            self.cell_ids = [array("q") for _ in range(n_links)]
            self.kinds = [array("b") for _ in range(n_links)]

    def record(self, link: int, start: int, end: int, cell_id: int, kind: int) -> None:
        self.intervals_recorded += 1
        if start < self.last_end[link] and len(self.overlaps) < 100:
            self.overlaps.append((link, self.last_meta[link], (start, end, cell_id, kind)))
        self.last_end[link] = end
        self.last_meta[link] = (start, end, cell_id, kind)
        if self.mode == "full":
            self.starts[link].append(start)
            self.ends[link].append(end)
            self.cell_ids[link].append(cell_id)
            self.kinds[link].append(kind)

    def truncate(self, link: int, new_end: int) -> None:
        """A preemption cut short the interval most recently recorded on `link`."""
        if self.last_end[link] > new_end:
            self.last_end[link] = new_end
        if self.mode == "full" and self.ends[link] and self.ends[link][-1] > new_end:
            self.ends[link][-1] = new_end

    def note_drop(self, cell_id: int) -> None:
        self.dropped_cells.add(cell_id)

    def occupancy(self, link: int) -> list:
        if self.mode != "full":
            raise ValueError("per-interval occupancy requires mode='full'")
        return list(zip(self.starts[link], self.ends[link],
                        self.cell_ids[link], self.kinds[link]))


def audit_collision_free(audit: CollisionAudit, exclude_dropped: bool = False) -> dict:
    """Check pairwise disjointness of occupancy intervals on every link.

    With a `full` audit this sorts and re-checks every interval from scratch;
    with an `online` audit it reports the verdict accumulated during the run.
    Returns a report dict with a pass/fail verdict and the first overlap found.
    """
    if audit.mode == "online":
        overlaps = audit.overlaps
        return {
            "verdict": "pass" if not overlaps else "fail",
            "mode": "online",
            "links_checked": audit.n_links,
            "intervals": audit.intervals_recorded,
            "first_overlap": _overlap_doc(overlaps[0]) if overlaps else None,
        }
    first = None
    checked = 0
    for link in range(audit.n_links):
        rows = sorted(zip(audit.starts[link], audit.ends[link],
                          audit.cell_ids[link], audit.kinds[link]))
        prev = None
        for row in rows:
            if exclude_dropped and row[2] in audit.dropped_cells:
                continue
            checked += 1
            if prev is not None and row[0] < prev[1]:
                if first is None:
                    first = (link, prev, row)
            prev = row
    return {
        "verdict": "pass" if first is None else "fail",
        "mode": "full",
        "links_checked": audit.n_links,
        "intervals": checked,
        "first_overlap": _overlap_doc(first) if first else None,
    }


def _overlap_doc(item) -> dict:
    link, a, b = item
    return {
        "link": link,
        "first": {"start": a[0], "end": a[1], "cell_id": a[2], "kind": a[3]},
        "second": {"start": b[0], "end": b[1], "cell_id": b[2], "kind": b[3]},
    }


# -- flow records and metrics -------------------------------------------------

@dataclass
class FlowRecord:
    flow_id: int
    src: int
    dst: int
    size: int
    arrival: int
    completion: int = -1
    optimistic_bytes_sent: int = 0
    redundant_bytes_received: int = 0

    @property
    def completed(self) -> bool:
        return self.completion >= 0

    @property
    def fct(self) -> int:
        return self.completion - self.arrival


def ideal_fct(size_bytes: int, layout, topology, cut_through_ps: int = 0) -> int:
    """Completion time of the flow alone on an idle fabric, ignoring slot
    quantization and control overhead: back-to-back cells plus the 4-hop pipe."""
    n_cells = -(-size_bytes // layout.data_cell_bytes)
    return (n_cells * layout.data_cell_ps
            + 4 * topology.prop_delay_ps
            + 3 * cut_through_ps)


def percentile_nearest_rank(sorted_values, pct: float):
    """Nearest-rank percentile over an ascending sequence."""
    n = len(sorted_values)
    if n == 0:
        raise ValueError("empty sample")
    rank = -(-pct * n // 100)  # ceil(pct/100 * n)
    rank = max(1, min(n, int(rank)))
    return sorted_values[rank - 1]


class LatencyCollector:
    """Per-cell in-network latency samples, split scheduled vs unscheduled."""

    def __init__(self):
        self.scheduled = array("q")
        self.unscheduled = array("q")

    def add(self, kind_is_scheduled: bool, sample_ps: int) -> None:
        (self.scheduled if kind_is_scheduled else self.unscheduled).append(sample_ps)

    def all_samples(self):
        return list(self.scheduled) + list(self.unscheduled)


def slowdown_stats(records, layout, topology, cut_through_ps, short_flow_bytes):
    """Per-size-class slowdown statistics over completed flows."""
    classes = {"all": [], "short": [], "large": []}
    fcts = {"all": [], "short": [], "large": []}
    for r in records:
        if not r.completed:
            continue
        s = r.fct / ideal_fct(r.size, layout, topology, cut_through_ps)
        cls = "short" if r.size < short_flow_bytes else "large"
        classes["all"].append(s)
        classes[cls].append(s)
        fcts["all"].append(r.fct)
        fcts[cls].append(r.fct)
    out = {}
    for cls, vals in classes.items():
        if not vals:
            out[cls] = None
            continue
        vals.sort()
        f = sorted(fcts[cls])
        out[cls] = {
            "n": len(vals),
            "mean_slowdown": sum(vals) / len(vals),
            "p50_slowdown": percentile_nearest_rank(vals, 50),
            "p99_slowdown": percentile_nearest_rank(vals, 99),
            "max_slowdown": vals[-1],
            "mean_fct_ps": sum(f) / len(f),
            "p99_fct_ps": percentile_nearest_rank(f, 99),
        }
    return out


def goodput_fraction(records, topology, makespan_ps: int) -> float:
    """Unique delivered bytes over makespan, as a fraction of aggregate host capacity."""
    if makespan_ps <= 0:
        return 0.0
    delivered_bits = sum(r.size for r in records if r.completed) * 8
    capacity_bits = topology.n_hosts * topology.link_rate_bps * makespan_ps / 10**12
    return delivered_bits / capacity_bits


def latency_cdf(samples) -> list:
    """Binned CDF as (latency_ps, count, cum_fraction) rows."""
    if not samples:
        return []
    counts: dict = {}
    for s in samples:
        counts[s] = counts.get(s, 0) + 1
    total = len(samples)
    rows = []
    cum = 0
    for value in sorted(counts):
        cum += counts[value]
        rows.append((value, counts[value], cum / total))
    return rows
