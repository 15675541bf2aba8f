"""Flow generation: Poisson arrivals at a target load over an empirical size
distribution, all-to-all endpoints.

The size distribution is an empirical CDF loaded from a CSV with header
``size_bytes,cdf``. Sampling inverts the CDF with linear interpolation between
points; the first point acts as a point mass (u <= cdf[0] maps to the smallest
size). Load is defined against aggregate host egress capacity, so the arrival
rate is ``load * n_hosts * link_rate / mean_flow_size_bits``.
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass
from pathlib import Path

from .topology import PodTopology


@dataclass(frozen=True)
class FlowSpec:
    flow_id: int
    src: int
    dst: int
    size: int       # bytes
    arrival: int    # ps


class SizeDistribution:

    def __init__(self, points):
        if not points:
            raise ValueError("empty size distribution")
        sizes = [p[0] for p in points]
        cdf = [p[1] for p in points]
        if sorted(set(sizes)) != sizes:
            raise ValueError("sizes must be strictly increasing")
        if any(b < a for a, b in zip(cdf, cdf[1:])) or any(not 0 <= c <= 1 for c in cdf):
            raise ValueError("cdf must be non-decreasing within [0, 1]")
        if abs(cdf[-1] - 1.0) > 1e-9:
            raise ValueError("cdf must end at 1.0")
        self.sizes = sizes
        self.cdf = cdf

    @classmethod
    def from_csv(cls, path) -> "SizeDistribution":
        points = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["size_bytes", "cdf"]:
                raise ValueError(
                    f"{path}: expected header 'size_bytes,cdf', got {reader.fieldnames}"
                )
            for row in reader:
                points.append((int(row["size_bytes"]), float(row["cdf"])))
        return cls(points)

    def sample(self, u: float) -> int:
        """Inverse-CDF lookup with linear interpolation between points."""
        sizes, cdf = self.sizes, self.cdf
        if u <= cdf[0]:
            return sizes[0]
        for k in range(1, len(sizes)):
            if u <= cdf[k]:
                span = cdf[k] - cdf[k - 1]
                if span <= 0:
                    return sizes[k]
                frac = (u - cdf[k - 1]) / span
                return max(1, round(sizes[k - 1] + frac * (sizes[k] - sizes[k - 1])))
        return sizes[-1]

    def mean_bytes(self) -> float:
        """Exact mean of the interpolated distribution (point mass at the first
        size, uniform within each segment)."""
        sizes, cdf = self.sizes, self.cdf
        mean = sizes[0] * cdf[0]
        for k in range(1, len(sizes)):
            mean += (cdf[k] - cdf[k - 1]) * (sizes[k - 1] + sizes[k]) / 2
        return mean


def generate(seed: int, load: float, n_flows: int, topology: PodTopology,
             dist: SizeDistribution) -> list:
    """Deterministic flow list: Poisson arrivals, uniform all-to-all endpoints,
    i.i.d. sizes from the empirical distribution."""
    if not 0 < load:
        raise ValueError("load must be positive")
    if n_flows < 1:
        raise ValueError("need at least one flow")
    rng = random.Random(seed)
    mean_bits = dist.mean_bytes() * 8
    rate_flows_per_ps = load * topology.n_hosts * topology.link_rate_bps / mean_bits / 10**12
    hosts = topology.n_hosts
    flows = []
    t = 0.0
    for fid in range(n_flows):
        t += rng.expovariate(rate_flows_per_ps)
        src = rng.randrange(hosts)
        dst = rng.randrange(hosts - 1)
        if dst >= src:
            dst += 1
        size = dist.sample(rng.random())
        flows.append(FlowSpec(fid, src, dst, size, int(t)))
    return flows


def write_flows_csv(flows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["flow_id", "src", "dst", "size_bytes", "arrival_ps"])
        for f in flows:
            w.writerow([f.flow_id, f.src, f.dst, f.size, f.arrival])


def read_flows_csv(path) -> list:
    flows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            flows.append(FlowSpec(int(row["flow_id"]), int(row["src"]),
                                  int(row["dst"]), int(row["size_bytes"]),
                                  int(row["arrival_ps"])))
    return flows


def default_cdf_path() -> Path:
    return Path(__file__).parent / "data" / "msft_like_cdf.csv"
