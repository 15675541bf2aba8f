import pytest

from fastpod.topology import build_pod
from fastpod.workload import (SizeDistribution, default_cdf_path, generate,
                              read_flows_csv, write_flows_csv)

RATE = 100_000_000_000


def topo():
    return build_pod(8, RATE, 1_000_000)


def test_bad_distributions_rejected():
    with pytest.raises(ValueError):
        SizeDistribution([])
    with pytest.raises(ValueError):
        SizeDistribution([(100, 0.5), (100, 1.0)])
    with pytest.raises(ValueError):
        SizeDistribution([(100, 0.5), (200, 0.4)])
    with pytest.raises(ValueError):
        SizeDistribution([(100, 0.5), (200, 0.9)])


def test_bundled_distribution_loads():
    dist = SizeDistribution.from_csv(default_cdf_path())
    assert dist.cdf[-1] == 1.0
    assert dist.mean_bytes() > 0


def test_same_seed_identical_flow_lists():
    dist = SizeDistribution.from_csv(default_cdf_path())
    a = generate(42, 0.5, 500, topo(), dist)
    b = generate(42, 0.5, 500, topo(), dist)
    assert a == b
    c = generate(43, 0.5, 500, topo(), dist)
    assert a != c


def test_endpoints_all_to_all_no_self():
    dist = SizeDistribution([(1000, 1.0)])
    flows = generate(7, 0.5, 2000, topo(), dist)
    assert all(f.src != f.dst for f in flows)
    assert {f.src for f in flows} == set(range(16))
    assert {f.dst for f in flows} == set(range(16))


def test_degenerate_distribution_interarrival_mean():
    # single size S at load L: mean inter-arrival must approach
    # S_bits / (L * n_hosts * rate), within 2% over 1e5 samples
    S = 15000
    L = 0.4
    t = topo()
    dist = SizeDistribution([(S, 1.0)])
    flows = generate(3, L, 100_000, t, dist)
    gaps = [b.arrival - a.arrival for a, b in zip(flows, flows[1:])]
    measured = sum(gaps) / len(gaps)
    expected = S * 8 * 10**12 / (L * t.n_hosts * RATE)
    assert abs(measured - expected) / expected < 0.02


def test_offered_load_converges_to_target():
    # total bytes / arrival span / aggregate capacity -> load, 3% at 1e5 flows
    t = topo()
    dist = SizeDistribution.from_csv(default_cdf_path())
    load = 0.6
    flows = generate(11, load, 100_000, t, dist)
    span = flows[-1].arrival - flows[0].arrival
    offered = sum(f.size for f in flows) * 8 * 10**12 / (span * t.n_hosts * RATE)
    assert abs(offered - load) / load < 0.03


def test_sampled_sizes_match_input_cdf():
    # empirical CDF within 2% of the source at each source point, 1e5 samples
    t = topo()
    dist = SizeDistribution.from_csv(default_cdf_path())
    flows = generate(5, 0.5, 100_000, t, dist)
    sizes = sorted(f.size for f in flows)
    n = len(sizes)
    import bisect
    for point, target in zip(dist.sizes, dist.cdf):
        frac = bisect.bisect_right(sizes, point) / n
        assert abs(frac - target) < 0.02, (point, frac, target)


def test_flow_csv_round_trip(tmp_path):
    t = topo()
    dist = SizeDistribution([(1000, 0.5), (5000, 1.0)])
    flows = generate(1, 0.5, 50, t, dist)
    path = tmp_path / "flows.csv"
    write_flows_csv(flows, path)
    assert read_flows_csv(path) == flows


def test_generation_parameter_validation():
    t = topo()
    dist = SizeDistribution([(1000, 1.0)])
    with pytest.raises(ValueError):
        generate(1, 0.0, 10, t, dist)
    with pytest.raises(ValueError):
        generate(1, 0.5, 0, t, dist)
