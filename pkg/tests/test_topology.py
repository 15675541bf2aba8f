import json

import pytest

from fastpod.topology import build_pod, serialization_ps


def test_paper_scale_pod_counts():
    topo = build_pod(8, 100_000_000_000, 1_000_000)
    assert topo.n_hosts == 16
    assert topo.n_tors == 4
    assert topo.n_aggs == 4
    # per ToR: k/2 host links + k/2 agg links + arbiter link, both directions
    assert topo.n_links == 2 * (16 + 16 + 4)


def test_small_pod_counts():
    topo = build_pod(4, 100_000_000_000, 1_000_000)
    assert topo.n_hosts == 4
    assert topo.n_tors == 2
    assert topo.n_aggs == 2


@pytest.mark.parametrize("k", [7, 3, 2, 0])
def test_bad_k_rejected(k):
    with pytest.raises(ValueError):
        build_pod(k, 100_000_000_000, 1_000_000)


def test_serialization_exact():
    assert serialization_ps(64, 100_000_000_000) == 5120
    assert serialization_ps(1500, 100_000_000_000) == 120000
    with pytest.raises(ValueError):
        serialization_ps(1, 3 * 10**11)  # 8/3 ps is not an integer


def test_relative_index_bijection_per_tor():
    topo = build_pod(8, 100_000_000_000, 1_000_000)
    assert topo.relative_index(0) == 0
    assert topo.relative_index(5) == 1
    for t in range(topo.n_tors):
        rels = [topo.relative_index(h) for h in topo.hosts_of_tor(t)]
        assert sorted(rels) == list(range(4))


def test_all_routes_valid_and_loop_free_k4():
    # exhaustive enumeration: every (src, dst, agg) triple chains correctly,
    # has exactly 4 hops, and repeats no directed link
    topo = build_pod(4, 100_000_000_000, 1_000_000)
    for src in range(topo.n_hosts):
        for dst in range(topo.n_hosts):
            if src == dst:
                continue
            for agg in range(topo.k // 2):
                route = topo.data_route(src, dst, agg)
                assert len(route) == 4
                assert len(set(route)) == 4
                assert topo.link_src[route[0]] == src
                assert topo.link_dst[route[-1]] == dst
                for a, b in zip(route, route[1:]):
                    assert topo.link_dst[a] == topo.link_src[b]
                assert topo.link_src[route[2]] == topo.agg_node(agg)


def test_same_tor_pairs_still_detour_through_agg():
    topo = build_pod(8, 100_000_000_000, 1_000_000)
    route = topo.data_route(0, 1, 0)
    assert len(route) == 4
    assert topo.link_dst[route[1]] == topo.agg_node(0)


def test_control_routes_have_two_hops():
    topo = build_pod(8, 100_000_000_000, 1_000_000)
    for h in range(topo.n_hosts):
        up = topo.rts_route(h)
        down = topo.schd_route(h)
        assert len(up) == 2 and len(down) == 2
        assert topo.link_src[up[0]] == h
        assert topo.link_dst[up[1]] == topo.arbiter
        assert topo.link_src[down[0]] == topo.arbiter
        assert topo.link_dst[down[1]] == h


def test_src_equals_dst_rejected():
    topo = build_pod(4, 100_000_000_000, 1_000_000)
    with pytest.raises(ValueError):
        topo.data_route(2, 2, 0)


def test_topology_json_export():
    topo = build_pod(4, 100_000_000_000, 1_000_000)
    doc = json.loads(topo.to_json())
    assert doc["k"] == 4
    assert len(doc["hosts"]) == 4
    assert len(doc["links"]) == topo.n_links
