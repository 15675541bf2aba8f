import pytest

from fastpod.framing import DATA_SCHEDULED, SCHD, make_layout
from fastpod.metrics import (CollisionAudit, FlowRecord, audit_collision_free,
                             ideal_fct, latency_cdf, percentile_nearest_rank)
from fastpod.topology import build_pod

RATE = 100_000_000_000


def test_ideal_fct_single_cell():
    topo = build_pod(8, RATE, 1_000_000)
    lay = make_layout(8, RATE)
    assert ideal_fct(1500, lay, topo) == 120000 + 4 * 10**6 == 4_120_000


def test_ideal_fct_ten_cells():
    topo = build_pod(8, RATE, 1_000_000)
    lay = make_layout(8, RATE)
    assert ideal_fct(15000, lay, topo) == 1_200_000 + 4_000_000


def test_ideal_fct_partial_last_cell_and_cut_through():
    topo = build_pod(8, RATE, 1_000_000)
    lay = make_layout(8, RATE)
    assert ideal_fct(1501, lay, topo) == 2 * 120000 + 4 * 10**6
    assert ideal_fct(1500, lay, topo, cut_through_ps=10) == 4_120_030


def test_percentile_nearest_rank_definition():
    values = list(range(1, 101))
    assert percentile_nearest_rank(values, 99) == 99
    assert percentile_nearest_rank(values, 50) == 50
    assert percentile_nearest_rank(values, 100) == 100
    assert percentile_nearest_rank([7], 99) == 7
    with pytest.raises(ValueError):
        percentile_nearest_rank([], 50)


def test_audit_passes_on_disjoint_intervals():
    audit = CollisionAudit(2, "full")
    audit.record(0, 0, 100, 1, DATA_SCHEDULED)
    audit.record(0, 100, 200, 2, DATA_SCHEDULED)  # touching is fine
    audit.record(1, 50, 80, 3, SCHD)
    report = audit_collision_free(audit)
    assert report["verdict"] == "pass"
    assert report["first_overlap"] is None


def test_audit_detects_overlap_with_both_cell_ids():
    for mode in ("online", "full"):
        audit = CollisionAudit(1, mode)
        audit.record(0, 0, 100, 11, DATA_SCHEDULED)
        audit.record(0, 99, 150, 22, DATA_SCHEDULED)
        report = audit_collision_free(audit)
        assert report["verdict"] == "fail"
        ids = {report["first_overlap"]["first"]["cell_id"],
               report["first_overlap"]["second"]["cell_id"]}
        assert ids == {11, 22}


def test_audit_truncation_resolves_overlap():
    audit = CollisionAudit(1, "full")
    audit.record(0, 0, 100, 1, DATA_SCHEDULED)
    audit.truncate(0, 60)
    audit.record(0, 60, 160, 2, DATA_SCHEDULED)
    assert audit_collision_free(audit)["verdict"] == "pass"


def test_audit_exclude_dropped():
    audit = CollisionAudit(1, "full")
    audit.record(0, 0, 100, 1, DATA_SCHEDULED)
    audit.record(0, 50, 150, 2, DATA_SCHEDULED)
    audit.note_drop(2)
    assert audit_collision_free(audit)["verdict"] == "fail"
    assert audit_collision_free(audit, exclude_dropped=True)["verdict"] == "pass"


def test_latency_cdf_step_function():
    rows = latency_cdf([5, 5, 5, 5])
    assert rows == [(5, 4, 1.0)]
    rows = latency_cdf([1, 2, 2, 4])
    assert rows[-1][2] == 1.0
    assert [r[0] for r in rows] == [1, 2, 4]


def test_flow_record_slowdown_floor():
    r = FlowRecord(0, 0, 1, 1500, 1000)
    r.completion = 1000 + 4_120_000
    topo = build_pod(8, RATE, 1_000_000)
    lay = make_layout(8, RATE)
    assert r.fct / ideal_fct(r.size, lay, topo) == 1.0
