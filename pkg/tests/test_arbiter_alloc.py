"""Allocator and path-assignment properties, checked against brute force."""

import random

import pytest

from fastpod.arbiter import DemandBook, TimeslotAllocation, allocate_timeslot, assign_paths
from fastpod.topology import build_pod

RATE = 100_000_000_000
CELL = 1500
MAX_CELLS = 3


def topo8():
    return build_pod(8, RATE, 1_000_000)


def verify_matching(alloc):
    srcs = [g.src for g in alloc.grants]
    dsts = [g.dst for g in alloc.grants]
    assert len(set(srcs)) == len(srcs), "source matched twice"
    assert len(set(dsts)) == len(dsts), "destination matched twice"


def verify_maximal(alloc, book):
    used_src = {g.src for g in alloc.grants}
    used_dst = {g.dst for g in alloc.grants}
    for (s, d), q in book.pairs.items():
        if any(dem.pending > 0 for dem in q):
            assert s in used_src or d in used_dst, f"pair {(s, d)} starved"


def verify_links_disjoint(alloc, topo):
    used = {}
    for g in alloc.grants:
        assert 0 <= g.agg < topo.k // 2
        for link in topo.data_route(g.src, g.dst, g.agg):
            assert link not in used, "directed link double-booked"
            used[link] = g


def test_destination_constraint():
    book = DemandBook()
    book.add(0, 0, 5, 9000, 1)
    book.add(1, 1, 5, 9000, 1)
    alloc = allocate_timeslot(book, 10, 16, MAX_CELLS, CELL)
    assert len(alloc.grants) == 1
    verify_matching(alloc)
    verify_maximal(alloc, book)


def test_disjoint_pairs_both_granted():
    book = DemandBook()
    book.add(0, 0, 5, 9000, 1)
    book.add(1, 1, 6, 9000, 1)
    alloc = allocate_timeslot(book, 10, 16, MAX_CELLS, CELL)
    assert len(alloc.grants) == 2


def test_full_permutation_all_granted():
    book = DemandBook()
    for h in range(16):
        book.add(h, h, (h + 1) % 16, 4500, 1)
    alloc = allocate_timeslot(book, 5, 16, MAX_CELLS, CELL)
    assert len(alloc.grants) == 16
    verify_matching(alloc)
    t = topo8()
    assign_paths(alloc, 4, t.tor_index_of_host)
    verify_links_disjoint(alloc, t)


def test_grant_sizes_and_deduction():
    book = DemandBook()
    book.add(0, 0, 5, 9000, 1)
    alloc = allocate_timeslot(book, 10, 16, MAX_CELLS, CELL)
    g = alloc.grants[0]
    assert g.n_cells == 3 and g.bytes_granted == 4500
    assert book.pairs[(0, 5)][0].pending == 4500
    # second RTS for the same pair accumulates behind the first
    book.add(1, 0, 5, 3000, 2)
    alloc = allocate_timeslot(book, 11, 16, MAX_CELLS, CELL)
    assert alloc.grants[0].bytes_granted == 4500
    alloc = allocate_timeslot(book, 12, 16, MAX_CELLS, CELL)
    g = alloc.grants[0]
    # 0 bytes of flow 0 remain, 3000 of flow 1: 2 cells
    assert g.n_cells == 2 and g.bytes_granted == 3000
    assert not book.pairs[(0, 5)]


def test_partial_cell_grants():
    book = DemandBook()
    book.add(0, 0, 5, 800, 1)    # less than one cell
    book.add(1, 0, 5, 1700, 1)   # one full + one partial
    alloc = allocate_timeslot(book, 10, 16, MAX_CELLS, CELL)
    g = alloc.grants[0]
    assert g.n_cells == 3
    assert g.bytes_granted == 800 + 1700


def test_single_grant_first_fit_agg0():
    book = DemandBook()
    book.add(0, 0, 5, 1500, 1)
    alloc = allocate_timeslot(book, 10, 16, MAX_CELLS, CELL)
    t = topo8()
    assign_paths(alloc, 4, t.tor_index_of_host)
    assert alloc.grants[0].agg == 0


def test_parallel_tor_pairs_use_all_aggs():
    # 4 grants all ToR0 -> ToR1: degree equals color count
    grants_src = [0, 1, 2, 3]
    grants_dst = [4, 5, 6, 7]
    book = DemandBook()
    for f, (s, d) in enumerate(zip(grants_src, grants_dst)):
        book.add(f, s, d, 1500, 1)
    alloc = allocate_timeslot(book, 10, 16, MAX_CELLS, CELL)
    assert len(alloc.grants) == 4
    t = topo8()
    assign_paths(alloc, 4, t.tor_index_of_host)
    assert sorted(g.agg for g in alloc.grants) == [0, 1, 2, 3]
    verify_links_disjoint(alloc, t)


def test_round_robin_among_pairs_sharing_a_source():
    # two demands from host 0: service alternates once both are known
    book = DemandBook()
    book.add(0, 0, 5, 45000, 1)
    book.add(1, 0, 6, 45000, 1)
    served = []
    for slot in range(10, 20):
        alloc = allocate_timeslot(book, slot, 16, MAX_CELLS, CELL)
        assert len(alloc.grants) == 1
        served.append(alloc.grants[0].dst)
    assert served.count(5) == 5 and served.count(6) == 5


def test_random_books_matching_and_coloring():
    # 1000 random demand books: matching is valid and maximal, and after path
    # assignment no directed link is used twice (counted over expanded routes)
    t = topo8()
    rng = random.Random(1234)
    for trial in range(1000):
        book = DemandBook()
        fid = 0
        for _ in range(rng.randrange(1, 40)):
            s = rng.randrange(16)
            d = rng.randrange(15)
            if d >= s:
                d += 1
            book.add(fid, s, d, rng.randrange(1, 30000), rng.randrange(1, 5))
            fid += 1
        alloc = allocate_timeslot(book, rng.randrange(1000), 16, MAX_CELLS, CELL)
        verify_matching(alloc)
        verify_maximal(alloc, book)
        assign_paths(alloc, 4, t.tor_index_of_host)
        verify_links_disjoint(alloc, t)


def test_byte_conservation_to_exhaustion():
    # every completed demand is granted exactly its requested bytes
    rng = random.Random(99)
    book = DemandBook()
    sizes = {}
    for fid in range(60):
        s = rng.randrange(16)
        d = rng.randrange(15)
        if d >= s:
            d += 1
        size = rng.randrange(1, 20000)
        sizes[fid] = size
        book.add(fid, s, d, size, 1)
    slot = 10
    while book.total_pending() > 0:
        allocate_timeslot(book, slot, 16, MAX_CELLS, CELL)
        slot += 1
        assert slot < 10000
    assert book.granted_bytes == sizes


def test_recoloring_repair_path():
    # force the recolor: craft grants so first-fit leaves no common free color
    t = topo8()
    book = DemandBook()
    # ToR0->ToR1 twice, ToR1->ToR1, then ToR0->ToR1 again in a fresh slot order
    demands = [(0, 4), (1, 5), (4, 6), (2, 7)]
    for f, (s, d) in enumerate(demands):
        book.add(f, s, d, 1500, f)  # stamps force this processing order
    alloc = allocate_timeslot(book, 0, 16, MAX_CELLS, CELL)
    assert len(alloc.grants) == 4
    assign_paths(alloc, 4, t.tor_index_of_host)
    verify_links_disjoint(alloc, t)


def test_stress_coloring_with_two_colors():
    # k=4 pod: 2 colors, heavy parallel demand between two ToRs
    t = build_pod(4, RATE, 1_000_000)
    book = DemandBook()
    book.add(0, 0, 2, 1500, 1)
    book.add(1, 1, 3, 1500, 1)
    alloc = allocate_timeslot(book, 0, 4, 1, CELL)
    assert len(alloc.grants) == 2
    assign_paths(alloc, 2, t.tor_index_of_host)
    verify_links_disjoint(alloc, t)
    assert sorted(g.agg for g in alloc.grants) == [0, 1]
