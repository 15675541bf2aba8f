import pytest

from fastpod.engine import SchedulingError, Simulator


def test_schedule_at_current_time_accepted():
    sim = Simulator()
    fired = []
    sim.schedule(0, lambda t: fired.append(t))
    sim.run()
    assert fired == [0]


def test_equal_times_dispatch_in_insertion_order():
    sim = Simulator()
    order = []
    sim.schedule(5120, lambda t: order.append("a"))
    sim.schedule(5120, lambda t: order.append("b"))
    sim.run()
    assert order == ["a", "b"]


def test_scheduling_in_the_past_is_fatal():
    sim = Simulator()
    sim.schedule(200, lambda t: None)
    sim.run()
    assert sim.now == 200
    with pytest.raises(SchedulingError):
        sim.schedule(100, lambda t: None)


def test_run_until_empty_queue_advances_clock():
    sim = Simulator()
    n = sim.run_until(10**9)
    assert n == 0
    assert sim.now == 10**9


def test_run_until_dispatches_only_due_events():
    sim = Simulator()
    fired = []
    for t in (1, 2, 3):
        sim.schedule(t, lambda t: fired.append(t))
    sim.run_until(2)
    assert fired == [1, 2]
    sim.run()
    assert fired == [1, 2, 3]


def test_clock_non_decreasing():
    sim = Simulator()
    seen = []

    def chain(t, depth):
        seen.append(t)
        if depth:
            sim.schedule(t + 7, chain, depth - 1)
            sim.schedule(t, chain, 0)

    sim.schedule(0, chain, 5)
    sim.run()
    assert seen == sorted(seen)


def test_identical_runs_produce_identical_traces():
    def build():
        sim = Simulator(trace=True)

        def tick(t, n):
            if n:
                sim.schedule(t + 3, tick, n - 1)
                sim.schedule(t + 3, tick, 0)

        sim.schedule(0, tick, 10)
        sim.run()
        return "\n".join(sim.trace_lines())

    assert build() == build()
