"""Pipeline and deadline derivation.

The arbiter computes one allocation per slot, far enough ahead of time that
its schedule cells can ride the reserved gaps of an earlier frame and still
arrive before the granted slot begins. All lags are derived from the layout
and link timing rather than assumed:

- a request sent in frame r has fully reached the arbiter by
  slot_start(r) + collect_lag;
- a schedule cell riding frame r's gaps has fully reached its host by
  slot_start(r) + worst-case delivery lag, so grants for slot a ride frame
  a - ride_lag;
- a receiver can first report on slot q's deliveries in its frame
  q + report_lag.

With the default parameters (1 us links, ~370 ns slots) propagation spans
multiple slots, so these lags are what make the pipeline physically sound.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(frozen=True)
class TimingPlan:
    slot_ps: int
    prop_ps: int
    cut_through_ps: int
    process_ps: int
    ride_lag: int             # grants for slot a ride the gaps of frame a - ride_lag
    alloc_start_slot: int
    report_lag: int           # frame r reports on deliveries of slot r - report_lag
    collect_lag_ps: int       # all of frame r's requests are in by slot_start(r) + this
    min_tx_off_ps: int        # earliest schedule-cell emission offset within a frame
    arbiter_rtt_ps: int       # analytic host<->arbiter round trip incl. processing
    retention_slots: int
    protocol_start_slot: int
    gap_filling: bool
    fastpass_lead_ps: int

    def slot_start(self, s: int) -> int:
        return s * self.slot_ps

    def alloc_time(self, a: int) -> int:
        if self.gap_filling:
            return (self.slot_start(a - self.ride_lag)
                    + self.min_tx_off_ps - self.process_ps)
        return self.slot_start(a) - self.fastpass_lead_ps

    def rts_deadline(self, r: int) -> int:
        return self.slot_start(r) + self.collect_lag_ps + 1

    def echo(self) -> dict:
        return asdict(self)


def compute_plan(layout, topo, cut_through_ps: int, process_ps: int | None = None,
                 extra_ride_slots: int = 0, max_clock_err_ps: int = 0,
                 gap_filling: bool = True) -> TimingPlan:
    slot = layout.slot_ps
    prop = topo.prop_delay_ps
    ct = cut_through_ps
    hop = prop + ct
    d = layout.data_cell_ps
    gw = layout.gap_width_ps
    g2 = layout.guard_ctrl_ps // 2
    ctrl = layout.ctrl_cell_ps
    n = layout.n_positions
    if process_ps is None:
        process_ps = slot

    worst_ctrl_off_end = (n - 1) * d + gw + g2 + ctrl
    collect_lag = worst_ctrl_off_end + 2 * prop + ct + max_clock_err_ps

    worst_schd_delivery = (n - 1) * d + gw + g2 + 3 * hop + prop + ctrl
    ride_lag = _ceil_div(worst_schd_delivery + max_clock_err_ps + 1, slot) + extra_ride_slots

    min_tx_off = g2 + 2 * hop
    alloc_start = max(ride_lag + 1,
                      ride_lag + _ceil_div(process_ps - min_tx_off, slot))

    data_delivery_lag = (n - 1) * d + 2 * gw + 4 * prop + 3 * ct + max_clock_err_ps
    report_lag = data_delivery_lag // slot + 1

    rtt = 2 * (2 * prop + 2 * ct + ctrl) + process_ps

    fastpass_lead = process_ps + 2 * prop + 2 * ct + ctrl + 2 * slot
    if not gap_filling:
        alloc_start = max(1, _ceil_div(fastpass_lead, slot))

    return TimingPlan(
        slot_ps=slot,
        prop_ps=prop,
        cut_through_ps=ct,
        process_ps=process_ps,
        ride_lag=ride_lag,
        alloc_start_slot=alloc_start,
        report_lag=report_lag,
        collect_lag_ps=collect_lag,
        min_tx_off_ps=min_tx_off,
        arbiter_rtt_ps=rtt,
        retention_slots=max(ride_lag, report_lag) + 8,
        protocol_start_slot=1,
        gap_filling=gap_filling,
        fastpass_lead_ps=fastpass_lead,
    )
