import pytest
from hypothesis import given, settings, strategies as st

from dsmsim.core import Direction, TimeGrid, kw_to_mw
from dsmsim.devices import (
    Deferrable,
    DeviceValidationError,
    EvCharger,
    SchedulingContext,
    ThermostaticHeater,
    baseline_schedule,
    respond,
    thermostat_trace,
    temperature_trace_of,
    validate_device,
    validate_thermostat_adequacy,
)

GRID = TimeGrid(15, 96)


def ctx_with(tariff=30, residual=0, outdoor=5.0, now=0, grid=GRID):
    h = grid.horizon_slots
    t = tuple([tariff] * h) if isinstance(tariff, int) else tuple(tariff)
    r = tuple([residual] * h) if isinstance(residual, int) else tuple(residual)
    o = tuple([outdoor] * h) if isinstance(outdoor, (int, float)) else tuple(outdoor)
    return SchedulingContext(grid=grid, tariff_ct_per_kwh=t, residual_mw=r, outdoor_c=o, now_slot=now)


WASHER = Deferrable("washer", kw_to_mw(2.0), 2, 36, 48)


# ---- validation -----------------------------------------------------------


def test_deferrable_infeasible_window_rejected():
    bad = Deferrable("w", kw_to_mw(2.0), 2, 41, 42)
    with pytest.raises(DeviceValidationError) as e:
        validate_device(bad, GRID)
    assert "deadline" in str(e.value)


def test_ev_unreachable_energy_rejected():
    bad = EvCharger("ev", 12 * 60_000_000, 0, 4, kw_to_mw(11.0))
    with pytest.raises(DeviceValidationError):
        validate_device(bad, GRID)


def test_ev_valid():
    ev = EvCharger("ev", 8 * 60_000_000, 0, 60, kw_to_mw(11.0))
    validate_device(ev, GRID)


def test_thermostat_adequacy():
    # gain = beta * kW * 0.25h; with beta=8 and 1kW -> 2.0 C per slot
    dev = ThermostaticHeater("h", kw_to_mw(1.0), 19.0, 22.0, 21.0, 0.1, 8.0)
    validate_device(dev, GRID)
    validate_thermostat_adequacy(dev, GRID, [5.0] * 96)
    weak = ThermostaticHeater("h", kw_to_mw(1.0), 19.0, 22.0, 21.0, 0.1, 4.0)
    with pytest.raises(DeviceValidationError):
        # gain 1.0 < alpha*(19-5)=1.4: cannot hold the band bottom
        validate_thermostat_adequacy(weak, GRID, [5.0] * 96)


# ---- deferrable baseline --------------------------------------------------


def test_washer_flat_tariff_starts_earliest():
    sched, occ = baseline_schedule(WASHER, ctx_with())
    assert occ == (36, 37)
    assert sched[36] == sched[37] == kw_to_mw(2.0)


def brute_force_best_start(dev, tariff):
    # independent oracle: try every feasible start, sum tariff over occupied slots
    best, best_cost = None, None
    for s in range(dev.earliest_start, dev.deadline - dev.duration_slots + 1):
        cost = sum(tariff[t] for t in range(s, s + dev.duration_slots))
        if best_cost is None or cost < best_cost:
            best, best_cost = s, cost
    return best


def test_washer_per_slot_tariff_picks_cheapest_start():
    tariff = [30] * 96
    tariff[42] = 10
    tariff[43] = 10
    _, occ = baseline_schedule(WASHER, ctx_with(tariff=tariff))
    assert occ[0] == brute_force_best_start(WASHER, tariff) == 42


@given(st.lists(st.integers(min_value=1, max_value=50), min_size=96, max_size=96))
@settings(max_examples=50)
def test_washer_baseline_matches_enumeration(tariff):
    _, occ = baseline_schedule(WASHER, ctx_with(tariff=tariff))
    assert occ[0] == brute_force_best_start(WASHER, tariff)


# ---- EV baseline ----------------------------------------------------------


def test_ev_fills_cheapest_slots_and_conserves_energy():
    ev = EvCharger("ev", 8 * 60_000_000, 0, 8, kw_to_mw(11.0))
    tariff = [30] * 96
    tariff[2] = 5
    tariff[3] = 5
    sched, _ = baseline_schedule(ev, ctx_with(tariff=tariff))
    assert sum(sched) * 15 == 8 * 60_000_000
    # 8 kWh at 11 kW needs ~2.9 slots; the two cheap slots fill first
    assert sched[2] == sched[3] == kw_to_mw(11.0)
    assert all(p <= kw_to_mw(11.0) for p in sched)


def test_ev_prefers_pv_surplus():
    ev = EvCharger("ev", 2 * 60_000_000, 0, 8, kw_to_mw(8.0))
    residual = [0] * 96
    residual[5] = -kw_to_mw(8.0)  # spare PV at slot 5
    sched, _ = baseline_schedule(ev, ctx_with(residual=residual))
    assert sched[5] == kw_to_mw(8.0)


# ---- thermostat -----------------------------------------------------------

HEATER = ThermostaticHeater("h", kw_to_mw(1.0), 19.0, 22.0, 21.0, 0.1, 8.0)


def oracle_thermostat(dev, grid, outdoor, horizon):
    """Step the recurrence T(t+1) = T + alpha*(T_out - T) + gain*on with
    hysteresis control, independently of the implementation."""
    g = dev.beta_c_per_kwh * (dev.rated_power_mw / 1e6) * grid.slot_hours
    temps = [dev.t0_c]
    on_slots = []
    heating = False
    T = dev.t0_c
    for t in range(horizon):
        proj = T + dev.alpha_per_slot * (outdoor[t] - T)
        if heating:
            heating = proj + g <= dev.t_max_c + 1e-9
        else:
            heating = proj < dev.t_min_c - 1e-9
        T = proj + (g if heating else 0)
        temps.append(T)
        on_slots.append(heating)
    return temps, on_slots


def test_thermostat_recurrence_drift():
    # from 21.0 in a 5.0 outdoor slot the projection drops by 0.1*(5-21)=-1.6
    sched, temps, ok = thermostat_trace(HEATER, GRID, [5.0] * 96)
    assert temps[1] == pytest.approx(21.0 + 0.1 * (5.0 - 21.0))
    assert sched[0] == 0  # projection 19.4 >= 19: stays off
    assert ok


def test_thermostat_heats_when_projection_below_min():
    sched, temps, ok = thermostat_trace(HEATER, GRID, [5.0] * 96)
    # slot 1 projection: 19.4 + 0.1*(5-19.4) = 17.96 < 19 -> heats
    assert sched[1] == kw_to_mw(1.0)
    assert temps[2] == pytest.approx(17.96 + 2.0)
    assert ok


def test_thermostat_matches_oracle():
    sched, temps, ok = thermostat_trace(HEATER, GRID, [5.0] * 96)
    o_temps, o_on = oracle_thermostat(HEATER, GRID, [5.0] * 96, 96)
    assert temps == pytest.approx(o_temps)
    assert [bool(p) for p in sched] == o_on
    assert ok
    assert all(19.0 - 1e-9 <= T <= 22.0 + 1e-9 for T in temps)


@given(
    st.floats(min_value=-10.0, max_value=15.0),
    st.floats(min_value=0.05, max_value=0.25),
    st.floats(min_value=18.0, max_value=21.0),
)
@settings(max_examples=60)
def test_thermostat_band_safety_when_adequate(outdoor, alpha, t0):
    t_min, t_max = 18.0, 26.0
    # size the heater so adequacy holds: gain in [alpha*(t_min-outdoor), t_max-t_min]
    need = max(0.5, alpha * (t_min - outdoor))
    beta = need / (1.0 * 0.25)  # 1 kW, 15-min slots
    dev = ThermostaticHeater("h", kw_to_mw(1.0), t_min, t_max, t0, alpha, beta)
    validate_thermostat_adequacy(dev, GRID, [outdoor] * 96)
    _, temps, ok = thermostat_trace(dev, GRID, [outdoor] * 96)
    assert ok
    assert all(t_min - 1e-9 <= T <= t_max + 1e-9 for T in temps)


def test_thermostat_forced_off_feasibility_is_slot_dependent():
    # Heating streaks start just-in-time at the band bottom: skipping the
    # streak's first slot dips below t_min, skipping its last does not.
    sched, temps, ok = thermostat_trace(HEATER, GRID, [5.0] * 96)
    assert ok
    on_slots = [t for t, p in enumerate(sched) if p]
    first_on = on_slots[0]
    streak_end = first_on
    while sched[streak_end + 1]:
        streak_end += 1
    assert streak_end > first_on  # hysteresis heats through the band
    _, _, ok_first = thermostat_trace(HEATER, GRID, [5.0] * 96, forced_off=frozenset({first_on}))
    _, _, ok_last = thermostat_trace(HEATER, GRID, [5.0] * 96, forced_off=frozenset({streak_end}))
    assert not ok_first
    assert ok_last
    # dropping the last two streak slots digs too deep
    _, _, ok_two = thermostat_trace(
        HEATER, GRID, [5.0] * 96, forced_off=frozenset({streak_end - 1, streak_end})
    )
    assert not ok_two


def test_temperature_trace_of_matches_control_trace():
    sched, temps, _ = thermostat_trace(HEATER, GRID, [5.0] * 96)
    assert temperature_trace_of(HEATER, GRID, [5.0] * 96, sched) == pytest.approx(temps)


# ---- respond: deferrable --------------------------------------------------


def test_washer_shifts_out_of_window_for_incentive():
    washer = Deferrable("washer", kw_to_mw(2.0), 2, 40, 48)
    ctx = ctx_with()
    base_sched, base_state = baseline_schedule(washer, ctx)
    assert base_state == (40, 41)
    new_sched, new_state = respond(washer, base_state, ctx, range(40, 42), Direction.DECREASE, 10)
    assert new_state == (42, 43)
    assert new_sched[40] == new_sched[41] == 0


def test_washer_deadline_forces_no_shift():
    washer = Deferrable("washer", kw_to_mw(2.0), 2, 40, 42)
    ctx = ctx_with()
    _, base_state = baseline_schedule(washer, ctx)
    assert base_state == (40, 41)
    _, new_state = respond(washer, base_state, ctx, range(40, 42), Direction.DECREASE, 1000)
    assert new_state == (40, 41)


def test_washer_zero_incentive_keeps_schedule_if_costlier():
    washer = Deferrable("washer", kw_to_mw(2.0), 2, 40, 48)
    tariff = [30] * 96
    for t in range(42, 48):
        tariff[t] = 40  # shifting would cost more
    ctx = ctx_with(tariff=tariff)
    _, base_state = baseline_schedule(washer, ctx)
    _, new_state = respond(washer, base_state, ctx, range(40, 42), Direction.DECREASE, 0)
    assert new_state == base_state


def test_washer_never_moves_after_start():
    washer = Deferrable("washer", kw_to_mw(2.0), 2, 40, 48)
    ctx_later = ctx_with(now=41)
    _, new_state = respond(washer, (40, 41), ctx_later, range(40, 42), Direction.DECREASE, 10_000)
    assert new_state == (40, 41)


def test_interruptible_picks_cheapest_slots():
    dev = Deferrable("batch", kw_to_mw(3.0), 3, 0, 10, interruptible=True)
    tariff = [30] * 96
    tariff[4] = 1
    tariff[7] = 2
    tariff[9] = 3
    _, occ = baseline_schedule(dev, ctx_with(tariff=tariff))
    assert occ == (4, 7, 9)


# ---- respond: EV ----------------------------------------------------------


def test_ev_decrease_moves_charge_out_of_window():
    ev = EvCharger("ev", 4 * 60_000_000, 0, 16, kw_to_mw(8.0))
    ctx = ctx_with()
    base_sched, base_state = baseline_schedule(ev, ctx)
    assert base_sched[0] == kw_to_mw(8.0)  # flat tariff: earliest fill
    new_sched, _ = respond(ev, base_state, ctx, range(0, 2), Direction.DECREASE, 10)
    assert new_sched[0] == 0 and new_sched[1] == 0
    assert sum(new_sched) == sum(base_sched)  # energy conserved


def test_ev_increase_pulls_charge_into_window():
    ev = EvCharger("ev", 2 * 60_000_000, 0, 16, kw_to_mw(8.0))
    ctx = ctx_with()
    base_sched, base_state = baseline_schedule(ev, ctx)
    new_sched, _ = respond(ev, base_state, ctx, range(10, 12), Direction.INCREASE, 50)
    assert sum(new_sched) == sum(base_sched)
    assert new_sched[10] + new_sched[11] > base_sched[10] + base_sched[11]


def test_ev_small_incentive_does_not_move_into_pricier_slots():
    ev = EvCharger("ev", 2 * 60_000_000, 0, 8, kw_to_mw(8.0))
    tariff = [10] * 96
    for t in range(4, 8):
        tariff[t] = 100
    ctx = ctx_with(tariff=tariff)
    base_sched, base_state = baseline_schedule(ev, ctx)
    new_sched, _ = respond(ev, base_state, ctx, range(0, 4), Direction.DECREASE, 50)
    assert new_sched == base_sched  # 50 ct/kWh cannot pay for a 90 ct/kWh hop


@given(
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=2, max_value=8),
    st.lists(st.integers(min_value=1, max_value=60), min_size=96, max_size=96),
)
@settings(max_examples=40)
def test_ev_respond_conserves_energy(kwh, window_len, tariff):
    ev = EvCharger("ev", kwh * 60_000_000, 0, 24, kw_to_mw(11.0))
    ctx = ctx_with(tariff=tariff)
    base_sched, base_state = baseline_schedule(ev, ctx)
    for direction in Direction:
        new_sched, _ = respond(ev, base_state, ctx, range(2, 2 + window_len), direction, 40)
        assert sum(new_sched) == sum(base_sched)
        assert all(0 <= p <= kw_to_mw(11.0) for p in new_sched)
        assert all(p == 0 for p in new_sched[24:])
