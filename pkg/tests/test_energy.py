import dataclasses
import math

import mpmath as mp
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize

from uavwpt import energy
from uavwpt.energy import (
    RAW_UAV_FIELDS,
    charge_power_dbw,
    charge_start_offset,
    derive_uav_constants,
    flight_power,
    inflight_charge_energy,
    inflight_charge_energy_quad,
    net_hover_power,
    path_loss_db,
    recharge_event,
)
from uavwpt.errors import (
    CannotChargeError,
    InvalidParameterError,
    ThresholdUnreachableError,
)


def raw_fields(uav):
    return {name: getattr(uav, name) for name in RAW_UAV_FIELDS}


def test_table_constants(uav):
    assert uav.P0 == pytest.approx(36.01, abs=0.01)
    assert uav.Pi == pytest.approx(46.44, abs=0.01)
    assert uav.v0 == pytest.approx(4.5135, abs=1e-3)
    assert uav.d0 == pytest.approx(0.4030, abs=1e-3)
    assert uav.U_tip == pytest.approx(100.0)
    assert uav.E_full == pytest.approx(43.8 * 3600)


def test_derive_is_idempotent(uav):
    again = derive_uav_constants(**raw_fields(uav))
    assert again == uav


@pytest.mark.parametrize("field", ["W", "rho", "R", "A", "s", "omega", "V_cruise", "E_full"])
def test_derive_rejects_non_positive(uav, field):
    raw = raw_fields(uav)
    raw[field] = 0.0
    with pytest.raises(InvalidParameterError):
        derive_uav_constants(**raw)


def test_stored_derived_values_must_be_consistent(uav):
    with pytest.raises(InvalidParameterError):
        dataclasses.replace(uav, P0=uav.P0 * 1.01)
    # paper rounding (0.4030 vs 0.40317) is within the 1e-3 relative tolerance
    assert dataclasses.replace(uav, d0=0.4030).d0 == 0.4030


def test_flight_power_paper_values(uav):
    assert flight_power(uav, 10.0) == pytest.approx(62.49, abs=0.05)
    assert flight_power(uav, 0.0) == pytest.approx(82.45, abs=0.05)
    assert flight_power(uav, 0.0) == pytest.approx(uav.P0 + uav.Pi, rel=1e-12)


def test_flight_power_matches_high_precision_reference(uav):
    # 40-digit evaluation of the same power expression (mpmath)
    assert flight_power(uav, 5.0) == pytest.approx(71.62617196173636, rel=1e-12)


def test_flight_power_against_mpmath_for_random_speeds(uav):
    mp.mp.dps = 40
    for V in (0.3, 2.0, 7.5, 13.0, 25.0):
        Vm = mp.mpf(V)
        ref = (uav.P0 * (1 + 3 * Vm**2 / mp.mpf(uav.U_tip) ** 2)
               + uav.Pi * mp.sqrt(mp.sqrt(1 + Vm**4 / (4 * mp.mpf(uav.v0) ** 4))
                                  - Vm**2 / (2 * mp.mpf(uav.v0) ** 2))
               + mp.mpf(uav.d0) * uav.rho * uav.s * uav.A * Vm**3 / 2)
        assert flight_power(uav, V) == pytest.approx(float(ref), rel=1e-12)


def test_flight_power_rejects_negative_speed(uav):
    with pytest.raises(InvalidParameterError):
        flight_power(uav, -1.0)


def test_path_loss_values():
    assert path_loss_db(915e6, 1.0) == pytest.approx(31.67842188, abs=1e-6)
    assert path_loss_db(915e6, 10.0) == pytest.approx(51.67842188, abs=1e-6)
    assert path_loss_db(915e6, 200.0) - path_loss_db(915e6, 100.0) == pytest.approx(
        20 * math.log10(2), abs=1e-12)


@pytest.mark.parametrize("d", [0.0, -3.0])
def test_path_loss_rejects_bad_distance(d):
    with pytest.raises(InvalidParameterError):
        path_loss_db(915e6, d)


def test_charge_power_defaults(wpt):
    assert charge_power_dbw(wpt, 10.0) == pytest.approx(64.3215781, abs=1e-6)
    boosted = wpt.replace(G_uav=3.0)
    assert charge_power_dbw(boosted, 10.0) - charge_power_dbw(wpt, 10.0) == pytest.approx(3.0)
    # distance where the path loss cancels the link budget
    d0 = 10 ** ((wpt.P_t + wpt.G_t + wpt.G_uav - 20 * math.log10(wpt.f) + 147.55) / 20)
    assert charge_power_dbw(wpt, d0) == pytest.approx(0.0, abs=1e-9)


def test_charge_start_offset_against_root_finding(wpt):
    margin = wpt.link_constant_db - wpt.P_eps
    slant = optimize.brentq(lambda d: 20 * math.log10(d) - margin, 1.0, 1e6, xtol=1e-12)
    assert slant == pytest.approx(2322.9, abs=0.5)
    offset = charge_start_offset(wpt)
    assert offset == pytest.approx(math.sqrt(slant**2 - wpt.H**2), rel=1e-9)


def test_charge_start_offset_scales_with_threshold(wpt):
    base = charge_start_offset(wpt)
    lower = charge_start_offset(wpt.replace(P_eps=wpt.P_eps - 20))
    assert lower / base == pytest.approx(10.0, rel=1e-4)


def test_charge_start_offset_unreachable(wpt):
    overhead = charge_power_dbw(wpt, wpt.H)
    with pytest.raises(ThresholdUnreachableError):
        charge_start_offset(wpt.replace(P_eps=overhead + 1.0))


def test_inflight_energy_zero_window(wpt, uav):
    assert inflight_charge_energy(wpt, uav, 0.0) == 0.0
    assert inflight_charge_energy_quad(wpt, uav, 0.0) == 0.0


def test_inflight_energy_default_matches_quadrature(wpt, uav):
    x = charge_start_offset(wpt)
    closed = inflight_charge_energy(wpt, uav, x)
    quad = inflight_charge_energy_quad(wpt, uav, x)
    assert abs(closed - quad) / quad <= 1e-6


def test_inflight_energy_linear_in_eta(wpt, uav):
    x = 300.0
    e1 = inflight_charge_energy_quad(wpt.replace(eta=0.3), uav, x)
    e2 = inflight_charge_energy_quad(wpt.replace(eta=0.6), uav, x)
    assert e2 == pytest.approx(2 * e1, rel=1e-9)


def test_halving_speed_doubles_charge_window(wpt, uav):
    slow = uav.replace(V_cruise=uav.V_cruise / 2)
    r_fast = recharge_event(wpt, uav, uav.E_full)
    r_slow = recharge_event(wpt, slow, slow.E_full)
    assert r_slow.T_charge_fly == pytest.approx(2 * r_fast.T_charge_fly)


@settings(max_examples=40, deadline=None)
@given(H=st.floats(1.0, 100.0), x=st.floats(0.0, 5000.0), V=st.floats(1.0, 30.0),
       eta=st.floats(0.05, 1.0))
def test_closed_form_agrees_with_quadrature(uav, wpt, H, x, V, eta):
    w = wpt.replace(H=H, eta=eta)
    u = uav.replace(V_cruise=V)
    quad = inflight_charge_energy_quad(w, u, x)
    closed = inflight_charge_energy(w, u, x)
    if quad == 0.0:
        assert closed == 0.0
    else:
        assert abs(closed - quad) / quad <= 1e-6


def test_recharge_full_battery_needs_no_hover(wpt, weak_wpt, uav):
    for w in (wpt, weak_wpt):
        r = recharge_event(w, uav, uav.E_full)
        assert r.T_hover == 0.0
        assert r.E_fly == 0.0


def test_recharge_default_link_fills_in_flight(wpt, uav):
    r = recharge_event(wpt, uav, 0.2 * uav.E_full)
    assert r.E_fly_received > 0.8 * uav.E_full
    assert r.T_hover == 0.0
    assert r.E_fly == pytest.approx(0.8 * uav.E_full)


def test_recharge_hover_time_formula(weak_wpt, uav):
    e_rem = 0.2 * uav.E_full
    r = recharge_event(weak_wpt, uav, e_rem)
    p_hover = charge_power_dbw(weak_wpt, weak_wpt.H)
    net = weak_wpt.eta * 10 ** (p_hover / 10) - flight_power(uav, 0.0)
    expected = (uav.E_full - e_rem - r.E_fly) / net
    assert r.T_hover == pytest.approx(expected, rel=1e-12)
    assert r.T_hover > 60.0
    assert (e_rem + r.E_fly + net * r.T_hover) == pytest.approx(uav.E_full, rel=1e-9)


def test_recharge_cannot_charge(wpt, uav):
    # eta must stay in (0, 1]; a feeble transmitter gives the same non-positive net power
    with pytest.raises(InvalidParameterError):
        wpt.replace(eta=0.0)
    feeble = wpt.replace(P_t=0.0, G_t=0.0, P_eps=-100.0)
    assert net_hover_power(feeble, uav) <= 0
    with pytest.raises(CannotChargeError):
        recharge_event(feeble, uav, 0.5 * uav.E_full)


@settings(max_examples=60, deadline=None)
@given(frac=st.floats(0.0, 1.0), pt=st.floats(35.0, 60.0), H=st.floats(1.0, 60.0))
def test_recharge_energy_bookkeeping(uav, wpt, frac, pt, H):
    w = wpt.replace(P_t=pt, G_t=pt, H=H)
    try:
        r = recharge_event(w, uav, frac * uav.E_full)
    except CannotChargeError:
        return
    net = net_hover_power(w, uav)
    total = frac * uav.E_full + r.E_fly + net * r.T_hover
    assert total == pytest.approx(uav.E_full, rel=1e-9)
    assert min(r.x_offset_start, r.T_charge_fly, r.E_fly, r.T_hover, r.E_hover_net) >= 0


def test_hover_time_non_increasing_in_remaining_energy(weak_wpt, uav):
    times = [recharge_event(weak_wpt, uav, f * uav.E_full).T_hover for f in
             [0.0, 0.1, 0.2, 0.5, 0.8, 0.99, 1.0]]
    assert all(a >= b for a, b in zip(times, times[1:]))


def test_monotone_link_budget(wpt):
    ds = [1.0, 5.0, 10.0, 100.0, 1e4]
    pl = [path_loss_db(wpt.f, d) for d in ds]
    cp = [charge_power_dbw(wpt, d) for d in ds]
    assert all(a < b for a, b in zip(pl, pl[1:]))
    assert all(a > b for a, b in zip(cp, cp[1:]))


def test_charge_profile_matches_recharge_event(weak_wpt, uav):
    prof = energy.ChargeProfile(uav, weak_wpt)
    for used in (0.0, 1000.0, 50_000.0, 0.8 * uav.E_full):
        assert prof.hover_time(used) == pytest.approx(
            recharge_event(weak_wpt, uav, uav.E_full - used).T_hover, rel=1e-9, abs=1e-12)


def test_param_files_round_trip(tmp_path, uav, wpt):
    energy.save_params(uav, tmp_path / "uav.json")
    energy.save_params(wpt, tmp_path / "wpt.json")
    assert energy.load_uav_params(tmp_path / "uav.json") == uav
    assert energy.load_wpt_params(tmp_path / "wpt.json") == wpt


def test_param_file_rejects_unknown_keys(tmp_path):
    (tmp_path / "w.json").write_text('{"P_t": 1, "bogus": 2}')
    with pytest.raises(InvalidParameterError):
        energy.load_wpt_params(tmp_path / "w.json")


def test_wpt_invariants():
    with pytest.raises(InvalidParameterError):
        energy.WptParams(f=0.0)
    with pytest.raises(InvalidParameterError):
        energy.WptParams(H=0.0)
    with pytest.raises(InvalidParameterError):
        energy.WptParams(eta=1.5)
