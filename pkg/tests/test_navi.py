"""Message-vetting monitor checks."""

import json

import pytest

from gpsentry.navi import NaviConfig, NaviMonitor, Reference
from gpsentry.navmsg import (AlmanacPage, ClockPayload, EphemerisA,
                             EphemerisB, IonoPage, Subframe)

CLOCK = ClockPayload(af0=1.2e-8, iod=9)
EPH_A = EphemerisA(iod=9, sqrt_a=5153.6, ecc=0.003, toe=12000.0, m0=0.4)
EPH_B = EphemerisB(iod=9, incl=0.96, raan=1.1, argp=-0.5)


def _sf(sf_id, tow, payload, week=320, valid=True):
    return Subframe(sf_id, tow, week, payload, valid)


def _feed_full_ephemeris(mon, prn, tow0=1000, rx0=0.0, clock=CLOCK,
                         a=EPH_A, b=EPH_B, week=320):
    alerts = []
    alerts += mon.on_subframe(prn, _sf(1, tow0, clock, week), rx0)
    alerts += mon.on_subframe(prn, _sf(2, tow0 + 1, a, week), rx0 + 6)
    alerts += mon.on_subframe(prn, _sf(3, tow0 + 2, b, week), rx0 + 12)
    return alerts


def test_consistent_stream_is_silent():
    mon = NaviMonitor()
    assert _feed_full_ephemeris(mon, 5) == []
    assert mon.current_ephemeris(5) is not None
    assert mon.current_ephemeris(5).sqrt_a == EPH_A.sqrt_a


def test_tow_jump_alerts_once_then_resumes():
    mon = NaviMonitor()
    assert mon.on_subframe(4, _sf(1, 1000, CLOCK), 0.0) == []
    alerts = mon.on_subframe(4, _sf(1, 1101, CLOCK), 6.0)
    assert [a.kind for a in alerts] == ["tow_mismatch"]
    assert alerts[0].detail["expected_tow_units"] == 1001
    assert alerts[0].detail["got_tow_units"] == 1101
    # the stream keeps its new timeline, so the next consistent
    # subframe raises nothing
    assert mon.on_subframe(4, _sf(1, 1102, CLOCK), 12.0) == []


def test_small_receive_gap_tolerated():
    mon = NaviMonitor()
    mon.on_subframe(4, _sf(1, 1000, CLOCK), 0.0)
    # 30 s later, five subframes on
    assert mon.on_subframe(4, _sf(1, 1005, CLOCK), 30.0) == []


def test_week_edit_with_consistent_tow():
    mon = NaviMonitor()
    mon.on_subframe(8, _sf(1, 1000, CLOCK, week=320), 0.0)
    alerts = mon.on_subframe(8, _sf(1, 1001, CLOCK, week=321), 6.0)
    assert [a.kind for a in alerts] == ["week_mismatch"]
    assert alerts[0].detail["expected_week"] == 320
    assert alerts[0].detail["got_week"] == 321


def test_week_rollover_is_not_an_alert():
    mon = NaviMonitor()
    mon.on_subframe(8, _sf(1, 100799, CLOCK, week=500), 0.0)
    assert mon.on_subframe(8, _sf(1, 0, CLOCK, week=501), 6.0) == []


def test_week_must_not_increment_without_rollover():
    mon = NaviMonitor()
    mon.on_subframe(8, _sf(1, 100799, CLOCK, week=500), 0.0)
    alerts = mon.on_subframe(8, _sf(1, 0, CLOCK, week=500), 6.0)
    assert [a.kind for a in alerts] == ["week_mismatch"]
    assert alerts[0].detail["expected_week"] == 501


def test_tow_mismatch_suppresses_week_check():
    mon = NaviMonitor()
    mon.on_subframe(8, _sf(1, 1000, CLOCK, week=320), 0.0)
    alerts = mon.on_subframe(8, _sf(1, 2000, CLOCK, week=999), 6.0)
    assert [a.kind for a in alerts] == ["tow_mismatch"]


def test_invalid_subframes_are_ignored():
    mon = NaviMonitor()
    mon.on_subframe(4, _sf(1, 1000, CLOCK), 0.0)
    assert mon.on_subframe(4, _sf(1, 77777, CLOCK, valid=False), 6.0) == []
    # timeline unchanged by the invalid frame
    assert mon.on_subframe(4, _sf(1, 1002, CLOCK), 12.0) == []


def test_ephemeris_swap_quarantined_within_hold():
    mon = NaviMonitor()
    _feed_full_ephemeris(mon, 5)
    new_a = EphemerisA(iod=10, sqrt_a=5154.0, ecc=0.004, toe=12000.0, m0=0.5)
    new_b = EphemerisB(iod=10, incl=0.97, raan=1.2, argp=-0.4)
    new_clock = ClockPayload(af0=2e-8, iod=10)
    alerts = _feed_full_ephemeris(mon, 5, tow0=1003, rx0=18.0,
                                  clock=new_clock, a=new_a, b=new_b)
    kinds = [a.kind for a in alerts]
    assert "ephemeris_change" in kinds
    ev = next(a for a in alerts if a.kind == "ephemeris_change")
    assert ev.detail["held_iod"] == 9
    assert ev.detail["new_iod"] == 10
    # the held set stays in use
    assert mon.current_ephemeris(5).iod == 9


def test_ephemeris_swap_accepted_after_hold():
    mon = NaviMonitor(NaviConfig(ephemeris_hold_s=10.0))
    _feed_full_ephemeris(mon, 5)
    new_a = EphemerisA(iod=10, sqrt_a=5154.0, ecc=0.004, toe=12000.0, m0=0.5)
    new_b = EphemerisB(iod=10, incl=0.97, raan=1.2, argp=-0.4)
    new_clock = ClockPayload(af0=2e-8, iod=10)
    alerts = _feed_full_ephemeris(mon, 5, tow0=1010, rx0=60.0,
                                  clock=new_clock, a=new_a, b=new_b)
    assert alerts == []
    assert mon.current_ephemeris(5).iod == 10


def test_degenerate_orbit_alert_and_no_assembly():
    mon = NaviMonitor()
    bad = EphemerisA(iod=9, sqrt_a=0.0, ecc=0.003, toe=12000.0, m0=0.4)
    a1 = mon.on_subframe(6, _sf(1, 1000, CLOCK), 0.0)
    a2 = mon.on_subframe(6, _sf(2, 1001, bad), 6.0)
    a3 = mon.on_subframe(6, _sf(3, 1002, EPH_B), 12.0)
    assert a1 == [] and a3 == []
    assert [a.kind for a in a2] == ["degenerate_orbit"]
    assert a2[0].detail["sqrt_a"] == 0.0
    assert mon.current_ephemeris(6) is None


def test_iono_cross_satellite_mismatch():
    mon = NaviMonitor()
    page = IonoPage(alpha=(1e-8, 2e-8, 0.0, 0.0), beta=(1e5, 0.0, 0.0, 0.0))
    same = IonoPage(alpha=(1e-8, 2e-8, 0.0, 0.0), beta=(1e5, 0.0, 0.0, 0.0))
    other = IonoPage(alpha=(9e-8, 2e-8, 0.0, 0.0), beta=(1e5, 0.0, 0.0, 0.0))
    assert mon.on_subframe(1, _sf(4, 1000, page), 0.0) == []
    assert mon.on_subframe(2, _sf(4, 1000, same), 0.5) == []
    alerts = mon.on_subframe(3, _sf(4, 1000, other), 1.0)
    assert [a.kind for a in alerts] == ["cross_sat_inconsistency"]
    assert alerts[0].detail["against_prn"] in (1, 2)


def test_almanac_cross_satellite_mismatch():
    mon = NaviMonitor()
    page = AlmanacPage(page_id=3, prn=9, sqrt_a=5153.0, ecc=0.01,
                       incl=0.95, raan=0.5, argp=1.0, m0=2.0)
    edited = AlmanacPage(page_id=3, prn=9, sqrt_a=5155.0, ecc=0.01,
                         incl=0.95, raan=0.5, argp=1.0, m0=2.0)
    assert mon.on_subframe(1, _sf(5, 1000, page), 0.0) == []
    alerts = mon.on_subframe(2, _sf(5, 1000, edited), 0.5)
    assert [a.kind for a in alerts] == ["cross_sat_inconsistency"]
    assert alerts[0].detail["page"] == 3
    assert alerts[0].detail["against_prn"] == 1
    # different page ids never compare against each other
    other_page = AlmanacPage(page_id=4, prn=11, sqrt_a=5000.0)
    assert mon.on_subframe(3, _sf(5, 1000, other_page), 1.0) == []


def _reference_file(tmp_path, eph_kw=None, iono=None, almanac=None):
    eph = {"sqrt_a": EPH_A.sqrt_a, "ecc": EPH_A.ecc, "toe": EPH_A.toe,
           "m0": EPH_A.m0, "incl": EPH_B.incl, "raan": EPH_B.raan,
           "argp": EPH_B.argp, "af0": CLOCK.af0, "iod": 9}
    eph.update(eph_kw or {})
    doc = {"ephemerides": {"5": eph}}
    if iono is not None:
        doc["iono"] = iono
    if almanac is not None:
        doc["almanac"] = almanac
    path = tmp_path / "reference.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_reference_match_is_silent(tmp_path):
    ref = Reference.load(_reference_file(tmp_path))
    mon = NaviMonitor(reference=ref)
    assert _feed_full_ephemeris(mon, 5) == []


def test_reference_mismatch_names_fields(tmp_path):
    ref = Reference.load(_reference_file(tmp_path,
                                         eph_kw={"af0": 9e-7, "iod": 11}))
    mon = NaviMonitor(reference=ref)
    alerts = _feed_full_ephemeris(mon, 5)
    assert [a.kind for a in alerts] == ["reference_mismatch"]
    fields = alerts[0].detail["fields"].split(",")
    assert "af0" in fields and "iod" in fields


def test_reference_checks_only_listed_prns(tmp_path):
    ref = Reference.load(_reference_file(tmp_path))
    mon = NaviMonitor(reference=ref)
    # PRN 7 is absent from the file: nothing to compare
    assert _feed_full_ephemeris(mon, 7) == []


def test_reference_iono_mismatch(tmp_path):
    ref = Reference.load(_reference_file(
        tmp_path, iono={"alpha": [1e-8, 0, 0, 0], "beta": [1e5, 0, 0, 0]}))
    mon = NaviMonitor(reference=ref)
    sent = IonoPage(alpha=(2e-8, 0.0, 0.0, 0.0), beta=(1e5, 0.0, 0.0, 0.0))
    alerts = mon.on_subframe(2, _sf(4, 1000, sent), 0.0)
    assert [a.kind for a in alerts] == ["reference_mismatch"]
    assert alerts[0].detail["fields"] == "iono"


def test_reference_almanac_mismatch(tmp_path):
    alm = {"3": {"prn": 9, "sqrt_a": 5153.0, "ecc": 0.01, "incl": 0.95,
                 "raan": 0.5, "argp": 1.0, "m0": 2.0}}
    ref = Reference.load(_reference_file(tmp_path, almanac=alm))
    mon = NaviMonitor(reference=ref)
    page = AlmanacPage(page_id=3, prn=9, sqrt_a=5151.0, ecc=0.01,
                       incl=0.95, raan=0.5, argp=1.0, m0=2.0)
    alerts = mon.on_subframe(1, _sf(5, 1000, page), 0.0)
    assert [a.kind for a in alerts] == ["reference_mismatch"]
    assert alerts[0].detail["fields"].startswith("almanac:")
    assert "sqrt_a" in alerts[0].detail["fields"]
