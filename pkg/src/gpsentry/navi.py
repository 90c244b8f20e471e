"""Navigation-message vetting.

Checks the decoded data stream for content manipulation that a signal
level spoofer can apply without breaking signal tracking: time-of-week
jumps, week number edits, premature ephemeris swaps, degenerate orbital
parameters, and disagreement between satellites on shared pages
(ionosphere model, almanac).  Optionally compares broadcast parameters
against a reference file of expected values.

Alert kinds emitted here: ``tow_mismatch``, ``week_mismatch``,
``ephemeris_change``, ``degenerate_orbit``, ``iono_mismatch``,
``almanac_mismatch``, ``reference_mismatch``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .apt import SpoofingAlert
from .constants import TOW_WRAP_UNITS
from .navmsg import (AlmanacPage, ClockPayload, Ephemeris, EphemerisA,
                     EphemerisB, IonoPage, Subframe, assemble_ephemeris)


@dataclass
class NaviConfig:
    ephemeris_hold_s: float = 7200.0
    tow_slack_ppm: float = 10.0
    real_rel_tolerance: float = 1e-9


@dataclass
class _SatHistory:
    last_tow_units: int | None = None
    last_tow_rx_s: float = 0.0
    week: int | None = None
    ephemeris: Ephemeris | None = None
    ephemeris_rx_s: float = 0.0
    quarantined: Ephemeris | None = None
    pending_clock: ClockPayload | None = None
    pending_a: EphemerisA | None = None
    pending_b: EphemerisB | None = None
    ref_checked: bool = False


_EPH_REAL_FIELDS = ("sqrt_a", "ecc", "incl", "raan", "argp", "m0", "toe",
                    "af0")
_ALM_REAL_FIELDS = ("sqrt_a", "ecc", "incl", "raan", "argp", "m0")


def _rel_differs(a: float, b: float, tol: float) -> bool:
    scale = max(abs(a), abs(b), 1e-30)
    return abs(a - b) > tol * scale


@dataclass
class Reference:
    """Expected broadcast content, loaded from a JSON file."""
    ephemerides: dict[int, dict] = field(default_factory=dict)
    iono: dict | None = None
    almanac: dict[int, dict] = field(default_factory=dict)

    @classmethod
    def load(cls, path: str) -> "Reference":
        with open(path) as fh:
            raw = json.load(fh)
        return cls(
            ephemerides={int(k): v
                         for k, v in raw.get("ephemerides", {}).items()},
            iono=raw.get("iono"),
            almanac={int(k): v for k, v in raw.get("almanac", {}).items()})


class NaviMonitor:
    """Stateful message checker; feed one decoded subframe at a time."""

    def __init__(self, config: NaviConfig | None = None,
                 reference: Reference | None = None):
        self.cfg = config or NaviConfig()
        self.reference = reference
        self._sats: dict[int, _SatHistory] = {}
        self._iono: dict[int, IonoPage] = {}
        self._almanac: dict[int, dict[int, AlmanacPage]] = {}

    def current_ephemeris(self, prn: int) -> Ephemeris | None:
        hist = self._sats.get(prn)
        return hist.ephemeris if hist else None

    def on_subframe(self, prn: int, sf: Subframe,
                    rx_time_s: float) -> list[SpoofingAlert]:
        if not sf.valid:
            return []
        hist = self._sats.setdefault(prn, _SatHistory())
        alerts = self._check_time(prn, hist, sf, rx_time_s)
        alerts += self._handle_payload(prn, hist, sf, rx_time_s)
        return alerts

    # -- time consistency -------------------------------------------------

    def _check_time(self, prn: int, hist: _SatHistory, sf: Subframe,
                    rx_time_s: float) -> list[SpoofingAlert]:
        alerts: list[SpoofingAlert] = []
        tow_ok = True
        if hist.last_tow_units is not None:
            dt = rx_time_s - hist.last_tow_rx_s
            steps = round(dt / 6.0)
            slack = int(round(dt * self.cfg.tow_slack_ppm * 1e-6 / 6.0))
            raw = hist.last_tow_units + steps
            expected = raw % TOW_WRAP_UNITS
            diff = (sf.tow_units - expected
                    + TOW_WRAP_UNITS // 2) % TOW_WRAP_UNITS \
                - TOW_WRAP_UNITS // 2
            if abs(diff) > slack:
                tow_ok = False
                alerts.append(SpoofingAlert(
                    detector="navi", kind="tow_mismatch", prn=prn,
                    time_s=rx_time_s,
                    detail={"expected_tow_units": expected,
                            "got_tow_units": sf.tow_units}))
            if tow_ok and hist.week is not None:
                expected_week = hist.week + raw // TOW_WRAP_UNITS
                if sf.week != expected_week:
                    alerts.append(SpoofingAlert(
                        detector="navi", kind="week_mismatch", prn=prn,
                        time_s=rx_time_s,
                        detail={"expected_week": expected_week,
                                "got_week": sf.week}))
        hist.last_tow_units = sf.tow_units
        hist.last_tow_rx_s = rx_time_s
        hist.week = sf.week
        return alerts

    # -- payload content ---------------------------------------------------

    def _handle_payload(self, prn: int, hist: _SatHistory, sf: Subframe,
                        rx_time_s: float) -> list[SpoofingAlert]:
        pl = sf.payload
        if isinstance(pl, ClockPayload):
            hist.pending_clock = pl
        elif isinstance(pl, EphemerisA):
            if pl.sqrt_a <= 0.0:
                hist.pending_a = None
                return [SpoofingAlert(
                    detector="navi", kind="degenerate_orbit", prn=prn,
                    time_s=rx_time_s, detail={"sqrt_a": pl.sqrt_a})]
            hist.pending_a = pl
        elif isinstance(pl, EphemerisB):
            hist.pending_b = pl
        elif isinstance(pl, IonoPage):
            return self._check_iono(prn, pl, rx_time_s)
        elif isinstance(pl, AlmanacPage):
            return self._check_almanac(prn, pl, rx_time_s)
        return self._try_assemble(prn, hist, rx_time_s)

    def _try_assemble(self, prn: int, hist: _SatHistory,
                      rx_time_s: float) -> list[SpoofingAlert]:
        if not (hist.pending_clock and hist.pending_a and hist.pending_b):
            return []
        if not (hist.pending_clock.iod == hist.pending_a.iod
                == hist.pending_b.iod):
            return []
        cand = assemble_ephemeris(hist.pending_clock, hist.pending_a,
                                  hist.pending_b)
        alerts: list[SpoofingAlert] = []
        if hist.ephemeris is None:
            hist.ephemeris = cand
            hist.ephemeris_rx_s = rx_time_s
            alerts += self._check_reference_eph(prn, hist, cand, rx_time_s)
        elif cand != hist.ephemeris:
            age = rx_time_s - hist.ephemeris_rx_s
            if age < self.cfg.ephemeris_hold_s:
                hist.quarantined = cand
                alerts.append(SpoofingAlert(
                    detector="navi", kind="ephemeris_change", prn=prn,
                    time_s=rx_time_s,
                    detail={"held_iod": hist.ephemeris.iod,
                            "new_iod": cand.iod,
                            "age_s": round(age, 3)}))
            else:
                hist.ephemeris = cand
                hist.ephemeris_rx_s = rx_time_s
                hist.quarantined = None
                hist.ref_checked = False
                alerts += self._check_reference_eph(prn, hist, cand,
                                                    rx_time_s)
        return alerts

    def _check_reference_eph(self, prn: int, hist: _SatHistory,
                             eph: Ephemeris,
                             rx_time_s: float) -> list[SpoofingAlert]:
        if self.reference is None or hist.ref_checked:
            return []
        hist.ref_checked = True
        ref = self.reference.ephemerides.get(prn)
        if ref is None:
            return []
        bad = [f for f in _EPH_REAL_FIELDS
               if _rel_differs(getattr(eph, f), float(ref[f]),
                               self.cfg.real_rel_tolerance)]
        if eph.iod != int(ref["iod"]):
            bad.append("iod")
        if not bad:
            return []
        return [SpoofingAlert(
            detector="navi", kind="reference_mismatch", prn=prn,
            time_s=rx_time_s, detail={"fields": ",".join(bad)})]

    # -- cross-satellite shared pages ---------------------------------------

    def _check_iono(self, prn: int, page: IonoPage,
                    rx_time_s: float) -> list[SpoofingAlert]:
        alerts: list[SpoofingAlert] = []
        for other_prn, other in self._iono.items():
            if other_prn == prn:
                continue
            if (tuple(other.alpha) != tuple(page.alpha)
                    or tuple(other.beta) != tuple(page.beta)):
                alerts.append(SpoofingAlert(
                    detector="navi", kind="cross_sat_inconsistency", prn=prn,
                    time_s=rx_time_s,
                    detail={"page": "iono", "against_prn": other_prn}))
                break
        if self.reference is not None and self.reference.iono is not None \
                and prn not in self._iono:
            ra = [float(v) for v in self.reference.iono["alpha"]]
            rb = [float(v) for v in self.reference.iono["beta"]]
            tol = self.cfg.real_rel_tolerance
            if any(_rel_differs(a, b, tol)
                   for a, b in zip(list(page.alpha) + list(page.beta),
                                   ra + rb)):
                alerts.append(SpoofingAlert(
                    detector="navi", kind="reference_mismatch", prn=prn,
                    time_s=rx_time_s, detail={"fields": "iono"}))
        self._iono[prn] = page
        return alerts

    def _check_almanac(self, prn: int, page: AlmanacPage,
                       rx_time_s: float) -> list[SpoofingAlert]:
        alerts: list[SpoofingAlert] = []
        seen = self._almanac.setdefault(page.page_id, {})
        for other_prn, other in seen.items():
            if other_prn == prn:
                continue
            if not self._almanac_equal(page, other):
                alerts.append(SpoofingAlert(
                    detector="navi", kind="cross_sat_inconsistency", prn=prn,
                    time_s=rx_time_s,
                    detail={"page": page.page_id, "against_prn": other_prn}))
                break
        if self.reference is not None and prn not in seen:
            ref = self.reference.almanac.get(page.page_id)
            if ref is not None:
                tol = self.cfg.real_rel_tolerance
                bad = [f for f in _ALM_REAL_FIELDS
                       if _rel_differs(getattr(page, f), float(ref[f]), tol)]
                if page.prn != int(ref["prn"]):
                    bad.append("prn")
                if bad:
                    alerts.append(SpoofingAlert(
                        detector="navi", kind="reference_mismatch", prn=prn,
                        time_s=rx_time_s,
                        detail={"fields": "almanac:" + ",".join(bad)}))
        seen[prn] = page
        return alerts

    @staticmethod
    def _almanac_equal(a: AlmanacPage, b: AlmanacPage) -> bool:
        # decoded pages went through the same quantization, so exact
        # equality is the right comparison
        if a.prn != b.prn:
            return False
        return all(getattr(a, f) == getattr(b, f) for f in _ALM_REAL_FIELDS)
