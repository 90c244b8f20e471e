"""End-to-end receiver: acquisition, tracking, vetting, positioning.

The receiver deliberately tracks every resolvable correlation peak of
each PRN, not just the strongest: the strongest becomes the primary
channel (used for positioning) and the rest get auxiliary channels.
Auxiliary arrivals feed the arrival-phase test; decoded messages feed
the navigation vetting stage; primaries feed the position solver.

Sample access goes through a memory map, so channels at different
stream positions read what they need without an explicit buffer layer.
"""

from __future__ import annotations

import dataclasses
import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .acquisition import AcquisitionConfig, acquire, scan_window_rounds
from .apt import AptConfig, SpoofingAlert, check_separation
from .constants import CHIP_RATE_HZ, CODE_LENGTH_CHIPS, SPEED_OF_LIGHT
from .navi import NaviConfig, NaviMonitor, Reference
from .navmsg import DegenerateOrbitError, satellite_position
from .pvt import (GeometryError, PvtConvergenceError, compute_gdop,
                  solve_pvt)
from .tracking import (ChannelPhase, ChannelRole, PeakLedger,
                       TrackingChannel)


def _chip_distance(a: float, b: float) -> float:
    d = abs(a - b) % CODE_LENGTH_CHIPS
    return min(d, CODE_LENGTH_CHIPS - d)


@dataclass
class ReceiverConfig:
    input_path: str = ""
    sample_rate_hz: float = 2.046e6
    prns: tuple[int, ...] = tuple(range(1, 33))
    max_channels: int = 12
    rescan_period_s: float = 1.0
    pvt_period_s: float = 1.0
    datum_margin_s: float = 0.075
    tau_max_ns: float = 500.0
    snap_to_sample: bool = True
    ephemeris_hold_s: float = 7200.0
    tow_slack_ppm: float = 10.0
    reference_path: str = ""
    cn0_lock_threshold_dbhz: float = 30.0
    dll_bw_hz: float = 2.0
    pll_bw_hz: float = 15.0
    doppler_span_hz: float = 5000.0
    doppler_step_hz: float = 500.0
    acq_threshold_ratio: float = 2.5
    noncoherent_rounds: int = 4
    aux_probation_s: float = 1.5
    idle_rescan_batch: int = 4

    @classmethod
    def from_file(cls, path: str) -> "ReceiverConfig":
        cfg = cls()
        with open(path) as fh:
            for raw in fh:
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"bad config line: {raw.rstrip()}")
                key, value = (s.strip() for s in line.split("=", 1))
                cfg = cfg.with_override(key, value)
        return cfg

    def with_override(self, key: str, value: str) -> "ReceiverConfig":
        names = {f.name: f for f in dataclasses.fields(self)}
        if key not in names:
            raise ValueError(f"unknown config key: {key}")
        current = getattr(self, key)
        if key == "prns":
            parsed: object = tuple(int(v) for v in value.split(",") if v)
        elif isinstance(current, bool):
            if value.lower() not in ("true", "false", "1", "0"):
                raise ValueError(f"bad boolean for {key}: {value}")
            parsed = value.lower() in ("true", "1")
        elif isinstance(current, int):
            parsed = int(value)
        elif isinstance(current, float):
            parsed = float(value)
        else:
            parsed = value
        return dataclasses.replace(self, **{key: parsed})


@dataclass
class PvtRecord:
    time_s: float
    n_sats: int
    position_m: tuple[float, float, float]
    clock_bias_m: float
    gdop: float
    residual_rms_m: float


@dataclass
class ChannelSummary:
    channel_id: int
    prn: int
    role: str
    locked: bool
    cn0_dbhz: float
    epochs: int
    subframes: int


@dataclass
class RunReport:
    input_path: str
    sample_rate_hz: float
    processed_s: float
    channels: list[ChannelSummary] = field(default_factory=list)
    alerts: list[SpoofingAlert] = field(default_factory=list)
    pvt: list[PvtRecord] = field(default_factory=list)
    subframes_decoded: int = 0

    @property
    def spoofing_detected(self) -> bool:
        return bool(self.alerts)

    @property
    def verdict(self) -> str:
        return "spoofed" if self.spoofing_detected else "clean"

    def text(self) -> str:
        lines = [f"input: {self.input_path}",
                 f"sample_rate_hz: {self.sample_rate_hz:.0f}",
                 f"processed_s: {self.processed_s:.3f}",
                 f"subframes_decoded: {self.subframes_decoded}",
                 "channels:"]
        for ch in self.channels:
            lines.append(
                f"  ch{ch.channel_id:02d} prn={ch.prn:2d} {ch.role:9s} "
                f"lock={'yes' if ch.locked else 'no':3s} "
                f"cn0={ch.cn0_dbhz:5.1f} epochs={ch.epochs} "
                f"subframes={ch.subframes}")
        lines.append(f"pvt_fixes: {len(self.pvt)}")
        if self.pvt:
            last = self.pvt[-1]
            lines.append(
                f"  last_fix t={last.time_s:.1f}s n={last.n_sats} "
                f"pos=({last.position_m[0]:.1f}, {last.position_m[1]:.1f}, "
                f"{last.position_m[2]:.1f}) gdop={last.gdop:.2f}")
        counts: dict[str, int] = {}
        for a in self.alerts:
            counts[a.kind] = counts.get(a.kind, 0) + 1
        lines.append(f"alerts: {len(self.alerts)}")
        for kind in sorted(counts):
            lines.append(f"  {kind}: {counts[kind]}")
        lines.append(f"verdict: {self.verdict}")
        return "\n".join(lines) + "\n"

    def write_outputs(self, report_path: str | None = None,
                      alerts_path: str | None = None,
                      pvt_path: str | None = None) -> None:
        if report_path:
            with open(report_path, "w") as fh:
                fh.write(self.text())
        if alerts_path:
            with open(alerts_path, "w") as fh:
                for a in self.alerts:
                    fh.write(json.dumps({
                        "time_s": round(a.time_s, 3), "detector": a.detector,
                        "kind": a.kind, "prn": a.prn,
                        "detail": a.detail}) + "\n")
        if pvt_path:
            with open(pvt_path, "w") as fh:
                fh.write("time_s,n_sats,x_m,y_m,z_m,clock_bias_m,gdop,"
                         "residual_rms_m\n")
                for r in self.pvt:
                    fh.write(f"{r.time_s:.3f},{r.n_sats},"
                             f"{r.position_m[0]:.3f},{r.position_m[1]:.3f},"
                             f"{r.position_m[2]:.3f},{r.clock_bias_m:.3f},"
                             f"{r.gdop:.3f},{r.residual_rms_m:.3f}\n")


class Receiver:
    """Processes one baseband trace and produces a run report."""

    def __init__(self, cfg: ReceiverConfig,
                 samples: np.ndarray | None = None):
        self.cfg = cfg
        if samples is None:
            samples = np.memmap(cfg.input_path, dtype=np.complex64,
                                mode="r")
        self.samples = samples
        self.fs = cfg.sample_rate_hz
        self.n_ms = int(round(self.fs * 1e-3))
        self.acq_cfg = AcquisitionConfig(
            doppler_span_hz=cfg.doppler_span_hz,
            doppler_step_hz=cfg.doppler_step_hz,
            threshold_ratio=cfg.acq_threshold_ratio,
            noncoherent_rounds=cfg.noncoherent_rounds)
        self.apt_cfg = AptConfig(tau_max_ns=cfg.tau_max_ns,
                                 snap_to_sample=cfg.snap_to_sample)
        reference = None
        if cfg.reference_path:
            reference = Reference.load(cfg.reference_path)
        self.navi = NaviMonitor(
            NaviConfig(ephemeris_hold_s=cfg.ephemeris_hold_s,
                       tow_slack_ppm=cfg.tow_slack_ppm), reference)
        self.ledger = PeakLedger()
        self.channels: list[TrackingChannel] = []
        self.dropped: list[TrackingChannel] = []
        self._next_channel_id = 0
        self._rescan_cursor = 0
        self._last_scan: dict[int, tuple] = {}
        self._pair_hist: dict[int, deque] = {}
        self._confirm: set[int] = set()
        self.alerts: list[SpoofingAlert] = []
        self.pvt_records: list[PvtRecord] = []
        self.subframes_decoded = 0

    # -- channel management ------------------------------------------------

    def _spawn(self, prn: int, role: ChannelRole, start_sample: int,
               peak_phase_chips: float, doppler_hz: float) -> None:
        rem = (CODE_LENGTH_CHIPS - peak_phase_chips) % CODE_LENGTH_CHIPS
        ch = TrackingChannel(
            prn=prn, channel_id=self._next_channel_id, role=role,
            sample_rate_hz=self.fs, start_sample=start_sample,
            code_phase_chips=rem, doppler_hz=doppler_hz,
            dll_bw_hz=self.cfg.dll_bw_hz, pll_bw_hz=self.cfg.pll_bw_hz,
            cn0_lock_threshold_dbhz=self.cfg.cn0_lock_threshold_dbhz)
        self._next_channel_id += 1
        self.channels.append(ch)

    def _live(self, prn: int | None = None) -> list[TrackingChannel]:
        return [c for c in self.channels
                if c.phase != ChannelPhase.DROPPED
                and (prn is None or c.state.prn == prn)]

    def _primary(self, prn: int) -> TrackingChannel | None:
        for c in self._live(prn):
            if c.state.role == ChannelRole.PRIMARY:
                return c
        return None

    def _scan_window(self, start: int) -> np.ndarray | None:
        need = self.n_ms * self.acq_cfg.coherent_ms * scan_window_rounds(
            self.fs, self.acq_cfg)
        if start + need > len(self.samples):
            return None
        return np.asarray(self.samples[start:start + need])

    def _channel_phase_at(self, ch: TrackingChannel, window_start: int
                          ) -> float:
        period = self.fs * 1e-3
        d = (ch.state.last_boundary_sample - window_start) % period
        return d * CHIP_RATE_HZ / self.fs

    def _scan_prn(self, prn: int, window: np.ndarray, start: int,
                  now_s: float) -> None:
        result = acquire(window, prn, self.fs, self.acq_cfg)
        self._last_scan[prn] = (result, now_s)
        pair = self._scan_pair_separation(result)
        hist = self._pair_hist.setdefault(prn, deque(maxlen=5))
        if pair is None:
            hist.clear()
            self._confirm.discard(prn)
        else:
            hist.append(pair)
            # fresh pair sightings get re-scanned on the next strides so
            # the separation estimate is confirmed within tens of ms
            # instead of waiting out the rescan period
            if len(hist) < 3:
                self._confirm.add(prn)
            else:
                self._confirm.discard(prn)
        live = self._live(prn)
        tracked = [self._channel_phase_at(c, start) for c in live]
        self.ledger.observe(prn, result.peaks, tracked, now_s)
        if result.detected and not any(
                c.state.role == ChannelRole.PRIMARY for c in live):
            best = result.peaks[0]
            self._spawn(prn, ChannelRole.PRIMARY, start,
                        best.code_phase_chips, best.doppler_hz)
            # queued copy of the same peak is now tracked; refresh
            live = self._live(prn)
            tracked = [self._channel_phase_at(c, start) for c in live]
            self.ledger.observe(prn, result.peaks, tracked, now_s)

    def _initial_scan(self) -> None:
        window = self._scan_window(0)
        if window is None:
            return
        for prn in self.cfg.prns:
            self._scan_prn(prn, window, 0, 0.0)
        self._fill_aux(0)

    def _rescan(self, start: int, now_s: float) -> None:
        window = self._scan_window(start)
        if window is None:
            return
        tracked_prns = sorted({c.state.prn for c in self._live()})
        for prn in tracked_prns:
            self._scan_prn(prn, window, start, now_s)
        idle = [p for p in self.cfg.prns if p not in tracked_prns]
        if idle:
            batch = [idle[(self._rescan_cursor + i) % len(idle)]
                     for i in range(min(self.cfg.idle_rescan_batch,
                                        len(idle)))]
            self._rescan_cursor += self.cfg.idle_rescan_batch
            for prn in batch:
                self._scan_prn(prn, window, start, now_s)
        self._fill_aux(start, now_s)

    def _fill_aux(self, start: int, now_s: float = 0.0) -> None:
        budget = self.cfg.max_channels - len(self._live())
        prns = sorted({c.state.prn for c in self._live()})
        while budget > 0:
            spawned = False
            for prn in prns:
                rec = self.ledger.next_candidate(prn)
                if rec is None:
                    continue
                self._spawn(prn, ChannelRole.AUXILIARY, start,
                            rec.code_phase_chips, rec.doppler_hz)
                budget -= 1
                spawned = True
                if budget == 0:
                    break
            if not spawned:
                break

    def _retire_channels(self, now_s: float) -> None:
        for ch in self.channels:
            if ch.phase == ChannelPhase.DROPPED:
                continue
            st = ch.state
            age_s = (ch.pos - ch.created_sample) / self.fs
            if st.lock or age_s <= self.cfg.aux_probation_s:
                continue
            ch.phase = ChannelPhase.DROPPED
            if st.role == ChannelRole.AUXILIARY:
                self.ledger.mark_evaluated(
                    st.prn, self._channel_phase_at(ch, ch.pos), st.doppler_hz,
                    now_s)
            else:
                self._promote(st.prn)
        keep = []
        for ch in self.channels:
            if ch.phase == ChannelPhase.DROPPED:
                self.dropped.append(ch)
            else:
                keep.append(ch)
        self.channels = keep

    def _promote(self, prn: int) -> None:
        live = [c for c in self._live(prn)
                if c.state.role == ChannelRole.AUXILIARY]
        locked = [c for c in live if c.state.lock]
        if locked:
            best = max(locked, key=lambda c: c.state.cn0_dbhz)
            best.state.role = ChannelRole.PRIMARY

    # -- detector hooks ------------------------------------------------------

    def _apt_tick(self, now_s: float) -> None:
        for prn in sorted({c.state.prn for c in self._live()}):
            self._apt_evaluate(prn, now_s)

    def _scan_pair_separation(self, result) -> float | None:
        """Gated top-two separation of one scan, in seconds."""
        peaks = result.peaks
        if len(peaks) < max(2, self.apt_cfg.min_peaks_tracked):
            return None
        d = _chip_distance(peaks[0].code_phase_chips,
                           peaks[1].code_phase_chips)
        # copies within the reach of one channel's correlators drag
        # each other's code loops, so there the fitted acquisition
        # peaks are the only honest witnesses; past that reach the
        # locked loop boundaries are sharper
        if d <= 1.55:
            return d / CHIP_RATE_HZ
        return None

    def _separation_evidence(self, prn: int,
                             primary: TrackingChannel) -> tuple:
        """Largest resolved same-PRN arrival split, in seconds."""
        hist = self._pair_hist.get(prn)
        if hist and len(hist) >= 2:
            # median over the last few scans shrugs off one noisy fit;
            # a single unconfirmed sighting is never alerted on
            return float(np.median(list(hist))), "acquisition"
        best = None
        for aux in self._live(prn):
            if aux is primary or not aux.state.lock:
                continue
            sep = aux.arrival_delay_vs(primary)
            if best is None or abs(sep) > abs(best):
                best = sep
        if best is not None:
            return best, "tracking"
        return None, ""

    def _apt_evaluate(self, prn: int, now_s: float) -> None:
        primary = self._primary(prn)
        if primary is None or not primary.state.lock:
            return
        sep, source = self._separation_evidence(prn, primary)
        if sep is None:
            return
        alert = check_separation(prn, sep, now_s, self.fs, self.apt_cfg)
        if alert is not None:
            alert.detail["source"] = source
            self.alerts.append(alert)

    def _pvt_tick(self, now_s: float, tick_sample: int) -> None:
        usable = []
        for prn in sorted({c.state.prn for c in self._live()}):
            ch = self._primary(prn)
            if ch is None or not ch.has_time():
                continue
            eph = self.navi.current_ephemeris(prn)
            if eph is None:
                continue
            t_sv = ch.tx_time_at(tick_sample)
            if t_sv is None:
                continue
            t_tx = t_sv - eph.af0
            usable.append((prn, eph, t_tx))
        if len(usable) < 4:
            return
        datum = max(t for _, _, t in usable) + self.cfg.datum_margin_s
        sat_pos = []
        rho = []
        for prn, eph, t_tx in usable:
            try:
                sat_pos.append(satellite_position(eph, t_tx))
            except DegenerateOrbitError:
                return
            rho.append((datum - t_tx) * SPEED_OF_LIGHT)
        try:
            sol = solve_pvt(np.array(sat_pos), np.array(rho))
        except (GeometryError, PvtConvergenceError):
            return
        rms = float(np.sqrt(np.mean(sol.residuals_m ** 2)))
        self.pvt_records.append(PvtRecord(
            time_s=now_s, n_sats=len(usable),
            position_m=tuple(float(v) for v in sol.position_m),
            clock_bias_m=sol.clock_bias_m, gdop=sol.gdop,
            residual_rms_m=rms))

    # -- main loop -------------------------------------------------------------

    def run(self) -> RunReport:
        total = len(self.samples)
        stride = int(round(self.fs * 0.02))
        tick = int(round(self.fs * self.cfg.rescan_period_s))
        pvt_tick = int(round(self.fs * self.cfg.pvt_period_s))
        self._initial_scan()
        pos = 0
        next_tick = tick
        next_pvt = pvt_tick
        while pos + stride <= total:
            pos += stride
            for ch in list(self.channels):
                if ch.phase == ChannelPhase.DROPPED:
                    continue
                while ch.pos + ch.samples_needed() <= pos:
                    n = ch.samples_needed()
                    block = np.asarray(self.samples[ch.pos:ch.pos + n])
                    for ev in ch.advance(block):
                        self._on_subframe(ch, ev)
            now_s = pos / self.fs
            if self._confirm:
                for prn in sorted(self._confirm):
                    window = self._scan_window(pos)
                    if window is None:
                        self._confirm.clear()
                        break
                    self._scan_prn(prn, window, pos, now_s)
                    self._apt_evaluate(prn, now_s)
            if pos >= next_tick:
                self._retire_channels(now_s)
                self._rescan(pos, now_s)
                self._apt_tick(now_s)
                next_tick += tick
            if pos >= next_pvt:
                self._pvt_tick(now_s, pos)
                next_pvt += pvt_tick
        return self._report(pos / self.fs)

    def _on_subframe(self, ch: TrackingChannel, ev) -> None:
        self.subframes_decoded += 1
        rx_s = ev.arrival_sample / self.fs
        if ev.role == ChannelRole.PRIMARY and ev.subframe.valid:
            self.alerts.extend(
                self.navi.on_subframe(ev.prn, ev.subframe, rx_s))
        # arrival separations are re-checked on every new message in
        # addition to the scan cadence
        self._apt_evaluate(ev.prn, rx_s)

    def _report(self, processed_s: float) -> RunReport:
        rep = RunReport(input_path=self.cfg.input_path or "<memory>",
                        sample_rate_hz=self.fs, processed_s=processed_s,
                        alerts=self.alerts, pvt=self.pvt_records,
                        subframes_decoded=self.subframes_decoded)
        for ch in sorted(self.channels + self.dropped,
                         key=lambda c: c.state.channel_id):
            st = ch.state
            rep.channels.append(ChannelSummary(
                channel_id=st.channel_id, prn=st.prn,
                role=st.role.value, locked=st.lock,
                cn0_dbhz=round(st.cn0_dbhz, 1), epochs=st.epoch_count,
                subframes=ch.subframe_count))
        return rep


def run_trace(cfg: ReceiverConfig,
              samples: np.ndarray | None = None) -> RunReport:
    return Receiver(cfg, samples=samples).run()
