"""Code/carrier tracking channels and auxiliary-peak bookkeeping.

Each channel runs signal-synchronous epochs of one code period: the
number of samples consumed per epoch follows the code NCO, so epoch
boundaries land exactly on received code-period starts.  That makes the
boundary sample index (kept with sub-sample resolution) a direct
arrival-time measurement for pseudoranges and peak-separation checks.

Loops: second-order Costas PLL (atan discriminator) and a second-order
carrier-aided DLL with early/prompt/late spaced +/-0.5 chip using the
dot-product discriminator, which keeps cross terms from an interfering
signal copy zero-mean as long as that copy rotates relative to the
tracked carrier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numba import njit

from .cacode import generate_ca_code
from .constants import CHIP_RATE_HZ, CODE_LENGTH_CHIPS, L1_CARRIER_HZ
from .navmsg import StreamedSubframe, SubframeStreamDecoder


@njit(cache=True, fastmath=True)
def _correlate_epoch(samples, chips4, phase0, code_step, carr_phase,
                     carr_step, spacing):
    """Accumulate E/P/L over one epoch.

    ``phase0`` is the code phase at the first sample plus two code
    lengths (so early/late lookups never go negative); ``chips4`` is the
    code tiled four times.
    """
    e_re = e_im = p_re = p_im = l_re = l_im = 0.0
    ph_re = math.cos(carr_phase)
    ph_im = -math.sin(carr_phase)
    st_re = math.cos(carr_step)
    st_im = -math.sin(carr_step)
    phase = phase0
    for k in range(samples.shape[0]):
        s = samples[k]
        sr = s.real * ph_re - s.imag * ph_im
        si = s.real * ph_im + s.imag * ph_re
        cp = chips4[int(phase)]
        ce = chips4[int(phase + spacing)]
        cl = chips4[int(phase - spacing)]
        p_re += sr * cp
        p_im += si * cp
        e_re += sr * ce
        e_im += si * ce
        l_re += sr * cl
        l_im += si * cl
        tmp = ph_re * st_re - ph_im * st_im
        ph_im = ph_re * st_im + ph_im * st_re
        ph_re = tmp
        phase += code_step
    end_phase = phase - 3.0 * CODE_LENGTH_CHIPS
    return (complex(e_re, e_im), complex(p_re, p_im), complex(l_re, l_im),
            end_phase)


_chips4_cache: dict[int, np.ndarray] = {}


def _chips4(prn: int) -> np.ndarray:
    if prn not in _chips4_cache:
        c = generate_ca_code(prn).astype(np.float64)
        _chips4_cache[prn] = np.concatenate([c, c, c, c])
    return _chips4_cache[prn]


def _loop_gains(bandwidth_hz: float, damping: float = 0.7071):
    """(wn, proportional gain) with Bn = wn*(damping + 1/(4*damping))/2."""
    wn = 2.0 * bandwidth_hz / (damping + 1.0 / (4.0 * damping))
    return wn, 2.0 * damping * wn


class ChannelRole(Enum):
    PRIMARY = "primary"
    AUXILIARY = "auxiliary"


class ChannelPhase(Enum):
    PULL_IN = "pull_in"
    TRACKING = "tracking"
    DROPPED = "dropped"


@dataclass
class ChannelState:
    """Externally visible tracking state of a single channel."""
    prn: int
    channel_id: int
    role: ChannelRole
    code_phase_chips: float = 0.0     # remainder past the last boundary
    code_freq_chips: float = CHIP_RATE_HZ
    doppler_hz: float = 0.0
    cn0_dbhz: float = 0.0
    lock: bool = False
    bit_sync: bool = False
    epoch_count: int = 0
    last_boundary_sample: float = 0.0  # arrival of latest code-period start


@dataclass
class SubframeEvent:
    prn: int
    channel_id: int
    role: ChannelRole
    subframe: object                  # navmsg.Subframe
    arrival_sample: float             # boundary sample of subframe start
    bit_index: int


PULL_IN_EPOCHS = 64
SETTLE_EPOCHS = 240
WIDE_PLL_EPOCHS = 600


class TrackingChannel:
    """One tracked correlation peak of one PRN."""

    def __init__(self, prn: int, channel_id: int, role: ChannelRole,
                 sample_rate_hz: float, start_sample: int,
                 code_phase_chips: float, doppler_hz: float,
                 dll_bw_hz: float = 2.0, pll_bw_hz: float = 15.0,
                 cn0_lock_threshold_dbhz: float = 30.0):
        self.fs = sample_rate_hz
        self.state = ChannelState(prn=prn, channel_id=channel_id, role=role,
                                  code_phase_chips=code_phase_chips,
                                  doppler_hz=doppler_hz)
        self.phase = ChannelPhase.PULL_IN
        self.created_sample = start_sample
        self.pos = start_sample               # next sample to consume
        self.carr_phase = 0.0
        self.carr_freq = 2.0 * math.pi * doppler_hz     # rad/s
        self.state.code_freq_chips = CHIP_RATE_HZ * (
            1.0 + doppler_hz / L1_CARRIER_HZ)
        # virtual previous boundary, so the arrival phase is usable
        # before the first epoch completes
        self.state.last_boundary_sample = (
            start_sample - code_phase_chips * self.fs / CHIP_RATE_HZ)
        self.dll_bw = dll_bw_hz
        self.pll_bw = pll_bw_hz
        self.cn0_threshold = cn0_lock_threshold_dbhz
        self._dll_vel = 0.0
        self._pll_vel = self.carr_freq      # integrator holds the rate
        self._pull_prompts: list[complex] = []
        self._low_cn0_epochs = 0
        self._nb_acc = 0.0 + 0j
        self._wb_acc = 0.0
        self._nwpr_window = 0
        self._nwpr_aligned = False
        self._nwpr_ratios: list[float] = []
        # bit sync
        self._edge_hist = np.zeros(20, dtype=np.int64)
        self._prev_sign = 0
        self.bit_edge_epoch = -1          # epoch index of a bit's first epoch
        self._bit_acc = 0.0
        self._bit_acc_count = 0
        self._bit_number = 0
        self._bit_starts: dict[int, float] = {}
        self.decoder = SubframeStreamDecoder()
        self.subframe_count = 0
        # transmit-time anchor from the latest valid subframe
        self.anchor_tow_units: int | None = None
        self.anchor_week: int | None = None
        self.anchor_epoch: int | None = None

    # -- geometry of the next epoch -------------------------------------

    def samples_needed(self) -> int:
        chips_left = CODE_LENGTH_CHIPS - self.state.code_phase_chips
        step = self.state.code_freq_chips / self.fs
        return max(1, int(math.ceil(chips_left / step)))

    # -- main per-epoch update ------------------------------------------

    def advance(self, samples: np.ndarray) -> list[SubframeEvent]:
        """Process one epoch's samples (length from ``samples_needed``)."""
        st = self.state
        step = st.code_freq_chips / self.fs
        carr_step = self.carr_freq / self.fs
        e, p, l, end_phase = _correlate_epoch(
            samples, _chips4(st.prn),
            st.code_phase_chips + 2.0 * CODE_LENGTH_CHIPS,
            step, self.carr_phase, carr_step, 0.5)
        n = samples.shape[0]
        self.pos += n
        self.carr_phase = math.fmod(self.carr_phase + carr_step * n,
                                    2.0 * math.pi)
        st.code_phase_chips = end_phase % CODE_LENGTH_CHIPS
        # where the code phase crossed the period boundary
        boundary = self.pos - st.code_phase_chips / step
        st.last_boundary_sample = boundary
        st.epoch_count += 1

        events: list[SubframeEvent] = []
        if self.phase == ChannelPhase.PULL_IN:
            self._pull_prompts.append(p)
            if len(self._pull_prompts) >= PULL_IN_EPOCHS:
                self._finish_pull_in()
        elif self.phase == ChannelPhase.TRACKING:
            t_epoch = n / self.fs
            self._loop_update(e, p, l, t_epoch)
            self._cn0_update(p)
            events = self._bit_update(p, boundary)
        return events

    def _finish_pull_in(self) -> None:
        """One-shot residual Doppler estimate from squared prompt rotation."""
        z = np.array(self._pull_prompts[4:])
        zz = z[1:] * np.conj(z[:-1])
        acc = np.sum(zz ** 2 / (np.abs(zz) + 1e-30) ** 1)
        dphi = 0.5 * float(np.angle(acc))
        dfreq = dphi / (2.0 * math.pi * 1e-3)
        self.carr_freq += 2.0 * math.pi * dfreq
        self._pll_vel = self.carr_freq
        self.state.doppler_hz = self.carr_freq / (2.0 * math.pi)
        self.state.code_freq_chips = CHIP_RATE_HZ * (
            1.0 + self.state.doppler_hz / L1_CARRIER_HZ)
        self._pull_prompts.clear()
        self.phase = ChannelPhase.TRACKING

    def _loop_update(self, e: complex, p: complex, l: complex,
                     t_epoch: float) -> None:
        st = self.state
        pp = p.real * p.real + p.imag * p.imag
        if pp <= 0.0:
            return
        # Costas discriminator: half-plane atan so nav bit flips cancel
        if p.real != 0.0:
            pll_err = math.atan(p.imag / p.real)
        else:
            pll_err = math.copysign(math.pi / 2.0, p.imag)
        pll_bw = self.pll_bw if st.epoch_count > WIDE_PLL_EPOCHS else max(
            self.pll_bw, 25.0)
        wn, prop = _loop_gains(pll_bw)
        limit = 2.0 * math.pi * 8000.0
        self._pll_vel += wn * wn * pll_err * t_epoch
        self._pll_vel = max(min(self._pll_vel, limit), -limit)
        self.carr_freq = max(min(self._pll_vel + prop * pll_err, limit),
                             -limit)
        st.doppler_hz = self.carr_freq / (2.0 * math.pi)

        dll_err = 0.5 * ((e.real - l.real) * p.real
                         + (e.imag - l.imag) * p.imag) / pp
        dll_err = max(min(dll_err, 0.5), -0.5)
        # carrier aiding carries the dynamics, so the code loop only
        # mops up residuals; narrow it once the transients are gone
        dll_bw = self.dll_bw if st.epoch_count <= WIDE_PLL_EPOCHS else (
            0.25 * self.dll_bw)
        wn_d, prop_d = _loop_gains(dll_bw)
        self._dll_vel += wn_d * wn_d * dll_err * t_epoch
        aid = st.doppler_hz * (CHIP_RATE_HZ / L1_CARRIER_HZ)
        st.code_freq_chips = (CHIP_RATE_HZ + aid + self._dll_vel
                              + prop_d * dll_err)

    def _cn0_update(self, p: complex) -> None:
        st = self.state
        if (st.bit_sync and not self._nwpr_aligned
                and (st.epoch_count - self.bit_edge_epoch) % 20 == 0):
            # drop the window fragment that straddled a bit edge; from
            # here on each window covers exactly one nav bit
            self._nb_acc = 0.0 + 0j
            self._wb_acc = 0.0
            self._nwpr_window = 0
            self._nwpr_ratios.clear()
            self._nwpr_aligned = True
        self._nb_acc += p
        self._wb_acc += p.real * p.real + p.imag * p.imag
        self._nwpr_window += 1
        if self._nwpr_window == 20:
            nbp = abs(self._nb_acc) ** 2
            ratio = nbp / self._wb_acc if self._wb_acc > 0 else 0.0
            self._nwpr_ratios.append(ratio)
            if len(self._nwpr_ratios) > 10:
                self._nwpr_ratios.pop(0)
            mu = min(float(np.mean(self._nwpr_ratios)), 19.99)
            if mu > 1.0:
                st.cn0_dbhz = 10.0 * math.log10((mu - 1.0) / (20.0 - mu) / 1e-3)
            else:
                st.cn0_dbhz = 0.0
            self._nb_acc = 0.0 + 0j
            self._wb_acc = 0.0
            self._nwpr_window = 0
        if st.cn0_dbhz >= self.cn0_threshold and self._nwpr_ratios:
            self._low_cn0_epochs = 0
            if len(self._nwpr_ratios) >= 3:
                st.lock = True
        else:
            self._low_cn0_epochs += 1
            if self._low_cn0_epochs >= 50:
                st.lock = False

    # -- bit sync and message assembly ----------------------------------

    def _bit_update(self, p: complex, boundary: float) -> list[SubframeEvent]:
        st = self.state
        sign = 1 if p.real >= 0 else -1
        if not st.bit_sync:
            if st.epoch_count > SETTLE_EPOCHS:
                if self._prev_sign and sign != self._prev_sign:
                    self._edge_hist[st.epoch_count % 20] += 1
                total = int(self._edge_hist.sum())
                if total >= 25:
                    order = np.sort(self._edge_hist)
                    if order[-1] >= 2 * max(1, order[-2]):
                        best = int(np.argmax(self._edge_hist))
                        # first epoch of a bit has epoch_count % 20 == best
                        k = st.epoch_count + 2
                        k += (best - k) % 20
                        self.bit_edge_epoch = k
                        st.bit_sync = True
            self._prev_sign = sign
            return []
        self._prev_sign = sign
        rel = st.epoch_count - self.bit_edge_epoch
        if rel < -1:
            return []
        if rel >= 0:
            self._bit_acc += p.real
            self._bit_acc_count += 1
        if (rel + 1) % 20 != 0:
            return []
        # boundary just recorded is the start of the next bit
        events = []
        if rel >= 0 and self._bit_acc_count == 20:
            bit = 1 if self._bit_acc < 0 else 0
            for sf in self.decoder.feed(bit):
                ev = self._subframe_event(sf)
                if ev is not None:
                    events.append(ev)
            self._bit_number += 1
        self._bit_acc = 0.0
        self._bit_acc_count = 0
        self._bit_starts[self._bit_number] = boundary
        if len(self._bit_starts) > 720:
            for key in sorted(self._bit_starts)[:320]:
                del self._bit_starts[key]
        return events

    def _subframe_event(self, sf: StreamedSubframe) -> SubframeEvent | None:
        arrival = self._bit_starts.get(sf.bit_index)
        if arrival is None:
            return None
        ev = SubframeEvent(prn=self.state.prn,
                           channel_id=self.state.channel_id,
                           role=self.state.role, subframe=sf.subframe,
                           arrival_sample=arrival, bit_index=sf.bit_index)
        self.subframe_count += 1
        if sf.subframe.valid:
            self.anchor_tow_units = sf.subframe.tow_units
            self.anchor_week = sf.subframe.week
            self.anchor_epoch = self.bit_edge_epoch + 20 * sf.bit_index
        return ev

    # -- observables -----------------------------------------------------

    def has_time(self) -> bool:
        return self.anchor_tow_units is not None and self.state.lock

    def tx_time_at(self, sample: float) -> float | None:
        """GPS transmit time (s of week) of the signal received at ``sample``."""
        if self.anchor_tow_units is None:
            return None
        st = self.state
        # anchor boundary is the START of the anchor epoch; the latest
        # boundary is the END of the current one, hence the +1
        epochs_since = st.epoch_count - self.anchor_epoch + 1
        tx_latest = self.anchor_tow_units * 6.0 + epochs_since * 1e-3
        dt_rx = (sample - st.last_boundary_sample) / self.fs
        return tx_latest + dt_rx * (st.code_freq_chips / CHIP_RATE_HZ)

    def arrival_delay_vs(self, other: "TrackingChannel") -> float:
        """Arrival-time separation (s) to another channel of the same PRN.

        Compares code-boundary arrival phases modulo one code period,
        centered, so it is unambiguous for separations below half a
        period (0.5 ms).
        """
        period = self.fs * 1e-3
        d = (self.state.last_boundary_sample
             - other.state.last_boundary_sample) % period
        if d > period / 2:
            d -= period
        return d / self.fs


# ---------------------------------------------------------------------------
# auxiliary peak queueing / channel allocation
# ---------------------------------------------------------------------------


@dataclass
class PeakRecord:
    code_phase_chips: float
    doppler_hz: float
    magnitude: float
    last_seen_s: float
    enqueued_s: float
    last_evaluated_s: float = float("-inf")


def _chip_dist(a: float, b: float) -> float:
    d = abs(a - b) % CODE_LENGTH_CHIPS
    return min(d, CODE_LENGTH_CHIPS - d)


class PeakLedger:
    """Per-PRN FIFO of correlation peaks awaiting an auxiliary channel.

    Scan results refresh known peaks; peaks already matched by a live
    channel are not queued.  Assignment order: never-evaluated peaks
    first in arrival order, then the one evaluated longest ago, so every
    peak is revisited round-robin.
    """

    def __init__(self, merge_radius_chips: float = 0.5,
                 stale_after_s: float = 3.0):
        self.radius = merge_radius_chips
        self.stale_after = stale_after_s
        self._queues: dict[int, list[PeakRecord]] = {}

    def observe(self, prn: int, peaks, tracked_phases_chips, now_s: float):
        queue = self._queues.setdefault(prn, [])
        for pk in peaks:
            if any(_chip_dist(pk.code_phase_chips, tp) <= self.radius
                   for tp in tracked_phases_chips):
                continue
            for rec in queue:
                if _chip_dist(pk.code_phase_chips, rec.code_phase_chips) \
                        <= self.radius:
                    rec.code_phase_chips = pk.code_phase_chips
                    rec.doppler_hz = pk.doppler_hz
                    rec.magnitude = pk.magnitude
                    rec.last_seen_s = now_s
                    break
            else:
                queue.append(PeakRecord(
                    code_phase_chips=pk.code_phase_chips,
                    doppler_hz=pk.doppler_hz, magnitude=pk.magnitude,
                    last_seen_s=now_s, enqueued_s=now_s))
        queue[:] = [r for r in queue
                    if now_s - r.last_seen_s <= self.stale_after
                    and not any(_chip_dist(r.code_phase_chips, tp)
                                <= self.radius
                                for tp in tracked_phases_chips)]

    def next_candidate(self, prn: int) -> PeakRecord | None:
        queue = self._queues.get(prn, [])
        if not queue:
            return None
        queue.sort(key=lambda r: (r.last_evaluated_s, r.enqueued_s))
        return queue.pop(0)

    def mark_evaluated(self, prn: int, code_phase_chips: float,
                       doppler_hz: float, now_s: float) -> None:
        """Return an evaluated (cleared) peak to the back of the queue."""
        queue = self._queues.setdefault(prn, [])
        queue.append(PeakRecord(code_phase_chips=code_phase_chips,
                                doppler_hz=doppler_hz, magnitude=0.0,
                                last_seen_s=now_s, enqueued_s=now_s,
                                last_evaluated_s=now_s))

    def pending(self, prn: int) -> int:
        return len(self._queues.get(prn, []))
