"""Scene forging: synthesize baseband traces with optional spoofing.

A scene is a receiver at a fixed ECEF location, a constellation built
to requested azimuth/elevation angles, and a set of signal copies per
satellite (line of sight, multipath echo, spoofer transmissions).  The
sample stream is physically consistent: each copy's carrier phase is
tied to its propagation delay, so Doppler, code rate, and pseudorange
evolution all follow from satellite motion along the broadcast orbits.
The receiver under test therefore sees the same world it reconstructs
from the decoded ephemerides.

Output is interleaved complex float32 plus a JSON sidecar describing
the scene (and, optionally, a reference file of expected broadcast
parameters for the message vetting stage).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from numba import njit

from .cacode import generate_ca_code
from .constants import (CHIP_RATE_HZ, CODE_LENGTH_CHIPS, L1_CARRIER_HZ,
                        SPEED_OF_LIGHT, TOW_WRAP_UNITS)
from .navmsg import (AlmanacPage, ClockPayload, Ephemeris, EphemerisA,
                     EphemerisB, IonoPage, Subframe, encode_subframe,
                     satellite_position)
from .pvt import EARTH_RADIUS_M

GPS_SHELL_RADIUS_M = 26_560_000.0
CHUNK_SECONDS = 0.04


# ---------------------------------------------------------------------------
# scene description
# ---------------------------------------------------------------------------


@dataclass
class SatelliteSpec:
    prn: int
    azimuth_deg: float
    elevation_deg: float
    cn0_dbhz: float = 45.0


@dataclass
class MessageMutations:
    """Content edits applied to the broadcast stream (trace seconds)."""
    target_prn: int | None = None
    tow_jump_units: int = 0
    tow_jump_at_s: float = 0.0
    week_offset: int = 0
    week_offset_at_s: float = 0.0
    zero_sqrt_a: bool = False
    ephemeris_swap_at_s: float = float("inf")


@dataclass
class AttackScenario:
    kind: str = "clean"
    start_s: float = 10.0
    delay_ns: float = 1200.0            # replay arrival offset
    power_db: float = 3.0               # spoof power over line of sight
    power_ramp_s: float = 2.0
    carrier_offset_hz: float | None = None
    drift_ns_per_s: float = 50.0        # seamless pull-off rate
    drift_ramp_s: float = 4.0
    push_azimuth_deg: float = 90.0      # horizontal direction of the push
    multipath_delay_ns: float = 300.0
    multipath_power_db: float = -6.0
    multipath_fade_hz: float = 17.0
    mutations: MessageMutations | None = None


SCENARIO_KINDS = ("clean", "multipath", "noncoherent_unmodified",
                  "noncoherent_modified", "coherent_modified",
                  "seamless_takeover")


def default_satellites() -> list[SatelliteSpec]:
    return [SatelliteSpec(1, 30.0, 62.0), SatelliteSpec(7, 95.0, 38.0),
            SatelliteSpec(13, 152.0, 24.0), SatelliteSpec(19, 214.0, 47.0),
            SatelliteSpec(24, 272.0, 17.0), SatelliteSpec(30, 331.0, 71.0)]


def default_receiver_ecef() -> tuple[float, float, float]:
    lat, lon = math.radians(40.0), math.radians(-105.2)
    return (EARTH_RADIUS_M * math.cos(lat) * math.cos(lon),
            EARTH_RADIUS_M * math.cos(lat) * math.sin(lon),
            EARTH_RADIUS_M * math.sin(lat))


@dataclass
class SceneConfig:
    sample_rate_hz: float = 2.046e6
    duration_s: float = 30.0
    seed: int = 1
    receiver_ecef: tuple[float, float, float] = field(
        default_factory=default_receiver_ecef)
    satellites: list[SatelliteSpec] = field(default_factory=default_satellites)
    start_tow_units: int = 43200        # multiple of 5: trace opens on id 1
    week: int = 320
    clock_drift_ppm: float = 0.0
    noise_cn0_ref_dbhz: float = 45.0
    scenario: AttackScenario = field(default_factory=AttackScenario)


# ---------------------------------------------------------------------------
# constellation construction
# ---------------------------------------------------------------------------


def _enu_basis(p: np.ndarray):
    lat = math.asin(p[2] / np.linalg.norm(p))
    lon = math.atan2(p[1], p[0])
    east = np.array([-math.sin(lon), math.cos(lon), 0.0])
    north = np.array([-math.sin(lat) * math.cos(lon),
                      -math.sin(lat) * math.sin(lon), math.cos(lat)])
    up = p / np.linalg.norm(p)
    return east, north, up


def los_unit(receiver_ecef, azimuth_deg: float,
             elevation_deg: float) -> np.ndarray:
    p = np.asarray(receiver_ecef, float)
    east, north, up = _enu_basis(p)
    az, el = math.radians(azimuth_deg), math.radians(elevation_deg)
    return (math.cos(el) * (math.sin(az) * east + math.cos(az) * north)
            + math.sin(el) * up)


def azel_of(receiver_ecef, sat_pos: np.ndarray) -> tuple[float, float]:
    p = np.asarray(receiver_ecef, float)
    east, north, up = _enu_basis(p)
    d = np.asarray(sat_pos, float) - p
    d = d / np.linalg.norm(d)
    el = math.degrees(math.asin(float(np.dot(d, up))))
    az = math.degrees(math.atan2(float(np.dot(d, east)),
                                 float(np.dot(d, north)))) % 360.0
    return az, el


def ephemeris_for_azel(receiver_ecef, azimuth_deg: float,
                       elevation_deg: float, t_ref_sow: float,
                       iod: int, af0: float = 0.0) -> Ephemeris:
    """Circular orbit whose satellite sits at the given az/el at t_ref.

    The orbit is built in the Earth-fixed frame of the position model:
    the node longitude is converted to a right ascension by adding the
    Earth rotation accumulated up to t_ref, so evaluating the returned
    ephemeris at t_ref lands on the requested line of sight.  All
    values pass through the broadcast quantization before use.
    """
    p = np.asarray(receiver_ecef, float)
    u = los_unit(p, azimuth_deg, elevation_deg)
    pu = float(np.dot(p, u))
    slant = -pu + math.sqrt(pu * pu + GPS_SHELL_RADIUS_M ** 2
                            - float(np.dot(p, p)))
    sat = p + u * slant
    sat_hat = sat / np.linalg.norm(sat)
    phi = math.asin(sat_hat[2])
    lam = math.atan2(sat_hat[1], sat_hat[0])
    incl = max(math.radians(55.0), abs(phi) + math.radians(5.0))
    arg_lat = math.asin(max(-1.0, min(1.0, math.sin(phi) / math.sin(incl))))
    lam_rel = math.atan2(math.sin(arg_lat) * math.cos(incl),
                         math.cos(arg_lat))
    node = lam - lam_rel
    omega_e = 7.2921151467e-5
    toe = round(t_ref_sow / 16.0) * 16.0
    sqrt_a = math.sqrt(GPS_SHELL_RADIUS_M)
    n_motion = math.sqrt(3.986005e14) / GPS_SHELL_RADIUS_M ** 1.5
    m0 = arg_lat - n_motion * (t_ref_sow - toe)
    raan = node + omega_e * t_ref_sow

    def wrap(x):
        return (x + math.pi) % (2.0 * math.pi) - math.pi

    eph = Ephemeris(sqrt_a=sqrt_a, ecc=0.0, incl=incl, raan=wrap(raan),
                    argp=0.0, m0=wrap(m0), toe=toe, af0=af0, iod=iod)
    return eph.quantized()


def build_constellation(cfg: SceneConfig) -> dict[int, Ephemeris]:
    t_ref = cfg.start_tow_units * 6.0
    out: dict[int, Ephemeris] = {}
    for k, spec in enumerate(cfg.satellites):
        af0 = ((k * 37 + 11) % 97 - 48) * 2.0 ** -31 * 64.0
        out[spec.prn] = ephemeris_for_azel(
            cfg.receiver_ecef, spec.azimuth_deg, spec.elevation_deg,
            t_ref, iod=(17 + spec.prn) % 256, af0=af0)
    return out


# ---------------------------------------------------------------------------
# navigation bit streams
# ---------------------------------------------------------------------------


def _payload_for(sf_id: int, prn: int, eph: Ephemeris, iono: IonoPage,
                 almanac: list[AlmanacPage], frame_index: int):
    if sf_id == 1:
        return ClockPayload(af0=eph.af0, iod=eph.iod)
    if sf_id == 2:
        return EphemerisA(iod=eph.iod, sqrt_a=eph.sqrt_a, ecc=eph.ecc,
                          toe=eph.toe, m0=eph.m0)
    if sf_id == 3:
        return EphemerisB(iod=eph.iod, incl=eph.incl, raan=eph.raan,
                          argp=eph.argp)
    if sf_id == 4:
        return iono
    return almanac[frame_index % len(almanac)]


def build_nav_bits(prn: int, eph: Ephemeris, iono: IonoPage,
                   almanac: list[AlmanacPage], start_tow_units: int,
                   week: int, n_subframes: int, t_ref_sow: float,
                   mutations: MessageMutations | None = None,
                   alt_eph: Ephemeris | None = None) -> np.ndarray:
    """Encode a contiguous bit stream starting one subframe before t_ref."""
    mut = mutations
    if mut is not None and mut.target_prn not in (None, prn):
        mut = None
    bits: list[np.ndarray] = []
    for k in range(n_subframes):
        tow = (start_tow_units - 1 + k) % TOW_WRAP_UNITS
        t_rel = tow * 6.0 - t_ref_sow
        tow_field, week_field, use_eph = tow, week, eph
        if mut is not None:
            if mut.tow_jump_units and t_rel >= mut.tow_jump_at_s:
                tow_field = (tow + mut.tow_jump_units) % TOW_WRAP_UNITS
            if mut.week_offset and t_rel >= mut.week_offset_at_s:
                week_field = week + mut.week_offset
            if alt_eph is not None and t_rel >= mut.ephemeris_swap_at_s:
                use_eph = alt_eph
        sf_id = tow_field % 5 + 1
        payload = _payload_for(sf_id, prn, use_eph, iono, almanac,
                               tow_field // 5)
        if (mut is not None and mut.zero_sqrt_a and sf_id == 2):
            payload = replace(payload, sqrt_a=0.0)
        sf = Subframe(sf_id=sf_id, tow_units=tow_field, week=week_field % 1024,
                      payload=payload)
        bits.append(encode_subframe(sf))
    return np.concatenate(bits).astype(np.int8)


def default_iono() -> IonoPage:
    return IonoPage(alpha=(18 * 2.0 ** -30, 14 * 2.0 ** -27,
                           -8 * 2.0 ** -24, -6 * 2.0 ** -24),
                    beta=(44 * 2.0 ** 11, 32 * 2.0 ** 14,
                          -12 * 2.0 ** 16, -9 * 2.0 ** 16))


def build_almanac(constellation: dict[int, Ephemeris]) -> list[AlmanacPage]:
    pages = []
    for page_id, (prn, eph) in enumerate(sorted(constellation.items()),
                                         start=1):
        pages.append(AlmanacPage(page_id=page_id, prn=prn,
                                 sqrt_a=eph.sqrt_a, ecc=eph.ecc,
                                 incl=eph.incl, raan=eph.raan,
                                 argp=eph.argp, m0=eph.m0))
    return pages


def _alt_ephemeris(eph: Ephemeris) -> Ephemeris:
    return replace(eph, iod=(eph.iod + 1) % 256,
                   raan=eph.raan + 3e-5, m0=eph.m0 + 2e-5).quantized()


# ---------------------------------------------------------------------------
# per-copy synthesis
# ---------------------------------------------------------------------------


@njit(cache=True, fastmath=True)
def _synth_copy(out, chips, bit_signs, t0_rel, dt, t_ref, d0, d_slope,
                amp, bit0_rel, f_off, phi0, af0):
    """Add one signal copy to ``out`` over a chunk.

    Times are relative to the trace start; ``d0``/``d_slope`` give the
    per-sample linear delay model for the chunk.  Carrier phase is
    minus 2*pi*f_L1 times the delay (zero-IF downconversion), plus an
    optional transmitter carrier offset.  Chip and bit indices follow
    the satellite clock, which runs ``af0`` ahead of system time.
    """
    w_l1 = 2.0 * math.pi * L1_CARRIER_HZ
    w_off = 2.0 * math.pi * f_off
    cr = CHIP_RATE_HZ
    nbits = bit_signs.shape[0]
    for k in range(out.shape[0]):
        a = amp[k]
        if a == 0.0:
            continue
        t = t0_rel + k * dt
        d = d0 + k * d_slope
        t_sv = t - d + af0
        ci = int((t_sv + t_ref) * cr) % CODE_LENGTH_CHIPS
        bi = int((t_sv - bit0_rel) * 50.0)
        if bi < 0:
            bi = 0
        elif bi >= nbits:
            bi = nbits - 1
        s = a * chips[ci] * bit_signs[bi]
        ph = -w_l1 * d + w_off * t + phi0
        out[k] += complex(s * math.cos(ph), s * math.sin(ph))


class _Copy:
    """One signal copy: delay model, amplitude schedule, content."""

    def __init__(self, prn: int, delay_fn, amp_points, bit_signs: np.ndarray,
                 bit0_rel: float, f_off: float, phi0: float,
                 af0: float = 0.0):
        self.prn = prn
        self.delay_fn = delay_fn          # trace seconds -> delay seconds
        self.amp_t = np.array([p[0] for p in amp_points])
        self.amp_v = np.array([p[1] for p in amp_points])
        self.bit_signs = bit_signs
        self.bit0_rel = bit0_rel
        self.f_off = f_off
        self.phi0 = phi0
        self.af0 = af0
        self.chips = generate_ca_code(prn).astype(np.float64)
        self._d_next: float | None = None

    def add_to(self, out: np.ndarray, t0_rel: float, dt: float,
               t_ref: float) -> None:
        n = out.shape[0]
        t1_rel = t0_rel + n * dt
        d0 = self._d_next if self._d_next is not None else self.delay_fn(
            t0_rel)
        d1 = self.delay_fn(t1_rel)
        self._d_next = d1
        if np.all(self.amp_v == self.amp_v[0]):
            amp = np.full(n, self.amp_v[0])
        else:
            amp = np.interp(t0_rel + np.arange(n) * dt, self.amp_t,
                            self.amp_v)
        _synth_copy(out, self.chips, self.bit_signs, t0_rel, dt, t_ref,
                    d0, (d1 - d0) / n, amp, self.bit0_rel, self.f_off,
                    self.phi0, self.af0)


# ---------------------------------------------------------------------------
# the forge
# ---------------------------------------------------------------------------


def _light_time_delay(eph: Ephemeris, receiver: np.ndarray,
                      t_rx_sow: float) -> float:
    tx = t_rx_sow
    for _ in range(3):
        pos = satellite_position(eph, tx)
        rng = float(np.linalg.norm(pos - receiver))
        tx = t_rx_sow - rng / SPEED_OF_LIGHT
    return t_rx_sow - tx


def _push_displacement(t_rel: float, start_s: float, ramp_s: float,
                       rate_m_s: float) -> float:
    """Distance moved along the push direction (smooth rate ramp)."""
    if t_rel <= start_s:
        return 0.0
    dt = t_rel - start_s
    if dt < ramp_s:
        return 0.5 * rate_m_s * dt * dt / ramp_s
    return rate_m_s * (dt - 0.5 * ramp_s)


class SceneForge:
    """Builds all signal copies for a scene and streams out samples."""

    def __init__(self, cfg: SceneConfig):
        if cfg.scenario.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind: {cfg.scenario.kind}")
        if abs(cfg.scenario.delay_ns) >= 4e5:
            raise ValueError("replay offsets must stay below 0.4 ms; larger "
                             "shifts are outside the separation test's "
                             "unambiguous range")
        self.cfg = cfg
        self.t_ref = cfg.start_tow_units * 6.0
        self.receiver = np.asarray(cfg.receiver_ecef, float)
        self.constellation = build_constellation(cfg)
        self.iono = default_iono()
        self.almanac = build_almanac(self.constellation)
        self.rng = np.random.default_rng(cfg.seed)
        n_sf = int(math.ceil(cfg.duration_s / 6.0)) + 3
        self._n_sf = n_sf
        self.copies = self._build_copies()
        cn0_ref = 10.0 ** (cfg.noise_cn0_ref_dbhz / 10.0)
        self.noise_sigma = math.sqrt(cfg.sample_rate_hz / cn0_ref)

    # -- copy construction -------------------------------------------------

    def _true_delay_fn(self, eph: Ephemeris):
        drift = self.cfg.clock_drift_ppm * 1e-6

        def fn(t_rel: float) -> float:
            base = _light_time_delay(eph, self.receiver, self.t_ref + t_rel)
            return base + drift * t_rel
        return fn

    def _push_delay_fn(self, eph: Ephemeris, sc: AttackScenario):
        east, north, _ = _enu_basis(self.receiver)
        az = math.radians(sc.push_azimuth_deg)
        push_dir = math.sin(az) * east + math.cos(az) * north
        rate = sc.drift_ns_per_s * 1e-9 * SPEED_OF_LIGHT
        base_fn = self._true_delay_fn(eph)
        t0 = sc.start_s + sc.power_ramp_s

        def fn(t_rel: float) -> float:
            base = base_fn(t_rel)
            x = _push_displacement(t_rel, t0, sc.drift_ramp_s, rate)
            if x == 0.0:
                return base
            pos = satellite_position(eph, self.t_ref + t_rel)
            spoofed = self.receiver + push_dir * x
            extra = (float(np.linalg.norm(pos - spoofed))
                     - float(np.linalg.norm(pos - self.receiver)))
            return base + extra / SPEED_OF_LIGHT
        return fn

    def _bits(self, prn: int, eph: Ephemeris,
              mutations: MessageMutations | None) -> np.ndarray:
        alt = None
        if mutations is not None and \
                mutations.ephemeris_swap_at_s != float("inf"):
            alt = _alt_ephemeris(eph)
        b = build_nav_bits(prn, eph, self.iono, self.almanac,
                           self.cfg.start_tow_units, self.cfg.week,
                           self._n_sf, self.t_ref, mutations, alt)
        return (1 - 2 * b.astype(np.float64))

    def _build_copies(self) -> list[_Copy]:
        cfg = self.cfg
        sc = cfg.scenario
        cn0_ref = 10.0 ** (cfg.noise_cn0_ref_dbhz / 10.0)
        bit0_rel = -6.0
        copies: list[_Copy] = []
        for spec in cfg.satellites:
            eph = self.constellation[spec.prn]
            amp = math.sqrt(10.0 ** (spec.cn0_dbhz / 10.0) / cn0_ref)
            phi0 = float(self.rng.uniform(0.0, 2.0 * math.pi))
            true_mut = sc.mutations if sc.kind == "coherent_modified" else None
            true_signs = self._bits(spec.prn, eph, true_mut)
            true_fn = self._true_delay_fn(eph)
            copies.append(_Copy(spec.prn, true_fn, [(0.0, amp)], true_signs,
                                bit0_rel, 0.0, phi0, af0=eph.af0))
            extra = self._attack_copy(spec, eph, amp, true_signs, true_fn)
            if extra is not None:
                copies.append(extra)
        return copies

    def _attack_copy(self, spec: SatelliteSpec, eph: Ephemeris, amp: float,
                     true_signs: np.ndarray, true_fn) -> _Copy | None:
        sc = self.cfg.scenario
        bit0_rel = -6.0
        phi0 = float(self.rng.uniform(0.0, 2.0 * math.pi))
        f_default = float(self.rng.uniform(60.0, 140.0)
                          * self.rng.choice([-1.0, 1.0]))
        if sc.kind == "multipath":
            off = sc.multipath_delay_ns * 1e-9
            gain = amp * 10.0 ** (sc.multipath_power_db / 20.0)
            return _Copy(spec.prn, lambda t: true_fn(t) + off, [(0.0, gain)],
                         true_signs, bit0_rel, sc.multipath_fade_hz
                         + 0.3 * spec.prn, phi0, af0=eph.af0)
        if sc.kind in ("noncoherent_unmodified", "noncoherent_modified"):
            off = sc.delay_ns * 1e-9
            gain = amp * 10.0 ** (sc.power_db / 20.0)
            f_off = (sc.carrier_offset_hz if sc.carrier_offset_hz is not None
                     else f_default)
            signs = true_signs
            if sc.kind == "noncoherent_modified" and sc.mutations is not None:
                signs = self._bits(spec.prn, eph, sc.mutations)
            ramp = [(0.0, 0.0), (max(sc.start_s - 1e-3, 0.0), 0.0),
                    (sc.start_s, gain)]
            return _Copy(spec.prn, lambda t: true_fn(t) + off, ramp, signs,
                         bit0_rel, f_off, phi0, af0=eph.af0)
        if sc.kind == "seamless_takeover":
            gain = amp * 10.0 ** (sc.power_db / 20.0)
            ramp = [(0.0, 0.0), (sc.start_s, 0.0),
                    (sc.start_s + sc.power_ramp_s, gain)]
            return _Copy(spec.prn, self._push_delay_fn(eph, sc), ramp,
                         true_signs, bit0_rel, 0.0, phi0, af0=eph.af0)
        return None

    # -- streaming ----------------------------------------------------------

    def chunks(self):
        """Yield complex64 chunks of the full scene."""
        cfg = self.cfg
        fs = cfg.sample_rate_hz
        total = int(round(cfg.duration_s * fs))
        per = int(round(CHUNK_SECONDS * fs))
        dt = 1.0 / fs
        done = 0
        for copy in self.copies:
            copy._d_next = None
        while done < total:
            n = min(per, total - done)
            out = np.zeros(n, dtype=np.complex128)
            t0_rel = done * dt
            for copy in self.copies:
                copy.add_to(out, t0_rel, dt, self.t_ref)
            noise = self.rng.standard_normal(2 * n)
            out += (self.noise_sigma / math.sqrt(2.0)) * (
                noise[0::2] + 1j * noise[1::2])
            yield out.astype(np.complex64)
            done += n

    # -- descriptions ---------------------------------------------------------

    def sidecar(self) -> dict:
        cfg = self.cfg
        sats = []
        for spec in cfg.satellites:
            eph = self.constellation[spec.prn]
            d0 = _light_time_delay(eph, self.receiver, self.t_ref)
            d1 = _light_time_delay(eph, self.receiver, self.t_ref + 1e-3)
            drift = cfg.clock_drift_ppm * 1e-6
            # chips are indexed by the satellite clock, which runs af0
            # ahead, so the content arrives af0 earlier than the group
            # delay alone would place it
            code_phase = ((d0 - eph.af0) % 1e-3) * CHIP_RATE_HZ
            doppler = -L1_CARRIER_HZ * ((d1 - d0) / 1e-3 + drift)
            pos = satellite_position(eph, self.t_ref)
            az, el = azel_of(self.receiver, pos)
            sats.append({
                "prn": spec.prn, "azimuth_deg": round(az, 6),
                "elevation_deg": round(el, 6), "cn0_dbhz": spec.cn0_dbhz,
                "delay_s_t0": d0, "code_phase_chips_t0": code_phase,
                "doppler_hz_t0": doppler,
                "ephemeris": _eph_dict(eph)})
        scen = asdict(cfg.scenario)
        if scen["mutations"] is not None:
            scen["mutations"] = {k: (v if v != float("inf") else "inf")
                                 for k, v in scen["mutations"].items()}
        return {
            "format": "cf32",
            "sample_rate_hz": cfg.sample_rate_hz,
            "duration_s": cfg.duration_s,
            "seed": cfg.seed,
            "t_ref_sow": self.t_ref,
            "start_tow_units": cfg.start_tow_units,
            "week": cfg.week,
            "noise_cn0_ref_dbhz": cfg.noise_cn0_ref_dbhz,
            "clock_drift_ppm": cfg.clock_drift_ppm,
            "receiver_ecef": [float(v) for v in self.receiver],
            "scenario": scen,
            "satellites": sats,
        }

    def reference(self) -> dict:
        """Expected broadcast content, for the message vetting stage."""
        return {
            "ephemerides": {str(prn): _eph_dict(eph)
                            for prn, eph in self.constellation.items()},
            "iono": {"alpha": list(self.iono.alpha),
                     "beta": list(self.iono.beta)},
            "almanac": {str(p.page_id): {
                "prn": p.prn, "sqrt_a": p.sqrt_a, "ecc": p.ecc,
                "incl": p.incl, "raan": p.raan, "argp": p.argp, "m0": p.m0}
                for p in self.almanac},
        }


def _eph_dict(eph: Ephemeris) -> dict:
    return {"sqrt_a": eph.sqrt_a, "ecc": eph.ecc, "incl": eph.incl,
            "raan": eph.raan, "argp": eph.argp, "m0": eph.m0,
            "toe": eph.toe, "af0": eph.af0, "iod": eph.iod}


def forge_scene(cfg: SceneConfig, out_path: str | None,
                reference_path: str | None = None):
    """Synthesize a scene.

    With ``out_path`` set, writes the trace and a ``.json`` sidecar
    next to it and returns the sidecar dict.  With ``out_path=None``,
    returns ``(samples, sidecar)`` in memory.
    """
    forge = SceneForge(cfg)
    side = forge.sidecar()
    if reference_path:
        with open(reference_path, "w") as fh:
            json.dump(forge.reference(), fh, indent=1)
        side["reference_path"] = os.path.abspath(reference_path)
    if out_path is None:
        parts = list(forge.chunks())
        samples = (np.concatenate(parts) if parts
                   else np.empty(0, np.complex64))
        return samples, side
    with open(out_path, "wb") as fh:
        for chunk in forge.chunks():
            chunk.tofile(fh)
    with open(out_path + ".json", "w") as fh:
        json.dump(side, fh, indent=1)
    return side
