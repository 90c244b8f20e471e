"""Navigation message codec and broadcast orbit evaluation.

The message is organized as 300-bit subframes of ten 30-bit words
(24 data + 6 parity).  Word parity is the (32,26) extended Hamming
scheme with two carry bits taken from the tail of the previous word;
data bits are XORed with the previous word's last parity bit before
transmission, which makes decoding insensitive to a wholesale polarity
flip of the stream.

Subframe layout (data bits, before parity):

    word 1   preamble(8) tlm(14) spare(2)
    word 2   tow(17) subframe_id(3) spare(2) solved(2)
    word 3   week(10) payload...
    word 4-9 payload
    word 10  payload... solved(2)

Words 2 and 10 reserve their last two data bits ("solved" bits) chosen
so that the word's final parity bits come out as 00, giving every
subframe a known parity carry-in.  Payload capacity is 180 bits.

Subframes carry: 1 clock, 2+3 ephemeris, 4 ionospheric page,
5 almanac page.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import (
    EARTH_GM,
    EARTH_ROTATION_RATE,
    GPS_PI,
    PREAMBLE_BITS,
    SUBFRAME_BITS,
    TOW_WRAP_UNITS,
    WEEK_SECONDS,
    WORD_BITS,
)


class EncodingError(ValueError):
    """A field value does not fit its allotted width/scale."""


class DegenerateOrbitError(ValueError):
    """Broadcast orbit cannot be evaluated (non-physical elements)."""


class KeplerConvergenceError(ArithmeticError):
    """Kepler's equation failed to converge."""


# ---------------------------------------------------------------------------
# word parity
# ---------------------------------------------------------------------------

# 1-based data-bit index sets feeding each parity bit, plus which carry
# bit (29 or 30 of the previous word) seeds it.
_PARITY_TABLE = (
    (29, (1, 2, 3, 5, 6, 10, 11, 12, 13, 14, 17, 18, 20, 23)),
    (30, (2, 3, 4, 6, 7, 11, 12, 13, 14, 15, 18, 19, 21, 24)),
    (29, (1, 3, 4, 5, 7, 8, 12, 13, 14, 15, 16, 19, 20, 22)),
    (30, (2, 4, 5, 6, 8, 9, 13, 14, 15, 16, 17, 20, 21, 23)),
    (30, (1, 3, 5, 6, 7, 9, 10, 14, 15, 16, 17, 18, 21, 22, 24)),
    (29, (3, 5, 6, 8, 9, 10, 11, 13, 15, 19, 22, 23, 24)),
)


def word_parity(data: np.ndarray, carry29: int, carry30: int) -> np.ndarray:
    """Six parity bits for 24 data bits and the previous word's tail."""
    out = np.empty(6, dtype=np.uint8)
    for k, (carry_sel, idxs) in enumerate(_PARITY_TABLE):
        acc = carry29 if carry_sel == 29 else carry30
        for i in idxs:
            acc ^= int(data[i - 1])
        out[k] = acc
    return out


def encode_word(data: np.ndarray, carry29: int, carry30: int) -> np.ndarray:
    """30 transmitted bits: data XOR carry30, then parity."""
    par = word_parity(data, carry29, carry30)
    tx = np.empty(WORD_BITS, dtype=np.uint8)
    tx[:24] = data ^ carry30
    tx[24:] = par
    return tx


def check_word(received: np.ndarray, carry29: int, carry30: int):
    """Return (data bits, parity_ok) for one received 30-bit word."""
    data = (received[:24] ^ carry30).astype(np.uint8)
    par = word_parity(data, carry29, carry30)
    ok = bool(np.array_equal(par, received[24:]))
    return data, ok


def _solve_tail_bits(data: np.ndarray, carry29: int, carry30: int) -> None:
    """Fix data[22:24] so the word's last two parity bits are 00."""
    data[22] = 0
    data[23] = 0
    par = word_parity(data, carry29, carry30)
    d24 = int(par[4])              # D29 = base ^ d24
    d23 = int(par[5]) ^ d24        # D30 = base ^ d23 ^ d24
    data[22] = d23
    data[23] = d24


# ---------------------------------------------------------------------------
# bit packing
# ---------------------------------------------------------------------------


class _BitWriter:
    def __init__(self, n_bits: int):
        self.bits = np.zeros(n_bits, dtype=np.uint8)
        self.pos = 0

    def put(self, value: int, width: int, signed: bool = False) -> None:
        lo = -(1 << (width - 1)) if signed else 0
        hi = (1 << (width - 1)) if signed else (1 << width)
        if not (lo <= value < hi):
            raise EncodingError(
                f"value {value} out of range for {width}-bit "
                f"{'signed' if signed else 'unsigned'} field")
        raw = value & ((1 << width) - 1)
        for k in range(width - 1, -1, -1):
            self.bits[self.pos] = (raw >> k) & 1
            self.pos += 1

    def put_scaled(self, value: float, width: int, scale: float,
                   signed: bool = False) -> None:
        self.put(int(round(value / scale)), width, signed)


class _BitReader:
    def __init__(self, bits: np.ndarray):
        self.bits = bits
        self.pos = 0

    def take(self, width: int, signed: bool = False) -> int:
        raw = 0
        for _ in range(width):
            raw = (raw << 1) | int(self.bits[self.pos])
            self.pos += 1
        if signed and raw >= (1 << (width - 1)):
            raw -= 1 << width
        return raw

    def take_scaled(self, width: int, scale: float,
                    signed: bool = False) -> float:
        return self.take(width, signed) * scale


# ---------------------------------------------------------------------------
# payload dataclasses and their field codecs
# ---------------------------------------------------------------------------

_SC = GPS_PI  # radians per semicircle


@dataclass
class ClockPayload:
    af0: float = 0.0          # s
    iod: int = 0


@dataclass
class EphemerisA:
    iod: int = 0
    sqrt_a: float = 0.0       # m^0.5
    ecc: float = 0.0
    toe: float = 0.0          # s of week
    m0: float = 0.0           # rad


@dataclass
class EphemerisB:
    iod: int = 0
    incl: float = 0.0         # rad
    raan: float = 0.0         # rad
    argp: float = 0.0         # rad


@dataclass
class IonoPage:
    alpha: tuple = (0.0, 0.0, 0.0, 0.0)
    beta: tuple = (0.0, 0.0, 0.0, 0.0)


@dataclass
class AlmanacPage:
    page_id: int = 1
    prn: int = 0
    sqrt_a: float = 0.0
    ecc: float = 0.0
    incl: float = 0.0
    raan: float = 0.0
    argp: float = 0.0
    m0: float = 0.0


_IONO_SCALES = (2.0 ** -30, 2.0 ** -27, 2.0 ** -24, 2.0 ** -24,
                2.0 ** 11, 2.0 ** 14, 2.0 ** 16, 2.0 ** 16)


def _encode_payload(sf_id: int, payload, w: _BitWriter) -> None:
    if sf_id == 1:
        w.put_scaled(payload.af0, 22, 2.0 ** -31, signed=True)
        w.put(payload.iod, 8)
    elif sf_id == 2:
        w.put(payload.iod, 8)
        w.put_scaled(payload.sqrt_a, 32, 2.0 ** -19)
        w.put_scaled(payload.ecc, 32, 2.0 ** -33)
        w.put_scaled(payload.toe, 16, 2.0 ** 4)
        w.put_scaled(payload.m0 / _SC, 32, 2.0 ** -31, signed=True)
    elif sf_id == 3:
        w.put(payload.iod, 8)
        w.put_scaled(payload.incl / _SC, 32, 2.0 ** -31, signed=True)
        w.put_scaled(payload.raan / _SC, 32, 2.0 ** -31, signed=True)
        w.put_scaled(payload.argp / _SC, 32, 2.0 ** -31, signed=True)
    elif sf_id == 4:
        w.put(1, 8)  # single iono page
        for val, scale in zip(payload.alpha + payload.beta, _IONO_SCALES):
            w.put_scaled(val, 8, scale, signed=True)
    elif sf_id == 5:
        w.put(payload.page_id, 8)
        w.put(payload.prn, 8)
        w.put_scaled(payload.sqrt_a, 24, 2.0 ** -11)
        w.put_scaled(payload.ecc, 16, 2.0 ** -21)
        w.put_scaled(payload.incl / _SC, 24, 2.0 ** -23, signed=True)
        w.put_scaled(payload.raan / _SC, 24, 2.0 ** -23, signed=True)
        w.put_scaled(payload.argp / _SC, 24, 2.0 ** -23, signed=True)
        w.put_scaled(payload.m0 / _SC, 24, 2.0 ** -23, signed=True)
    else:
        raise EncodingError(f"subframe id {sf_id} not in 1..5")


def _decode_payload(sf_id: int, r: _BitReader):
    if sf_id == 1:
        return ClockPayload(af0=r.take_scaled(22, 2.0 ** -31, signed=True),
                            iod=r.take(8))
    if sf_id == 2:
        return EphemerisA(iod=r.take(8),
                          sqrt_a=r.take_scaled(32, 2.0 ** -19),
                          ecc=r.take_scaled(32, 2.0 ** -33),
                          toe=r.take_scaled(16, 2.0 ** 4),
                          m0=r.take_scaled(32, 2.0 ** -31, signed=True) * _SC)
    if sf_id == 3:
        return EphemerisB(iod=r.take(8),
                          incl=r.take_scaled(32, 2.0 ** -31, signed=True) * _SC,
                          raan=r.take_scaled(32, 2.0 ** -31, signed=True) * _SC,
                          argp=r.take_scaled(32, 2.0 ** -31, signed=True) * _SC)
    if sf_id == 4:
        r.take(8)
        vals = [r.take_scaled(8, s, signed=True) for s in _IONO_SCALES]
        return IonoPage(alpha=tuple(vals[:4]), beta=tuple(vals[4:]))
    if sf_id == 5:
        return AlmanacPage(page_id=r.take(8),
                           prn=r.take(8),
                           sqrt_a=r.take_scaled(24, 2.0 ** -11),
                           ecc=r.take_scaled(16, 2.0 ** -21),
                           incl=r.take_scaled(24, 2.0 ** -23, signed=True) * _SC,
                           raan=r.take_scaled(24, 2.0 ** -23, signed=True) * _SC,
                           argp=r.take_scaled(24, 2.0 ** -23, signed=True) * _SC,
                           m0=r.take_scaled(24, 2.0 ** -23, signed=True) * _SC)
    raise EncodingError(f"subframe id {sf_id} not in 1..5")


# ---------------------------------------------------------------------------
# subframes
# ---------------------------------------------------------------------------


@dataclass
class Subframe:
    sf_id: int
    tow_units: int            # time of week in 6 s units at subframe start
    week: int
    payload: object
    valid: bool = True        # parity clean on every word


_PREAMBLE = np.array(PREAMBLE_BITS, dtype=np.uint8)


def encode_subframe(sf: Subframe) -> np.ndarray:
    """Encode to 300 transmitted bits (parity carry-in is 00 by design)."""
    if not 1 <= sf.sf_id <= 5:
        raise EncodingError(f"subframe id {sf.sf_id} not in 1..5")
    if not 0 <= sf.tow_units < TOW_WRAP_UNITS:
        raise EncodingError(f"tow {sf.tow_units} outside week")
    if not 0 <= sf.week < 1024:
        raise EncodingError(f"week {sf.week} not a 10-bit value")

    payload = _BitWriter(180)
    _encode_payload(sf.sf_id, sf.payload, payload)

    words = np.zeros((10, 24), dtype=np.uint8)
    words[0, :8] = _PREAMBLE
    w2 = _BitWriter(24)
    w2.put(sf.tow_units, 17)
    w2.put(sf.sf_id, 3)
    words[1] = w2.bits
    w3 = _BitWriter(24)
    w3.put(sf.week, 10)
    w3.bits[10:] = payload.bits[:14]
    words[2] = w3.bits
    for k in range(6):
        words[3 + k] = payload.bits[14 + 24 * k:14 + 24 * (k + 1)]
    words[9, :22] = payload.bits[158:180]

    tx = np.empty(SUBFRAME_BITS, dtype=np.uint8)
    c29 = c30 = 0
    for k in range(10):
        if k in (1, 9):
            _solve_tail_bits(words[k], c29, c30)
        enc = encode_word(words[k], c29, c30)
        tx[k * WORD_BITS:(k + 1) * WORD_BITS] = enc
        c29, c30 = int(enc[28]), int(enc[29])
    return tx


def decode_subframe(bits: np.ndarray, carry29: int = 0, carry30: int = 0):
    """Decode 300 received bits.

    Returns a Subframe (``valid`` False and a best-effort payload when
    any word fails parity).  Polarity of the stream does not matter as
    long as the carry bits come from the same stream.
    """
    data = np.empty((10, 24), dtype=np.uint8)
    all_ok = True
    c29, c30 = carry29, carry30
    for k in range(10):
        word = bits[k * WORD_BITS:(k + 1) * WORD_BITS]
        data[k], ok = check_word(word, c29, c30)
        all_ok &= ok
        c29, c30 = int(word[28]), int(word[29])

    r2 = _BitReader(data[1])
    tow = r2.take(17)
    sf_id = r2.take(3)
    r3 = _BitReader(data[2])
    week = r3.take(10)
    payload_bits = np.concatenate([data[2][10:], data[3:9].ravel(),
                                   data[9][:22]])
    try:
        payload = _decode_payload(sf_id, _BitReader(payload_bits))
    except EncodingError:
        payload = None
        all_ok = False
    if not 0 <= tow < TOW_WRAP_UNITS:
        all_ok = False
    return Subframe(sf_id=sf_id, tow_units=tow, week=week,
                    payload=payload, valid=all_ok)


# ---------------------------------------------------------------------------
# streaming decode with preamble search
# ---------------------------------------------------------------------------


@dataclass
class StreamedSubframe:
    subframe: Subframe
    bit_index: int            # stream index of the subframe's first bit
    inverted: bool


class SubframeStreamDecoder:
    """Incremental bit-stream decoder.

    Feed hard bit decisions one at a time; complete subframes come back
    once the preamble alignment is confirmed by parity on two
    consecutive words.  Alignment survives until two subframes in a row
    fail parity.
    """

    LOCK_WORDS = 2

    def __init__(self):
        self._bits: list[int] = []
        self._base = 0               # stream index of self._bits[0]
        self._locked = False
        self._inverted = False
        self._next_start = 0         # stream index of next subframe start
        self._bad_streak = 0

    @property
    def locked(self) -> bool:
        return self._locked

    def feed(self, bit: int) -> list[StreamedSubframe]:
        self._bits.append(int(bit))
        out: list[StreamedSubframe] = []
        if not self._locked:
            self._try_lock()
        while self._locked and self._have(self._next_start,
                                          SUBFRAME_BITS):
            out.append(self._emit())
        return out

    def feed_many(self, bits) -> list[StreamedSubframe]:
        out = []
        for b in bits:
            out.extend(self.feed(b))
        return out

    # -- internals -----------------------------------------------------

    def _have(self, start: int, count: int) -> bool:
        return start >= self._base and len(self._bits) + self._base >= start + count

    def _window(self, start: int, count: int) -> np.ndarray:
        i = start - self._base
        return np.array(self._bits[i:i + count], dtype=np.uint8)

    def _carries(self, start: int) -> tuple[int, int]:
        if start - 2 >= self._base:
            w = self._window(start - 2, 2)
            return int(w[0]), int(w[1])
        # solved bits guarantee 00 at subframe starts (11 when inverted)
        pol = 1 if self._inverted else 0
        return pol, pol

    def _try_lock(self) -> None:
        need = 8 + self.LOCK_WORDS * WORD_BITS
        total = self._base + len(self._bits)
        p = total - need
        if p < self._base:
            return
        w = self._window(p, 8)
        if np.array_equal(w, _PREAMBLE):
            inverted = False
        elif np.array_equal(w, 1 - _PREAMBLE):
            inverted = True
        else:
            return
        self._inverted = inverted
        c29, c30 = self._carries(p)
        start = p
        for k in range(self.LOCK_WORDS):
            word = self._window(start + k * WORD_BITS, WORD_BITS)
            _, ok = check_word(word, c29, c30)
            if not ok:
                return
            c29, c30 = int(word[28]), int(word[29])
        self._locked = True
        self._next_start = p
        self._bad_streak = 0

    def _emit(self) -> StreamedSubframe:
        start = self._next_start
        c29, c30 = self._carries(start)
        sf = decode_subframe(self._window(start, SUBFRAME_BITS), c29, c30)
        self._next_start = start + SUBFRAME_BITS
        if sf.valid:
            self._bad_streak = 0
        else:
            self._bad_streak += 1
            if self._bad_streak >= 2:
                self._locked = False
        # drop bits well behind the frame cursor
        keep_from = self._next_start - 2
        if keep_from > self._base:
            del self._bits[:keep_from - self._base]
            self._base = keep_from
        return StreamedSubframe(subframe=sf, bit_index=start,
                                inverted=self._inverted)


# ---------------------------------------------------------------------------
# assembled ephemeris and orbit evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ephemeris:
    sqrt_a: float             # m^0.5
    ecc: float
    incl: float               # rad
    raan: float               # rad, at weekly epoch
    argp: float               # rad
    m0: float                 # rad, mean anomaly at toe
    toe: float                # s of week
    af0: float = 0.0          # satellite clock bias, s
    iod: int = 0

    def quantized(self) -> "Ephemeris":
        """Snap all fields onto the broadcast scaling grid."""
        sf1 = ClockPayload(af0=self.af0, iod=self.iod)
        sf2 = EphemerisA(iod=self.iod, sqrt_a=self.sqrt_a, ecc=self.ecc,
                         toe=self.toe, m0=self.m0)
        sf3 = EphemerisB(iod=self.iod, incl=self.incl, raan=self.raan,
                         argp=self.argp)
        out = []
        for sf_id, payload in ((1, sf1), (2, sf2), (3, sf3)):
            bits = encode_subframe(Subframe(sf_id, 0, 0, payload))
            out.append(decode_subframe(bits).payload)
        c, a, b = out
        return Ephemeris(sqrt_a=a.sqrt_a, ecc=a.ecc, incl=b.incl,
                         raan=b.raan, argp=b.argp, m0=a.m0, toe=a.toe,
                         af0=c.af0, iod=self.iod)


def assemble_ephemeris(clock: ClockPayload, part_a: EphemerisA,
                       part_b: EphemerisB) -> Ephemeris:
    """Join the three broadcast pieces; issue-of-data must agree."""
    if not (clock.iod == part_a.iod == part_b.iod):
        raise ValueError("issue of data mismatch across subframes")
    return Ephemeris(sqrt_a=part_a.sqrt_a, ecc=part_a.ecc, incl=part_b.incl,
                     raan=part_b.raan, argp=part_b.argp, m0=part_a.m0,
                     toe=part_a.toe, af0=clock.af0, iod=part_a.iod)


def solve_kepler(mean_anomaly: float, ecc: float,
                 tol: float = 1e-12, max_iter: int = 40) -> float:
    """Eccentric anomaly by Newton iteration (Danby's starter)."""
    s = math.sin(mean_anomaly)
    E = mean_anomaly + 0.85 * ecc * (1.0 if s >= 0.0 else -1.0)
    for _ in range(max_iter):
        dE = (E - ecc * math.sin(E) - mean_anomaly) / (1.0 - ecc * math.cos(E))
        E -= dE
        if abs(dE) < tol:
            return E
    raise KeplerConvergenceError(
        f"no convergence for M={mean_anomaly} e={ecc}")


def satellite_position(eph: Ephemeris, t_sow: float) -> np.ndarray:
    """ECEF position (m) of the satellite at GPS time ``t_sow``.

    Pure Keplerian propagation of the broadcast elements with the
    Earth-rotation-corrected ascending node; no perturbation terms.
    """
    if eph.sqrt_a <= 0.0:
        raise DegenerateOrbitError(f"sqrt_a={eph.sqrt_a}")
    if not 0.0 <= eph.ecc < 1.0:
        raise DegenerateOrbitError(f"eccentricity={eph.ecc}")
    a = eph.sqrt_a ** 2
    n = math.sqrt(EARTH_GM / a ** 3)
    tk = t_sow - eph.toe
    if tk > WEEK_SECONDS / 2:
        tk -= WEEK_SECONDS
    elif tk < -WEEK_SECONDS / 2:
        tk += WEEK_SECONDS
    M = eph.m0 + n * tk
    E = solve_kepler(M, eph.ecc)
    sinv = math.sqrt(1.0 - eph.ecc ** 2) * math.sin(E)
    cosv = math.cos(E) - eph.ecc
    v = math.atan2(sinv, cosv)
    u = v + eph.argp
    r = a * (1.0 - eph.ecc * math.cos(E))
    x_orb = r * math.cos(u)
    y_orb = r * math.sin(u)
    node = (eph.raan - EARTH_ROTATION_RATE * tk
            - EARTH_ROTATION_RATE * eph.toe)
    cosn, sinn = math.cos(node), math.sin(node)
    cosi, sini = math.cos(eph.incl), math.sin(eph.incl)
    return np.array([
        x_orb * cosn - y_orb * cosi * sinn,
        x_orb * sinn + y_orb * cosi * cosn,
        y_orb * sini,
    ])
