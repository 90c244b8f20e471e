"""Parallel code-phase search acquisition.

For each Doppler bin the carrier-wiped window is circularly correlated
against the local code via FFT, magnitudes are accumulated over
noncoherent rounds, and every local maximum above the detection
threshold is reported -- not just the strongest -- so downstream logic
can track auxiliary peaks of the same PRN.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cacode import generate_ca_code
from .constants import CODE_LENGTH_CHIPS

_replica_cache: dict[tuple, np.ndarray] = {}
_wipe_cache: dict[tuple, np.ndarray] = {}


@dataclass
class AcquisitionConfig:
    doppler_span_hz: float = 5000.0
    doppler_step_hz: float = 500.0
    threshold_ratio: float = 2.5
    coherent_ms: int = 1
    noncoherent_rounds: int = 4
    max_peaks: int = 8
    merge_radius_chips: float = 0.5
    exclusion_chips: float = 1.0
    # two copies closer than a chip leave a single local maximum, so the
    # strongest peak's power row is additionally fit with a two-triangle
    # model; the split is accepted only when it beats the single-triangle
    # fit decisively and both copies carry real power
    split_search_chips: float = 1.6
    split_min_sep_chips: float = 0.45
    split_min_ratio: float = 0.25
    split_sse_fraction: float = 0.7
    split_min_samples_per_chip: float = 4.0
    # the fitted row is accumulated over more rounds than the grid
    # search (one Doppler bin only, so the extra cost is small); the
    # longer dwell tightens the fitted positions against noise
    row_rounds: int = 16


@dataclass
class AcquisitionPeak:
    code_phase_chips: float
    doppler_hz: float
    magnitude: float
    snr_ratio: float


@dataclass
class AcquisitionResult:
    prn: int
    peaks: list[AcquisitionPeak] = field(default_factory=list)
    noise_floor: float = 0.0
    # correlation power over one code period at the strongest peak's
    # Doppler bin; kept so separation evidence can be re-estimated
    # without trusting tracking loops that two overlapping copies bias
    row_power: np.ndarray | None = None
    row_doppler_hz: float = 0.0

    @property
    def detected(self) -> bool:
        return bool(self.peaks)


def peak_buffer_footprint(sample_rate_hz: float) -> int:
    """Floats needed to buffer one acquisition's peak evidence: 2*Fs/1000."""
    return int(round(2.0 * sample_rate_hz / 1000.0))


def row_fit_eligible(sample_rate_hz: float,
                     cfg: AcquisitionConfig | None = None) -> bool:
    """Whether the sample rate supports the sub-chip pair fit."""
    cfg = cfg or AcquisitionConfig()
    n_ms = int(round(sample_rate_hz * 1e-3))
    return n_ms >= cfg.split_min_samples_per_chip * CODE_LENGTH_CHIPS


def scan_window_rounds(sample_rate_hz: float,
                       cfg: AcquisitionConfig | None = None) -> int:
    """Coherent blocks a scan window should hold for full service."""
    cfg = cfg or AcquisitionConfig()
    if row_fit_eligible(sample_rate_hz, cfg):
        return max(cfg.noncoherent_rounds, cfg.row_rounds)
    return cfg.noncoherent_rounds


@dataclass
class PeakPairFit:
    """One- and two-triangle model fits of a correlation power row."""
    pos_a_chips: float          # stronger fitted copy
    pos_b_chips: float
    power_a: float
    power_b: float
    sse_pair: float
    pos_single_chips: float
    power_single: float
    sse_single: float

    @property
    def separation_chips(self) -> float:
        d = abs(self.pos_a_chips - self.pos_b_chips) % CODE_LENGTH_CHIPS
        return min(d, CODE_LENGTH_CHIPS - d)


def _best_single(x: np.ndarray, y: np.ndarray, grid: np.ndarray) -> tuple:
    """Least-squares of ``alpha*T(x-p)^2 + floor`` over a position grid."""
    t2 = np.clip(1.0 - np.abs(x[None, :] - grid[:, None]), 0.0, None) ** 2
    ones = np.ones_like(x)
    m = float(len(x))
    y1 = float(ones @ y)
    aa = np.einsum("ij,ij->i", t2, t2)
    ay = t2 @ y
    a_1 = t2 @ ones
    best = (np.inf, grid[0], 0.0)
    for i in range(len(grid)):
        det = aa[i] * m - a_1[i] * a_1[i]
        if det <= 0.0:
            continue
        alpha = (ay[i] * m - a_1[i] * y1) / det
        floor = (y1 - alpha * a_1[i]) / m
        if alpha <= 0.0:
            continue
        resid = y - alpha * t2[i] - floor
        sse = float(resid @ resid)
        if sse < best[0]:
            best = (sse, float(grid[i]), float(alpha))
    return best


def _best_pair(x: np.ndarray, y: np.ndarray, grid_a: np.ndarray,
               grid_b: np.ndarray) -> tuple:
    """Least-squares over a (pos_a, pos_b) grid.

    The model is ``alpha*T(x-pa)^2 + beta*T(x-pb)^2 + gamma*T(x-pa)*T(x-pb)
    + floor`` with T the unit correlation triangle.  alpha and beta must
    come out positive; gamma is free because the cross term's sign
    depends on the copies' relative carrier phase history.  Returns
    ``(sse, pos_a, pos_b, alpha, beta)`` for the best grid point.
    """
    ta = np.clip(1.0 - np.abs(x[None, :] - grid_a[:, None]), 0.0, None)
    tb = np.clip(1.0 - np.abs(x[None, :] - grid_b[:, None]), 0.0, None)
    ta2 = ta * ta
    tb2 = tb * tb
    ones = np.ones_like(x)
    m = float(len(x))
    y1 = float(ones @ y)
    bb = np.einsum("ij,ij->i", tb2, tb2)
    by = tb2 @ y
    b_1 = tb2 @ ones
    best = (np.inf, grid_a[0], grid_b[0], 0.0, 0.0)
    for i in range(len(grid_a)):
        a2 = ta2[i]
        aa = float(a2 @ a2)
        ay = float(a2 @ y)
        a_1 = float(a2 @ ones)
        ab = tb2 @ a2
        cross = tb * ta[i][None, :]
        cc = np.einsum("ij,ij->i", cross, cross)
        cy = cross @ y
        c_1 = cross @ ones
        c_a = cross @ a2
        c_b = np.einsum("ij,ij->i", cross, tb2)
        ridge = 1e-9 * (aa + m)
        for j in range(len(grid_b)):
            g = np.array([
                [aa, ab[j], c_a[j], a_1],
                [ab[j], bb[j], c_b[j], b_1[j]],
                [c_a[j], c_b[j], cc[j], c_1[j]],
                [a_1, b_1[j], c_1[j], m]])
            g[np.diag_indices(4)] += ridge
            rhs = np.array([ay, by[j], cy[j], y1])
            try:
                coef = np.linalg.solve(g, rhs)
            except np.linalg.LinAlgError:
                continue
            if coef[0] <= 0.0 or coef[1] <= 0.0:
                continue
            resid = (y - coef[0] * a2 - coef[1] * tb2[j]
                     - coef[2] * cross[j] - coef[3])
            sse = float(resid @ resid)
            if sse < best[0]:
                best = (sse, float(grid_a[i]), float(grid_b[j]),
                        float(coef[0]), float(coef[1]))
    return best


def fit_peak_pair(row_power: np.ndarray, center_chips: float,
                  pair_span_chips: float = 1.6,
                  jitter_chips: float = 0.35) -> PeakPairFit:
    """Fit one and two correlation triangles near ``center_chips``.

    ``row_power`` is one code period of correlation power (squared
    magnitude, noncoherently accumulated).  The single model refines the
    peak position within ``jitter_chips`` of the given center; the pair
    model additionally searches a second copy up to ``pair_span_chips``
    away on either side.  Positions come back in chips with sub-sample
    resolution; the caller judges whether the pair fit is convincing.
    """
    n = len(row_power)
    cps = CODE_LENGTH_CHIPS / n
    half = pair_span_chips + jitter_chips + 1.0 + 2.0 * cps
    axis = np.arange(n) * cps
    rel = (axis - center_chips + CODE_LENGTH_CHIPS / 2) % CODE_LENGTH_CHIPS \
        - CODE_LENGTH_CHIPS / 2
    mask = np.abs(rel) <= half
    x = rel[mask]
    y = row_power[mask].astype(np.float64)

    fine = 0.05 * cps
    grid_a = np.arange(-jitter_chips, jitter_chips + fine / 2, fine)

    sse1, single_pos, single_power = _best_single(x, y, grid_a)

    # coarse pass over the wide second-copy span, then a fine polish
    coarse = max(fine, 0.25 * cps)
    coarse_a = np.arange(-jitter_chips, jitter_chips + coarse / 2, coarse)
    grid_b = np.arange(-pair_span_chips, pair_span_chips + coarse / 2,
                       coarse)
    best_c = _best_pair(x, y, coarse_a, grid_b)
    span_a = np.arange(best_c[1] - coarse, best_c[1] + coarse * 1.01, fine)
    span_b = np.arange(best_c[2] - coarse, best_c[2] + coarse * 1.01, fine)
    best_f = _best_pair(x, y, span_a, span_b)
    sse2, pa, pb, amp_a, amp_b = min(best_c, best_f, key=lambda t: t[0])

    if amp_b > amp_a:
        pa, pb = pb, pa
        amp_a, amp_b = amp_b, amp_a
    return PeakPairFit(
        pos_a_chips=(center_chips + pa) % CODE_LENGTH_CHIPS,
        pos_b_chips=(center_chips + pb) % CODE_LENGTH_CHIPS,
        power_a=amp_a, power_b=amp_b, sse_pair=sse2,
        pos_single_chips=(center_chips + single_pos) % CODE_LENGTH_CHIPS,
        power_single=single_power, sse_single=sse1)


def _maybe_split(row_power: np.ndarray, peaks: list,
                 cfg: AcquisitionConfig) -> list:
    """Replace the strongest peak by two fitted copies when justified."""
    lead = peaks[0]
    fit = fit_peak_pair(row_power, lead.code_phase_chips,
                        pair_span_chips=cfg.split_search_chips)
    if (fit.sse_pair > cfg.split_sse_fraction * fit.sse_single
            or fit.power_b < cfg.split_min_ratio * fit.power_a
            or fit.separation_chips < cfg.split_min_sep_chips):
        return peaks

    def chip_dist(a: float, b: float) -> float:
        d = abs(a - b) % CODE_LENGTH_CHIPS
        return min(d, CODE_LENGTH_CHIPS - d)

    scale = (fit.power_b / fit.power_a) ** 0.5
    fitted = [
        AcquisitionPeak(code_phase_chips=fit.pos_a_chips,
                        doppler_hz=lead.doppler_hz,
                        magnitude=lead.magnitude,
                        snr_ratio=lead.snr_ratio),
        AcquisitionPeak(code_phase_chips=fit.pos_b_chips,
                        doppler_hz=lead.doppler_hz,
                        magnitude=lead.magnitude * scale,
                        snr_ratio=lead.snr_ratio * scale)]
    keep = [p for p in peaks
            if chip_dist(p.code_phase_chips, fit.pos_a_chips)
            > cfg.merge_radius_chips
            and chip_dist(p.code_phase_chips, fit.pos_b_chips)
            > cfg.merge_radius_chips]
    out = fitted + keep
    out.sort(key=lambda p: (-p.magnitude, p.code_phase_chips))
    return out[:cfg.max_peaks]


def _code_replica_fft(prn: int, n: int, sample_rate_hz: float) -> np.ndarray:
    key = (prn, n, sample_rate_hz)
    if key not in _replica_cache:
        idx = np.floor(np.arange(n) * (1.023e6 / sample_rate_hz)).astype(np.int64)
        code = generate_ca_code(prn).astype(np.float64)[idx % CODE_LENGTH_CHIPS]
        _replica_cache[key] = np.conj(np.fft.fft(code))
    return _replica_cache[key]


def _doppler_wipe_matrix(freqs: tuple, n: int, sample_rate_hz: float) -> np.ndarray:
    key = (freqs, n, sample_rate_hz)
    if key not in _wipe_cache:
        t = np.arange(n) / sample_rate_hz
        _wipe_cache[key] = np.exp(-2j * np.pi * np.outer(np.array(freqs), t))
    return _wipe_cache[key]


def _circular_dist(a, b, n):
    d = np.abs(a - b) % n
    return np.minimum(d, n - d)


def acquire(window: np.ndarray, prn: int, sample_rate_hz: float,
            cfg: AcquisitionConfig | None = None) -> AcquisitionResult:
    """Search one PRN over the Doppler/code-phase grid.

    ``window`` is complex baseband; it must hold at least one coherent
    integration length.  As many noncoherent rounds as fit (capped at
    the configured count) are accumulated.
    """
    cfg = cfg or AcquisitionConfig()
    n_ms = int(round(sample_rate_hz * 1e-3))
    seg_len = cfg.coherent_ms * n_ms
    if len(window) < seg_len:
        raise ValueError(
            f"window of {len(window)} samples is shorter than one "
            f"coherent integration ({seg_len})")
    rounds = max(1, min(cfg.noncoherent_rounds, len(window) // seg_len))

    n_bins = int(round(cfg.doppler_span_hz / cfg.doppler_step_hz))
    freqs = tuple(np.arange(-n_bins, n_bins + 1) * cfg.doppler_step_hz)
    wipe = _doppler_wipe_matrix(freqs, seg_len, sample_rate_hz)
    code_fft = _code_replica_fft(prn, seg_len, sample_rate_hz)

    surface = np.zeros((len(freqs), seg_len))
    power = np.zeros((len(freqs), seg_len))
    for r in range(rounds):
        seg = window[r * seg_len:(r + 1) * seg_len]
        wiped = wipe * seg
        corr = np.fft.ifft(np.fft.fft(wiped, axis=1) * code_fft, axis=1)
        mag = np.abs(corr)
        surface += mag
        power += mag * mag

    chips_per_sample = CODE_LENGTH_CHIPS / n_ms

    # local maxima: strictly above circular code-phase neighbours and
    # above the same cell in adjacent Doppler rows
    left = np.roll(surface, 1, axis=1)
    right = np.roll(surface, -1, axis=1)
    is_max = (surface > left) & (surface > right)
    if len(freqs) > 1:
        is_max[1:] &= surface[1:] > surface[:-1]
        is_max[:-1] &= surface[:-1] > surface[1:]
    cand_bins, cand_idx = np.nonzero(is_max)
    cand_mag = surface[cand_bins, cand_idx]
    order = np.argsort(-cand_mag, kind="stable")
    cand_bins, cand_idx, cand_mag = (cand_bins[order], cand_idx[order],
                                     cand_mag[order])

    # merge anything within half a chip of a stronger candidate
    merge_r = cfg.merge_radius_chips / chips_per_sample
    kept: list[int] = []
    for i in range(len(cand_mag)):
        if all(_circular_dist(cand_idx[i], cand_idx[k], seg_len) > merge_r
               for k in kept):
            kept.append(i)
        if len(kept) >= 4 * cfg.max_peaks:
            break

    # fixed point: noise floor excludes accepted peaks' +/-1 chip zones
    excl_r = cfg.exclusion_chips / chips_per_sample
    phase_axis = np.arange(seg_len)
    accepted: list[int] = []
    floor = float(np.mean(surface))
    for _ in range(4):
        new_accepted = [i for i in kept
                        if cand_mag[i] / floor >= cfg.threshold_ratio]
        mask = np.zeros(seg_len, dtype=bool)
        for i in new_accepted:
            mask |= _circular_dist(phase_axis, cand_idx[i], seg_len) <= excl_r
        outside = surface[:, ~mask]
        new_floor = float(np.mean(outside)) if outside.size else floor
        if new_accepted == accepted and abs(new_floor - floor) < 1e-12:
            break
        accepted, floor = new_accepted, new_floor

    def _refined_doppler(bin_i: int, idx: int) -> float:
        center = float(freqs[bin_i])
        if not 0 < bin_i < len(freqs) - 1:
            return center
        lo, mid, hi = (surface[bin_i - 1, idx], surface[bin_i, idx],
                       surface[bin_i + 1, idx])
        denom = lo - 2.0 * mid + hi
        if denom >= 0.0:
            return center
        shift = 0.5 * (lo - hi) / denom
        return center + float(np.clip(shift, -0.5, 0.5)) * cfg.doppler_step_hz

    peaks = [AcquisitionPeak(
        code_phase_chips=float((cand_idx[i] % n_ms) * chips_per_sample),
        doppler_hz=_refined_doppler(cand_bins[i], cand_idx[i]),
        magnitude=float(cand_mag[i]),
        snr_ratio=float(cand_mag[i] / floor))
        for i in accepted[:cfg.max_peaks]]
    peaks.sort(key=lambda p: (-p.magnitude, p.code_phase_chips))
    row_power = None
    row_doppler = 0.0
    if accepted:
        best = max(accepted, key=lambda i: cand_mag[i])
        row = power[cand_bins[best]].copy()
        row_doppler = float(freqs[cand_bins[best]])
        eligible = n_ms >= cfg.split_min_samples_per_chip * CODE_LENGTH_CHIPS
        if eligible:
            # keep accumulating this one Doppler bin over whatever extra
            # blocks the window holds, up to row_rounds, to steady the fit
            avail = len(window) // seg_len
            stop = min(max(cfg.row_rounds, rounds), avail)
            wipe_row = wipe[cand_bins[best]]
            for r in range(rounds, stop):
                seg = window[r * seg_len:(r + 1) * seg_len]
                corr = np.fft.ifft(np.fft.fft(wipe_row * seg) * code_fft)
                row += np.abs(corr) ** 2
        # fold coherent_ms > 1 windows back onto one code period
        row_power = row.reshape(-1, n_ms).sum(axis=0)
        if peaks and eligible:
            peaks = _maybe_split(row_power, peaks, cfg)
    return AcquisitionResult(prn=prn, peaks=peaks, noise_floor=floor,
                             row_power=row_power, row_doppler_hz=row_doppler)
