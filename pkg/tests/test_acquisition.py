"""Search-stage checks: peak finding, merging, thresholds."""

import numpy as np
import pytest

from gpsentry.acquisition import (AcquisitionConfig, acquire,
                                  peak_buffer_footprint)
from gpsentry.signals import (SignalParams, cn0_to_noise_sigma,
                              sample_delayed, synthesize)


def _noisy(sig: np.ndarray, cn0_dbhz: float, fs: float, seed: int,
           amplitude: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    sigma = cn0_to_noise_sigma(cn0_dbhz, fs, amplitude)
    noise = rng.standard_normal(2 * len(sig))
    return sig + (sigma / np.sqrt(2)) * (noise[0::2] + 1j * noise[1::2])


def test_detects_code_phase_and_doppler():
    fs = 2.046e6
    p = SignalParams(prn=6, code_phase_chips=400.3, doppler_hz=1200.0,
                     carrier_phase_rad=1.1)
    sig = synthesize(p, fs, 4e-3)
    window = _noisy(sig, 45.0, fs, seed=21)
    res = acquire(window, 6, fs)
    assert res.detected
    best = res.peaks[0]
    assert abs(best.code_phase_chips - 400.3) <= 0.5
    assert abs(best.doppler_hz - 1200.0) <= 250.0
    assert best.snr_ratio > 2.5


def test_footprint_is_two_floats_per_ms_sample():
    assert peak_buffer_footprint(2.046e6) == 4092
    assert peak_buffer_footprint(10e6) == 20000


def test_noise_only_stays_quiet():
    fs = 2.046e6
    n = int(4e-3 * fs)
    for seed in (3, 4, 5):
        rng = np.random.default_rng(seed)
        window = (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        res = acquire(window.astype(np.complex128), 17, fs)
        assert not res.detected


def test_duplicate_beyond_merge_radius_resolves():
    fs = 10e6
    n = int(4e-3 * fs)
    base_delay = 0.0004
    a = sample_delayed(9, fs, n, base_delay, 1.0, doppler_hz=0.0)
    b = sample_delayed(9, fs, n, base_delay + 600e-9, 1.0,
                       doppler_hz=280.0, carrier_phase_rad=2.0)
    window = _noisy(a + b, 45.0, fs, seed=9)
    res = acquire(window, 9, fs)
    chi = [pk.code_phase_chips for pk in res.peaks]
    want1 = (base_delay * 1.023e6) % 1023
    want2 = ((base_delay + 600e-9) * 1.023e6) % 1023
    assert any(abs(c - want1) < 0.2 for c in chi), chi
    assert any(abs(c - want2) < 0.2 for c in chi), chi


def test_duplicate_within_merge_radius_merges():
    fs = 10e6
    n = int(4e-3 * fs)
    base_delay = 0.0004
    a = sample_delayed(9, fs, n, base_delay, 1.0, doppler_hz=0.0)
    b = sample_delayed(9, fs, n, base_delay + 300e-9, 1.0,
                       doppler_hz=280.0, carrier_phase_rad=0.4)
    window = _noisy(a + b, 45.0, fs, seed=10)
    res = acquire(window, 9, fs)
    assert res.detected
    want = (base_delay * 1.023e6) % 1023
    close = [pk for pk in res.peaks
             if abs(pk.code_phase_chips - want) < 1.0]
    assert len(close) == 1


def test_subchip_pair_splits_into_two_peaks():
    # a copy 600 ns behind at -3 dB never forms its own magnitude
    # maximum, so the row fit has to pull the pair apart
    fs = 10e6
    n = int(16e-3 * fs)
    base_delay = 0.0004
    a = sample_delayed(9, fs, n, base_delay, 1.0, doppler_hz=0.0)
    b = sample_delayed(9, fs, n, base_delay + 600e-9,
                       10 ** (-3.0 / 20.0), doppler_hz=90.0,
                       carrier_phase_rad=1.3)
    window = _noisy(a + b, 45.0, fs, seed=2)
    res = acquire(window, 9, fs)
    want1 = (base_delay * 1.023e6) % 1023
    want2 = ((base_delay + 600e-9) * 1.023e6) % 1023
    chi = [pk.code_phase_chips for pk in res.peaks]
    assert any(abs(c - want1) < 0.1 for c in chi), chi
    assert any(abs(c - want2) < 0.1 for c in chi), chi


def test_equal_power_pair_at_600ns_reports_exactly_two():
    fs = 10e6
    n = int(16e-3 * fs)
    base_delay = 0.0004
    a = sample_delayed(9, fs, n, base_delay, 1.0, doppler_hz=0.0,
                       carrier_phase_rad=0.8)
    b = sample_delayed(9, fs, n, base_delay + 600e-9, 1.0,
                       doppler_hz=120.0, carrier_phase_rad=2.9)
    window = _noisy(a + b, 45.0, fs, seed=4)
    res = acquire(window, 9, fs)
    assert len(res.peaks) == 2
    d = abs(res.peaks[0].code_phase_chips - res.peaks[1].code_phase_chips)
    d = min(d % 1023, 1023 - d % 1023)
    sep_ns = d / 1.023e6 * 1e9
    # one sample at this rate is 100 ns
    assert sep_ns == pytest.approx(600.0, abs=100.0)


def test_split_stays_off_at_coarse_sample_rates():
    # at two samples per chip the row shape cannot support the pair
    # fit, so a sub-chip copy must stay merged no matter its power
    fs = 2.046e6
    n = int(16e-3 * fs)
    base_delay = 0.0004
    a = sample_delayed(9, fs, n, base_delay, 1.0, doppler_hz=0.0)
    b = sample_delayed(9, fs, n, base_delay + 600e-9, 1.0,
                       doppler_hz=90.0, carrier_phase_rad=1.1)
    window = _noisy(a + b, 45.0, fs, seed=3)
    res = acquire(window, 9, fs)
    assert res.detected
    want = (base_delay * 1.023e6) % 1023
    close = [pk for pk in res.peaks
             if abs(pk.code_phase_chips - want) < 1.2]
    assert len(close) == 1


def test_noncoherent_rounds_lift_weak_signal():
    fs = 2.046e6
    p = SignalParams(prn=23, code_phase_chips=222.0, doppler_hz=-800.0)
    sig = synthesize(p, fs, 4e-3) * 10 ** ((42.0 - 45.0) / 20.0)
    window = _noisy(sig, 45.0, fs, seed=6)   # noise sized for amplitude 1
    res = acquire(window, 23, fs,
                  AcquisitionConfig(noncoherent_rounds=4))
    assert res.detected
    assert abs(res.peaks[0].code_phase_chips - 222.0) <= 0.5


def test_window_too_short_raises():
    fs = 2.046e6
    with pytest.raises(ValueError):
        acquire(np.zeros(100, dtype=np.complex128), 1, fs)


def test_two_ms_coherent_reports_phase_in_code_units():
    fs = 2.046e6
    p = SignalParams(prn=12, code_phase_chips=900.0, doppler_hz=250.0)
    sig = synthesize(p, fs, 8e-3)
    window = _noisy(sig, 45.0, fs, seed=13)
    cfg = AcquisitionConfig(coherent_ms=2, noncoherent_rounds=2)
    res = acquire(window, 12, fs, cfg)
    assert res.detected
    assert 0.0 <= res.peaks[0].code_phase_chips < 1023.0
    assert abs(res.peaks[0].code_phase_chips - 900.0) <= 0.5


def test_peaks_sorted_by_magnitude():
    fs = 2.046e6
    n = int(4e-3 * fs)
    a = sample_delayed(30, fs, n, 1e-4, 1.0)
    b = sample_delayed(30, fs, n, 4e-4, 0.7, doppler_hz=1000.0)
    window = _noisy(a + b, 45.0, fs, seed=30)
    res = acquire(window, 30, fs)
    mags = [pk.magnitude for pk in res.peaks]
    assert mags == sorted(mags, reverse=True)
    assert abs(res.peaks[0].code_phase_chips - (1e-4 * 1.023e6)) <= 0.5
