"""Complex-baseband L1 C/A signal synthesis.

Everything is zero-IF: a satellite's contribution is

    A * code(t - d(t)) * bit(t - d(t)) * exp(j(2*pi*f_dop*t + phase))

where d(t) is the propagation delay.  ``synthesize`` covers the
constant-delay, constant-Doppler case; ``sample_delayed`` is the
shared workhorse that also accepts a per-sample delay for moving
geometry, with the carrier phase tied to the delay through the L1
carrier frequency.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cacode import generate_ca_code
from .constants import (
    CHIP_RATE_HZ,
    CODE_LENGTH_CHIPS,
    L1_CARRIER_HZ,
    NAV_BIT_RATE_HZ,
)


@dataclass
class SignalParams:
    """Static parameters for one synthesized signal copy."""
    prn: int
    code_phase_chips: float = 0.0     # delay of code start, in chips
    doppler_hz: float = 0.0
    power_db: float = 0.0             # relative to unit amplitude
    carrier_phase_rad: float = 0.0
    nav_bits: np.ndarray | None = None  # 0/1 array, 50 bps, bit 0 at t_tx=0


def nav_bit_signs(nav_bits: np.ndarray | None) -> np.ndarray:
    if nav_bits is None:
        return np.array([1.0])
    b = np.asarray(nav_bits)
    return 1.0 - 2.0 * b.astype(np.float64)


def sample_delayed(prn: int, sample_rate_hz: float, n_samples: int,
                   delay_s, amplitude, doppler_hz: float = 0.0,
                   carrier_phase_rad: float = 0.0,
                   nav_bits: np.ndarray | None = None,
                   t_offset_s: float = 0.0,
                   nav_bit_t0_s: float = 0.0,
                   carrier_from_delay: bool = False) -> np.ndarray:
    """One signal copy over ``n_samples`` starting at ``t_offset_s``.

    ``delay_s`` and ``amplitude`` may be scalars or per-sample arrays.
    Bit 0 of ``nav_bits`` starts at transmit time ``nav_bit_t0_s``.
    With ``carrier_from_delay`` the baseband carrier phase includes the
    physical -2*pi*f_L1*delay term, so delay drift produces the matching
    carrier motion.
    """
    k = np.arange(n_samples)
    t = t_offset_s + k / sample_rate_hz
    t_tx = t - delay_s
    # accumulate chip progress as k * (chip_rate / fs) so integer
    # sample-per-chip ratios stay exact at chip boundaries
    chip_pos = (k * (CHIP_RATE_HZ / sample_rate_hz)
                + (t_offset_s - np.asarray(delay_s)) * CHIP_RATE_HZ)
    chip_idx = np.floor(chip_pos).astype(np.int64) % CODE_LENGTH_CHIPS
    chips = generate_ca_code(prn).astype(np.float64)[chip_idx]
    if nav_bits is not None:
        signs = nav_bit_signs(nav_bits)
        bit_idx = np.floor((t_tx - nav_bit_t0_s) * NAV_BIT_RATE_HZ).astype(np.int64)
        bit_idx = np.clip(bit_idx, 0, len(signs) - 1)
        chips *= signs[bit_idx]
    phase = 2.0 * np.pi * doppler_hz * t + carrier_phase_rad
    if carrier_from_delay:
        phase = phase - 2.0 * np.pi * L1_CARRIER_HZ * np.asarray(delay_s,
                                                                 dtype=np.float64)
    return amplitude * chips * np.exp(1j * phase)


def synthesize(params: SignalParams, sample_rate_hz: float,
               duration_s: float) -> np.ndarray:
    """Noise-free baseband samples for constant code phase and Doppler."""
    if duration_s < 0:
        raise ValueError("duration must be non-negative")
    n = int(round(duration_s * sample_rate_hz))
    if n == 0:
        return np.zeros(0, dtype=np.complex128)
    amp = 10.0 ** (params.power_db / 20.0)
    delay = params.code_phase_chips / CHIP_RATE_HZ
    return sample_delayed(params.prn, sample_rate_hz, n, delay, amp,
                          doppler_hz=params.doppler_hz,
                          carrier_phase_rad=params.carrier_phase_rad,
                          nav_bits=params.nav_bits)


def cn0_to_noise_sigma(cn0_dbhz: float, sample_rate_hz: float,
                       amplitude: float = 1.0) -> float:
    """Std dev of complex AWGN giving the requested C/N0 for ``amplitude``.

    Signal power A^2, noise density sigma^2/fs, so
    C/N0 = A^2 * fs / sigma^2.
    """
    cn0 = 10.0 ** (cn0_dbhz / 10.0)
    return amplitude * np.sqrt(sample_rate_hz / cn0)
