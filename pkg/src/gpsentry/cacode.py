"""Coarse/acquisition Gold code generation for GPS L1.

Each PRN's spreading code is the XOR of two 10-stage maximal-length
sequences.  G1 feeds back taps 3 and 10; G2 feeds back taps 2, 3, 6, 8,
9 and 10 and is phase-selected per PRN by XORing two fixed register
stages.  Chips are returned in {+1, -1} with +1 standing for a binary 1.
"""

from __future__ import annotations

import numpy as np

from .constants import CODE_LENGTH_CHIPS

# G2 phase-select stages per PRN (1-based register positions).
G2_TAPS = {
    1: (2, 6), 2: (3, 7), 3: (4, 8), 4: (5, 9), 5: (1, 9),
    6: (2, 10), 7: (1, 8), 8: (2, 9), 9: (3, 10), 10: (2, 3),
    11: (3, 4), 12: (5, 6), 13: (6, 7), 14: (7, 8), 15: (8, 9),
    16: (9, 10), 17: (1, 4), 18: (2, 5), 19: (3, 6), 20: (4, 7),
    21: (5, 8), 22: (6, 9), 23: (1, 3), 24: (4, 6), 25: (5, 7),
    26: (6, 8), 27: (7, 9), 28: (8, 10), 29: (1, 6), 30: (2, 7),
    31: (3, 8), 32: (4, 9),
}

_code_cache: dict[int, np.ndarray] = {}


def generate_ca_code(prn: int) -> np.ndarray:
    """Return the 1023-chip code for ``prn`` as an int8 array of +/-1."""
    if prn not in G2_TAPS:
        raise ValueError(f"PRN must be in 1..32, got {prn}")
    if prn in _code_cache:
        return _code_cache[prn]

    t1, t2 = G2_TAPS[prn]
    g1 = np.ones(10, dtype=np.uint8)
    g2 = np.ones(10, dtype=np.uint8)
    bits = np.empty(CODE_LENGTH_CHIPS, dtype=np.uint8)
    for i in range(CODE_LENGTH_CHIPS):
        bits[i] = g1[9] ^ g2[t1 - 1] ^ g2[t2 - 1]
        fb1 = g1[2] ^ g1[9]
        fb2 = g2[1] ^ g2[2] ^ g2[5] ^ g2[7] ^ g2[8] ^ g2[9]
        g1[1:] = g1[:-1]
        g1[0] = fb1
        g2[1:] = g2[:-1]
        g2[0] = fb2
    chips = (2 * bits.astype(np.int8) - 1).astype(np.int8)
    chips.setflags(write=False)
    _code_cache[prn] = chips
    return chips


def code_as_bits(prn: int) -> np.ndarray:
    """The code as 0/1 bits (1 where the chip is +1)."""
    return (generate_ca_code(prn) > 0).astype(np.uint8)


def sampled_code(prn: int, sample_rate_hz: float, n_samples: int,
                 code_phase_chips: float = 0.0) -> np.ndarray:
    """Sample the repeating code at ``sample_rate_hz``.

    ``code_phase_chips`` delays the code: sample n holds the chip at
    code position (n * chip_rate / fs - code_phase) mod 1023.
    """
    from .constants import CHIP_RATE_HZ
    n = np.arange(n_samples)
    idx = np.floor(n * (CHIP_RATE_HZ / sample_rate_hz)
                   - code_phase_chips).astype(np.int64) % CODE_LENGTH_CHIPS
    return generate_ca_code(prn)[idx].astype(np.float64)
