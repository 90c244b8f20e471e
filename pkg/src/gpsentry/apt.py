"""Arrival-phase test: flag a PRN whose signal copies arrive too far apart.

A genuine reflection of the line-of-sight signal can only arrive later
by the excess path length, which stays short for terrestrial geometry.
A spoofer that transmits its own copy cannot keep the arrival offset
below the same bound at an uncontrolled receiver location, so two
resolved copies of one PRN separated by more than ``tau_max_ns``
indicate spoofing rather than multipath.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .constants import SPEED_OF_LIGHT


@dataclass
class AptConfig:
    tau_max_ns: float = 500.0
    min_peaks_tracked: int = 2
    snap_to_sample: bool = True


@dataclass
class SpoofingAlert:
    """One detector finding.  ``detector`` is ``apt`` or ``navi``."""
    detector: str
    kind: str
    prn: int
    time_s: float
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        extras = " ".join(f"{k}={v}" for k, v in sorted(self.detail.items()))
        return (f"t={self.time_s:.3f}s {self.detector} {self.kind} "
                f"prn={self.prn} {extras}").rstrip()


def max_spoofable_pseudorange_shift(tau_max_ns: float = 500.0) -> float:
    """Largest per-satellite range offset (m) that stays below the test."""
    return SPEED_OF_LIGHT * tau_max_ns * 1e-9


def check_separation(prn: int, separation_s: float, time_s: float,
                     sample_rate_hz: float,
                     config: AptConfig | None = None) -> SpoofingAlert | None:
    """Evaluate one pairwise arrival separation.

    The separation is snapped to the sample grid first (the tracking
    boundary estimates are sub-sample interpolations whose fractional
    part carries noise, while the underlying arrivals are sampled), then
    compared strictly against ``tau_max_ns``.
    """
    cfg = config or AptConfig()
    sep = abs(separation_s)
    if cfg.snap_to_sample:
        sep = round(sep * sample_rate_hz) / sample_rate_hz
    sep_ns = sep * 1e9
    if sep_ns > cfg.tau_max_ns:
        return SpoofingAlert(
            detector="apt", kind="apt_separation", prn=prn, time_s=time_s,
            detail={"separation_ns": round(sep_ns, 3),
                    "tau_max_ns": cfg.tau_max_ns})
    return None
