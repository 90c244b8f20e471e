"""Spoofing-aware GPS L1 C/A software receiver and scene forge."""

from .acquisition import AcquisitionConfig, AcquisitionResult, acquire
from .apt import AptConfig, SpoofingAlert, check_separation
from .cacode import generate_ca_code, sampled_code
from .forge import (AttackScenario, MessageMutations, SatelliteSpec,
                    SceneConfig, forge_scene)
from .navi import NaviConfig, NaviMonitor, Reference
from .navmsg import (Ephemeris, Subframe, decode_subframe, encode_subframe,
                     satellite_position, solve_kepler)
from .pvt import (GeometryError, OffsetBoundReport, PvtSolution,
                  compute_gdop, max_spoof_offset, solve_pvt)
from .receiver import Receiver, ReceiverConfig, RunReport, run_trace
from .signals import SignalParams, cn0_to_noise_sigma, synthesize
from .tracking import ChannelRole, TrackingChannel

__version__ = "0.1.0"

__all__ = [
    "AcquisitionConfig", "AcquisitionResult", "acquire",
    "AptConfig", "SpoofingAlert", "check_separation",
    "generate_ca_code", "sampled_code",
    "AttackScenario", "MessageMutations", "SatelliteSpec", "SceneConfig",
    "forge_scene",
    "NaviConfig", "NaviMonitor", "Reference",
    "Ephemeris", "Subframe", "decode_subframe", "encode_subframe",
    "satellite_position", "solve_kepler",
    "GeometryError", "OffsetBoundReport", "PvtSolution", "compute_gdop",
    "max_spoof_offset", "solve_pvt",
    "Receiver", "ReceiverConfig", "RunReport", "run_trace",
    "SignalParams", "cn0_to_noise_sigma", "synthesize",
    "ChannelRole", "TrackingChannel",
    "__version__",
]
