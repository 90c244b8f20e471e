"""Position/time solving and spoofing displacement bounds.

The solver is a plain Gauss-Newton iteration on pseudoranges with a
shared clock-bias unknown, started from the Earth's center so no prior
position is assumed.  The displacement bound answers: given that every
per-satellite arrival offset is capped (by the arrival-phase test) at
tau_max, how far can a coordinated spoofer displace the solved
position?  Linearized, the position shift is P @ delta_rho with
P the position rows of the least-squares pseudoinverse, and the
maximum over the per-satellite cap is attained at a corner of the
offset hypercube.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .constants import GPS_ORBIT_RADIUS_M, SPEED_OF_LIGHT


class GeometryError(ValueError):
    """Satellite geometry too poor (or too few satellites) to solve."""


class PvtConvergenceError(RuntimeError):
    """Gauss-Newton iteration failed to converge."""


@dataclass
class PvtSolution:
    position_m: np.ndarray          # ECEF, shape (3,)
    clock_bias_m: float
    residuals_m: np.ndarray         # per satellite, shape (N,)
    gdop: float
    iterations: int


def _design_matrix(sat_pos: np.ndarray, user_pos: np.ndarray) -> np.ndarray:
    diff = sat_pos - user_pos[None, :]
    rng = np.linalg.norm(diff, axis=1)
    h = np.empty((sat_pos.shape[0], 4))
    h[:, :3] = -diff / rng[:, None]
    h[:, 3] = 1.0
    return h


def solve_pvt(sat_pos: np.ndarray, pseudoranges: np.ndarray,
              tol_m: float = 1e-4, max_iter: int = 20,
              cond_limit: float = 1e8) -> PvtSolution:
    """Solve position and clock bias from satellite positions and ranges."""
    sat_pos = np.asarray(sat_pos, dtype=float)
    pseudoranges = np.asarray(pseudoranges, dtype=float)
    n = sat_pos.shape[0]
    if n < 4:
        raise GeometryError(f"need at least 4 satellites, got {n}")
    x = np.zeros(3)
    b = 0.0
    for it in range(1, max_iter + 1):
        diff = sat_pos - x[None, :]
        rng = np.linalg.norm(diff, axis=1)
        pred = rng + b
        h = _design_matrix(sat_pos, x)
        if np.linalg.cond(h) > cond_limit:
            raise GeometryError("degenerate satellite geometry")
        delta, *_ = np.linalg.lstsq(h, pseudoranges - pred, rcond=None)
        x += delta[:3]
        b += delta[3]
        if np.linalg.norm(delta[:3]) < tol_m:
            diff = sat_pos - x[None, :]
            rng = np.linalg.norm(diff, axis=1)
            resid = pseudoranges - (rng + b)
            gdop = compute_gdop(sat_pos, x)
            return PvtSolution(position_m=x, clock_bias_m=b,
                               residuals_m=resid, gdop=gdop, iterations=it)
    raise PvtConvergenceError(f"no convergence in {max_iter} iterations")


def compute_gdop(sat_pos: np.ndarray, user_pos: np.ndarray) -> float:
    h = _design_matrix(np.asarray(sat_pos, float),
                       np.asarray(user_pos, float))
    cov = np.linalg.inv(h.T @ h)
    return float(math.sqrt(np.trace(cov)))


@dataclass
class OffsetBoundReport:
    """Worst-case position displacement under a per-satellite range cap."""
    range_cap_m: float
    max_offset_m: float
    gdop: float
    worst_signs: tuple[int, ...]    # +1/-1 per satellite at the maximum


def max_spoof_offset(sat_pos: np.ndarray, user_pos: np.ndarray,
                     tau_max_ns: float = 500.0) -> OffsetBoundReport:
    """Largest linearized position shift from bounded range offsets.

    Enumerates the corners of the per-satellite offset hypercube
    (the maximum of a convex norm over a box sits at a corner).
    """
    sat_pos = np.asarray(sat_pos, dtype=float)
    user_pos = np.asarray(user_pos, dtype=float)
    cap = SPEED_OF_LIGHT * tau_max_ns * 1e-9
    h = _design_matrix(sat_pos, user_pos)
    pinv = np.linalg.inv(h.T @ h) @ h.T
    pos_rows = pinv[:3, :]
    n = sat_pos.shape[0]
    best = -1.0
    best_signs: tuple[int, ...] = ()
    for signs in itertools.product((-1.0, 1.0), repeat=n):
        shift = pos_rows @ (cap * np.asarray(signs))
        mag = float(np.linalg.norm(shift))
        if mag > best:
            best = mag
            best_signs = tuple(int(s) for s in signs)
    gdop = compute_gdop(sat_pos, user_pos)
    return OffsetBoundReport(range_cap_m=cap, max_offset_m=best,
                             gdop=gdop, worst_signs=best_signs)


# ---------------------------------------------------------------------------
# synthetic constellations for geometry studies
# ---------------------------------------------------------------------------

EARTH_RADIUS_M = 6_371_000.0


def sample_constellation(n_sats: int, rng: np.random.Generator,
                         min_elevation_deg: float = 5.0) -> np.ndarray:
    """Satellite positions (local ENU frame, receiver at origin).

    Azimuth is uniform; elevation is drawn uniform in sin(elevation)
    over the visible cap, which matches an isotropic shell above the
    mask.  Ranges follow the slant distance to the GPS orbit shell.
    """
    az = rng.uniform(0.0, 2.0 * math.pi, size=n_sats)
    smin = math.sin(math.radians(min_elevation_deg))
    el = np.arcsin(rng.uniform(smin, 1.0, size=n_sats))
    u = np.stack([np.cos(el) * np.sin(az), np.cos(el) * np.cos(az),
                  np.sin(el)], axis=1)
    horiz = EARTH_RADIUS_M * np.cos(el)
    slant = (np.sqrt(GPS_ORBIT_RADIUS_M ** 2 - horiz ** 2)
             - EARTH_RADIUS_M * np.sin(el))
    return u * slant[:, None]


@dataclass
class GeometrySurvey:
    n_trials: int
    n_sats: int
    tau_max_ns: float
    gdop_median: float
    gdop_p95: float
    offset_median_m: float
    offset_p95_m: float
    offset_max_m: float


def survey_geometries(n_trials: int, n_sats: int, seed: int,
                      tau_max_ns: float = 500.0,
                      min_elevation_deg: float = 5.0) -> GeometrySurvey:
    """Monte-Carlo spread of GDOP and spoofing bounds over constellations."""
    rng = np.random.default_rng(seed)
    gdops = np.empty(n_trials)
    offsets = np.empty(n_trials)
    origin = np.zeros(3)
    for i in range(n_trials):
        sats = sample_constellation(n_sats, rng, min_elevation_deg)
        rep = max_spoof_offset(sats, origin, tau_max_ns)
        gdops[i] = rep.gdop
        offsets[i] = rep.max_offset_m
    return GeometrySurvey(
        n_trials=n_trials, n_sats=n_sats, tau_max_ns=tau_max_ns,
        gdop_median=float(np.median(gdops)),
        gdop_p95=float(np.percentile(gdops, 95)),
        offset_median_m=float(np.median(offsets)),
        offset_p95_m=float(np.percentile(offsets, 95)),
        offset_max_m=float(np.max(offsets)))
