"""The hit functional S(y, eta, t0): oracle sum and data-driven pairing.

S is the scaled pairing of the pseudorandom-noise source with a Gaussian beam
sent backward from (y, eta); it peaks when the beam's central geodesic sits
on a source point at time t0.  Two independent routes compute it:

* the oracle route sums the beam values at the source points directly, using
  full-metric beam frames (test-harness privilege, never available to the
  blind decoder);
* the data route re-propagates the measured boundary trace through the known
  exterior metric and pairs the snapshot at t0 with the beam's initial data,
  touching nothing inside M.

Each term of the oracle sum is evaluated in the log domain so that the
hyper-exponentially small weights survive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .beam import CHART_RADIUS, BeamData, FrameTrack, beam_initial_data, smooth_step
from .geometry import ExteriorMetricView
from .wavesim import BoundaryTrace, Grid, SigmaSnapshot, solve_exterior

#: exp() argument below which a term is dropped as an exact zero.
_EXP_FLOOR = -745.0


def s_oracle_scan(
    source_set,
    track: FrameTrack,
    t0s: np.ndarray,
    eps: float,
    model,
    chart_radius: float = CHART_RADIUS,
) -> np.ndarray:
    """Oracle hit functional at an array of times along one beam track.

    Sum over active sources of a_j u0(t0) exp(i theta(t0, x_j)/eps)
    |g|^{1/2}(x_j); sources outside the quadratic chart radius are dropped
    (their Gaussian factor is negligible at the working eps).
    """
    t0s = np.atleast_1d(np.asarray(t0s, dtype=float))
    pos, mom, hess, amp = track.sample(t0s)
    pts = source_set.active_points()
    sqrtg = np.array([model.conformal_factor(p) ** 2 for p in pts])
    log_lam = math.log(source_set.lam)
    log_w = np.array([source_set.log_weights[j - 1] for j in source_set.active])

    w = pts[None, :, :] - pos[:, None, :]  # (nt, nj, 2)
    theta = np.einsum("ni,nji->nj", mom, w) + 0.5 * np.einsum(
        "nji,nik,njk->nj", w, hess, w
    )
    exponent = log_w[None, :] * log_lam + 1j * theta / eps
    exponent = np.where(exponent.real < _EXP_FLOOR, -np.inf, exponent)
    dist2 = np.einsum("nji,nji->nj", w, w)
    mask = dist2 <= chart_radius ** 2
    terms = np.where(mask, np.exp(exponent), 0.0)
    return amp * np.einsum("nj,j->n", terms, sqrtg)


def s_oracle(source_set, track: FrameTrack, t0: float, eps: float, model,
             chart_radius: float = CHART_RADIUS) -> complex:
    """Single-time oracle value (see s_oracle_scan)."""
    return complex(s_oracle_scan(source_set, track, [t0], eps, model, chart_radius)[0])


def pair_with_beam(snapshot: SigmaSnapshot, beam_data: BeamData, h: float) -> complex:
    """Bilinear pairing eps^{1/2} [<v_t, w> - <v, w_t>] on the beam window.

    The inner products carry the Riemannian volume weight, which is one on
    the exterior domain where the beam data lives.
    """
    acc = (
        np.sum(snapshot.field_dt * beam_data.field)
        - np.sum(snapshot.field * beam_data.field_dt)
    )
    return complex(beam_data.eps ** 0.5 * acc * h * h)


def time_cutoff_for(beam_data: BeamData, boundary, exterior_radius: float,
                    t0: float, t_start: float):
    """Smooth chi(t): 1 up to t0 - r, 0 near t0, r the support standoff."""
    r = beam_data.support_margin(boundary, exterior_radius)
    if r <= 0.0:
        raise ValueError("beam support touches the exterior boundary")
    lo = t0 - r
    hi = t0 - 0.05 * r

    def chi(t: float) -> float:
        return float(1.0 - smooth_step((t - lo) / (hi - lo)))

    return chi


def s_data(
    trace: BoundaryTrace,
    beam_data: BeamData,
    exterior: ExteriorMetricView,
    grid: Grid,
    t0: float,
    t_start: float,
) -> complex:
    """Spec-exact data route: chi-cutoff trace, exterior solve to t0, pairing.

    Uses only the boundary trace and the known exterior metric.
    """
    chi = time_cutoff_for(
        beam_data, exterior.boundary, exterior.exterior_radius, t0, t_start
    )
    dt = trace.dt
    k = int(round((t0 - t_start) / dt))
    t0_snap = t_start + k * dt
    snaps = solve_exterior(
        exterior,
        trace,
        grid,
        t_start,
        t0_snap + 2 * dt,
        snapshot_times=[t0_snap],
        snapshot_window=beam_data.window,
        time_cutoff=chi,
    )
    return pair_with_beam(snaps[0], beam_data, grid.spacing)


class DataSProvider:
    """Cached data route for scanning: one exterior solve per probe window.

    The cutoff-free solve equals the chi-cutoff solve on the beam support at
    every snapshot time by finite speed of propagation; the spec-exact
    ``s_data`` is still used for final verification at decoded peaks.
    """

    def __init__(
        self,
        trace: BoundaryTrace,
        exterior: ExteriorMetricView,
        grid: Grid,
        t_start: float,
        scan_times: np.ndarray,
        window: tuple[slice, slice],
    ):
        self.trace = trace
        self.exterior = exterior
        self.grid = grid
        self.t_start = t_start
        dt = trace.dt
        snap_times = sorted(
            {t_start + round((t - t_start) / dt) * dt for t in scan_times}
        )
        self.snapshots = {
            round(s.t, 12): s
            for s in solve_exterior(
                exterior,
                trace,
                grid,
                t_start,
                max(snap_times) + 2 * dt,
                snapshot_times=snap_times,
                snapshot_window=window,
            )
        }
        self.dt = dt

    def value(self, beam_data: BeamData, t0: float) -> complex:
        k = round((self.t_start + round((t0 - self.t_start) / self.dt) * self.dt), 12)
        snap = self.snapshots.get(k)
        if snap is None:
            raise KeyError(f"no cached snapshot near t0={t0}")
        return pair_with_beam(snap, beam_data, self.grid.spacing)


@dataclass(frozen=True)
class SEstimate:
    """Finite-schedule stand-in for the eps -> 0 limit of the pairing."""

    value: complex
    eps: float
    error_estimate: float
    stabilizing: bool
    history: tuple[complex, ...]


def s_limit(provider, t0: float, eps_schedule) -> SEstimate:
    """Evaluate S over a geometric eps schedule and report the last value.

    ``provider`` maps (t0, eps) to a complex S value.  The error estimate is
    the difference of the final two values; a growing difference sequence is
    flagged as non-stabilizing.
    """
    eps_schedule = list(eps_schedule)
    if len(eps_schedule) < 3:
        raise ValueError("eps schedule needs at least three values")
    values = [complex(provider(t0, e)) for e in eps_schedule]
    diffs = [abs(b - a) for a, b in zip(values, values[1:])]
    scale = 0.02 * abs(values[-1])
    stabilizing = all(
        d2 <= max(1.2 * d1, scale) for d1, d2 in zip(diffs, diffs[1:])
    )
    return SEstimate(
        value=values[-1],
        eps=eps_schedule[-1],
        error_estimate=diffs[-1],
        stabilizing=stabilizing,
        history=tuple(values),
    )
