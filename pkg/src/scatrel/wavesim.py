"""Variable-coefficient FDTD wave solver on a square grid enclosing M.

The operator is discretized in divergence form,
Lap_g u = |g|^{-1/2} d_j(|g|^{1/2} g^{jk} d_k u), with second-order central
fluxes on cell faces and leapfrog time stepping.  For the conformal metrics
used here the face coefficients are exactly the identity and all spatial
variability sits in the |g|^{-1/2} factor.  The outer square edge carries a
homogeneous Dirichlet condition; the enclosing half-width R is chosen large
enough that edge reflections cannot re-enter the region of interest within
the measurement window.

Two drivers share the stepping core: a full-plane solve that produces the
boundary measurement trace, and an exterior-only solve that re-propagates a
given trace through the known exterior metric without ever reading the
metric inside M.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import ExteriorMetricView, conformal_factor_grid

#: CFL validation factor: dt must not exceed this times h / sqrt(c2).
CFL_FACTOR = 0.5

#: Field growth ratio between stability checks that triggers an abort.
INSTABILITY_GROWTH = 10.0


@dataclass(frozen=True)
class Grid:
    """Uniform square grid on [-R, R]^2 with region masks."""

    half_width: float
    spacing: float
    shape: tuple[int, int]
    origin: tuple[float, float]
    xs: np.ndarray
    ys: np.ndarray
    interior_mask: np.ndarray
    exterior_mask: np.ndarray
    band_mask: np.ndarray

    def node_points(self, mask: np.ndarray) -> np.ndarray:
        ii, jj = np.nonzero(mask)
        return np.stack([self.xs[ii], self.ys[jj]], axis=1)

    def index_of(self, point) -> tuple[int, int]:
        h = self.spacing
        return (
            int(round((point[0] - self.origin[0]) / h)),
            int(round((point[1] - self.origin[1]) / h)),
        )


def make_grid(half_width: float, spacing: float, boundary) -> Grid:
    """Build the square grid and the M / exterior / boundary-band masks."""
    n = int(round(2.0 * half_width / spacing)) + 1
    xs = -half_width + spacing * np.arange(n)
    ys = xs.copy()
    rr = np.hypot(xs[:, None], ys[None, :])
    sd = rr - boundary.radius
    interior = sd < 0.0
    exterior = ~interior
    exterior[0, :] = exterior[-1, :] = exterior[:, 0] = exterior[:, -1] = False
    band = np.zeros_like(interior)
    inner = interior.copy()
    band[1:-1, 1:-1] = inner[1:-1, 1:-1] & (
        ~inner[2:, 1:-1] | ~inner[:-2, 1:-1] | ~inner[1:-1, 2:] | ~inner[1:-1, :-2]
    )
    return Grid(
        half_width=half_width,
        spacing=spacing,
        shape=(n, n),
        origin=(float(xs[0]), float(ys[0])),
        xs=xs,
        ys=ys,
        interior_mask=interior,
        exterior_mask=exterior,
        band_mask=band,
    )


def validate_cfl(model, grid: Grid, dt: float) -> None:
    """Reject time steps violating dt <= 0.5 h / sqrt(c2)."""
    c = conformal_factor_grid(model, grid.xs, grid.ys)
    c2 = float((c ** 2).max())
    limit = CFL_FACTOR * grid.spacing / math.sqrt(c2)
    if dt > limit * (1.0 + 1e-12):
        raise ValueError(f"CFL violated: dt={dt} exceeds {limit:.6g}")


def default_time_step(model, grid: Grid) -> float:
    """0.4 h over the fastest wave speed of the model."""
    c = conformal_factor_grid(model, grid.xs, grid.ys)
    max_speed = float((1.0 / c).max())
    return 0.4 * grid.spacing / max(1.0, max_speed)


@dataclass
class BoundaryTrace:
    """Sampled wave values on the boundary of M over the measurement window."""

    arclengths: np.ndarray
    times: np.ndarray
    values: np.ndarray  # (n_times, n_points)
    meta: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def resample_times(self, times: np.ndarray) -> np.ndarray:
        """Trace values linearly interpolated onto a new time axis."""
        out = np.zeros((len(times), self.values.shape[1]))
        for k in range(self.values.shape[1]):
            out[:, k] = np.interp(
                times, self.times, self.values[:, k], left=0.0, right=0.0
            )
        return out

    def value_at(self, t: float, arclengths: np.ndarray) -> np.ndarray:
        """Space-time interpolated trace at one time, periodic in arclength."""
        row = np.empty(self.values.shape[1])
        i = np.searchsorted(self.times, t)
        if i <= 0:
            row[:] = self.values[0]
        elif i >= len(self.times):
            row[:] = self.values[-1]
        else:
            w = (t - self.times[i - 1]) / (self.times[i] - self.times[i - 1])
            row = (1 - w) * self.values[i - 1] + w * self.values[i]
        per = self.meta.get("perimeter", 2.0 * math.pi)
        return np.interp(
            arclengths,
            np.concatenate([self.arclengths, [self.arclengths[0] + per]]),
            np.concatenate([row, [row[0]]]),
            period=per,
        )

    def save(self, path: str | Path) -> None:
        path = Path(path)
        self.values.astype(np.float64).tofile(path)
        header = dict(self.meta)
        header.update(
            {
                "n_times": int(self.values.shape[0]),
                "n_points": int(self.values.shape[1]),
                "t_start": float(self.times[0]),
                "dt": self.dt,
                "arclengths": [float(s) for s in self.arclengths],
            }
        )
        with open(path.with_suffix(path.suffix + ".json"), "w") as f:
            json.dump(header, f, indent=1, sort_keys=True)

    @staticmethod
    def load(path: str | Path) -> "BoundaryTrace":
        path = Path(path)
        with open(path.with_suffix(path.suffix + ".json")) as f:
            header = json.load(f)
        values = np.fromfile(path, dtype=np.float64).reshape(
            header["n_times"], header["n_points"]
        )
        times = header["t_start"] + header["dt"] * np.arange(header["n_times"])
        arclengths = np.array(header.pop("arclengths"))
        return BoundaryTrace(
            arclengths=arclengths, times=times, values=values, meta=header
        )

    def content_hash(self) -> str:
        return hashlib.sha256(self.values.tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class SigmaSnapshot:
    """(v, dv/dt) on the exterior at one time, possibly on a sub-window."""

    t: float
    field: np.ndarray
    field_dt: np.ndarray
    window: tuple[slice, slice]


class _BilinearProbe:
    """Precomputed bilinear interpolation at fixed sample points."""

    def __init__(self, grid: Grid, points: np.ndarray):
        h = grid.spacing
        fx = (points[:, 0] - grid.origin[0]) / h
        fy = (points[:, 1] - grid.origin[1]) / h
        self.i = np.clip(fx.astype(int), 0, grid.shape[0] - 2)
        self.j = np.clip(fy.astype(int), 0, grid.shape[1] - 2)
        self.wx = fx - self.i
        self.wy = fy - self.j

    def __call__(self, u: np.ndarray) -> np.ndarray:
        i, j, wx, wy = self.i, self.j, self.wx, self.wy
        return (
            u[i, j] * (1 - wx) * (1 - wy)
            + u[i + 1, j] * wx * (1 - wy)
            + u[i, j + 1] * (1 - wx) * wy
            + u[i + 1, j + 1] * wx * wy
        )


class _Stepper:
    """Leapfrog core sharing the divergence-form stencil."""

    def __init__(self, model, grid: Grid, dt: float):
        self.grid = grid
        self.dt = dt
        c = conformal_factor_grid(model, grid.xs, grid.ys)
        # 2D conformal identity: |g|^{1/2} g^{jk} = delta, so all face flux
        # coefficients are one and |g|^{-1/2} = c^{-2} multiplies the fluxes.
        self.s_field = c ** -2.0
        self.sqrt_g = c ** 2.0
        self.coef = (dt * dt) / (grid.spacing ** 2)

    def laplace_g(self, u: np.ndarray) -> np.ndarray:
        """Interior view (excluding the square edge) of Lap_g u * h^2."""
        flux = np.zeros_like(u)
        flux[1:-1, 1:-1] = (
            u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2]
            - 4.0 * u[1:-1, 1:-1]
        )
        return self.s_field * flux

    def advance(self, u_prev, u_cur, forcing_term=None):
        """One leapfrog step; the square edge stays at zero."""
        u_next = 2.0 * u_cur - u_prev
        u_next[1:-1, 1:-1] += self.coef * self.s_field[1:-1, 1:-1] * (
            u_cur[2:, 1:-1] + u_cur[:-2, 1:-1] + u_cur[1:-1, 2:] + u_cur[1:-1, :-2]
            - 4.0 * u_cur[1:-1, 1:-1]
        )
        if forcing_term is not None:
            u_next += forcing_term
        u_next[0, :] = u_next[-1, :] = 0.0
        u_next[:, 0] = u_next[:, -1] = 0.0
        return u_next

    def energy(self, u_prev, u_cur, u_next) -> float:
        """Discrete energy: centered time derivative plus face-based gradients.

        The gradient part discretizes g^{jk} d_j u d_k u |g|^{1/2}, which for
        conformal metrics is the plain squared gradient; face differences
        count every cell face once, so nothing is lost at the walls.  The
        kinetic term keeps its |g|^{1/2} weight.
        """
        h = self.grid.spacing
        ut = (u_next - u_prev) / (2.0 * self.dt)
        kin = float((ut * ut * self.sqrt_g).sum())
        fx = (u_cur[1:, :] - u_cur[:-1, :]) / h
        fy = (u_cur[:, 1:] - u_cur[:, :-1]) / h
        grad = float((fx * fx).sum() + (fy * fy).sum())
        return 0.5 * (kin + grad) * h * h


@dataclass
class FullSolveResult:
    trace: BoundaryTrace
    snapshots: list[SigmaSnapshot]
    energy_samples: list[tuple[float, float]]


def _snap_steps(times, t_start, dt, n_steps):
    out = {}
    for t in times:
        k = int(round((t - t_start) / dt))
        if k < 1 or k > n_steps - 1:
            raise ValueError(f"snapshot time {t} outside the solve window")
        out.setdefault(k, t_start + k * dt)
    return out


def solve_full(
    model,
    forcing,
    grid: Grid,
    t_start: float,
    t_end: float,
    dt: float,
    boundary_samples: int,
    snapshot_times=(),
    snapshot_window=None,
    energy_interval: int = 0,
) -> FullSolveResult:
    """Full-plane forward solve with zero data at t_start, recording the trace.

    The forcing must be supported strictly inside the time window.  An
    instability detector aborts when the field grows more than tenfold
    between checks after the forcing has ended.
    """
    validate_cfl(model, grid, dt)
    stepper = _Stepper(model, grid, dt)
    n_steps = int(round((t_end - t_start) / dt))
    times = t_start + dt * np.arange(n_steps + 1)

    per = model.boundary.perimeter
    arcl = per * np.arange(boundary_samples) / boundary_samples
    probe_pts = np.stack([model.boundary.point_at(s) for s in arcl])
    probe = _BilinearProbe(grid, probe_pts)
    trace_vals = np.zeros((n_steps + 1, boundary_samples))

    snaps_at = _snap_steps(snapshot_times, t_start, dt, n_steps)
    window = snapshot_window or (slice(None), slice(None))
    snapshots = {}

    u_prev = np.zeros(grid.shape)
    u_cur = np.zeros(grid.shape)
    dt2 = dt * dt
    f_steps = forcing.supported_steps if forcing is not None else None
    energies = []
    last_max = 0.0
    forcing_active_until = 0

    for n in range(n_steps):
        fterm = None
        if forcing is not None and f_steps[n]:
            fterm = np.zeros(grid.shape)
            forcing.add_to(fterm, n)
            fterm *= dt2
            forcing_active_until = n
        u_next = stepper.advance(u_prev, u_cur, fterm)

        if n in snaps_at:
            snapshots[n] = SigmaSnapshot(
                t=snaps_at[n],
                field=u_cur[window].copy(),
                field_dt=((u_next - u_prev) / (2.0 * dt))[window].copy(),
                window=window,
            )
        trace_vals[n + 1] = probe(u_next)

        if energy_interval and n % energy_interval == 0:
            energies.append((times[n], stepper.energy(u_prev, u_cur, u_next)))
        if n % 50 == 0:
            cur_max = float(np.abs(u_next).max())
            if (
                n > forcing_active_until + 100
                and last_max > 0.0
                and cur_max > INSTABILITY_GROWTH * last_max
            ):
                raise RuntimeError(
                    f"instability detected at t={times[n]:.4f}: field grew "
                    f"{cur_max / last_max:.1f}x in 50 steps; check the CFL "
                    f"condition (dt={dt}, h={grid.spacing})"
                )
            last_max = max(cur_max, 1e-300)
        u_prev, u_cur = u_cur, u_next

    trace = BoundaryTrace(
        arclengths=arcl,
        times=times,
        values=trace_vals,
        meta={
            "R": grid.half_width,
            "h": grid.spacing,
            "dt": dt,
            "T0": t_start,
            "T": t_end,
            "K_b": boundary_samples,
            "boundary_rule": "arclength-equispaced",
            "perimeter": per,
        },
    )
    return FullSolveResult(
        trace=trace,
        snapshots=[snapshots[k] for k in sorted(snapshots)],
        energy_samples=energies,
    )


def solve_exterior(
    exterior: ExteriorMetricView,
    trace: BoundaryTrace,
    grid: Grid,
    t_start: float,
    t_end: float,
    snapshot_times=(),
    snapshot_window=None,
    time_cutoff=None,
    dt: float | None = None,
) -> list[SigmaSnapshot]:
    """Re-propagate a boundary trace through the exterior domain.

    The field evolves on the exterior mask only; boundary-band cells take
    first-order embedded Dirichlet values interpolated from the trace, the
    outer square edge stays at zero, and the metric inside M is never read.
    ``time_cutoff`` optionally multiplies the trace (smooth time window).
    """
    dt = dt or trace.dt
    validate_cfl(exterior, grid, dt)
    stepper = _Stepper(exterior, grid, dt)
    n_steps = int(round((t_end - t_start) / dt))
    times = t_start + dt * np.arange(n_steps + 1)

    band_idx = np.nonzero(grid.band_mask)
    band_pts = grid.node_points(grid.band_mask)
    band_arcl = np.array(
        [exterior.boundary.arclength_of(p) for p in band_pts]
    )
    trace_on_steps = trace.resample_times(times)
    chi = (
        np.ones(len(times))
        if time_cutoff is None
        else np.array([time_cutoff(t) for t in times])
    )

    def band_values(k):
        per = trace.meta.get("perimeter", 2.0 * math.pi)
        row = trace_on_steps[k] * chi[k]
        return np.interp(
            band_arcl,
            np.concatenate([trace.arclengths, [trace.arclengths[0] + per]]),
            np.concatenate([row, [row[0]]]),
            period=per,
        )

    snaps_at = _snap_steps(snapshot_times, t_start, dt, n_steps)
    window = snapshot_window or (slice(None), slice(None))
    snapshots = {}

    ext = grid.exterior_mask
    u_prev = np.zeros(grid.shape)
    u_cur = np.zeros(grid.shape)
    u_prev[band_idx] = band_values(0)
    u_cur[band_idx] = band_values(1) if n_steps >= 1 else band_values(0)

    for n in range(1, n_steps):
        u_next_full = stepper.advance(u_prev, u_cur)
        u_next = np.where(ext, u_next_full, 0.0)
        u_next[band_idx] = band_values(n + 1)
        if n in snaps_at:
            snapshots[n] = SigmaSnapshot(
                t=snaps_at[n],
                field=np.where(ext, u_cur, 0.0)[window].copy(),
                field_dt=(np.where(ext, (u_next - u_prev), 0.0) / (2.0 * dt))[
                    window
                ].copy(),
                window=window,
            )
        u_prev, u_cur = u_cur, u_next

    return [snapshots[k] for k in sorted(snapshots)]


def snapshot_sigma(snapshots: list[SigmaSnapshot], t0: float, dt: float) -> SigmaSnapshot:
    """Recorded snapshot nearest to t0; must land within half a step."""
    best = min(snapshots, key=lambda s: abs(s.t - t0))
    if abs(best.t - t0) > 0.5 * dt + 1e-12:
        raise ValueError(f"no snapshot recorded within dt/2 of {t0}")
    return best
