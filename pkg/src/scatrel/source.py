"""Pseudorandom-noise source set: points, hyper-exponential weights, decoding lattice.

Boundary points are placed by the golden-angle low-discrepancy rule, which is
equidistributed (hence dense in the limit) and needs no random state.  The
weight of source j is lam**(-lam**j); all weight arithmetic stays in the
base-lam log domain, where the weights form the lattice {-lam**j}.  The
residual-modulo-lattice function m_A is the decoding primitive that separates
a weight from the unknown smooth factor multiplying it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .geometry import DiskBoundary

log = logging.getLogger(__name__)

GOLDEN_FRACTION = (math.sqrt(5.0) - 1.0) / 2.0

#: Smallest linear-domain weight representable with headroom in float64.
_LINEAR_FLOOR = 1.0e-280


@dataclass(frozen=True)
class SourceSet:
    """Boundary source points with log-domain weights.

    ``log_weights[j-1]`` holds log_lam a_j = -lam**j.  ``active`` lists the
    1-based indices whose sources actually fire in the forward solve; the
    inactive ones still belong to the decoding lattice.
    """

    lam: float
    count: int
    arclengths: np.ndarray
    points: np.ndarray
    log_weights: np.ndarray
    active: tuple[int, ...]
    perimeter: float = 2.0 * math.pi

    def weight(self, j: int) -> float:
        """Linear-domain weight a_j; only safe inside the active band."""
        w = self.lam ** float(self.log_weights[j - 1])
        if w < _LINEAR_FLOOR:
            raise OverflowError(f"weight a_{j} underflows double precision")
        return w

    def active_weights(self) -> np.ndarray:
        return np.array([self.weight(j) for j in self.active])

    def active_points(self) -> np.ndarray:
        return self.points[[j - 1 for j in self.active]]

    def max_gap(self) -> float:
        """Largest arc gap between adjacent source points (resolution figure)."""
        s = np.sort(self.arclengths)
        gaps = np.diff(np.concatenate([s, [s[0] + self.perimeter]]))
        return float(gaps.max())

    def nearest(self, point) -> int:
        """1-based index of the source closest to a boundary point."""
        d = np.linalg.norm(self.points - np.asarray(point)[None, :], axis=1)
        return int(np.argmin(d)) + 1


def generate_sources(
    lam: float,
    count: int,
    boundary: DiskBoundary | None = None,
    active: tuple[int, ...] | None = None,
) -> SourceSet:
    """Golden-angle source points on the boundary with weights lam**(-lam**j).

    Rejects configurations whose smallest active weight underflows double
    precision when a linear-domain value would be requested.
    """
    if lam <= 1.0:
        raise ValueError("lam must exceed 1")
    if count < 1:
        raise ValueError("need at least one source")
    boundary = boundary or DiskBoundary()
    per = boundary.perimeter
    arclengths = np.array(
        [math.fmod(j * GOLDEN_FRACTION, 1.0) * per for j in range(1, count + 1)]
    )
    points = np.stack([boundary.point_at(s) for s in arclengths])
    log_weights = np.array([-(lam ** j) for j in range(1, count + 1)])
    active = tuple(active) if active is not None else tuple(range(1, count + 1))
    if any(j < 1 or j > count for j in active):
        raise ValueError("active indices out of range")
    smallest = min(log_weights[j - 1] for j in active)
    if lam ** float(smallest) < _LINEAR_FLOOR:
        raise ValueError(
            "smallest active weight underflows double precision; reduce count"
        )
    return SourceSet(
        lam=lam,
        count=count,
        arclengths=arclengths,
        points=points,
        log_weights=log_weights,
        active=active,
        perimeter=per,
    )


class LatticeResidual(NamedTuple):
    """Result of reducing a log-domain value modulo the weight lattice."""

    r: float
    index: int
    in_range: bool


def m_A(s: float, lam: float) -> float:
    """Residual of s modulo the lattice {-lam**j} with smallest |r|, ties positive."""
    return m_A_result(s, lam).r


def m_A_result(s: float, lam: float, max_gap_guard: float = 0.0) -> LatticeResidual:
    """m_A with the matched lattice index and a decodable-range flag.

    The flag is clear when s lies above -lam + guard, where no lattice point
    can sit within the guard distance.
    """
    if lam <= 1.0:
        raise ValueError("lam must exceed 1")
    in_range = s <= -lam + max_gap_guard
    # Candidate exponents bracket log_lam(-s); the lattice grows so fast that
    # only a handful can compete.
    if s >= -1.0:
        candidates = [1, 2]
    else:
        j0 = int(math.floor(math.log(-s) / math.log(lam)))
        candidates = [j for j in range(max(1, j0 - 2), j0 + 3)]
    best_r, best_j = None, None
    for j in candidates:
        r = s + lam ** j
        if best_r is None or abs(r) < abs(best_r) or (
            abs(r) == abs(best_r) and r > best_r
        ):
            best_r, best_j = r, j
    return LatticeResidual(r=float(best_r), index=best_j, in_range=bool(in_range))


def lattice_gaps(lam: float, j: int) -> tuple[float, float]:
    """(gap below, gap above) around lattice point -lam**j; above is inf at j=1."""
    below = lam ** j * (lam - 1.0)
    above = math.inf if j == 1 else lam ** (j - 1) * (lam - 1.0)
    return below, above


@dataclass(frozen=True)
class ForcingField:
    """Space-time forcing as per-source separable kernels on the solver grid.

    Each source contributes weight * psi(t) * phi(x - x_j), with psi and phi
    normalized Gaussians truncated at four standard deviations.  Kernels store
    the grid-index window they touch; evaluation is a windowed accumulation.
    """

    windows: tuple[tuple[slice, slice], ...]
    kernels: tuple[np.ndarray, ...]
    time_profiles: tuple[np.ndarray, ...]
    t_axis: np.ndarray
    sigma_x: float
    sigma_t: float

    def add_to(self, out: np.ndarray, step: int) -> None:
        """Accumulate f(t_step, .) into ``out`` (same shape as the grid)."""
        for (wx, wy), ker, prof in zip(self.windows, self.kernels, self.time_profiles):
            a = prof[step]
            if a != 0.0:
                out[wx, wy] += a * ker

    @property
    def supported_steps(self) -> np.ndarray:
        mask = np.zeros(len(self.t_axis), dtype=bool)
        for prof in self.time_profiles:
            mask |= prof != 0.0
        return mask


def mollify_source(
    source_set: SourceSet,
    sigma_x: float,
    sigma_t: float,
    grid,
    t_axis: np.ndarray,
) -> ForcingField:
    """Mollified stand-in for the instantaneous point-source sum.

    The spatial bump of each source is truncated to the closed region M (the
    underlying sources live on its boundary and must not radiate from the
    exterior, or the exterior re-propagation identity breaks) and then
    renormalized: each kernel sums to 1/h^2 times the source weight so its
    grid integral equals the weight exactly; each time profile sums to 1/dt.
    Warns when two source bumps overlap above 1% of peak.
    """
    h = grid.spacing
    dt = float(t_axis[1] - t_axis[0])
    if sigma_x < 2.0 * h:
        raise ValueError("sigma_x must be at least two grid spacings")
    if sigma_t < 2.0 * dt:
        raise ValueError("sigma_t must be at least two time steps")

    pts = source_set.active_points()
    weights = source_set.active_weights()
    overlap_d = sigma_x * math.sqrt(2.0 * math.log(100.0))
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if np.linalg.norm(pts[i] - pts[j]) < overlap_d:
                log.warning(
                    "source bumps %d and %d overlap above 1%% of peak",
                    source_set.active[i],
                    source_set.active[j],
                )

    half = int(math.ceil(4.0 * sigma_x / h))
    windows, kernels, profiles = [], [], []
    for pt, w in zip(pts, weights):
        ix = int(round((pt[0] - grid.origin[0]) / h))
        iy = int(round((pt[1] - grid.origin[1]) / h))
        sl = (
            slice(max(ix - half, 0), min(ix + half + 1, grid.shape[0])),
            slice(max(iy - half, 0), min(iy + half + 1, grid.shape[1])),
        )
        xs = grid.origin[0] + h * np.arange(sl[0].start, sl[0].stop)
        ys = grid.origin[1] + h * np.arange(sl[1].start, sl[1].stop)
        dx2 = (xs[:, None] - pt[0]) ** 2 + (ys[None, :] - pt[1]) ** 2
        ker = np.exp(-dx2 / (2.0 * sigma_x ** 2))
        ker[dx2 > (4.0 * sigma_x) ** 2] = 0.0
        ker *= grid.interior_mask[sl]
        if ker.sum() == 0.0:
            raise ValueError("source bump has no support inside M on this grid")
        ker *= w / (ker.sum() * h * h)
        windows.append(sl)
        kernels.append(ker)

        prof = np.exp(-(t_axis ** 2) / (2.0 * sigma_t ** 2))
        prof[np.abs(t_axis) > 4.0 * sigma_t] = 0.0
        prof /= prof.sum() * dt
        profiles.append(prof)

    return ForcingField(
        windows=tuple(windows),
        kernels=tuple(kernels),
        time_profiles=tuple(profiles),
        t_axis=t_axis,
        sigma_x=sigma_x,
        sigma_t=sigma_t,
    )
