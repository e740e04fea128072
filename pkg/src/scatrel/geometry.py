"""Metric models, Hamiltonian derivatives, geodesic flow and boundary hits.

The plane carries a Riemannian metric g that is exactly Euclidean outside a
bounded region M (the unit disk by default).  Everything downstream needs
three things from this module: pointwise metric data with analytic first and
second derivatives, a fixed-step geodesic integrator driven by the unit-speed
Hamiltonian h(x,p) = (g^{jk}(x) p_j p_k)^{1/2}, and robust first-intersection
times with the region boundary.

A "blind mode" guard is provided: while active, any metric evaluation at a
point strictly inside M aborts the run.  The decoder runs under this guard;
ground-truth routines do not.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

TWO_PI = 2.0 * math.pi

#: |<normal, velocity>| below this at a boundary hit counts as tangential.
TANGENTIAL_THRESHOLD = 1.0e-3

#: |p| below this is rejected: h is not differentiable at p = 0.
MOMENTUM_FLOOR = 1.0e-12

#: Width of the collar around the boundary on which the exterior metric view
#: may be evaluated (g is identity there for every supported model).
EXTERIOR_COLLAR = 0.1


class BlindModeViolation(RuntimeError):
    """Raised when blind mode is active and the interior metric is queried."""


_GUARD = {"active": False, "interior_queries": 0}


@contextmanager
def blind_mode():
    """Abort on any interior metric evaluation within this context."""
    previous = _GUARD["active"]
    _GUARD["active"] = True
    try:
        yield
    finally:
        _GUARD["active"] = previous


def interior_query_count() -> int:
    """Number of interior metric queries recorded while blind mode was active."""
    return _GUARD["interior_queries"]


def reset_interior_query_count() -> None:
    _GUARD["interior_queries"] = 0


def _check_blind(model: "MetricModel", x: np.ndarray) -> None:
    if _GUARD["active"] and model.boundary.signed_distance(x) < 0.0:
        _GUARD["interior_queries"] += 1
        raise BlindModeViolation(
            f"interior metric access at {tuple(np.round(x, 6))} in blind mode"
        )


class DiskBoundary:
    """Unit-circle boundary of M with exact signed distance and frames.

    signed_distance > 0 outside M (in the exterior domain), < 0 inside.
    Arclength s runs counterclockwise from (1, 0); for the unit circle the
    arclength parameter equals the polar angle.
    """

    radius = 1.0

    @property
    def perimeter(self) -> float:
        return TWO_PI * self.radius

    def signed_distance(self, x) -> float:
        return float(np.hypot(x[0], x[1]) - self.radius)

    def point_at(self, s: float) -> np.ndarray:
        a = s / self.radius
        return np.array([math.cos(a), math.sin(a)]) * self.radius

    def arclength_of(self, x) -> float:
        return (math.atan2(x[1], x[0]) % TWO_PI) * self.radius

    def normal_at(self, s: float) -> np.ndarray:
        a = s / self.radius
        return np.array([math.cos(a), math.sin(a)])

    def tangent_at(self, s: float) -> np.ndarray:
        a = s / self.radius
        return np.array([-math.sin(a), math.cos(a)])

    def normal_at_point(self, x) -> np.ndarray:
        r = np.hypot(x[0], x[1])
        return np.asarray(x, dtype=float) / r

    def arc_separation(self, s1: float, s2: float) -> float:
        """Shortest arc distance between two arclength parameters."""
        d = abs(s1 - s2) % self.perimeter
        return min(d, self.perimeter - d)


_ZERO2 = np.zeros(2)
_ZERO22 = np.zeros((2, 2))


def _bump(u: float) -> tuple[float, float, float]:
    """C-infinity bump exp(-1/(1-u)) on [0,1) with first two u-derivatives."""
    if u >= 1.0:
        return 0.0, 0.0, 0.0
    q = 1.0 / (1.0 - u)
    v = math.exp(-q)
    d1 = -v * q * q
    d2 = v * (q ** 4 - 2.0 * q ** 3)
    return v, d1, d2


@dataclass(frozen=True)
class MetricModel:
    """Closed-form metric on the plane, Euclidean outside M.

    ``euclidean`` is the identity metric.  ``conformal_bump`` is
    g = c(x)^2 I with c = 1 + amplitude * exp(-1/(1 - r^2/rho^2)) supported in
    the ball of radius ``support_radius`` around ``center``; the support must
    stay strictly inside M.
    """

    kind: str = "euclidean"
    amplitude: float = 0.0
    support_radius: float = 0.4
    center: tuple[float, float] = (0.0, 0.0)
    exterior_radius: float = 3.0
    boundary: DiskBoundary = field(default_factory=DiskBoundary)

    def __post_init__(self):
        if self.kind not in ("euclidean", "conformal_bump"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "conformal_bump":
            reach = math.hypot(*self.center) + self.support_radius
            if reach >= self.boundary.radius:
                raise ValueError("conformal bump support must lie strictly inside M")
            if 1.0 + self.amplitude * math.exp(-1.0) <= 0.0:
                raise ValueError("conformal factor must stay positive")

    # -- conformal factor and derivatives --------------------------------

    def conformal_factor(self, x) -> float:
        if self.kind == "euclidean" or self.amplitude == 0.0:
            return 1.0
        dx = x[0] - self.center[0]
        dy = x[1] - self.center[1]
        u = (dx * dx + dy * dy) / (self.support_radius ** 2)
        return 1.0 + self.amplitude * _bump(u)[0]

    def _factor_derivs(self, x) -> tuple[float, np.ndarray, np.ndarray]:
        """c, grad c, hess c at x (all analytic)."""
        if self.kind == "euclidean" or self.amplitude == 0.0:
            return 1.0, np.zeros(2), np.zeros((2, 2))
        w = np.array([x[0] - self.center[0], x[1] - self.center[1]])
        rho2 = self.support_radius ** 2
        u = float(w @ w) / rho2
        v, v1, v2 = _bump(u)
        du = 2.0 * w / rho2
        d2u = (2.0 / rho2) * np.eye(2)
        c = 1.0 + self.amplitude * v
        grad = self.amplitude * v1 * du
        hess = self.amplitude * (v2 * np.outer(du, du) + v1 * d2u)
        return c, grad, hess

    # -- inverse-metric data ---------------------------------------------

    def scalar_inverse_derivs(self, x):
        """(s, ds, d2s) for the conformal inverse metric g^{-1} = s(x) I."""
        _check_blind(self, x)
        if self.kind == "euclidean" or self.amplitude == 0.0:
            return 1.0, _ZERO2, _ZERO22
        c, gc, hc = self._factor_derivs(x)
        s = c ** -2.0
        ds = -2.0 * c ** -3.0 * gc
        d2s = 6.0 * c ** -4.0 * np.outer(gc, gc) - 2.0 * c ** -3.0 * hc
        return s, ds, d2s

    def inverse_metric_derivs(self, x):
        """(G, dG, d2G) with G = g^{-1}(x), dG[l] = d_l G, d2G[m,l] = d_m d_l G."""
        s, ds, d2s = self.scalar_inverse_derivs(x)
        eye = np.eye(2)
        return s * eye, ds[:, None, None] * eye, d2s[:, :, None, None] * eye


def conformal_factor_grid(model, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized conformal factor c on the tensor grid xs x ys.

    Respects the blind-mode guard: with the guard active, any grid node
    strictly inside M trips a violation.
    """
    X = np.asarray(xs, dtype=float)[:, None]
    Y = np.asarray(ys, dtype=float)[None, :]
    if _GUARD["active"]:
        inside = np.hypot(X, Y) < model.boundary.radius
        if bool(np.any(inside)):
            _GUARD["interior_queries"] += int(np.count_nonzero(inside))
            raise BlindModeViolation("grid metric evaluation inside M in blind mode")
    if model.kind == "euclidean" or model.amplitude == 0.0:
        return np.ones((X.shape[0], Y.shape[1]))
    u = ((X - model.center[0]) ** 2 + (Y - model.center[1]) ** 2) / (
        model.support_radius ** 2
    )
    v = np.zeros_like(u)
    mask = u < 1.0
    v[mask] = np.exp(-1.0 / (1.0 - u[mask]))
    return 1.0 + model.amplitude * v


def metric_at(model: MetricModel, x) -> np.ndarray:
    """Metric tensor g(x); identity outside M by construction."""
    _check_blind(model, x)
    c = model.conformal_factor(x)
    return (c * c) * np.eye(2)


def metric_inverse_at(model: MetricModel, x) -> np.ndarray:
    _check_blind(model, x)
    c = model.conformal_factor(x)
    return np.eye(2) / (c * c)


def sqrt_det_at(model: MetricModel, x) -> float:
    """|g|^{1/2}(x); equals c^2 for conformal metrics in the plane."""
    _check_blind(model, x)
    c = model.conformal_factor(x)
    return c * c


class ExteriorMetricView:
    """Metric restricted to the exterior domain.

    Every supported model is exactly Euclidean outside M, so the view returns
    identity data without consulting the model.  Queries are allowed in a thin
    collar just inside the boundary (trial integrator steps land there); any
    deeper query aborts, which keeps the decoder honest.
    """

    def __init__(self, model: MetricModel):
        self.boundary = model.boundary
        self.exterior_radius = model.exterior_radius
        self.kind = "euclidean"
        self.amplitude = 0.0

    def _check(self, x):
        if self.boundary.signed_distance(x) < -EXTERIOR_COLLAR:
            if _GUARD["active"]:
                _GUARD["interior_queries"] += 1
            raise BlindModeViolation(
                f"exterior metric view queried deep inside M at {tuple(x)}"
            )

    def conformal_factor(self, x) -> float:
        self._check(x)
        return 1.0

    def scalar_inverse_derivs(self, x):
        self._check(x)
        return 1.0, _ZERO2, _ZERO22

    def inverse_metric_derivs(self, x):
        self._check(x)
        return np.eye(2), np.zeros((2, 2, 2)), np.zeros((2, 2, 2, 2))


@dataclass(frozen=True)
class PhasePoint:
    """Point on the unit cosphere bundle: position plus covariant momentum."""

    pos: np.ndarray
    mom: np.ndarray

    @staticmethod
    def from_tangent(model, y, eta) -> "PhasePoint":
        """Build a unit-speed phase point from a position and tangent vector."""
        y = np.asarray(y, dtype=float)
        eta = np.asarray(eta, dtype=float)
        c = model.conformal_factor(y)
        g = (c * c) * np.eye(2)
        norm = math.sqrt(float(eta @ g @ eta))
        if norm < MOMENTUM_FLOOR:
            raise ValueError("zero direction vector")
        return PhasePoint(pos=y, mom=(g @ eta) / norm)

    def velocity(self, model) -> np.ndarray:
        """Unit tangent vector (raised momentum) at this phase point."""
        c = model.conformal_factor(self.pos)
        return self.mom / (c * c)


@dataclass(frozen=True)
class HamiltonianBlocks:
    """h and its first/second derivatives at a phase-space point.

    dxp[j, l] = d^2 h / dp_j dx^l; dpp and dxx are the momentum and position
    Hessians (both symmetric).
    """

    value: float
    dx: np.ndarray
    dp: np.ndarray
    dxp: np.ndarray
    dpp: np.ndarray
    dxx: np.ndarray


def hamiltonian_blocks(model, x, p) -> HamiltonianBlocks:
    """All Hamiltonian derivatives needed by the flow and the beam system.

    Exploits the conformal structure g^{-1} = s(x) I of every supported model.
    """
    p = np.asarray(p, dtype=float)
    p2 = float(p @ p)
    if p2 < MOMENTUM_FLOOR ** 2:
        raise ValueError("momentum below floor; Hamiltonian not differentiable")
    s, ds, d2s = model.scalar_inverse_derivs(x)
    Q = s * p2
    h = math.sqrt(Q)
    dh_dp = (s / h) * p
    dh_dx = (p2 / (2.0 * h)) * ds
    # mixed block K[j, l] = d^2 h / dp_j dx^l = p_j ds_l / (2 h)
    dxp = np.outer(p, ds) / (2.0 * h)
    dpp = (s / h) * np.eye(2) - (s * s / h ** 3) * np.outer(p, p)
    dxx = (p2 / (2.0 * h)) * d2s - (p2 * p2 / (4.0 * h ** 3)) * np.outer(ds, ds)
    return HamiltonianBlocks(h, dh_dx, dh_dp, dxp, dpp, dxx)


def _hamilton_rhs(model, x, p):
    """Right-hand side of Hamilton's equations for h."""
    s, ds, _ = model.scalar_inverse_derivs(x)
    p2 = p[0] * p[0] + p[1] * p[1]
    h = math.sqrt(s * p2)
    xdot = (s / h) * p
    pdot = (-p2 / (2.0 * h)) * ds
    return xdot, pdot


def _rk4_step(model, x, p, dt):
    k1x, k1p = _hamilton_rhs(model, x, p)
    k2x, k2p = _hamilton_rhs(model, x + 0.5 * dt * k1x, p + 0.5 * dt * k1p)
    k3x, k3p = _hamilton_rhs(model, x + 0.5 * dt * k2x, p + 0.5 * dt * k2p)
    k4x, k4p = _hamilton_rhs(model, x + dt * k3x, p + dt * k3p)
    xn = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    pn = p + (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    return xn, pn


def _hamiltonian_value(model, x, p) -> float:
    G, _, _ = model.inverse_metric_derivs(x)
    return math.sqrt(float(p @ G @ p))


#: Allowed Hamiltonian drift along a flow before the step is rejected.
H_DRIFT_LIMIT = 1.0e-6


def geodesic_flow(model, start: PhasePoint, t: float, step: float = 1.0e-3) -> PhasePoint:
    """Flow a unit-speed phase point for time t with fixed-step RK4."""
    x = np.array(start.pos, dtype=float)
    p = np.array(start.mom, dtype=float)
    if t < 0:
        t, step = -t, step
        p = -p
        flipped = True
    else:
        flipped = False
    n_full = int(t / step)
    rem = t - n_full * step
    check_every = max(1, n_full // 8)
    for i in range(n_full):
        x, p = _rk4_step(model, x, p, step)
        if (i + 1) % check_every == 0:
            if abs(_hamiltonian_value(model, x, p) - 1.0) > H_DRIFT_LIMIT:
                raise RuntimeError(
                    "Hamiltonian drift exceeded 1e-6; reduce the flow step"
                )
    if rem > 1e-14:
        x, p = _rk4_step(model, x, p, rem)
    if flipped:
        p = -p
    return PhasePoint(pos=x, mom=p)


@dataclass(frozen=True)
class BoundaryHit:
    """First boundary intersection of a geodesic, with exit frame data."""

    tau: float
    point: np.ndarray | None
    direction: np.ndarray | None  # unit tangent at the hit
    normal_component: float
    transversal: bool

    @property
    def hit(self) -> bool:
        return math.isfinite(self.tau)


_NO_HIT = BoundaryHit(math.inf, None, None, 0.0, False)


def first_hit(
    model,
    start: PhasePoint,
    horizon: float = 10.0,
    step: float = 1.0e-3,
    bisect_tol: float = 1.0e-8,
) -> BoundaryHit:
    """First t > 0 with the geodesic on the boundary of M, located by sign
    change of the signed distance plus bisection.

    Starting points on the boundary itself are handled by ignoring crossings
    until the trajectory has moved clear of it.
    """
    boundary = model.boundary
    x = np.array(start.pos, dtype=float)
    p = np.array(start.mom, dtype=float)
    sd = boundary.signed_distance(x)
    departed = abs(sd) > bisect_tol * 10.0
    t = 0.0
    n_steps = int(math.ceil(horizon / step))
    for _ in range(n_steps):
        xn, pn = _rk4_step(model, x, p, step)
        sdn = boundary.signed_distance(xn)
        if not departed:
            if abs(sdn) > 1.0e-6:
                departed = True
        elif sd * sdn < 0.0 or sdn == 0.0:
            # bisect on the step fraction, re-integrating from the step start
            lo, hi = 0.0, step
            x_hit, p_hit = xn, pn
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                xm, pm = _rk4_step(model, x, p, mid)
                sdm = boundary.signed_distance(xm)
                if sd * sdm < 0.0:
                    hi = mid
                    x_hit, p_hit = xm, pm
                else:
                    lo = mid
                    if abs(sdm) < 1e-15:
                        x_hit, p_hit = xm, pm
                        break
                if hi - lo < bisect_tol * 1e-2:
                    x_hit, p_hit = _rk4_step(model, x, p, 0.5 * (lo + hi))
                    break
            tau = t + 0.5 * (lo + hi)
            nu = boundary.normal_at_point(x_hit)
            vel = PhasePoint(pos=x_hit, mom=p_hit).velocity(model)
            ncomp = float(nu @ vel)
            return BoundaryHit(
                tau=tau,
                point=x_hit,
                direction=vel,
                normal_component=ncomp,
                transversal=abs(ncomp) >= TANGENTIAL_THRESHOLD,
            )
        x, p, sd = xn, pn, sdn
        t += step
        if np.hypot(x[0], x[1]) > model.exterior_radius:
            break
    return _NO_HIT


def first_hit_tau(model, start: PhasePoint, horizon: float = 10.0, step: float = 1.0e-3) -> float:
    """First intersection time with the boundary of M; +inf if none in reach."""
    return first_hit(model, start, horizon=horizon, step=step).tau


@dataclass(frozen=True)
class GroundTruthEntry:
    """Scattering-relation row for one inward boundary direction."""

    entry_point: np.ndarray
    entry_direction: np.ndarray
    exit_point: np.ndarray | None
    exit_direction: np.ndarray | None
    tau: float
    transversal: bool

    @property
    def trapped(self) -> bool:
        return not math.isfinite(self.tau)


def ground_truth_sigma(
    model,
    entry: PhasePoint,
    horizon: float = 10.0,
    step: float = 1.0e-3,
) -> GroundTruthEntry:
    """Exit point/direction/time by interior geodesic integration.

    Test-harness privilege: evaluates the metric everywhere, including inside
    M.  The entry must point inward.
    """
    nu = model.boundary.normal_at_point(entry.pos)
    vel = entry.velocity(model)
    if float(nu @ vel) >= 0.0:
        raise ValueError("entry direction must point into M")
    hit = first_hit(model, entry, horizon=horizon, step=step)
    return GroundTruthEntry(
        entry_point=np.array(entry.pos),
        entry_direction=vel,
        exit_point=hit.point,
        exit_direction=hit.direction,
        tau=hit.tau,
        transversal=hit.transversal,
    )
