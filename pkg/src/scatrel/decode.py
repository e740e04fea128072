"""Blind inverse pipeline: probes, hit scanning, weight decoding, recovery.

For an inward boundary direction (x, xi) the decoder builds exterior probes
by flowing backward along the known exterior metric, scans the hit functional
S along each probe for peaks, decodes each peak magnitude into a source index
and a smooth factor via the weight lattice, and recovers the travel time
(smallest accepted peak lead time), the exit point (the decoded source
position) and the exit direction (boundary gradient of the total travel time
fitted across neighboring sources).

Two interchangeable probe sessions supply S: an oracle session that sums
full-metric beams directly over the source points, and a blind data session
that only touches the boundary trace and the exterior metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import pairing
from .beam import CHART_RADIUS, beam_initial_data, propagate_frames
from .geometry import (
    ExteriorMetricView,
    MetricModel,
    PhasePoint,
    first_hit_tau,
    geodesic_flow,
    ground_truth_sigma,
)
from .source import SourceSet, lattice_gaps, m_A_result


@dataclass(frozen=True)
class DecodeParams:
    """Tunable knobs of the blind pipeline (defaults match the desk scale)."""

    eps_schedule: tuple[float, ...] = (0.08, 0.04, 0.02)
    chart_radius: float = CHART_RADIUS
    offsets: tuple[float, ...] = (0.1, 0.2, 0.3)
    scan_start: float = 0.25
    max_path: float = 2.6
    scan_step_factor: float = 0.25
    threshold_factor: float = 10.0
    noise_floor: float | None = None  # None: adaptive from the scan itself
    b_bound: float = 1.25
    route: str = "m_A"  # m_A | known_lattice
    frame_step: float = 2.0e-3
    cutoff_radius: float = 0.25
    fan_eps: float = 0.01
    fan_arc_reach: float = 2.0
    fan_glare_max: float = 0.2
    fan_angle_bracket: float = 0.3
    fan_golden_iters: int = 18
    merge_width_factor: float = 2.0
    # sqrt(c1) of the ellipticity bounds: unit-speed paths cover Euclidean
    # distance at least this fast, which bounds admissible hit times below
    speed_floor: float = 1.0
    speed_tolerance: float = 0.06

    @property
    def eps_min(self) -> float:
        return min(self.eps_schedule)

    @property
    def scan_step(self) -> float:
        return self.scan_step_factor * math.sqrt(self.eps_min)


@dataclass(frozen=True)
class Probe:
    """Exterior phase point generated by backward flow from a boundary entry."""

    base: PhasePoint
    offset: float
    tau_ext: float
    entry_point: np.ndarray
    entry_dir: np.ndarray


def make_probes(exterior, x, xi, offsets, params: DecodeParams | None = None) -> list[Probe]:
    """Backward exterior flow from (x, -xi); drops offsets that leave the
    exterior domain or whose verification hit time disagrees with the offset."""
    params = params or DecodeParams()
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    probes = []
    for s in offsets:
        back = geodesic_flow(
            exterior, PhasePoint.from_tangent(exterior, x, -xi), s,
            step=min(1e-3, s / 8)
        )
        y = back.pos
        if exterior.boundary.signed_distance(y) <= 0.0:
            continue
        if np.max(np.abs(y)) >= exterior.exterior_radius:
            continue
        start = PhasePoint(pos=y, mom=-back.mom)
        tau = first_hit_tau(exterior, start, horizon=4.0 * s + 1.0, step=1e-3)
        if not math.isfinite(tau) or abs(tau - s) > 1e-6:
            continue
        probes.append(
            Probe(base=start, offset=s, tau_ext=s, entry_point=x, entry_dir=xi)
        )
    return probes


@dataclass(frozen=True)
class DecodedHit:
    index: int
    beta: float
    residual: float
    route: str
    in_band: bool


@dataclass
class HitEvent:
    t_peak: float
    s_peak: complex
    eps: float
    confidence: float = 1.0
    merged: bool = False
    decoded: DecodedHit | None = None
    per_eps_index: tuple[int, ...] = ()

    @property
    def accepted(self) -> bool:
        return self.decoded is not None and self.decoded.in_band and self.confidence > 0


def decode_hit(magnitude: float, lam: float, count: int, b_bound: float,
               route: str) -> DecodedHit:
    """Decode |S*| into a source index and smooth factor via the weight lattice.

    The m_A route reduces log_lam |S*| modulo the lattice; the known-lattice
    route is a bounded-residual argmin over the finite lattice.  A hit is in
    band when the lattice gap at the decoded index exceeds twice the
    configured smooth-factor bound and the residual itself sits inside the
    bound.
    """
    if magnitude <= 0.0:
        return DecodedHit(index=0, beta=0.0, residual=math.inf, route=route,
                          in_band=False)
    s = math.log(magnitude) / math.log(lam)
    if route == "m_A":
        res = m_A_result(s, lam)
        k, r = res.index, res.r
    elif route == "known_lattice":
        k = min(range(1, count + 1), key=lambda j: abs(s + lam ** j))
        r = s + lam ** k
    else:
        raise ValueError(f"unknown decode route {route!r}")
    beta = lam ** r
    gap_below, gap_above = lattice_gaps(lam, k)
    in_band = (
        abs(r) <= b_bound
        and lam ** k * (lam - 1.0) > 2.0 * b_bound
        and (-0.5 * gap_below < r < 0.5 * min(gap_above, gap_below * 10))
        and 1 <= k <= count
    )
    return DecodedHit(index=k, beta=beta, residual=r, route=route, in_band=in_band)


def _local_maxima(values: np.ndarray) -> np.ndarray:
    v = values
    idx = np.nonzero((v[1:-1] >= v[:-2]) & (v[1:-1] > v[2:]))[0] + 1
    return idx


def scan_hits(session, probe: Probe, params: DecodeParams) -> list[HitEvent]:
    """Scan |S| along the probe, detect and refine peaks, decode each one.

    Peaks closer than two beam widths are merged and flagged low-confidence;
    decoded indices must agree across the final two epsilons of the schedule,
    otherwise the hit keeps only residual confidence.
    """
    t_lo = probe.tau_ext + params.scan_start
    t_hi = probe.tau_ext + params.max_path
    step = params.scan_step
    t0s = np.arange(t_lo, t_hi + step / 2, step)
    eps_last = params.eps_schedule[-1]
    scans = {eps: np.abs(session.scan(probe, t0s, eps)) for eps in params.eps_schedule}
    mags = scans[eps_last]

    floor = params.noise_floor
    if floor is None:
        # low quantile of the scan: robust to broad tails of strong sources
        floor = max(
            float(np.quantile(mags, 0.1)), 1e-14 * float(mags.max() + 1e-300)
        )
    threshold = params.threshold_factor * floor

    peaks = [i for i in _local_maxima(mags) if mags[i] > threshold]
    # merge peaks within two beam widths, keeping the stronger
    width = params.merge_width_factor * math.sqrt(eps_last)
    merged_flag = {}
    kept = []
    for i in sorted(peaks, key=lambda i: -mags[i]):
        close = [j for j in kept if abs(t0s[i] - t0s[j]) < width]
        if close:
            for j in close:
                merged_flag[j] = True
            continue
        kept.append(i)
        merged_flag.setdefault(i, False)

    hits = []
    for i in sorted(kept):
        t_star, s_star = session.refine(probe, t0s, i, eps_last)
        per_eps = []
        per_mag = []
        for eps in params.eps_schedule:
            mag_eps = abs(session.value(probe, t_star, eps))
            per_mag.append(mag_eps)
            per_eps.append(
                decode_hit(mag_eps, session.source_set.lam,
                           session.source_set.count, params.b_bound,
                           params.route).index
            )
        dec = decode_hit(
            abs(s_star), session.source_set.lam, session.source_set.count,
            params.b_bound, params.route,
        )
        confidence = 1.0
        if merged_flag.get(i, False):
            confidence = 0.4
        if len(set(per_eps[-2:])) > 1:
            confidence = min(confidence, 0.3)
        # a genuine hit is eps-stable; a near-miss tail collapses as eps
        # shrinks, however plausible its single-eps magnitude may look
        if per_mag[-2] > 0 and not (0.4 <= per_mag[-1] / per_mag[-2] <= 2.5):
            confidence = min(confidence, 0.2)
        # speed-bound admissibility: a unit-speed geodesic cannot reach the
        # claimed exit from the probe base faster than the Euclidean distance
        # times the ellipticity speed floor allows
        if dec.in_band:
            claimed = session.source_set.points[dec.index - 1]
            d_min = float(np.linalg.norm(claimed - probe.base.pos))
            if t_star + params.speed_tolerance < d_min * params.speed_floor:
                confidence = 0.0
        if not dec.in_band:
            confidence = 0.0
        hits.append(
            HitEvent(
                t_peak=t_star,
                s_peak=s_star,
                eps=eps_last,
                confidence=confidence,
                merged=merged_flag.get(i, False),
                decoded=dec,
                per_eps_index=tuple(per_eps),
            )
        )
    return hits


def recover_tau(probes_hits: list[tuple[Probe, list[HitEvent]]]) -> tuple[float, HitEvent | None, Probe | None]:
    """Smallest accepted peak lead time over the probe family; inf if none."""
    best = math.inf
    best_hit = None
    best_probe = None
    for probe, hits in probes_hits:
        for h in hits:
            if h.accepted and h.confidence >= 0.5:
                lead = h.t_peak - probe.tau_ext
                if lead < best:
                    best, best_hit, best_probe = lead, h, probe
    return best, best_hit, best_probe


# ---------------------------------------------------------------------------
# probe sessions


class OracleProbeSession:
    """S from full-metric beam frames summed over source points directly.

    Test-harness privilege: not available to the blind decoder.
    """

    def __init__(self, model: MetricModel, source_set: SourceSet,
                 params: DecodeParams):
        self.model = model
        self.source_set = source_set
        self.params = params
        self.fan_eps = params.fan_eps
        self._tracks = {}

    def _track(self, base: PhasePoint, duration: float):
        key = (round(base.pos[0], 12), round(base.pos[1], 12),
               round(base.mom[0], 12), round(base.mom[1], 12))
        tr = self._tracks.get(key)
        if tr is None or tr.duration < duration - 1e-9:
            tr = propagate_frames(self.model, base, duration, self.params.frame_step)
            self._tracks[key] = tr
        return tr

    def scan(self, probe: Probe, t0s, eps: float) -> np.ndarray:
        tr = self._track(probe.base, float(np.max(t0s)) + 0.05)
        return pairing.s_oracle_scan(
            self.source_set, tr, t0s, eps, self.model, self.params.chart_radius
        )

    def value(self, probe: Probe, t0: float, eps: float) -> complex:
        tr = self._track(probe.base, t0 + 0.05)
        return pairing.s_oracle(
            self.source_set, tr, t0, eps, self.model, self.params.chart_radius
        )

    def refine(self, probe: Probe, t0s, i: int, eps: float) -> tuple[float, complex]:
        """Golden-section maximization of |S| around scan sample i."""
        lo = t0s[max(i - 1, 0)]
        hi = t0s[min(i + 1, len(t0s) - 1)]
        tr = self._track(probe.base, hi + 0.05)

        def f(t):
            return -abs(pairing.s_oracle(
                self.source_set, tr, t, eps, self.model, self.params.chart_radius
            ))

        inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
        a, b = lo, hi
        c = b - inv_phi * (b - a)
        d = a + inv_phi * (b - a)
        fc, fd = f(c), f(d)
        for _ in range(40):
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - inv_phi * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + inv_phi * (b - a)
                fd = f(d)
            if b - a < 1e-7:
                break
        t_star = 0.5 * (a + b)
        return t_star, pairing.s_oracle(
            self.source_set, tr, t_star, eps, self.model, self.params.chart_radius
        )


class DataProbeSession:
    """Blind S from the measured trace re-propagated through the exterior.

    One exterior solve per probe base serves the whole scan and direction
    fan: snapshots over the scan grid are cached on the beam window around
    the base point, and the pairing against any beam's initial data is a
    cheap windowed sum.  The spec-exact cutoff route remains available for
    verification at decoded peaks.
    """

    def __init__(self, trace, exterior: ExteriorMetricView, grid,
                 t_start: float, source_set: SourceSet, params: DecodeParams):
        self.trace = trace
        self.exterior = exterior
        self.grid = grid
        self.t_start = t_start
        self.source_set = source_set
        self.params = params
        # mollification and solver noise rule out very small eps on this path
        self.fan_eps = params.eps_schedule[-1]
        self._providers = {}
        self._beam_cache = {}

    def _provider(self, probe: Probe) -> pairing.DataSProvider:
        key = (round(probe.base.pos[0], 12), round(probe.base.pos[1], 12))
        prov = self._providers.get(key)
        if prov is None:
            t_lo = probe.tau_ext + self.params.scan_start
            t_hi = probe.tau_ext + self.params.max_path
            t0s = np.arange(t_lo, t_hi + self.params.scan_step / 2,
                            self.params.scan_step)
            bd = self._beam(probe.base, self.params.eps_schedule[0])
            margin = int(math.ceil(0.05 / self.grid.spacing))
            w = bd.window
            window = (
                slice(max(w[0].start - margin, 0), min(w[0].stop + margin, self.grid.shape[0])),
                slice(max(w[1].start - margin, 0), min(w[1].stop + margin, self.grid.shape[1])),
            )
            prov = pairing.DataSProvider(
                self.trace, self.exterior, self.grid, self.t_start, t0s, window
            )
            prov.window = window
            self._providers[key] = prov
        return prov

    def _beam(self, base: PhasePoint, eps: float, window=None):
        key = (round(base.pos[0], 12), round(base.pos[1], 12),
               round(base.mom[0], 12), round(base.mom[1], 12), eps)
        bd = self._beam_cache.get(key)
        if bd is None:
            bd = beam_initial_data(
                self.exterior, base.pos, base.velocity(self.exterior), eps,
                self.params.cutoff_radius, self.grid,
            )
            if window is not None and bd.window != window:
                bd = _embed_beam(bd, window)
            self._beam_cache[key] = bd
        return bd

    def scan(self, probe: Probe, t0s, eps: float) -> np.ndarray:
        prov = self._provider(probe)
        bd = _embed_beam(self._beam(probe.base, eps), prov.window)
        out = np.empty(len(t0s), dtype=complex)
        for n, t0 in enumerate(np.atleast_1d(t0s)):
            out[n] = prov.value(bd, float(t0))
        return out

    def value(self, probe: Probe, t0: float, eps: float) -> complex:
        prov = self._provider(probe)
        bd = _embed_beam(self._beam(probe.base, eps), prov.window)
        return prov.value(bd, t0)

    def verify_value(self, probe: Probe, t0: float, eps: float) -> complex:
        """Spec-exact route: chi-cutoff trace and a dedicated exterior solve."""
        bd = self._beam(probe.base, eps)
        return pairing.s_data(
            self.trace, bd, self.exterior, self.grid, t0, self.t_start
        )

    def refine(self, probe: Probe, t0s, i: int, eps: float) -> tuple[float, complex]:
        """Parabolic vertex through the three scan samples around the max."""
        prov = self._provider(probe)
        bd = _embed_beam(self._beam(probe.base, eps), prov.window)
        ts = t0s[i - 1: i + 2]
        vals = np.array([abs(prov.value(bd, float(t))) for t in ts])
        if len(ts) < 3:
            return float(t0s[i]), prov.value(bd, float(t0s[i]))
        denom = (vals[0] - 2 * vals[1] + vals[2])
        if abs(denom) < 1e-300:
            t_star = float(ts[1])
        else:
            t_star = float(ts[1] + 0.5 * (vals[0] - vals[2]) / denom * (ts[1] - ts[0]))
            t_star = min(max(t_star, float(ts[0])), float(ts[2]))
        v = prov.value(bd, t_star)
        vert = vals[1] - 0.125 * (vals[0] - vals[2]) ** 2 / denom if abs(denom) > 1e-300 else vals[1]
        phase = v / abs(v) if abs(v) > 0 else 1.0
        return t_star, complex(phase * max(vert, 0.0))


def _embed_beam(bd, window):
    """Re-express beam data on an enclosing window (zero padding)."""
    if bd.window == window:
        return bd
    f = np.zeros(
        (window[0].stop - window[0].start, window[1].stop - window[1].start),
        dtype=complex,
    )
    ft = f.copy()
    sx = slice(bd.window[0].start - window[0].start,
               bd.window[0].stop - window[0].start)
    sy = slice(bd.window[1].start - window[1].start,
               bd.window[1].stop - window[1].start)
    f[sx, sy] = bd.field
    ft[sx, sy] = bd.field_dt
    return replace(bd, window=window, field=f, field_dt=ft)


# ---------------------------------------------------------------------------
# exit point and direction


def recover_exit_point(source_set: SourceSet, hit: HitEvent) -> np.ndarray:
    """Decoded source position; the point the hit's index names."""
    return source_set.points[hit.decoded.index - 1]


@dataclass
class DirectionResult:
    zeta: np.ndarray | None
    tangential_speed: float
    fit_points: list[tuple[float, float]]
    c4_ok: bool
    grazing: bool
    flags: list[str] = field(default_factory=list)


def fan_targets(source_set: SourceSet, y0, exit_index: int, params: DecodeParams,
                eps: float) -> list[tuple[int, float]]:
    """Sources usable as travel-time samples around the decoded exit.

    A source qualifies when it lies within the configured arc reach of the
    exit and the predicted tail of every other source at its position stays
    below the configured glare cap; the estimate uses the conservative
    Euclidean transverse decay 1/(1 + d^2) for Im H and public data only
    (the source table and the probe base).
    """
    src = source_set
    s0 = src.arclengths[exit_index - 1]
    per = src.perimeter
    log_lam = math.log(src.lam)
    out = []
    for j in src.active:
        ds = _signed_arc(src.arclengths[j - 1] - s0, per)
        if abs(ds) > params.fan_arc_reach:
            continue
        d = float(np.linalg.norm(src.points[j - 1] - y0))
        imh_est = 1.0 / (1.0 + d * d)
        glare = 0.0
        for jp in src.active:
            if jp == j:
                continue
            chord = float(np.linalg.norm(src.points[j - 1] - src.points[jp - 1]))
            expo = (src.log_weights[jp - 1] - src.log_weights[j - 1]) * log_lam
            expo -= imh_est * chord * chord / (2.0 * eps)
            if expo > -700.0:
                glare = max(glare, math.exp(min(expo, 50.0)))
        if glare < params.fan_glare_max or j == exit_index:
            out.append((j, ds))
    return sorted(out, key=lambda t: t[1])


def _trig_fit_derivative(s_arr: np.ndarray, vals: np.ndarray, s0: float) -> float:
    """d/ds at s0 of a least-squares fit tailored to the circular boundary.

    The basis starts with 1, cos s, sin s: squared distances from any fixed
    exterior point lie exactly in their span when the exterior metric is
    Euclidean, so the dominant part of the data costs no truncation error.
    With enough points, centered even/odd powers (s - s0)^2, (s - s0)^3 are
    appended; they vanish to first order at s0, soaking up the interior
    detour's curvature without influencing the recovered slope.
    """
    rel = s_arr - s0
    basis = [
        (np.ones_like(rel), 0.0),
        (np.cos(s_arr), -math.sin(s0)),
        (np.sin(s_arr), math.cos(s0)),
        (rel ** 2, 0.0),
        (rel ** 3, 0.0),
    ]
    n = min(len(basis), len(s_arr))
    a = np.stack([basis[i][0] for i in range(n)], axis=1)
    coeffs, *_ = np.linalg.lstsq(a, vals, rcond=None)
    return float(sum(coeffs[i] * basis[i][1] for i in range(n)))


def recover_exit_direction(
    session,
    probe: Probe,
    exit_index: int,
    t_exit: float,
    params: DecodeParams,
    boundary,
) -> DirectionResult:
    """Exit direction from the boundary gradient of the total travel time.

    For the decoded exit source and its glare-free neighbors, the fan angle
    from the probe base is tuned (golden section) to maximize the peak of
    |S| in a window around each source's expected arrival; the peak time is
    the total travel time to that exit point.  The squared times are fitted
    against boundary arclength in a trigonometric basis; the derivative at
    the exit gives the tangential exit speed and the unit normal completes
    the direction.  Fan angles that are not monotone along the boundary
    raise the C4 flag (conjugate point suspected).
    """
    src = session.source_set
    y0 = probe.base.pos
    s0 = src.arclengths[exit_index - 1]
    eps = getattr(session, "fan_eps", params.fan_eps)

    targets = fan_targets(src, y0, exit_index, params, eps)
    flags = []
    if len(targets) < 3:
        flags.append("fan-too-sparse")

    pts = []
    angles = []
    aims = {
        j: math.atan2(src.points[j - 1][1] - y0[1], src.points[j - 1][0] - y0[0])
        for j, _ in targets
    }
    for j, ds in targets:
        aim_pt = src.points[j - 1]
        aim = aims[j]
        d = float(np.linalg.norm(aim_pt - y0))
        # time window around the straight-line distance: the interior metric
        # can delay a ray (slow lens) but never beat the exterior速 straight path
        lo = max(probe.tau_ext + params.scan_start * 0.5, d - 0.25)
        hi = min(probe.tau_ext + params.max_path, 1.15 * d + 0.3)
        if hi <= lo + 4 * params.scan_step:
            continue
        angle_star, t_star, mag = _tune_fan_angle(
            session, probe, y0, aim, (lo, hi), eps, params
        )
        if mag <= 0.0:
            flags.append(f"no-peak-at-source-{j}")
            continue
        others = [abs(_signed_angle(aim_ref - angle_star))
                  for jj, aim_ref in aims.items() if jj != j]
        if others and min(others) < abs(_signed_angle(aim - angle_star)):
            flags.append(f"fan-drift-at-source-{j}")
            continue
        pts.append((float(src.arclengths[j - 1]), float(t_star), float(ds)))
        angles.append((ds, angle_star))

    # C4: the exit-to-angle map must stay monotone along the boundary.  A
    # wide fan at shallow geometry can fold at its edges (the boundary seen
    # from the base point turns past tangency); trim folded edges outward
    # from the central source and flag only if too little survives.
    pts, angles, trimmed = _trim_fan_folds(pts, angles)
    if trimmed:
        flags.append("fan-fold-trimmed")
    c4_ok = not trimmed or len(pts) >= 3

    central = [p for p in pts if abs(p[2]) < 1e-9]
    sided = (min((p[2] for p in pts), default=0.0) < 0.0
             and max((p[2] for p in pts), default=0.0) > 0.0)
    if len(pts) < 3 or not central or not sided:
        return DirectionResult(None, math.nan,
                               [(p[2], p[1]) for p in pts], False, False,
                               flags + ["fan-failed"])

    s_arr = np.array([p[0] for p in pts])
    ell = np.array([p[1] for p in pts])
    d_sq = _trig_fit_derivative(s_arr, ell ** 2, s0)
    dlds = d_sq / (2.0 * central[0][1])

    grazing = abs(dlds) >= 1.0
    if grazing:
        dlds = math.copysign(1.0 - 1e-9, dlds)
        flags.append("grazing-clamped")
    tangent = boundary.tangent_at(s0)
    normal = boundary.normal_at(s0)
    zeta = dlds * tangent + math.sqrt(max(0.0, 1.0 - dlds * dlds)) * normal
    return DirectionResult(
        zeta=zeta,
        tangential_speed=dlds,
        fit_points=[(p[2], p[1]) for p in pts],
        c4_ok=c4_ok,
        grazing=grazing,
        flags=flags,
    )


def _trim_fan_folds(pts, angles, jitter: float = 1e-5):
    """Drop fan points beyond a fold of the arclength-to-angle map.

    Points and angles are matched lists keyed by signed arc offset; folds are
    detected as sign reversals (beyond jitter) of consecutive angle
    differences moving outward from the central point.  Keeps at least the
    three centermost points so a best-effort fit remains possible.
    """
    order = sorted(range(len(pts)), key=lambda i: pts[i][2])
    ds_sorted = [pts[i][2] for i in order]
    ang_sorted = list(np.unwrap([angles[i][1] for i in order]))
    center = min(range(len(ds_sorted)), key=lambda i: abs(ds_sorted[i]))
    diffs = np.diff(ang_sorted)
    if len(diffs) == 0:
        return pts, angles, False
    sign = 1.0 if np.median(diffs) > 0 else -1.0
    keep = {center}
    for i in range(center, len(ds_sorted) - 1):
        if diffs[i] * sign <= -jitter:
            break
        keep.add(i + 1)
    for i in range(center - 1, -1, -1):
        if diffs[i] * sign <= -jitter:
            break
        keep.add(i)
    if center + 1 < len(ds_sorted):
        keep.add(center + 1)
    if center - 1 >= 0:
        keep.add(center - 1)
    trimmed = len(keep) < len(ds_sorted)
    kept_idx = [order[i] for i in sorted(keep)]
    return ([pts[i] for i in kept_idx], [angles[i] for i in kept_idx], trimmed)


def _signed_arc(d: float, per: float) -> float:
    d = math.fmod(d, per)
    if d > per / 2:
        d -= per
    if d < -per / 2:
        d += per
    return d


def _signed_angle(a: float) -> float:
    return math.atan2(math.sin(a), math.cos(a))


def _tune_fan_angle(session, probe: Probe, y0, aim: float, window, eps,
                    params: DecodeParams):
    """Golden-section over the fan angle maximizing the windowed |S| peak.

    During the search the peak is located by a parabolic vertex on the scan
    grid; the winning angle gets one full refinement pass at the end.
    """
    lo_t, hi_t = window
    step = params.scan_step
    t0s = np.arange(lo_t, hi_t + step / 2, step)
    exterior = _session_exterior(session)

    def fan_probe(angle: float) -> Probe:
        eta = np.array([math.cos(angle), math.sin(angle)])
        return replace(
            probe, base=PhasePoint.from_tangent(exterior, y0, eta)
        )

    def peak(angle: float):
        vals = np.abs(session.scan(fan_probe(angle), t0s, eps))
        i = int(np.argmax(vals))
        if 0 < i < len(vals) - 1:
            denom = vals[i - 1] - 2 * vals[i] + vals[i + 1]
            if abs(denom) > 1e-300:
                return float(
                    vals[i] - 0.125 * (vals[i - 1] - vals[i + 1]) ** 2 / denom
                ), i
        return float(vals[i]), i

    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a = aim - params.fan_angle_bracket
    b = aim + params.fan_angle_bracket
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, _ = peak(c)
    fd, _ = peak(d)
    for _ in range(params.fan_golden_iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc, _ = peak(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd, _ = peak(d)
        if b - a < 2e-4:
            break
    angle_star = c if fc > fd else d
    best = fan_probe(angle_star)
    vals = np.abs(session.scan(best, t0s, eps))
    i = int(np.argmax(vals))
    if 0 < i < len(vals) - 1:
        t_star, s_star = session.refine(best, t0s, i, eps)
        return angle_star, t_star, abs(s_star)
    return angle_star, float(t0s[i]), float(vals[i])


def _session_exterior(session):
    if isinstance(session, DataProbeSession):
        return session.exterior
    return ExteriorMetricView(session.model)


# ---------------------------------------------------------------------------
# per-entry pipeline and comparison


@dataclass
class EntryResult:
    entry_point: np.ndarray
    entry_dir: np.ndarray
    tau_hat: float
    exit_hat: np.ndarray | None
    exit_index: int | None
    zeta_hat: np.ndarray | None
    confidence: float
    c4_ok: bool
    flags: list[str]
    hits: list[HitEvent]
    stabilization_error: float


def decode_entry(session, exterior, x, xi, params: DecodeParams) -> EntryResult:
    """Run the full blind pipeline for one boundary entry."""
    probes = make_probes(exterior, x, xi, params.offsets, params)
    flags: list[str] = []
    if not probes:
        return EntryResult(np.asarray(x), np.asarray(xi), math.inf, None, None,
                           None, 0.0, False, ["no-probes"], [], math.nan)
    probes_hits = [(p, scan_hits(session, p, params)) for p in probes]
    tau_lead, best_hit, best_probe = recover_tau(probes_hits)
    all_hits = [h for _, hs in probes_hits for h in hs]
    if best_hit is None:
        return EntryResult(np.asarray(x), np.asarray(xi), math.inf, None, None,
                           None, 0.0, False, ["no-decodable-hit"], all_hits,
                           math.nan)

    exit_idx = best_hit.decoded.index
    z_hat = recover_exit_point(session.source_set, best_hit)

    est = pairing.s_limit(
        lambda t0, eps: session.value(best_probe, t0, eps),
        best_hit.t_peak,
        params.eps_schedule,
    )
    if not est.stabilizing:
        flags.append("eps-not-stabilizing")

    # direction from the widest-offset probe; retry closer on C4 failure
    dir_probe = max(probes, key=lambda p: p.offset)
    dres = recover_exit_direction(
        session, dir_probe, exit_idx, best_hit.t_peak, params,
        exterior.boundary,
    )
    if not dres.c4_ok and len(probes) > 1:
        flags.append("c4-retry")
        dir_probe = min(probes, key=lambda p: p.offset)
        dres = recover_exit_direction(
            session, dir_probe, exit_idx, best_hit.t_peak, params,
            exterior.boundary,
        )
    flags.extend(dres.flags)
    if not dres.c4_ok:
        flags.append("c4-failure")

    return EntryResult(
        entry_point=np.asarray(x, dtype=float),
        entry_dir=np.asarray(xi, dtype=float),
        tau_hat=tau_lead,
        exit_hat=z_hat,
        exit_index=exit_idx,
        zeta_hat=dres.zeta,
        confidence=best_hit.confidence,
        c4_ok=dres.c4_ok,
        flags=flags,
        hits=all_hits,
        stabilization_error=est.error_estimate,
    )


@dataclass
class ComparedEntry:
    result: EntryResult
    tau_true: float
    exit_true: np.ndarray | None
    zeta_true: np.ndarray | None
    transversal: bool

    @property
    def tau_error(self) -> float:
        if math.isinf(self.result.tau_hat) or math.isinf(self.tau_true):
            return math.inf if self.result.tau_hat != self.tau_true else 0.0
        return abs(self.result.tau_hat - self.tau_true)

    @property
    def exit_error(self) -> float:
        if self.result.exit_hat is None or self.exit_true is None:
            return math.inf
        return float(np.linalg.norm(self.result.exit_hat - self.exit_true))

    @property
    def zeta_error_rad(self) -> float:
        if self.result.zeta_hat is None or self.zeta_true is None:
            return math.inf
        a = self.result.zeta_hat / np.linalg.norm(self.result.zeta_hat)
        b = self.zeta_true / np.linalg.norm(self.zeta_true)
        return float(abs(math.atan2(a[0] * b[1] - a[1] * b[0], float(a @ b))))


@dataclass
class RecoveredScattering:
    entries: list[ComparedEntry]
    max_source_gap: float

    def summary(self) -> dict:
        finite = [e for e in self.entries if math.isfinite(e.tau_error)]
        taus = [e.tau_error for e in finite]
        zs = [e.exit_error for e in finite if math.isfinite(e.exit_error)]
        angs = [e.zeta_error_rad for e in finite if math.isfinite(e.zeta_error_rad)]
        c4_failures = sum(
            1 for e in self.entries if "c4-failure" in e.result.flags
        )

        def stats(a):
            if not a:
                return {"max": None, "median": None}
            arr = np.array(a)
            return {"max": float(arr.max()), "median": float(np.median(arr))}

        return {
            "n_entries": len(self.entries),
            "n_decoded": len(finite),
            "tau_error": stats(taus),
            "exit_error": stats(zs),
            "zeta_error_rad": stats(angs),
            "c4_failures": c4_failures,
            "max_source_gap": self.max_source_gap,
        }


def assemble_and_compare(
    results: list[EntryResult],
    model: MetricModel,
    source_set: SourceSet,
    horizon: float = 10.0,
    truth_step: float = 1.0e-3,
) -> RecoveredScattering:
    """Join decoded entries with integrated ground truth (harness privilege)."""
    rows = []
    for r in results:
        gt = ground_truth_sigma(
            model,
            PhasePoint.from_tangent(model, r.entry_point, r.entry_dir),
            horizon=horizon,
            step=truth_step,
        )
        rows.append(
            ComparedEntry(
                result=r,
                tau_true=gt.tau,
                exit_true=gt.exit_point,
                zeta_true=gt.exit_direction,
                transversal=gt.transversal,
            )
        )
    return RecoveredScattering(entries=rows, max_source_gap=source_set.max_gap())
