"""Experiment configuration, entry planning, orchestration and file I/O.

A flat key = value config (INI sections) pins every knob of an experiment;
its content hash stamps all artifacts so stale inputs are rejected.  The
subcommands: gen-data (forward solve, trace files), ground-truth (scattering
table), decode (oracle and/or blind recovery), compare (join and statistics),
report (human-readable summary plus figures).  Everything is deterministic:
no random state exists anywhere in the pipeline.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .decode import (
    ComparedEntry,
    DataProbeSession,
    DecodeParams,
    EntryResult,
    OracleProbeSession,
    RecoveredScattering,
    decode_entry,
)
from .geometry import (
    ExteriorMetricView,
    MetricModel,
    PhasePoint,
    blind_mode,
    conformal_factor_grid,
    ground_truth_sigma,
    interior_query_count,
    reset_interior_query_count,
)
from .source import SourceSet, generate_sources, mollify_source
from .wavesim import (
    BoundaryTrace,
    default_time_step,
    make_grid,
    solve_full,
    validate_cfl,
)


class ConfigError(ValueError):
    """Raised with a field path when a config value fails validation."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs, validated and hashable."""

    metric_kind: str = "euclidean"
    amplitude: float = 0.0
    support_radius: float = 0.4
    center: tuple[float, float] = (0.0, 0.0)
    exterior_radius: float = 3.0

    lam: float = 1.5
    source_count: int = 12
    active: tuple[int, ...] | None = None

    spacing: float = 1.0 / 64
    boundary_samples: int = 0  # 0: one sample per grid spacing of arc
    sigma_x: float = 0.0  # 0: twice the grid spacing
    sigma_t: float = 0.0  # 0: twice the time step
    t_end: float = 2.6
    t_start: float = 0.0  # 0: -0.25 * t_end

    decode: DecodeParams = field(default_factory=DecodeParams)

    n_entries: int = 20
    targets: tuple[int, ...] = (4, 5)
    explicit_entries: tuple[tuple[float, float], ...] = ()

    mode: str = "oracle"
    out_dir: str = "runs/exp"

    def model(self) -> MetricModel:
        return MetricModel(
            kind=self.metric_kind,
            amplitude=self.amplitude,
            support_radius=self.support_radius,
            center=self.center,
            exterior_radius=self.exterior_radius,
        )

    def sources(self) -> SourceSet:
        return generate_sources(
            self.lam, self.source_count,
            self.model().boundary, active=self.active,
        )

    @property
    def t0(self) -> float:
        return self.t_start if self.t_start != 0.0 else -0.25 * self.t_end

    def config_hash(self) -> str:
        blob = json.dumps(_as_flat_dict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def validate(self) -> None:
        if self.metric_kind not in ("euclidean", "conformal_bump"):
            raise ConfigError("metric.kind: unknown kind")
        if self.lam <= 1.0:
            raise ConfigError("sources.lam: must exceed 1")
        if self.mode not in ("oracle", "blind", "both"):
            raise ConfigError("run.mode: must be oracle, blind or both")
        model = self.model()
        c2 = (1.0 + max(self.amplitude, 0.0) * math.exp(-1.0)) ** 2
        need = 1.0 + math.sqrt(c2) * (self.t_end - self.t0) / 2.0 + 0.1
        if self.mode in ("blind", "both") and self.exterior_radius < need:
            raise ConfigError(
                f"metric.exterior_radius: outer-square reflections can re-enter; "
                f"need at least {need:.3f}"
            )
        bb = self.decode.b_bound
        band = [
            k for k in (self.active or range(1, self.source_count + 1))
            if self.lam ** k * (self.lam - 1.0) > 2.0 * bb
        ]
        if not band:
            raise ConfigError("decode.b_bound: decodable band is empty")
        if self.mode in ("blind", "both"):
            grid = make_grid(self.exterior_radius, self.spacing, model.boundary)
            validate_cfl(model, grid, default_time_step(model, grid))


def _as_flat_dict(cfg: ExperimentConfig) -> dict:
    d = {}
    for key, val in vars(cfg).items():
        if isinstance(val, DecodeParams):
            for k2, v2 in vars(val).items():
                d[f"decode.{k2}"] = list(v2) if isinstance(v2, tuple) else v2
        elif isinstance(val, tuple):
            d[key] = [list(v) if isinstance(v, tuple) else v for v in val]
        else:
            d[key] = val
    return d


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(";", ",").split(",") if t.strip())


def _parse_ints(text: str) -> tuple[int, ...]:
    text = text.strip()
    if text.lower() == "all":
        return ()
    if "-" in text and "," not in text:
        a, b = text.split("-")
        return tuple(range(int(a), int(b) + 1))
    return tuple(int(t) for t in text.split(",") if t.strip())


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a key = value config file."""
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise ConfigError(f"config file {path} not found")

    def get(section, key, fallback=None, cast=str):
        if cp.has_option(section, key):
            return cast(cp.get(section, key))
        return fallback

    dec_defaults = DecodeParams()
    decode = DecodeParams(
        eps_schedule=get("decode", "eps_schedule", dec_defaults.eps_schedule,
                         _parse_floats),
        offsets=get("decode", "offsets", dec_defaults.offsets, _parse_floats),
        b_bound=get("decode", "b_bound", dec_defaults.b_bound, float),
        route=get("decode", "route", dec_defaults.route),
        scan_start=get("decode", "scan_start", dec_defaults.scan_start, float),
        max_path=get("decode", "max_path", dec_defaults.max_path, float),
        fan_eps=get("decode", "fan_eps", dec_defaults.fan_eps, float),
        fan_arc_reach=get("decode", "fan_arc_reach",
                          dec_defaults.fan_arc_reach, float),
        fan_glare_max=get("decode", "fan_glare_max",
                          dec_defaults.fan_glare_max, float),
        cutoff_radius=get("decode", "cutoff_radius",
                          dec_defaults.cutoff_radius, float),
        frame_step=get("decode", "frame_step", dec_defaults.frame_step, float),
        noise_floor=get("decode", "noise_floor", None, float),
    )

    entries_spec = get("probes", "entries", "")
    explicit = ()
    n_entries = 20
    if entries_spec.startswith("auto:"):
        n_entries = int(entries_spec.split(":", 1)[1])
    elif entries_spec:
        explicit = tuple(
            tuple(float(v) for v in pair.split(":"))
            for pair in entries_spec.split(";")
            if pair.strip()
        )

    cfg = ExperimentConfig(
        metric_kind=get("metric", "kind", "euclidean"),
        amplitude=get("metric", "amplitude", 0.0, float),
        support_radius=get("metric", "support_radius", 0.4, float),
        center=(
            get("metric", "center_x", 0.0, float),
            get("metric", "center_y", 0.0, float),
        ),
        exterior_radius=get("metric", "exterior_radius", 3.0, float),
        lam=get("sources", "lam", 1.5, float),
        source_count=get("sources", "count", 12, int),
        active=get("sources", "active", None, _parse_ints) or None,
        spacing=get("grid", "spacing", 1.0 / 64, float),
        boundary_samples=get("grid", "boundary_samples", 0, int),
        sigma_x=get("grid", "sigma_x", 0.0, float),
        sigma_t=get("grid", "sigma_t", 0.0, float),
        t_end=get("grid", "t_end", 2.6, float),
        t_start=get("grid", "t_start", 0.0, float),
        decode=decode,
        n_entries=n_entries,
        targets=get("probes", "targets", (3, 4, 5), _parse_ints),
        explicit_entries=explicit,
        mode=get("run", "mode", "oracle"),
        out_dir=get("run", "out", "runs/exp"),
    )
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# entry planning


@dataclass(frozen=True)
class PlannedEntry:
    entry_point: np.ndarray
    entry_dir: np.ndarray
    target: int
    tau_true: float
    exit_true: np.ndarray
    zeta_true: np.ndarray
    transversal: bool

    @property
    def entry_angle(self) -> float:
        return math.atan2(self.entry_point[1], self.entry_point[0]) % (2 * math.pi)

    @property
    def dir_angle(self) -> float:
        return math.atan2(self.entry_dir[1], self.entry_dir[0]) % (2 * math.pi)


def _incidence_window(lam: float, k: int, max_offset: float,
                      scan_start: float, b_bound: float) -> tuple[float, float]:
    """Allowed incidence angles |psi| for target k (decoding-band driven).

    The smooth factor along a Euclidean chord of total time t is
    (1 + t^2)^{-1/4}; its base-lam log must stay inside 80% of the lattice
    half-gap below the target's weight and inside the configured residual
    bound, with headroom for contamination and interior slowdown.
    """
    half_gap = 0.5 * lam ** k * (lam - 1.0)
    w = min(0.8 * half_gap, 0.9 * b_bound)
    t_max = math.sqrt(max(lam ** (4.0 * w) - 1.0, 0.01))
    chord_max = min(t_max - max_offset, 1.98)
    chord_min = scan_start + 0.25
    if chord_max <= chord_min:
        return (math.nan, math.nan)
    psi_min = math.acos(min(chord_max / 2.0, 0.999))
    # cap away from tangency: near-grazing exits make the normal completion
    # of the recovered direction ill-conditioned
    psi_max = math.acos(chord_min / 2.0)
    return (psi_min, min(psi_max, 0.92))


def _near_pass_hazard(cfg: ExperimentConfig, model: MetricModel,
                      source_set: SourceSet, entry: PhasePoint,
                      tau_true: float, target: int) -> bool:
    """True when the entry ray grazes another source early enough to fake a hit.

    At finite beam width, a ray passing within a few widths of a strong
    source produces a genuine response that can land inside the decoding
    band before the true exit arrives.  The planner integrates the ray and
    predicts those responses; hazardous entries are skipped.
    """
    from .geometry import _rk4_step  # planner privilege: full-metric path
    from .source import m_A_result

    eps = cfg.decode.eps_min
    max_off = max(cfg.decode.offsets)
    x = np.array(entry.pos, dtype=float)
    p = np.array(entry.mom, dtype=float)
    step = 1.0e-2
    n = int(tau_true / step) + 1
    path = np.empty((n + 1, 2))
    path[0] = x
    for i in range(n):
        x, p = _rk4_step(model, x, p, step)
        path[i + 1] = x
    times = step * np.arange(n + 1)
    log_lam = math.log(cfg.lam)
    eps_prev = sorted(cfg.decode.eps_schedule)[1] if len(
        cfg.decode.eps_schedule) > 1 else 2.0 * eps
    for j in source_set.active:
        if j == target:
            continue
        d = np.linalg.norm(path - source_set.points[j - 1][None, :], axis=1)
        i_ca = int(np.argmin(d))
        t_ca = float(times[i_ca])
        if t_ca > tau_true - 0.05:
            continue
        d_ca = float(d[i_ca])
        t_tot = t_ca + max_off
        imh = 0.8 / (1.0 + t_tot * t_tot)
        # the decoder's own eps-stability cut removes fast-collapsing fakes
        ratio = math.exp(-imh * d_ca * d_ca * 0.5 * (1.0 / eps - 1.0 / eps_prev))
        if ratio < 0.46:
            continue
        # and its speed-bound admissibility removes geometric impossibilities
        xj = source_set.points[j - 1]
        admissible = False
        for off in cfg.decode.offsets:
            y0 = entry.pos - off * entry.velocity(model)
            if t_ca + off + cfg.decode.speed_tolerance >= float(
                np.linalg.norm(xj - y0)
            ) * cfg.decode.speed_floor:
                admissible = True
                break
        if not admissible:
            continue
        log_fake = (
            float(source_set.log_weights[j - 1])
            - imh * d_ca * d_ca / (2.0 * eps) / log_lam
            - math.log(1.0 + t_tot * t_tot) / (4.0 * log_lam)
        )
        res = m_A_result(log_fake, cfg.lam)
        if abs(res.r) <= cfg.decode.b_bound + 0.2 and (
            cfg.lam ** res.index * (cfg.lam - 1.0) > 2.0 * cfg.decode.b_bound
        ):
            return True
    return False


def build_entry_plan(cfg: ExperimentConfig, model: MetricModel,
                     source_set: SourceSet, truth_step: float = 1.0e-3) -> list[PlannedEntry]:
    """Deterministic entry set aimed at decodable target sources.

    Each entry is constructed by shooting a geodesic inward from a target
    source (harness privilege) and reversing it, so the true exit lands
    exactly on the source; incidence angles are spread inside per-target
    windows that keep the decoded amplitude inside the weight lattice band,
    skipping angles whose rays graze other sources early (finite beam width
    would fake an earlier hit there).
    """
    if cfg.explicit_entries:
        out = []
        for ang, dang in cfg.explicit_entries:
            x = model.boundary.point_at(ang)
            xi = np.array([math.cos(dang), math.sin(dang)])
            gt = ground_truth_sigma(
                model, PhasePoint.from_tangent(model, x, xi), step=truth_step
            )
            out.append(PlannedEntry(x, xi, source_set.nearest(gt.exit_point),
                                    gt.tau, gt.exit_point, gt.exit_direction,
                                    gt.transversal))
        return out

    targets = [t for t in cfg.targets if t in source_set.active]
    counts = {t: cfg.n_entries // len(targets) for t in targets}
    for i in range(cfg.n_entries - sum(counts.values())):
        counts[targets[i % len(targets)]] += 1

    max_offset = max(cfg.decode.offsets)

    def clean_entries(k: int, cap: int) -> list[PlannedEntry]:
        lo, hi = _incidence_window(cfg.lam, k, max_offset,
                                   cfg.decode.scan_start, cfg.decode.b_bound)
        if math.isnan(lo):
            return []
        xk = source_set.points[k - 1]
        nu = model.boundary.normal_at_point(xk)
        tan = np.array([-nu[1], nu[0]])
        out = []
        mags = np.linspace(lo + 0.02, hi - 0.02, 8 * cap + 16)
        candidates = []
        for m in mags:
            candidates.extend([float(m), float(-m)])
        for psi in candidates:
            if len(out) >= cap:
                break
            inward = -nu * math.cos(psi) + tan * math.sin(psi)
            start = PhasePoint.from_tangent(model, xk, inward)
            # screen with a coarse shot, confirm survivors at full accuracy
            shot = ground_truth_sigma(model, start, step=4.0e-3)
            if shot.trapped or not shot.transversal:
                continue
            entry_pp = PhasePoint.from_tangent(
                model, shot.exit_point, -shot.exit_direction
            )
            if _near_pass_hazard(cfg, model, source_set, entry_pp, shot.tau, k):
                continue
            shot = ground_truth_sigma(model, start, step=truth_step)
            out.append(
                PlannedEntry(
                    entry_point=shot.exit_point,
                    entry_dir=-shot.exit_direction,
                    target=k,
                    tau_true=shot.tau,
                    exit_true=np.array(xk),
                    zeta_true=-inward,
                    transversal=shot.transversal,
                )
            )
        return out

    pools = {k: clean_entries(k, counts[k] + cfg.n_entries // 2) for k in targets}
    plan = []
    for k in targets:
        plan.extend(pools[k][: counts[k]])
        pools[k] = pools[k][counts[k]:]
    for k in targets:  # absorb another target's shortfall
        while len(plan) < cfg.n_entries and pools[k]:
            plan.append(pools[k].pop(0))
    return plan


# ---------------------------------------------------------------------------
# artifacts


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_ground_truth(path: Path, plan: list[PlannedEntry]) -> None:
    rows = [
        [
            e.entry_angle,
            e.dir_angle,
            float(e.exit_true[0]),
            float(e.exit_true[1]),
            float(e.zeta_true[0]),
            float(e.zeta_true[1]),
            e.tau_true,
            int(e.transversal),
        ]
        for e in plan
    ]
    _write_csv(
        path,
        ["entry_angle", "entry_dir_angle", "exit_x", "exit_y",
         "zeta_x", "zeta_y", "tau", "transversal"],
        rows,
    )


def write_recovered(path: Path, plan: list[PlannedEntry],
                    results: list[EntryResult]) -> None:
    rows = []
    for e, r in zip(plan, results):
        zeta_err = math.inf
        if r.zeta_hat is not None:
            a = r.zeta_hat / np.linalg.norm(r.zeta_hat)
            b = e.zeta_true / np.linalg.norm(e.zeta_true)
            zeta_err = abs(math.atan2(a[0] * b[1] - a[1] * b[0], float(a @ b)))
        rows.append(
            [
                e.entry_angle,
                e.dir_angle,
                r.tau_hat,
                e.tau_true,
                float(r.exit_hat[0]) if r.exit_hat is not None else math.nan,
                float(r.exit_hat[1]) if r.exit_hat is not None else math.nan,
                float(e.exit_true[0]),
                float(e.exit_true[1]),
                zeta_err,
                r.confidence,
                e.target,
                r.exit_index if r.exit_index is not None else -1,
                int(r.c4_ok),
                ";".join(r.flags),
            ]
        )
    _write_csv(
        path,
        ["entry_angle", "entry_dir", "tau_hat", "tau_true",
         "z_hat_x", "z_hat_y", "z_true_x", "z_true_y", "zeta_err_rad",
         "confidence", "target", "decoded_index", "c4_ok", "flags"],
        rows,
    )


def summarize(plan: list[PlannedEntry], results: list[EntryResult],
              source_set: SourceSet) -> dict:
    tau_errs, z_errs, a_errs = [], [], []
    c4_fail = 0
    for e, r in zip(plan, results):
        if math.isfinite(r.tau_hat) and math.isfinite(e.tau_true):
            tau_errs.append(abs(r.tau_hat - e.tau_true))
        if r.exit_hat is not None:
            z_errs.append(float(np.linalg.norm(r.exit_hat - e.exit_true)))
        if r.zeta_hat is not None:
            a = r.zeta_hat / np.linalg.norm(r.zeta_hat)
            b = e.zeta_true / np.linalg.norm(e.zeta_true)
            a_errs.append(abs(math.atan2(a[0] * b[1] - a[1] * b[0], float(a @ b))))
        if "c4-failure" in r.flags:
            c4_fail += 1

    def pct(a):
        if not a:
            return None
        arr = np.sort(np.array(a))
        return {
            "median": float(np.median(arr)),
            "p90": float(np.quantile(arr, 0.9)),
            "max": float(arr.max()),
        }

    return {
        "n_entries": len(plan),
        "n_decoded": sum(1 for r in results if math.isfinite(r.tau_hat)),
        "tau_abs_error": pct(tau_errs),
        "exit_distance": pct(z_errs),
        "zeta_error_rad": pct(a_errs),
        "c4_failures": c4_fail,
        "source_max_gap": source_set.max_gap(),
    }


# ---------------------------------------------------------------------------
# orchestration


def _forcing_and_grid(cfg: ExperimentConfig, model: MetricModel,
                      source_set: SourceSet):
    grid = make_grid(cfg.exterior_radius, cfg.spacing, model.boundary)
    dt = default_time_step(model, grid)
    n_steps = int(round((cfg.t_end - cfg.t0) / dt))
    times = cfg.t0 + dt * np.arange(n_steps + 1)
    sigma_x = cfg.sigma_x or 2.0 * cfg.spacing
    sigma_t = cfg.sigma_t or 2.0 * dt
    forcing = mollify_source(source_set, sigma_x, sigma_t, grid, times)
    k_b = cfg.boundary_samples or int(
        round(model.boundary.perimeter / cfg.spacing)
    )
    return grid, dt, times, forcing, k_b


def run_gen_data(cfg: ExperimentConfig, out: Path) -> Path:
    """Forward solve producing the single-measurement trace file."""
    model = cfg.model()
    source_set = cfg.sources()
    grid, dt, times, forcing, k_b = _forcing_and_grid(cfg, model, source_set)
    result = solve_full(
        model, forcing, grid, cfg.t0, cfg.t_end, dt, boundary_samples=k_b
    )
    trace = result.trace
    trace.meta["config_hash"] = cfg.config_hash()
    trace.meta["mode"] = cfg.mode
    out.mkdir(parents=True, exist_ok=True)
    path = out / "measurement.trace"
    trace.save(path)
    return path


def run_ground_truth(cfg: ExperimentConfig, out: Path) -> Path:
    model = cfg.model()
    plan = build_entry_plan(cfg, model, cfg.sources())
    path = out / "ground_truth.csv"
    write_ground_truth(path, plan)
    return path


def _decode_all(session_factory, exterior, plan, params, jobs: int) -> list[EntryResult]:
    def work(e: PlannedEntry) -> EntryResult:
        session = session_factory()
        return decode_entry(session, exterior, e.entry_point, e.entry_dir, params)

    if jobs <= 1:
        return [work(e) for e in plan]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(work, plan))


def run_decode(cfg: ExperimentConfig, out: Path, jobs: int = 1,
               modes: tuple[str, ...] | None = None) -> dict[str, Path]:
    """Recover the scattering relation in oracle and/or blind mode."""
    model = cfg.model()
    source_set = cfg.sources()
    exterior = ExteriorMetricView(model)
    plan = build_entry_plan(cfg, model, source_set)
    params = cfg.decode
    paths = {}
    wanted = modes or (("oracle", "blind") if cfg.mode == "both" else (cfg.mode,))

    if "oracle" in wanted:
        results = _decode_all(
            lambda: OracleProbeSession(model, source_set, params),
            exterior, plan, params, jobs,
        )
        paths["oracle"] = out / "recovered_oracle.csv"
        write_recovered(paths["oracle"], plan, results)
        _dump_json(out / "summary_oracle.json",
                   summarize(plan, results, source_set))

    if "blind" in wanted:
        trace_path = out / "measurement.trace"
        if not trace_path.exists():
            raise ConfigError(f"run.mode: blind decode needs {trace_path}; "
                              "run gen-data first")
        trace = BoundaryTrace.load(trace_path)
        if trace.meta.get("config_hash") != cfg.config_hash():
            raise ConfigError("run.mode: trace was generated from a different "
                              "config (stale hash)")
        if trace.meta.get("mode") not in ("blind", "both"):
            raise ConfigError(
                "run.mode: blind decode on oracle-mode artifacts (mode mismatch)"
            )
        grid = make_grid(cfg.exterior_radius, cfg.spacing, model.boundary)
        reset_interior_query_count()
        with blind_mode():
            results = _decode_all(
                lambda: DataProbeSession(trace, exterior, grid, cfg.t0,
                                         source_set, params),
                exterior, plan, params, jobs,
            )
        assert interior_query_count() == 0
        paths["blind"] = out / "recovered_blind.csv"
        write_recovered(paths["blind"], plan, results)
        summary = summarize(plan, results, source_set)
        summary["interior_metric_queries"] = interior_query_count()
        _dump_json(out / "summary_blind.json", summary)

    return paths


def run_compare(cfg: ExperimentConfig, out: Path) -> Path:
    """Join recovered tables against ground truth and write statistics."""
    gt_path = out / "ground_truth.csv"
    if not gt_path.exists():
        run_ground_truth(cfg, out)
    rows_out = []
    header = None
    for mode in ("oracle", "blind"):
        rec = out / f"recovered_{mode}.csv"
        if not rec.exists():
            continue
        with open(rec) as f:
            r = csv.reader(f)
            header = next(r)
            for row in r:
                rows_out.append([mode] + row)
    if header is None:
        raise ConfigError("run.out: nothing to compare; run decode first")
    path = out / "compare.csv"
    _write_csv(path, ["mode"] + header, rows_out)
    return path


def _dump_json(path: Path, obj: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(obj, f, indent=1, sort_keys=True)


def run(cfg: ExperimentConfig, subcommand: str, jobs: int = 1) -> None:
    """Dispatch one subcommand against a validated config."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if subcommand == "gen-data":
        run_gen_data(cfg, out)
    elif subcommand == "ground-truth":
        run_ground_truth(cfg, out)
    elif subcommand == "decode":
        run_decode(cfg, out, jobs=jobs)
    elif subcommand == "compare":
        run_compare(cfg, out)
    elif subcommand == "report":
        from .report import write_report

        write_report(cfg, out)
    else:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
