"""Angular sweep orchestration, sphere validation, and result output.

A sweep binds the whole pipeline: the mesh is loaded and its BVH built once,
then every (theta, phi) cell independently builds an aperture, traces the
grid, and accumulates the physical-optics sum. Cells are embarrassingly
parallel; parallelism is over angles when there are at least as many angles
as workers, otherwise over rays within each angle. Results are bit-identical
for any worker count.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import bvh as bvh_mod
from .errors import ValidationError
from .geometry import Mesh, generate_icosphere, icosphere_sagitta, load_mesh
from .mie import mie_backscatter_pec
from .po import (RcsValue, ScatterParams, SPEED_OF_LIGHT, accumulate, rcs)
from .transport import (ApertureGrid, HitRecords, IncidentDirection,
                        TraceParams, build_aperture, dump_hits_csv,
                        sampling_check, trace_grid)


def default_workers() -> int:
    env = os.environ.get("SBR_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"SBR_WORKERS must be an integer, got {env!r}")
    return 1


@dataclass(frozen=True)
class AngleRange:
    """Inclusive linspace over one sweep axis, in radians."""

    start: float
    stop: float
    samples: int

    def values(self) -> np.ndarray:
        if self.samples == 1:
            return np.array([self.start])
        return np.linspace(self.start, self.stop, self.samples)


@dataclass(frozen=True)
class SweepConfig:
    """Full run description; mirrors the JSON configuration document."""

    mesh_path: str
    frequency_hz: float
    theta: AngleRange
    phi: AngleRange
    spacing: Optional[float] = None  # None = auto: wavelength / sampling_factor
    sampling_factor: float = 5.0
    margin: float = 0.025
    max_bounces: int = 10
    epsilon: Optional[float] = None
    split_rule: str = "sah"
    n_leaf: int = 4
    bins_per_axis: int = 16
    c_t: float = 1.0
    c_i: float = 1.0
    bvh_max_depth: int = 64
    gamma: float = -1.0
    precision: str = "double"
    workers: Optional[int] = None
    output_csv: Optional[str] = None
    output_heatmap: Optional[str] = None
    heatmap_db_floor: float = -30.0
    heatmap_db_ceil: float = 30.0
    allow_aliasing: bool = False
    count_trapped: bool = False
    dump_hits: Optional[str] = None
    strict_orientation: bool = False

    def __post_init__(self):
        if self.frequency_hz <= 0:
            raise ValidationError("frequency must be positive")
        for rng, hi, name in ((self.theta, math.pi, "theta"),
                              (self.phi, 2.0 * math.pi, "phi")):
            if rng.samples < 1:
                raise ValidationError(f"{name} samples must be >= 1")
            if not (-1e-12 <= rng.start <= hi + 1e-12
                    and -1e-12 <= rng.stop <= hi + 1e-12):
                raise ValidationError(f"{name} range outside [0, {hi:g}]")
        if self.precision not in ("single", "double"):
            raise ValidationError("precision must be 'single' or 'double'")
        if self.spacing is not None and self.spacing <= 0:
            raise ValidationError("spacing must be positive")
        if self.heatmap_db_floor >= self.heatmap_db_ceil:
            raise ValidationError("heatmap floor must be below ceiling")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency_hz

    def resolved_spacing(self) -> float:
        if self.spacing is None:
            return self.wavelength / self.sampling_factor
        return self.spacing

    def resolved_workers(self) -> int:
        return self.workers if self.workers is not None else default_workers()

    def dtype(self):
        return np.float32 if self.precision == "single" else np.float64

    def build_params(self) -> bvh_mod.BuildParams:
        return bvh_mod.BuildParams(split_rule=self.split_rule,
                                   n_leaf=self.n_leaf,
                                   bins_per_axis=self.bins_per_axis,
                                   c_t=self.c_t, c_i=self.c_i,
                                   max_depth=self.bvh_max_depth)

    def trace_params(self) -> TraceParams:
        return TraceParams(max_bounces=self.max_bounces, epsilon=self.epsilon,
                           sampling_factor=self.sampling_factor,
                           strict_orientation=self.strict_orientation)

    def echo(self) -> dict:
        d = asdict(self)
        d["theta"] = [self.theta.start, self.theta.stop, self.theta.samples]
        d["phi"] = [self.phi.start, self.phi.stop, self.phi.samples]
        return d

    @classmethod
    def from_json_file(cls, path, overrides: Optional[dict] = None) -> "SweepConfig":
        """Load the JSON document; ``overrides`` (CLI flags) win over file values."""
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from exc
        if overrides:
            doc.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(doc, base_dir=os.path.dirname(str(path)))

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str = "") -> "SweepConfig":
        def angle(key, hi_deg):
            spec = doc.get(key)
            if spec is None:
                return AngleRange(0.0, math.radians(hi_deg), 1)
            if isinstance(spec, dict):
                start, stop = spec.get("start_deg", 0.0), spec.get("stop_deg", hi_deg)
                samples = spec.get("samples", 1)
            else:
                start, stop, samples = spec
            return AngleRange(math.radians(float(start)),
                              math.radians(float(stop)), int(samples))

        mesh_path = doc.get("mesh")
        if not mesh_path:
            raise ValidationError("config missing 'mesh'")
        if base_dir and not os.path.isabs(mesh_path):
            mesh_path = os.path.join(base_dir, mesh_path)
        spacing = doc.get("spacing_m", "auto")
        if spacing in ("auto", None):
            spacing = None
        else:
            spacing = float(spacing)
        bvh_doc = doc.get("bvh", {})
        try:
            return cls(
                mesh_path=mesh_path,
                frequency_hz=float(doc["frequency_hz"]),
                theta=angle("theta_deg", 180.0),
                phi=angle("phi_deg", 360.0),
                spacing=spacing,
                sampling_factor=float(doc.get("sampling_factor", 5.0)),
                margin=float(doc.get("margin", 0.025)),
                max_bounces=int(doc.get("max_bounces", 10)),
                epsilon=(None if doc.get("epsilon_m") is None
                         else float(doc["epsilon_m"])),
                split_rule=doc.get("split_rule", "sah"),
                n_leaf=int(bvh_doc.get("n_leaf", 4)),
                bins_per_axis=int(bvh_doc.get("bins_per_axis", 16)),
                c_t=float(bvh_doc.get("c_t", 1.0)),
                c_i=float(bvh_doc.get("c_i", 1.0)),
                bvh_max_depth=int(bvh_doc.get("max_depth", 64)),
                gamma=float(doc.get("gamma", -1.0)),
                precision=doc.get("precision", "double"),
                workers=(None if doc.get("workers") is None
                         else int(doc["workers"])),
                output_csv=doc.get("output_csv"),
                output_heatmap=doc.get("output_heatmap"),
                heatmap_db_floor=float(doc.get("heatmap_db_floor", -30.0)),
                heatmap_db_ceil=float(doc.get("heatmap_db_ceil", 30.0)),
                allow_aliasing=bool(doc.get("allow_aliasing", False)),
                count_trapped=bool(doc.get("count_trapped", False)),
                dump_hits=doc.get("dump_hits"),
                strict_orientation=bool(doc.get("strict_orientation", False)),
            )
        except KeyError as exc:
            raise ValidationError(f"config missing required key {exc}") from exc


@dataclass
class SweepResult:
    """Dense (theta, phi) grid of amplitudes and RCS plus run metadata."""

    theta: np.ndarray
    phi: np.ndarray
    amplitude: np.ndarray
    sigma_m2: np.ndarray
    sigma_dbsm: np.ndarray
    valid_rays: np.ndarray
    max_bounces_seen: np.ndarray
    time_ms: np.ndarray
    bounce_histogram: np.ndarray
    config_echo: dict
    mesh_checksum: str


@dataclass(frozen=True)
class DirectionSolution:
    """Single-direction outcome used by sweeps and the sphere validator."""

    amplitude: complex
    rcs: RcsValue
    valid_rays: int
    max_bounce: int
    bounce_counts: np.ndarray
    grid: ApertureGrid
    records: Optional[HitRecords] = None


def solve_direction(bvh, mesh: Mesh, direction: IncidentDirection,
                    spacing: float, wavelength: float, margin: float = 0.025,
                    sampling_factor: float = 5.0, allow_aliasing: bool = False,
                    trace_params: TraceParams = TraceParams(),
                    gamma: float = -1.0, count_trapped: bool = False,
                    ray_workers: int = 1,
                    keep_records: bool = False) -> DirectionSolution:
    """Trace-integrate pipeline for one incident direction."""
    grid = build_aperture(mesh.aabb, direction, spacing, margin=margin,
                          wavelength=wavelength,
                          sampling_factor=sampling_factor,
                          allow_aliasing=allow_aliasing)
    records = trace_grid(bvh, mesh, grid, trace_params, workers=ray_workers)
    params = ScatterParams.from_wavelength(wavelength, grid.cell_area, gamma)
    amp = accumulate(records, direction.k_inc, params,
                     count_trapped=count_trapped)
    valid = int(np.count_nonzero(records.valid))
    max_b = int(records.bounces.max()) if len(records) else 0
    counts = np.bincount(records.bounces[records.valid],
                         minlength=trace_params.max_bounces + 1)
    return DirectionSolution(amplitude=amp, rcs=rcs(amp), valid_rays=valid,
                             max_bounce=max_b, bounce_counts=counts,
                             grid=grid,
                             records=records if keep_records else None)


def dry_run_summary(config: SweepConfig, mesh: Optional[Mesh] = None) -> dict:
    """Validate the config and size the run without touching trace paths."""
    if mesh is None:
        mesh = load_mesh(config.mesh_path, dtype=config.dtype())
    spacing = config.resolved_spacing()
    check = sampling_check(spacing, config.wavelength, config.sampling_factor)
    if not check.passed and not config.allow_aliasing:
        raise ValidationError(
            f"spacing {spacing:g} violates the sampling rule "
            f"(ratio {check.ratio:.3f})")
    thetas = config.theta.values()
    phis = config.phi.values()
    first = build_aperture(mesh.aabb, IncidentDirection(float(thetas[0]),
                                                        float(phis[0])),
                           spacing, margin=config.margin)
    return {
        "mesh": config.mesh_path,
        "triangles": mesh.triangle_count,
        "frequency_hz": config.frequency_hz,
        "wavelength_m": config.wavelength,
        "spacing_m": spacing,
        "sampling_ratio": check.ratio,
        "angles": int(thetas.size * phis.size),
        "theta_samples": int(thetas.size),
        "phi_samples": int(phis.size),
        "first_angle_rays": [first.n_u, first.n_v],
        "rays_total_estimate": int(thetas.size * phis.size) * first.ray_count,
    }


def run_sweep(config: SweepConfig, mesh: Optional[Mesh] = None) -> SweepResult:
    """Execute the full sweep described by the config.

    The BVH is built once and reused for every angle. Raises before any
    tracing when the ray spacing violates the sampling rule, unless
    ``allow_aliasing`` is set.
    """
    if mesh is None:
        mesh = load_mesh(config.mesh_path, dtype=config.dtype())
    spacing = config.resolved_spacing()
    check = sampling_check(spacing, config.wavelength, config.sampling_factor)
    if not check.passed and not config.allow_aliasing:
        raise ValidationError(
            f"spacing {spacing:g} exceeds wavelength/{config.sampling_factor:g}"
            f" (ratio {check.ratio:.3f}); set allow_aliasing to override")

    tree = bvh_mod.build(mesh, config.build_params())
    thetas = config.theta.values()
    phis = config.phi.values()
    n_t, n_p = thetas.size, phis.size
    workers = config.resolved_workers()
    tparams = config.trace_params()

    amplitude = np.zeros((n_t, n_p), dtype=np.complex128)
    sigma = np.zeros((n_t, n_p))
    dbsm = np.zeros((n_t, n_p))
    valid_rays = np.zeros((n_t, n_p), dtype=np.int64)
    max_bounce = np.zeros((n_t, n_p), dtype=np.int32)
    time_ms = np.zeros((n_t, n_p))
    hist = np.zeros(config.max_bounces + 1, dtype=np.int64)

    angle_parallel = workers > 1 and n_t * n_p >= workers
    ray_workers = 1 if angle_parallel or workers <= 1 else workers

    def solve_cell(it: int, ip: int):
        t0 = time.perf_counter()
        direction = IncidentDirection(float(thetas[it]), float(phis[ip]))
        keep = config.dump_hits is not None
        sol = solve_direction(tree, mesh, direction, spacing,
                              config.wavelength, margin=config.margin,
                              sampling_factor=config.sampling_factor,
                              allow_aliasing=config.allow_aliasing,
                              trace_params=tparams, gamma=config.gamma,
                              count_trapped=config.count_trapped,
                              ray_workers=ray_workers, keep_records=keep)
        elapsed = (time.perf_counter() - t0) * 1e3
        return it, ip, sol, elapsed

    cells = [(it, ip) for it in range(n_t) for ip in range(n_p)]
    if angle_parallel:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda c: solve_cell(*c), cells))
    else:
        outcomes = [solve_cell(*c) for c in cells]

    for it, ip, sol, elapsed in outcomes:
        amplitude[it, ip] = sol.amplitude
        sigma[it, ip] = sol.rcs.sigma_m2
        dbsm[it, ip] = sol.rcs.sigma_dbsm
        valid_rays[it, ip] = sol.valid_rays
        max_bounce[it, ip] = sol.max_bounce
        time_ms[it, ip] = elapsed
        hist[:sol.bounce_counts.size] += sol.bounce_counts
        if sol.records is not None and config.dump_hits is not None:
            os.makedirs(config.dump_hits, exist_ok=True)
            dump_hits_csv(sol.records, sol.grid,
                          os.path.join(config.dump_hits,
                                       f"hits_t{it:04d}_p{ip:04d}.csv"))

    return SweepResult(theta=thetas, phi=phis, amplitude=amplitude,
                       sigma_m2=sigma, sigma_dbsm=dbsm,
                       valid_rays=valid_rays, max_bounces_seen=max_bounce,
                       time_ms=time_ms, bounce_histogram=hist,
                       config_echo=config.echo(),
                       mesh_checksum=mesh.checksum())


# ---------------------------------------------------------------------------
# Sphere validation against the Mie oracle
# ---------------------------------------------------------------------------

def fibonacci_directions(n: int) -> list[IncidentDirection]:
    """n quasi-uniform directions on the sphere (golden-angle spiral)."""
    golden = math.pi * (3.0 - math.sqrt(5.0))
    out = []
    for i in range(n):
        z = 1.0 - (2.0 * i + 1.0) / n
        theta = math.acos(max(-1.0, min(1.0, z)))
        phi = (i * golden) % (2.0 * math.pi)
        out.append(IncidentDirection(theta, phi))
    return out


def auto_subdivision(radius: float, wavelength: float, cap: int = 7) -> int:
    """Smallest icosphere subdivision whose sagitta is <= wavelength/16.

    Keeps tessellation error below the phase-sampling error the validation
    measures; escalates with electrical size up to the cap.
    """
    target = wavelength / 16.0
    for s in range(cap + 1):
        mesh = generate_icosphere(radius, s)
        if icosphere_sagitta(mesh, radius) <= target:
            return s
    return cap


@dataclass(frozen=True)
class SphereValidationRow:
    kr: float
    sigma_sbr_m2: float
    sigma_mie_m2: float
    rel_error: float
    sampling_ok: bool
    spacing_m: float
    subdivision: int


@dataclass(frozen=True)
class SphereValidationReport:
    radius: float
    n_directions: int
    rows: list[SphereValidationRow]

    def max_rel_error(self, sampling_ok_only: bool = False) -> float:
        rows = [r for r in self.rows if r.sampling_ok or not sampling_ok_only]
        return max(r.rel_error for r in rows)

    def mean_rel_error(self, sampling_ok_only: bool = False) -> float:
        rows = [r for r in self.rows if r.sampling_ok or not sampling_ok_only]
        return float(np.mean([r.rel_error for r in rows]))


def validate_sphere(radius: float, kr_values: Sequence[float],
                    sampling_factor: float = 5.0,
                    fixed_spacing: Optional[float] = None,
                    subdivisions: Optional[int] = None,
                    n_directions: int = 16, max_bounces: int = 4,
                    margin: float = 0.025, workers: int = 1,
                    gamma: float = -1.0,
                    split_rule: str = "sah") -> SphereValidationReport:
    """Compare direction-averaged ray-traced RCS of a PEC sphere to Mie.

    For each electrical size kr the wavelength is 2 pi r / kr and the grid
    spacing is wavelength/sampling_factor unless ``fixed_spacing`` pins it
    (the aliasing experiment). RCS is averaged over quasi-uniform incident
    directions; each row reports the relative error against the Mie series
    and whether the spacing satisfied the sampling rule at that kr.
    """
    if any(kr <= 0 for kr in kr_values):
        raise ValidationError("kr values must be positive")
    meshes: dict[int, tuple[Mesh, object]] = {}
    directions = fibonacci_directions(n_directions)
    rows = []
    for kr in kr_values:
        wavelength = 2.0 * math.pi * radius / kr
        spacing = fixed_spacing if fixed_spacing is not None \
            else wavelength / sampling_factor
        sub = subdivisions if subdivisions is not None \
            else auto_subdivision(radius, wavelength)
        if sub not in meshes:
            mesh = generate_icosphere(radius, sub)
            meshes[sub] = (mesh, bvh_mod.build(
                mesh, bvh_mod.BuildParams(split_rule=split_rule)))
        mesh, tree = meshes[sub]
        tparams = TraceParams(max_bounces=max_bounces,
                              sampling_factor=sampling_factor)

        angle_parallel = workers > 1 and n_directions >= workers

        def solve(d: IncidentDirection) -> float:
            sol = solve_direction(
                tree, mesh, d, spacing, wavelength, margin=margin,
                sampling_factor=sampling_factor, allow_aliasing=True,
                trace_params=tparams, gamma=gamma,
                ray_workers=1 if angle_parallel else workers)
            return sol.rcs.sigma_m2

        if angle_parallel:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                sigmas = list(pool.map(solve, directions))
        else:
            sigmas = [solve(d) for d in directions]

        sigma_sbr = float(np.mean(sigmas))
        sigma_mie = mie_backscatter_pec(kr, radius)
        rows.append(SphereValidationRow(
            kr=float(kr), sigma_sbr_m2=sigma_sbr, sigma_mie_m2=sigma_mie,
            rel_error=abs(sigma_sbr - sigma_mie) / sigma_mie,
            sampling_ok=sampling_check(spacing, wavelength,
                                       sampling_factor).passed,
            spacing_m=spacing, subdivision=sub))
    return SphereValidationReport(radius=radius, n_directions=n_directions,
                                  rows=rows)


def write_validation_csv(report: SphereValidationReport, path) -> None:
    """Sphere-validation report as CSV; contains no timing, so identical
    configurations produce byte-identical files at any worker count."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("kr,sigma_sbr_m2,sigma_mie_m2,rel_error,sampling_ok,"
                 "spacing_m,subdivision\n")
        for r in report.rows:
            fh.write(f"{r.kr:.9g},{r.sigma_sbr_m2:.9g},{r.sigma_mie_m2:.9g},"
                     f"{r.rel_error:.9g},{int(r.sampling_ok)},"
                     f"{r.spacing_m:.9g},{r.subdivision}\n")


# ---------------------------------------------------------------------------
# Output writers
# ---------------------------------------------------------------------------

def write_csv(result: SweepResult, path) -> None:
    """Sweep grid as CSV: theta outer loop, phi inner, 9 significant digits.

    Output bytes are a pure function of the result (a zero-sigma cell writes
    ``-inf`` for its dBsm value).
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("theta_deg,phi_deg,sigma_m2,sigma_dbsm,valid_rays,"
                 "max_bounces_seen,time_ms\n")
        for it, th in enumerate(result.theta):
            for ip, ph in enumerate(result.phi):
                fh.write(f"{math.degrees(th):.9g},{math.degrees(ph):.9g},"
                         f"{result.sigma_m2[it, ip]:.9g},"
                         f"{result.sigma_dbsm[it, ip]:.9g},"
                         f"{result.valid_rays[it, ip]},"
                         f"{result.max_bounces_seen[it, ip]},"
                         f"{result.time_ms[it, ip]:.9g}\n")


# Colormap stops (position, RGB), linearly interpolated; dark-to-light so a
# single bright cell is visually unambiguous.
_HEAT_STOPS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
_HEAT_COLORS = np.array([
    [0, 0, 4],
    [81, 18, 124],
    [183, 55, 121],
    [252, 137, 97],
    [252, 255, 164],
], dtype=np.float64)


def colormap(t: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] to RGB bytes via the documented stops."""
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    rgb = np.empty(t.shape + (3,), dtype=np.float64)
    for c in range(3):
        rgb[..., c] = np.interp(t, _HEAT_STOPS, _HEAT_COLORS[:, c])
    return np.rint(rgb).astype(np.uint8)


def write_heatmap(result: SweepResult, path, db_floor: float,
                  db_ceil: float) -> None:
    """Binary PPM (P6) heatmap of sigma_dbsm.

    Pixels are n_phi wide by n_theta tall; phi increases left to right from
    0 deg, theta increases top to bottom from 0 deg. Values are clamped to
    [db_floor, db_ceil] and mapped linearly onto the colormap.
    """
    if db_floor >= db_ceil:
        raise ValidationError("db_floor must be below db_ceil")
    grid = result.sigma_dbsm  # (n_theta, n_phi)
    t = (np.clip(grid, db_floor, db_ceil) - db_floor) / (db_ceil - db_floor)
    pixels = colormap(t)
    h, w = grid.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())
