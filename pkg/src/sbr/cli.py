"""Command-line interface.

Subcommands: sweep, validate-sphere, gen-sphere, bvh-stats, mie.
Exit codes: 0 success, 2 configuration/validation error, 3 I/O error,
4 numerical failure. SBR_WORKERS sets the default worker count.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import bvh as bvh_mod
from .errors import NumericalError, ValidationError
from .geometry import generate_icosphere, load_mesh, save_obj
from .mie import mie_backscatter_pec
from .sweep import (SweepConfig, default_workers, dry_run_summary, run_sweep,
                    validate_sphere, write_csv, write_heatmap,
                    write_validation_csv)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sbr",
        description="Shooting-and-bouncing-rays monostatic RCS solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run an angular sweep from a JSON config")
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--out", help="output CSV path (overrides config)")
    p.add_argument("--heatmap", help="output PPM heatmap path (overrides config)")
    p.add_argument("--workers", type=int, help="worker thread count")
    p.add_argument("--dry-run", action="store_true",
                   help="validate and summarize without tracing")
    p.add_argument("--allow-aliasing", action="store_true", default=None,
                   help="run even if the spacing violates the sampling rule")
    p.add_argument("--dump-hits", help="directory for per-angle hit dumps")

    p = sub.add_parser("validate-sphere",
                       help="compare sphere RCS against the Mie series")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--kr", required=True,
                   help="comma-separated electrical sizes, e.g. 30,50,100")
    p.add_argument("--fixed-spacing", type=float, default=None,
                   help="pin the ray spacing in meters instead of lambda/factor")
    p.add_argument("--sampling-factor", type=float, default=5.0)
    p.add_argument("--subdivisions", type=int, default=None,
                   help="icosphere subdivision (default: auto by sagitta)")
    p.add_argument("--directions", type=int, default=16)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", help="report CSV path")

    p = sub.add_parser("gen-sphere", help="emit an icosphere as OBJ")
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--subdiv", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bvh-stats", help="print BVH statistics for a mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("--split", choices=["median", "sah", "both"], default="both")
    p.add_argument("--probe-rays", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict", action="store_true",
                   help="reject meshes containing zero-area triangles")

    p = sub.add_parser("mie", help="tabulate the PEC-sphere Mie backscatter")
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--kr-min", type=float, required=True)
    p.add_argument("--kr-max", type=float, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--log-spacing", action="store_true",
                   help="space samples geometrically instead of linearly")
    p.add_argument("--out", required=True)
    return parser


def _cmd_sweep(args) -> int:
    overrides = {
        "output_csv": args.out,
        "output_heatmap": args.heatmap,
        "workers": args.workers,
        "allow_aliasing": args.allow_aliasing,
        "dump_hits": args.dump_hits,
    }
    config = SweepConfig.from_json_file(args.config, overrides)
    if args.dry_run:
        summary = dry_run_summary(config)
        print(json.dumps(summary, indent=2))
        return EXIT_OK
    result = run_sweep(config)
    if config.output_csv:
        write_csv(result, config.output_csv)
        print(f"wrote {config.output_csv}")
    if config.output_heatmap:
        write_heatmap(result, config.output_heatmap,
                      config.heatmap_db_floor, config.heatmap_db_ceil)
        print(f"wrote {config.output_heatmap}")
    peak = float(np.max(result.sigma_dbsm))
    print(f"{result.sigma_m2.size} angles done, peak {peak:.2f} dBsm")
    return EXIT_OK


def _cmd_validate_sphere(args) -> int:
    kr_values = [float(v) for v in args.kr.split(",") if v.strip()]
    if not kr_values:
        raise ValidationError("no kr values given")
    workers = args.workers if args.workers is not None else default_workers()
    report = validate_sphere(args.radius, kr_values,
                             sampling_factor=args.sampling_factor,
                             fixed_spacing=args.fixed_spacing,
                             subdivisions=args.subdivisions,
                             n_directions=args.directions, workers=workers)
    for row in report.rows:
        flag = "ok" if row.sampling_ok else "ALIASED"
        print(f"kr={row.kr:<8g} sbr={row.sigma_sbr_m2:.6g} m2 "
              f"mie={row.sigma_mie_m2:.6g} m2 err={row.rel_error:.2%} [{flag}]")
    if args.out:
        write_validation_csv(report, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_gen_sphere(args) -> int:
    mesh = generate_icosphere(args.radius, args.subdiv)
    save_obj(mesh, args.out)
    print(f"wrote {args.out}: {mesh.triangle_count} triangles")
    return EXIT_OK


def _cmd_bvh_stats(args) -> int:
    mesh = load_mesh(args.mesh, strict=args.strict)
    rng = np.random.default_rng(args.seed)
    # Random probe rays aimed inward from a sphere around the mesh.
    center = 0.5 * (mesh.aabb.min + mesh.aabb.max)
    r = mesh.aabb.diagonal()
    raw = rng.normal(size=(args.probe_rays, 3))
    raw /= np.linalg.norm(raw, axis=1)[:, None]
    origins = center + 1.5 * r * raw
    targets = center + 0.3 * r * rng.uniform(-1, 1, size=(args.probe_rays, 3))
    dirs = targets - origins
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]

    rules = ["median", "sah"] if args.split == "both" else [args.split]
    for rule in rules:
        tree = bvh_mod.build(mesh, bvh_mod.BuildParams(split_rule=rule))
        _, _, visits = bvh_mod.closest_hit_batch(tree, mesh, origins, dirs)
        hist = tree.leaf_size_histogram()
        hist_s = " ".join(f"{size}:{int(count)}"
                          for size, count in enumerate(hist) if count)
        print(f"split={rule}: nodes={tree.node_total} "
              f"depth={tree.max_depth_seen} "
              f"mean_visits={float(np.mean(visits)):.2f} leaves[{hist_s}]")
    return EXIT_OK


def _cmd_mie(args) -> int:
    if args.kr_min <= 0 or args.kr_max < args.kr_min:
        raise ValidationError("need 0 < kr-min <= kr-max")
    if args.samples < 1:
        raise ValidationError("samples must be >= 1")
    if args.log_spacing:
        kr = np.geomspace(args.kr_min, args.kr_max, args.samples)
    else:
        kr = np.linspace(args.kr_min, args.kr_max, args.samples)
    area = math.pi * args.radius ** 2
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("kr,sigma_m2,sigma_over_pir2\n")
        for x in kr:
            sigma = mie_backscatter_pec(float(x), args.radius)
            fh.write(f"{x:.9g},{sigma:.9g},{sigma / area:.9g}\n")
    print(f"wrote {args.out}: {args.samples} samples")
    return EXIT_OK


_COMMANDS = {
    "sweep": _cmd_sweep,
    "validate-sphere": _cmd_validate_sphere,
    "gen-sphere": _cmd_gen_sphere,
    "bvh-stats": _cmd_bvh_stats,
    "mie": _cmd_mie,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
