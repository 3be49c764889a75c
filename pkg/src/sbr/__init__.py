"""Shooting-and-bouncing-rays monostatic RCS solver for PEC triangle meshes.

Pipeline: load or generate a mesh, build a BVH over its triangles once,
launch an orthographic ray grid per incident direction, follow specular
bounces to compact hit records, and coherently accumulate the discretized
physical-optics sum into a complex amplitude and RCS. A Mie-series oracle
validates the sphere case.
"""

from .errors import NumericalError, SbrError, ValidationError
from .geometry import (Aabb, Mesh, Triangle, generate_icosphere, load_mesh,
                       mesh_from_arrays, mesh_from_soup, ray_aabb_intersect,
                       ray_triangle_intersect, save_obj)
from .bvh import (BuildParams, Bvh, Hit, binned_sah_split, build, closest_hit,
                  closest_hit_batch, closest_hit_counted, median_split,
                  sah_cost)
from .transport import (ApertureGrid, HitRecord, HitRecords,
                        IncidentDirection, SamplingCheck, TraceParams,
                        build_aperture, orthonormal_basis, reflect,
                        sampling_check, trace_grid, trace_ray)
from .po import (RcsValue, ScatterParams, SPEED_OF_LIGHT, accumulate,
                 pairwise_sum, plate_reference, rcs)
from .mie import mie_backscatter_pec, truncation_order
from .sweep import (AngleRange, SphereValidationReport, SweepConfig,
                    SweepResult, fibonacci_directions, run_sweep,
                    solve_direction, validate_sphere, write_csv,
                    write_heatmap, write_validation_csv)

__version__ = "0.1.0"

__all__ = [
    "Aabb", "AngleRange", "ApertureGrid", "BuildParams", "Bvh", "Hit",
    "HitRecord", "HitRecords", "IncidentDirection", "Mesh", "NumericalError",
    "RcsValue", "SamplingCheck", "SbrError", "ScatterParams",
    "SphereValidationReport", "SweepConfig", "SweepResult", "TraceParams",
    "Triangle", "ValidationError", "SPEED_OF_LIGHT", "accumulate",
    "binned_sah_split", "build", "build_aperture", "closest_hit",
    "closest_hit_batch", "closest_hit_counted", "fibonacci_directions",
    "generate_icosphere", "load_mesh", "median_split", "mesh_from_arrays",
    "mesh_from_soup", "mie_backscatter_pec", "orthonormal_basis",
    "pairwise_sum", "plate_reference", "ray_aabb_intersect",
    "ray_triangle_intersect", "rcs", "reflect", "run_sweep", "sah_cost",
    "sampling_check", "save_obj", "solve_direction", "trace_grid",
    "trace_ray", "truncation_order", "validate_sphere", "write_csv",
    "write_heatmap", "write_validation_csv",
]
