"""Shared mesh generators and brute-force oracles for the test suite."""

import numpy as np
from numba import njit

import sbr
from sbr.geometry import _tri_hit_t


def plate_mesh(side=1.0):
    """Square PEC plate in the z=0 plane, two triangles, +z normals."""
    v = [[0, 0, 0], [side, 0, 0], [side, side, 0], [0, side, 0]]
    return sbr.mesh_from_arrays(v, [[0, 1, 2], [0, 2, 3]])


def dihedral_mesh(size=1.0):
    """Two unit plates meeting at a right angle along the z axis.

    Plate A spans x in [0, size] at y=0; plate B spans y in [0, size] at
    x=0; both extend z in [0, size]. A ray arriving along -(1,1,0)/sqrt(2)
    retro-reflects after two bounces.
    """
    s = size
    v = [[0, 0, 0], [s, 0, 0], [s, 0, s], [0, 0, s],
         [0, s, 0], [0, s, s]]
    return sbr.mesh_from_arrays(v, [[0, 1, 2], [0, 2, 3], [0, 4, 5], [0, 5, 3]])


def perturbed_grid_mesh(cells=71, extent=4.0, amplitude=0.05, seed=42):
    """Rough rectangular plate: (cells+1)^2 vertices, 2*cells^2 triangles.

    Vertex heights are seeded-random, so the surface scatters over a wide
    dynamic range while staying deterministic.
    """
    rng = np.random.default_rng(seed)
    n = cells + 1
    xs = np.linspace(0.0, extent, n)
    xx, yy = np.meshgrid(xs, xs, indexing="ij")
    zz = amplitude * rng.standard_normal((n, n))
    verts = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)
    idx = np.arange(n * n).reshape(n, n)
    a = idx[:-1, :-1].ravel()
    b = idx[1:, :-1].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[:-1, 1:].ravel()
    faces = np.concatenate([np.stack([a, b, c], axis=1),
                            np.stack([a, c, d], axis=1)])
    return sbr.mesh_from_arrays(verts, faces)


@njit(cache=True)
def _brute_force_scan(v0, v1, v2, ox, oy, oz, dx, dy, dz, t_min, t_max):
    """Linear scan over every triangle; smallest t, ties to lowest index."""
    best_t = t_max
    best_tri = -1
    for ti in range(v0.shape[0]):
        t = _tri_hit_t(v0, v1, v2, ti, ox, oy, oz, dx, dy, dz, t_min, best_t)
        if t > 0.0 and (t < best_t or (t == best_t and ti < best_tri)):
            best_t = t
            best_tri = ti
    return best_tri, best_t


@njit(cache=True)
def brute_force_batch(v0, v1, v2, origins, dirs, t_min, t_max,
                      out_tri, out_t):
    for r in range(origins.shape[0]):
        tri, t = _brute_force_scan(v0, v1, v2,
                                   origins[r, 0], origins[r, 1], origins[r, 2],
                                   dirs[r, 0], dirs[r, 1], dirs[r, 2],
                                   t_min, t_max)
        out_tri[r] = tri
        out_t[r] = t


def brute_force_hits(mesh, origins, dirs, t_min=0.0, t_max=np.inf):
    """Oracle closest-hit over all triangles; returns (tri, t) arrays."""
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    out_tri = np.empty(origins.shape[0], dtype=np.int64)
    out_t = np.empty(origins.shape[0], dtype=np.float64)
    brute_force_batch(np.asarray(mesh.v0, np.float64),
                      np.asarray(mesh.v1, np.float64),
                      np.asarray(mesh.v2, np.float64),
                      origins, dirs, t_min, t_max, out_tri, out_t)
    return out_tri, out_t


def random_probe_rays(mesh, count, seed, radius_factor=1.6):
    """Rays from a sphere around the mesh aimed at jittered interior points."""
    rng = np.random.default_rng(seed)
    center = 0.5 * (mesh.aabb.min + mesh.aabb.max)
    r = max(mesh.aabb.diagonal(), 1e-6)
    raw = rng.normal(size=(count, 3))
    raw /= np.linalg.norm(raw, axis=1)[:, None]
    origins = center + radius_factor * r * raw
    targets = center + 0.4 * r * rng.uniform(-1.0, 1.0, size=(count, 3))
    dirs = targets - origins
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    return origins, dirs
