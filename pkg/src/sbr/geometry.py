"""Triangle-soup meshes: OBJ I/O, analytic test meshes, and the scalar
ray/triangle and ray/box predicates that BVH traversal is built on.

Positions are in meters. Directions are unit vectors. Meshes are immutable
once constructed and safe to share across worker threads.
"""

from __future__ import annotations

import hashlib
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from numba import njit

from .errors import ValidationError

# Icosahedron with unit circumradius after normalization; the classic
# 12-vertex table with golden-ratio rectangles.
_ICO_T = (1.0 + math.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array(
    [
        [-1.0, _ICO_T, 0.0],
        [1.0, _ICO_T, 0.0],
        [-1.0, -_ICO_T, 0.0],
        [1.0, -_ICO_T, 0.0],
        [0.0, -1.0, _ICO_T],
        [0.0, 1.0, _ICO_T],
        [0.0, -1.0, -_ICO_T],
        [0.0, 1.0, -_ICO_T],
        [_ICO_T, 0.0, -1.0],
        [_ICO_T, 0.0, 1.0],
        [-_ICO_T, 0.0, -1.0],
        [-_ICO_T, 0.0, 1.0],
    ],
    dtype=np.float64,
)
_ICO_FACES = np.array(
    [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ],
    dtype=np.int64,
)


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box, min <= max componentwise."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "min", np.asarray(self.min, dtype=np.float64))
        object.__setattr__(self, "max", np.asarray(self.max, dtype=np.float64))
        if not np.all(self.min <= self.max):
            raise ValidationError(f"invalid AABB: min {self.min} > max {self.max}")

    def corners(self) -> np.ndarray:
        """All 8 corners, shape (8, 3)."""
        lo, hi = self.min, self.max
        sel = np.array([[(c >> a) & 1 for a in range(3)] for c in range(8)])
        return np.where(sel, hi, lo)

    def diagonal(self) -> float:
        return float(np.linalg.norm(self.max - self.min))

    def surface_area(self) -> float:
        d = self.max - self.min
        return float(2.0 * (d[0] * d[1] + d[1] * d[2] + d[2] * d[0]))


class Triangle(NamedTuple):
    """Single triangle with its geometric (not authored) normal."""

    v0: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    normal: np.ndarray


@dataclass(frozen=True)
class Mesh:
    """Immutable triangle soup with per-triangle geometric normals.

    Vertex positions are stored as three (T, 3) arrays so traversal kernels
    index them without an extra indirection. ``normals[i]`` is
    normalize((v1-v0) x (v2-v0)) for triangle i.
    """

    v0: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    normals: np.ndarray
    aabb: Aabb
    path: Optional[str] = None

    @property
    def triangle_count(self) -> int:
        return self.v0.shape[0]

    @property
    def dtype(self) -> np.dtype:
        return self.v0.dtype

    def triangle(self, i: int) -> Triangle:
        return Triangle(self.v0[i], self.v1[i], self.v2[i], self.normals[i])

    def centroids(self) -> np.ndarray:
        return (self.v0 + self.v1 + self.v2) / 3.0

    def areas(self) -> np.ndarray:
        cross = np.cross(self.v1 - self.v0, self.v2 - self.v0)
        return 0.5 * np.linalg.norm(cross, axis=1)

    def checksum(self) -> str:
        """SHA-256 over the vertex data, for run metadata."""
        h = hashlib.sha256()
        for arr in (self.v0, self.v1, self.v2):
            h.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        return h.hexdigest()


def mesh_from_soup(tri_vertices: np.ndarray, path: Optional[str] = None,
                   strict: bool = False, dtype=np.float64,
                   face_labels: Optional[np.ndarray] = None) -> Mesh:
    """Build a Mesh from a (T, 3, 3) vertex array.

    Degenerate (zero-area) triangles are dropped with a warning, or rejected
    outright when ``strict`` is set; real CAD exports routinely contain
    slivers. ``face_labels`` lets the OBJ loader report original face indices
    in diagnostics.
    """
    tri = np.asarray(tri_vertices, dtype=np.float64)
    if tri.ndim != 3 or tri.shape[1:] != (3, 3):
        raise ValidationError(f"expected (T, 3, 3) triangle array, got {tri.shape}")
    if tri.shape[0] == 0:
        raise ValidationError("mesh has no triangles")

    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    cross = np.cross(e1, e2)
    twice_area = np.linalg.norm(cross, axis=1)
    edge_sq = np.maximum(np.sum(e1 * e1, axis=1), np.sum(e2 * e2, axis=1))
    degenerate = twice_area <= 1e-14 * np.maximum(edge_sq, 1e-300)

    if np.any(degenerate):
        bad = np.flatnonzero(degenerate)
        labels = face_labels[bad] if face_labels is not None else bad
        if strict:
            raise ValidationError(
                f"zero-area triangle(s) at face index {labels.tolist()[:10]}"
            )
        warnings.warn(
            f"dropping {bad.size} zero-area triangle(s), first at face index "
            f"{int(labels[0])}", stacklevel=2)
        tri = tri[~degenerate]
        cross = cross[~degenerate]
        twice_area = twice_area[~degenerate]
        if tri.shape[0] == 0:
            raise ValidationError("mesh has no non-degenerate triangles")

    normals = cross / twice_area[:, None]
    dtype = np.dtype(dtype)
    lo = tri.min(axis=(0, 1))
    hi = tri.max(axis=(0, 1))
    return Mesh(
        v0=np.ascontiguousarray(tri[:, 0], dtype=dtype),
        v1=np.ascontiguousarray(tri[:, 1], dtype=dtype),
        v2=np.ascontiguousarray(tri[:, 2], dtype=dtype),
        normals=np.ascontiguousarray(normals, dtype=dtype),
        aabb=Aabb(lo, hi),
        path=path,
    )


def mesh_from_arrays(vertices: np.ndarray, faces: np.ndarray, **kwargs) -> Mesh:
    """Build a Mesh from shared-vertex (V, 3) + (F, 3) arrays."""
    vertices = np.asarray(vertices, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    return mesh_from_soup(vertices[faces], **kwargs)


def load_mesh(path, strict: bool = False, dtype=np.float64) -> Mesh:
    """Load a triangle mesh from a Wavefront OBJ file.

    Supported subset: ``v`` and ``f`` records; all other record types are
    ignored. Faces with more than 3 vertices are fan-triangulated
    (1-2-3, 1-3-4, ...). Indices are 1-based; negative indices count back
    from the most recently read vertex per the OBJ convention. Authored normals
    and texture coordinates are discarded and geometric normals recomputed.
    """
    verts: list[list[float]] = []
    tris: list[tuple[int, int, int]] = []
    face_labels: list[int] = []
    n_faces = 0

    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise ValidationError(f"{path}:{lineno}: malformed vertex record")
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif tag == "f":
                refs = parts[1:]
                if len(refs) < 3:
                    raise ValidationError(f"{path}:{lineno}: face with <3 vertices")
                idx = []
                for ref in refs:
                    raw = ref.split("/")[0]
                    i = int(raw)
                    if i == 0:
                        raise ValidationError(
                            f"{path}:{lineno}: zero vertex index in face {n_faces}")
                    i = i - 1 if i > 0 else len(verts) + i
                    if i < 0 or i >= len(verts):
                        raise ValidationError(
                            f"{path}:{lineno}: vertex index {raw} out of range "
                            f"in face {n_faces}")
                    idx.append(i)
                for k in range(1, len(idx) - 1):
                    tris.append((idx[0], idx[k], idx[k + 1]))
                    face_labels.append(n_faces)
                n_faces += 1

    if not tris:
        raise ValidationError(f"{path}: no faces found")
    vert_arr = np.asarray(verts, dtype=np.float64)
    face_arr = np.asarray(tris, dtype=np.int64)
    return mesh_from_soup(vert_arr[face_arr], path=str(path), strict=strict,
                          dtype=dtype, face_labels=np.asarray(face_labels))


def save_obj(mesh: Mesh, path) -> None:
    """Write a mesh as OBJ, deduplicating exactly-equal vertices."""
    index: dict[tuple, int] = {}
    out_verts: list[tuple] = []
    faces = np.empty((mesh.triangle_count, 3), dtype=np.int64)
    stacked = np.stack(
        [np.asarray(mesh.v0, np.float64), np.asarray(mesh.v1, np.float64),
         np.asarray(mesh.v2, np.float64)], axis=1)
    for t in range(stacked.shape[0]):
        for c in range(3):
            key = tuple(stacked[t, c])
            i = index.get(key)
            if i is None:
                i = len(out_verts)
                index[key] = i
                out_verts.append(key)
            faces[t, c] = i
    with open(path, "w", encoding="utf-8") as fh:
        for v in out_verts:
            fh.write(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def generate_icosphere(radius: float, subdivisions: int, dtype=np.float64) -> Mesh:
    """Icosahedron subdivided ``subdivisions`` times, projected to ``radius``.

    Produces 20 * 4**subdivisions triangles with outward-facing normals and
    every vertex at distance ``radius`` from the origin.
    """
    if radius <= 0:
        raise ValidationError(f"radius must be positive, got {radius}")
    if not 0 <= subdivisions <= 8:
        raise ValidationError(f"subdivisions must be in [0, 8], got {subdivisions}")

    verts = _ICO_VERTS / np.linalg.norm(_ICO_VERTS[0])
    faces = _ICO_FACES.copy()

    for _ in range(subdivisions):
        # Unique undirected edges; each gains one midpoint vertex.
        edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
        edges = np.sort(edges, axis=1)
        uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
        mids = verts[uniq[:, 0]] + verts[uniq[:, 1]]
        mids /= np.linalg.norm(mids, axis=1)[:, None]
        mid_idx = inverse.reshape(3, -1).T + len(verts)
        verts = np.concatenate([verts, mids])
        a, b, c = faces[:, 0], faces[:, 1], faces[:, 2]
        ab, bc, ca = mid_idx[:, 0], mid_idx[:, 1], mid_idx[:, 2]
        faces = np.concatenate([
            np.stack([a, ab, ca], axis=1),
            np.stack([b, bc, ab], axis=1),
            np.stack([c, ca, bc], axis=1),
            np.stack([ab, bc, ca], axis=1),
        ])

    verts = verts * radius
    tri = verts[faces]
    # Enforce outward winding regardless of the base-table orientation.
    centroid = tri.mean(axis=1)
    normal = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    flip = np.einsum("ij,ij->i", normal, centroid) < 0
    tri[flip] = tri[flip][:, [0, 2, 1]]
    return mesh_from_soup(tri, dtype=dtype)


def icosphere_sagitta(mesh: Mesh, radius: float) -> float:
    """Max chord-to-surface deviation of a sphere tessellation.

    For a sphere centered at the origin this is the radius minus the smallest
    distance from the origin to any triangle plane.
    """
    plane_dist = np.einsum("ij,ij->i", np.asarray(mesh.normals, np.float64),
                           np.asarray(mesh.v0, np.float64))
    return float(radius - plane_dist.min())


# ---------------------------------------------------------------------------
# Scalar intersection kernels. These are the leaves of the hot path; the BVH
# traversal calls them per candidate triangle / node.
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True, inline="always")
def _tri_hit_t(v0, v1, v2, ti, ox, oy, oz, dx, dy, dz, t_min, t_max):
    """Moller-Trumbore test against triangle ``ti``; edge-inclusive.

    Returns the hit distance in (t_min, t_max], or -1.0 on miss.
    """
    ax = v0[ti, 0]; ay = v0[ti, 1]; az = v0[ti, 2]
    e1x = v1[ti, 0] - ax; e1y = v1[ti, 1] - ay; e1z = v1[ti, 2] - az
    e2x = v2[ti, 0] - ax; e2y = v2[ti, 1] - ay; e2z = v2[ti, 2] - az
    px = dy * e2z - dz * e2y
    py = dz * e2x - dx * e2z
    pz = dx * e2y - dy * e2x
    det = e1x * px + e1y * py + e1z * pz
    if det == 0.0:
        return -1.0
    inv_det = 1.0 / det
    tx = ox - ax; ty = oy - ay; tz = oz - az
    u = (tx * px + ty * py + tz * pz) * inv_det
    if u < 0.0 or u > 1.0:
        return -1.0
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (dx * qx + dy * qy + dz * qz) * inv_det
    if v < 0.0 or u + v > 1.0:
        return -1.0
    t = (e2x * qx + e2y * qy + e2z * qz) * inv_det
    if t <= t_min or t > t_max:
        return -1.0
    return t


@njit(cache=True, nogil=True, inline="always")
def _aabb_hit(bmin, bmax, ni, ox, oy, oz, ix, iy, iz, t_max):
    """Slab test of node ``ni``; returns (hit, entry distance clamped to 0).

    ``ix, iy, iz`` are reciprocal direction components (inf where the
    direction component is zero).
    """
    t_near = 0.0
    t_far = t_max
    for axis in range(3):
        if axis == 0:
            o = ox; inv = ix
        elif axis == 1:
            o = oy; inv = iy
        else:
            o = oz; inv = iz
        lo = bmin[ni, axis]
        hi = bmax[ni, axis]
        if inv == np.inf or inv == -np.inf:
            # Ray parallel to this slab; either inside it or a clean miss.
            if o < lo or o > hi:
                return False, 0.0
        else:
            t1 = (lo - o) * inv
            t2 = (hi - o) * inv
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > t_near:
                t_near = t1
            if t2 < t_far:
                t_far = t2
            if t_near > t_far:
                return False, 0.0
    return True, t_near


def ray_triangle_intersect(origin, direction, tri: Triangle, t_min: float = 0.0,
                           t_max: float = np.inf):
    """Closest intersection of a ray with one triangle.

    Returns ``(t, normal)`` with t in (t_min, t_max] and the triangle's
    geometric normal, or None. Edge and vertex hits are inclusive.
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    v0 = np.asarray(tri.v0, dtype=np.float64).reshape(1, 3)
    v1 = np.asarray(tri.v1, dtype=np.float64).reshape(1, 3)
    v2 = np.asarray(tri.v2, dtype=np.float64).reshape(1, 3)
    t = _tri_hit_t(v0, v1, v2, 0, o[0], o[1], o[2], d[0], d[1], d[2],
                   t_min, t_max)
    if t < 0.0:
        return None
    return float(t), np.asarray(tri.normal, dtype=np.float64).copy()


def ray_aabb_intersect(origin, dir_inv, box: Aabb, t_max: float = np.inf):
    """Slab test. Returns (hit, entry distance); entry is 0 inside the box.

    ``dir_inv`` is the componentwise reciprocal of a unit direction, with
    infinities where the direction component is zero.
    """
    o = np.asarray(origin, dtype=np.float64)
    inv = np.asarray(dir_inv, dtype=np.float64)
    bmin = box.min.reshape(1, 3)
    bmax = box.max.reshape(1, 3)
    hit, entry = _aabb_hit(bmin, bmax, 0, o[0], o[1], o[2],
                           inv[0], inv[1], inv[2], t_max)
    return bool(hit), float(entry)
