"""Bounding volume hierarchy over mesh triangles.

Two split rules are supported: median-of-centroids along the longest node
axis, and a binned surface area heuristic. Nodes are linearized in preorder
(a node's left child sits at index+1, so only the right-child index is
stored) and leaves reference contiguous ranges of a permuted triangle-index
array. Construction is sequential and bit-deterministic for fixed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from numba import njit

from .errors import ValidationError
from .geometry import Aabb, Mesh, _aabb_hit, _tri_hit_t


@dataclass(frozen=True)
class BuildParams:
    """Construction knobs.

    ``split_rule`` is "median" or "sah". ``n_leaf`` is the leaf-size
    threshold; a node also becomes a leaf at ``max_depth`` or when no
    admissible split exists. ``c_t``/``c_i`` are the traversal and
    intersection cost constants of the SAH objective.
    """

    split_rule: str = "sah"
    n_leaf: int = 4
    bins_per_axis: int = 16
    c_t: float = 1.0
    c_i: float = 1.0
    max_depth: int = 64

    def __post_init__(self):
        if self.split_rule not in ("median", "sah"):
            raise ValidationError(f"unknown split rule {self.split_rule!r}")
        if self.n_leaf < 1:
            raise ValidationError("n_leaf must be >= 1")
        if self.split_rule == "sah" and self.bins_per_axis < 2:
            raise ValidationError("bins_per_axis must be >= 2 for SAH")
        if self.c_t <= 0 or self.c_i <= 0:
            raise ValidationError("cost constants must be positive")
        if self.max_depth < 1:
            raise ValidationError("max_depth must be >= 1")


class Hit(NamedTuple):
    t: float
    triangle_index: int
    normal: np.ndarray


@dataclass(frozen=True)
class Bvh:
    """Linearized hierarchy.

    ``node_count[i] > 0`` marks a leaf owning triangles
    ``tri_order[node_first[i] : node_first[i] + node_count[i]]``; for
    internal nodes ``node_count[i] == 0`` and ``node_first[i]`` is the
    right-child index (left child is ``i + 1``).
    """

    nodes_min: np.ndarray
    nodes_max: np.ndarray
    node_first: np.ndarray
    node_count: np.ndarray
    tri_order: np.ndarray
    max_depth_seen: int
    params: BuildParams

    @property
    def node_total(self) -> int:
        return self.nodes_min.shape[0]

    def leaf_sizes(self) -> np.ndarray:
        return self.node_count[self.node_count > 0]

    def leaf_size_histogram(self) -> np.ndarray:
        return np.bincount(self.leaf_sizes())

    def root_box(self) -> Aabb:
        return Aabb(self.nodes_min[0].astype(np.float64),
                    self.nodes_max[0].astype(np.float64))

    def validate(self, mesh: Mesh) -> None:
        """Check structural invariants; raises on violation."""
        n = self.node_total
        t = mesh.triangle_count
        order = np.sort(self.tri_order)
        if not np.array_equal(order, np.arange(t)):
            raise AssertionError("tri_order is not a permutation")
        covered = np.zeros(t, dtype=bool)
        stack = [(0, None)]
        while stack:
            i, parent = stack.pop()
            if parent is not None:
                if np.any(self.nodes_min[i] < self.nodes_min[parent] - 1e-12):
                    raise AssertionError(f"node {i} min escapes parent")
                if np.any(self.nodes_max[i] > self.nodes_max[parent] + 1e-12):
                    raise AssertionError(f"node {i} max escapes parent")
            if self.node_count[i] > 0:
                first, cnt = int(self.node_first[i]), int(self.node_count[i])
                if cnt < 1 or first < 0 or first + cnt > t:
                    raise AssertionError(f"bad leaf range at node {i}")
                seg = self.tri_order[first:first + cnt]
                if np.any(covered[seg]):
                    raise AssertionError("triangle in two leaves")
                covered[seg] = True
            else:
                left, right = i + 1, int(self.node_first[i])
                if not (0 < left < n and 0 < right < n):
                    raise AssertionError(f"bad children at node {i}")
                stack.append((left, i))
                stack.append((right, i))
        if not covered.all():
            raise AssertionError("leaf ranges do not cover all triangles")


def sah_cost(sa_p: float, sa_l: float, sa_r: float, n_l: int, n_r: int,
             c_t: float, c_i: float) -> float:
    """Expected-cost objective: c_t + (SA_L/SA_P) N_L c_i + (SA_R/SA_P) N_R c_i."""
    return c_t + (sa_l / sa_p) * n_l * c_i + (sa_r / sa_p) * n_r * c_i


def _box_surface_area(lo: np.ndarray, hi: np.ndarray) -> float:
    d = hi - lo
    return float(2.0 * (d[0] * d[1] + d[1] * d[2] + d[2] * d[0]))


def median_split(centroids: np.ndarray, node_box: Aabb):
    """Median-of-centroids partition along the longest axis of node_box.

    Returns (axis, left_positions, right_positions) with both sides
    non-empty, or None when all centroids coincide. Ties are broken by
    position so the partition is deterministic.
    """
    centroids = np.asarray(centroids, dtype=np.float64)
    n = centroids.shape[0]
    if n < 2:
        raise ValidationError("median_split requires >= 2 triangles")
    if np.all(centroids == centroids[0]):
        return None
    axis = int(np.argmax(node_box.max - node_box.min))
    order = np.lexsort((np.arange(n), centroids[:, axis]))
    mid = n // 2
    return axis, order[:mid], order[mid:]


def binned_sah_split(tri_min: np.ndarray, tri_max: np.ndarray,
                     centroids: np.ndarray, node_box: Aabb,
                     bins_per_axis: int = 16, c_t: float = 1.0,
                     c_i: float = 1.0, n_leaf: int = 4):
    """Minimum-cost binned SAH split over all 3 axes.

    Candidate planes are the interior bin boundaries of a per-axis centroid
    binning; child boxes are unions of member-triangle AABBs. Returns
    (axis, boundary, left_positions, right_positions) or None when no
    admissible split exists. Ties between equal-cost candidates resolve to
    the lowest (axis, boundary) pair. Splitting is also rejected when the
    best cost is no better than the leaf cost ``n * c_i`` and the node is
    already small (n <= 4 * n_leaf), which stops fruitless subdivision of
    dense clusters.
    """
    centroids = np.asarray(centroids, dtype=np.float64)
    n = centroids.shape[0]
    if n < 2:
        raise ValidationError("binned_sah_split requires >= 2 triangles")
    sa_p = max(_box_surface_area(node_box.min, node_box.max), 1e-300)

    best = None  # (cost, axis, boundary, bin_idx array)
    for axis in range(3):
        c = centroids[:, axis]
        c_lo, c_hi = c.min(), c.max()
        if c_hi <= c_lo:
            continue
        scale = bins_per_axis / (c_hi - c_lo)
        bin_idx = np.minimum((scale * (c - c_lo)).astype(np.int64),
                             bins_per_axis - 1)
        counts = np.bincount(bin_idx, minlength=bins_per_axis)
        bmin = np.full((bins_per_axis, 3), np.inf)
        bmax = np.full((bins_per_axis, 3), -np.inf)
        np.minimum.at(bmin, bin_idx, tri_min)
        np.maximum.at(bmax, bin_idx, tri_max)

        # Prefix/suffix sweeps over bins; boundary b splits bins [0..b] | rest.
        left_n = np.cumsum(counts)[:-1]
        right_n = np.cumsum(counts[::-1])[::-1][1:]
        lmin = np.minimum.accumulate(bmin, axis=0)[:-1]
        lmax = np.maximum.accumulate(bmax, axis=0)[:-1]
        rmin = np.minimum.accumulate(bmin[::-1], axis=0)[::-1][1:]
        rmax = np.maximum.accumulate(bmax[::-1], axis=0)[::-1][1:]

        for b in range(bins_per_axis - 1):
            if left_n[b] == 0 or right_n[b] == 0:
                continue
            cost = sah_cost(sa_p, _box_surface_area(lmin[b], lmax[b]),
                            _box_surface_area(rmin[b], rmax[b]),
                            int(left_n[b]), int(right_n[b]), c_t, c_i)
            if best is None or cost < best[0]:
                best = (cost, axis, b, bin_idx)

    if best is None:
        return None
    cost, axis, boundary, bin_idx = best
    if cost >= n * c_i and n <= 4 * n_leaf:
        return None
    positions = np.arange(n)
    left = positions[bin_idx <= boundary]
    right = positions[bin_idx > boundary]
    return axis, boundary, left, right


def build(mesh: Mesh, params: BuildParams = BuildParams()) -> Bvh:
    """Construct a BVH over the mesh triangles.

    Sequential recursive partitioning; output is bit-identical for fixed
    inputs regardless of worker count. Node boxes are tight unions of the
    member triangle AABBs (the root box therefore equals the mesh AABB).
    """
    t = mesh.triangle_count
    v0 = np.asarray(mesh.v0, dtype=np.float64)
    v1 = np.asarray(mesh.v1, dtype=np.float64)
    v2 = np.asarray(mesh.v2, dtype=np.float64)
    tri_min = np.minimum(np.minimum(v0, v1), v2)
    tri_max = np.maximum(np.maximum(v0, v1), v2)
    cents = (tri_min + tri_max) * 0.5

    n_min: list[np.ndarray] = []
    n_max: list[np.ndarray] = []
    n_first: list[int] = []
    n_count: list[int] = []
    order_out = np.empty(t, dtype=np.int32)
    cursor = 0
    depth_seen = 0

    def emit(idx: np.ndarray, depth: int) -> int:
        nonlocal cursor, depth_seen
        depth_seen = max(depth_seen, depth)
        me = len(n_min)
        lo = tri_min[idx].min(axis=0)
        hi = tri_max[idx].max(axis=0)
        n_min.append(lo)
        n_max.append(hi)
        n_first.append(-1)
        n_count.append(-1)
        box = Aabb(lo, hi)

        split = None
        if idx.size > params.n_leaf and depth < params.max_depth:
            if params.split_rule == "median":
                split = median_split(cents[idx], box)
                if split is not None:
                    _, l_pos, r_pos = split
                    split = (idx[l_pos], idx[r_pos])
            else:
                split = binned_sah_split(tri_min[idx], tri_max[idx],
                                         cents[idx], box,
                                         params.bins_per_axis, params.c_t,
                                         params.c_i, params.n_leaf)
                if split is not None:
                    _, _, l_pos, r_pos = split
                    split = (idx[l_pos], idx[r_pos])

        if split is None:
            n_first[me] = cursor
            n_count[me] = idx.size
            order_out[cursor:cursor + idx.size] = idx
            cursor += idx.size
        else:
            left_idx, right_idx = split
            emit(left_idx, depth + 1)
            right_id = emit(right_idx, depth + 1)
            n_first[me] = right_id
            n_count[me] = 0
        return me

    emit(np.arange(t, dtype=np.int64), 0)

    nodes_min = np.asarray(n_min)
    nodes_max = np.asarray(n_max)
    if mesh.dtype == np.float32:
        # Conservative rounding: never let a float32 box shrink past the
        # triangles it owns.
        nodes_min = np.nextafter(nodes_min.astype(np.float32), np.float32(-np.inf))
        nodes_max = np.nextafter(nodes_max.astype(np.float32), np.float32(np.inf))
    return Bvh(
        nodes_min=np.ascontiguousarray(nodes_min),
        nodes_max=np.ascontiguousarray(nodes_max),
        node_first=np.asarray(n_first, dtype=np.int32),
        node_count=np.asarray(n_count, dtype=np.int32),
        tri_order=order_out,
        max_depth_seen=depth_seen,
        params=params,
    )


# ---------------------------------------------------------------------------
# Traversal
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _traverse(nodes_min, nodes_max, node_first, node_count, tri_order,
              v0, v1, v2, ox, oy, oz, dx, dy, dz, t_min, t_max, stack):
    """Iterative closest-hit traversal with an explicit node stack.

    Children are pushed far-first so the near child pops first; a node is
    skipped when its slab entry exceeds the best hit so far. Returns
    (triangle index or -1, t, nodes visited). Equal-t hits resolve to the
    smallest original triangle index, matching a brute-force scan.
    """
    best_t = t_max
    best_tri = -1
    visits = 0
    inv_x = 1.0 / dx if dx != 0.0 else np.inf
    inv_y = 1.0 / dy if dy != 0.0 else np.inf
    inv_z = 1.0 / dz if dz != 0.0 else np.inf

    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        visits += 1
        hit, entry = _aabb_hit(nodes_min, nodes_max, node,
                               ox, oy, oz, inv_x, inv_y, inv_z, best_t)
        if not hit or entry > best_t:
            continue
        cnt = node_count[node]
        if cnt > 0:
            first = node_first[node]
            for k in range(first, first + cnt):
                ti = tri_order[k]
                t = _tri_hit_t(v0, v1, v2, ti, ox, oy, oz, dx, dy, dz,
                               t_min, best_t)
                if t > 0.0 and (t < best_t or (t == best_t and ti < best_tri)):
                    best_t = t
                    best_tri = ti
        else:
            left = node + 1
            right = node_first[node]
            hit_l, e_l = _aabb_hit(nodes_min, nodes_max, left,
                                   ox, oy, oz, inv_x, inv_y, inv_z, best_t)
            hit_r, e_r = _aabb_hit(nodes_min, nodes_max, right,
                                   ox, oy, oz, inv_x, inv_y, inv_z, best_t)
            if hit_l and hit_r:
                if e_l <= e_r:
                    stack[sp] = right; sp += 1
                    stack[sp] = left; sp += 1
                else:
                    stack[sp] = left; sp += 1
                    stack[sp] = right; sp += 1
            elif hit_l:
                stack[sp] = left; sp += 1
            elif hit_r:
                stack[sp] = right; sp += 1

    return best_tri, best_t, visits


@njit(cache=True, nogil=True)
def _traverse_batch(nodes_min, nodes_max, node_first, node_count, tri_order,
                    v0, v1, v2, origins, dirs, t_min, t_max, stack_depth,
                    out_tri, out_t, out_visits):
    stack = np.empty(stack_depth, dtype=np.int32)
    for r in range(origins.shape[0]):
        tri, t, vis = _traverse(
            nodes_min, nodes_max, node_first, node_count, tri_order,
            v0, v1, v2,
            origins[r, 0], origins[r, 1], origins[r, 2],
            dirs[r, 0], dirs[r, 1], dirs[r, 2], t_min, t_max, stack)
        out_tri[r] = tri
        out_t[r] = t
        out_visits[r] = vis


def _stack_depth(bvh: Bvh) -> int:
    return bvh.params.max_depth + 2


def closest_hit(bvh: Bvh, mesh: Mesh, origin, direction, t_min: float = 0.0,
                t_max: float = np.inf) -> Optional[Hit]:
    """Closest intersection over the whole mesh, identical to a linear scan."""
    hit, _ = closest_hit_counted(bvh, mesh, origin, direction, t_min, t_max)
    return hit


def closest_hit_counted(bvh: Bvh, mesh: Mesh, origin, direction,
                        t_min: float = 0.0, t_max: float = np.inf):
    """Like closest_hit, also returning the node-visit count."""
    o = np.asarray(origin, dtype=mesh.dtype)
    d = np.asarray(direction, dtype=mesh.dtype)
    stack = np.empty(_stack_depth(bvh), dtype=np.int32)
    tri, t, visits = _traverse(
        bvh.nodes_min, bvh.nodes_max, bvh.node_first, bvh.node_count,
        bvh.tri_order, mesh.v0, mesh.v1, mesh.v2,
        o[0], o[1], o[2], d[0], d[1], d[2], t_min, t_max, stack)
    if tri < 0:
        return None, int(visits)
    return Hit(float(t), int(tri), np.asarray(mesh.normals[tri], np.float64).copy()), int(visits)


def closest_hit_batch(bvh: Bvh, mesh: Mesh, origins, dirs,
                      t_min: float = 0.0, t_max: float = np.inf):
    """Vectorized closest-hit over many rays.

    Returns (tri, t, visits) arrays; tri is -1 where the ray misses.
    """
    origins = np.ascontiguousarray(origins, dtype=mesh.dtype)
    dirs = np.ascontiguousarray(dirs, dtype=mesh.dtype)
    n = origins.shape[0]
    out_tri = np.empty(n, dtype=np.int64)
    out_t = np.empty(n, dtype=np.float64)
    out_visits = np.empty(n, dtype=np.int64)
    _traverse_batch(bvh.nodes_min, bvh.nodes_max, bvh.node_first,
                    bvh.node_count, bvh.tri_order, mesh.v0, mesh.v1, mesh.v2,
                    origins, dirs, t_min, t_max, _stack_depth(bvh),
                    out_tri, out_t, out_visits)
    return out_tri, out_t, out_visits
