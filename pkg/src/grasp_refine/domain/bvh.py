"""Bounding-volume index over mesh triangles for nearest-triangle and ray queries.

Every triangle is a leaf bounded by the sphere around its centroid that
contains its corners. The leaf spheres are organized by a KD-tree over the
centroids, which answers the candidate searches; exact point-triangle
distances are then evaluated only on the candidates. A triangle at centroid
distance `r` from a query is never closer than `r - max_radius`, so the
refinement ball `best + max_radius` makes the search exact.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.spatial import cKDTree

from .exceptions import InvalidMesh
from .mesh import TriMesh

# Feature codes for the part of a triangle that holds the closest point
FEATURE_FACE = 0
FEATURE_VERTEX_A = 1
FEATURE_VERTEX_B = 2
FEATURE_VERTEX_C = 3
FEATURE_EDGE_AB = 4
FEATURE_EDGE_AC = 5
FEATURE_EDGE_BC = 6

_INITIAL_CANDIDATES = 8


@dataclass(frozen=True, eq=False)
class AccelIndex:
    """Read-only acceleration structure for one mesh."""

    mesh: TriMesh
    tree: cKDTree
    centroids: np.ndarray
    radii: np.ndarray
    max_radius: float
    face_normals: np.ndarray
    vertex_normals: np.ndarray
    edge_normals: np.ndarray

    @property
    def leaf_count(self) -> int:
        return len(self.radii)


def _angle_weighted_vertex_normals(mesh: TriMesh, face_normals: np.ndarray) -> np.ndarray:
    corners = mesh.corners
    normals = np.zeros_like(mesh.vertices)
    for i in range(3):
        e1 = corners[:, (i + 1) % 3] - corners[:, i]
        e2 = corners[:, (i + 2) % 3] - corners[:, i]
        cos = np.einsum("ij,ij->i", e1, e2) / (np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1))
        angle = np.arccos(np.clip(cos, -1.0, 1.0))
        np.add.at(normals, mesh.triangles[:, i], face_normals * angle[:, None])
    length = np.linalg.norm(normals, axis=1, keepdims=True)
    return np.divide(normals, length, out=np.zeros_like(normals), where=length > 0)


def _edge_pseudo_normals(mesh: TriMesh, face_normals: np.ndarray) -> np.ndarray:
    """(T, 3, 3) normals for the local edges ab, ac, bc of every triangle."""
    tri = mesh.triangles
    local = [(0, 1), (0, 2), (1, 2)]
    edges = np.concatenate([np.sort(tri[:, list(pair)], axis=1) for pair in local])
    unique, inverse = np.unique(edges, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    summed = np.zeros((len(unique), 3))
    np.add.at(summed, inverse, np.tile(face_normals, (3, 1)))
    length = np.linalg.norm(summed, axis=1, keepdims=True)
    summed = np.divide(summed, length, out=np.zeros_like(summed), where=length > 0)
    per_edge = summed[inverse].reshape(3, len(tri), 3)
    return np.transpose(per_edge, (1, 0, 2))


def build_bvh(mesh: TriMesh) -> AccelIndex:
    """Build the acceleration index for a mesh.

    Args:
        mesh: Cleaned triangle mesh

    Returns:
        Index supporting nearest-triangle and ray queries

    Raises:
        InvalidMesh: If the mesh has no triangles
    """
    if mesh.is_empty:
        raise InvalidMesh("cannot index a mesh with zero triangles")

    corners = mesh.corners
    centroids = corners.mean(axis=1)
    radii = np.linalg.norm(corners - centroids[:, None, :], axis=2).max(axis=1)
    face_normals = mesh.face_normals

    return AccelIndex(
        mesh=mesh,
        tree=cKDTree(centroids),
        centroids=centroids,
        radii=radii,
        max_radius=float(radii.max()),
        face_normals=face_normals,
        vertex_normals=_angle_weighted_vertex_normals(mesh, face_normals),
        edge_normals=_edge_pseudo_normals(mesh, face_normals),
    )


def closest_point_on_triangles(corners: np.ndarray, queries: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Closest point on each triangle to the paired query.

    Implements the region classification of "Real Time Collision Detection"
    (ClosestPtPointTriangle), vectorized over (triangle, query) pairs.

    Args:
        corners: (n, 3, 3) triangle corners
        queries: (n, 3) query points

    Returns:
        (n, 3) closest points and (n,) feature codes
    """
    result = np.zeros_like(queries)
    feature = np.full(len(queries), FEATURE_FACE, dtype=np.int8)
    remain = np.ones(len(queries), dtype=bool)

    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    ab = b - a
    ac = c - a

    ap = queries - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    is_a = (d1 <= 0) & (d2 <= 0)
    result[is_a] = a[is_a]
    feature[is_a] = FEATURE_VERTEX_A
    remain &= ~is_a

    bp = queries - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    is_b = remain & (d3 >= 0) & (d4 <= d3)
    result[is_b] = b[is_b]
    feature[is_b] = FEATURE_VERTEX_B
    remain &= ~is_b

    vc = d1 * d4 - d3 * d2
    is_ab = remain & (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    if np.any(is_ab):
        v = (d1[is_ab] / (d1[is_ab] - d3[is_ab]))[:, None]
        result[is_ab] = a[is_ab] + v * ab[is_ab]
        feature[is_ab] = FEATURE_EDGE_AB
    remain &= ~is_ab

    cp = queries - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)
    is_c = remain & (d6 >= 0) & (d5 <= d6)
    result[is_c] = c[is_c]
    feature[is_c] = FEATURE_VERTEX_C
    remain &= ~is_c

    vb = d5 * d2 - d1 * d6
    is_ac = remain & (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    if np.any(is_ac):
        w = (d2[is_ac] / (d2[is_ac] - d6[is_ac]))[:, None]
        result[is_ac] = a[is_ac] + w * ac[is_ac]
        feature[is_ac] = FEATURE_EDGE_AC
    remain &= ~is_ac

    va = d3 * d6 - d5 * d4
    is_bc = remain & (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
    if np.any(is_bc):
        d43 = d4[is_bc] - d3[is_bc]
        w = (d43 / (d43 + (d5[is_bc] - d6[is_bc])))[:, None]
        result[is_bc] = b[is_bc] + w * (c[is_bc] - b[is_bc])
        feature[is_bc] = FEATURE_EDGE_BC
    remain &= ~is_bc

    if np.any(remain):
        denom = 1.0 / (va[remain] + vb[remain] + vc[remain])
        v = (vb[remain] * denom)[:, None]
        w = (vc[remain] * denom)[:, None]
        result[remain] = a[remain] + ab[remain] * v + ac[remain] * w

    return result, feature


@dataclass(frozen=True)
class NearestHits:
    """Nearest surface features for a batch of queries."""

    points: np.ndarray
    distances: np.ndarray
    triangles: np.ndarray
    features: np.ndarray


def _evaluate_pairs(index: AccelIndex, query_ids: np.ndarray, tri_ids: np.ndarray, queries: np.ndarray):
    corners = index.mesh.corners[tri_ids]
    points, features = closest_point_on_triangles(corners, queries[query_ids])
    distances = np.linalg.norm(queries[query_ids] - points, axis=1)
    return points, distances, features


def nearest_surface(index: AccelIndex, queries: np.ndarray) -> NearestHits:
    """Exact nearest point on the indexed surface for every query.

    Args:
        index: Acceleration index
        queries: (Q, 3) points

    Returns:
        Closest points, distances, triangle ids and feature codes
    """
    queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    n_query = len(queries)
    k = min(_INITIAL_CANDIDATES, index.leaf_count)

    _, candidates = index.tree.query(queries, k=k)
    candidates = np.asarray(candidates).reshape(n_query, k)
    query_ids = np.repeat(np.arange(n_query), k)
    points, distances, features = _evaluate_pairs(index, query_ids, candidates.ravel(), queries)

    distances = distances.reshape(n_query, k)
    best = np.argmin(distances, axis=1)
    rows = np.arange(n_query)
    flat = rows * k + best
    hit_points = points[flat]
    hit_dist = distances[rows, best]
    hit_tri = candidates[rows, best]
    hit_feature = features[flat]

    if index.leaf_count > k:
        balls = index.tree.query_ball_point(queries, hit_dist + index.max_radius)
        extra_q, extra_t = [], []
        for qi, members in enumerate(balls):
            if len(members) > k:
                extra_q.append(np.full(len(members), qi))
                extra_t.append(np.asarray(members))
        if extra_q:
            extra_q = np.concatenate(extra_q)
            extra_t = np.concatenate(extra_t)
            points, distances, features = _evaluate_pairs(index, extra_q, extra_t, queries)
            # Per query, keep the closest pair; lexsort sorts by query then distance
            order = np.lexsort((distances, extra_q))
            first = np.ones(len(order), dtype=bool)
            first[1:] = extra_q[order][1:] != extra_q[order][:-1]
            chosen = order[first]
            qi = extra_q[chosen]
            better = distances[chosen] < hit_dist[qi]
            qi = qi[better]
            chosen = chosen[better]
            hit_points[qi] = points[chosen]
            hit_dist[qi] = distances[chosen]
            hit_tri[qi] = extra_t[chosen]
            hit_feature[qi] = features[chosen]

    return NearestHits(hit_points, hit_dist, hit_tri, hit_feature)


def pseudo_normals(index: AccelIndex, triangles: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Angle-weighted pseudo-normal of the nearest feature (face, edge or vertex)."""
    triangles = np.asarray(triangles)
    features = np.asarray(features)
    normals = index.face_normals[triangles].copy()

    tri_vertices = index.mesh.triangles[triangles]
    for code, corner in ((FEATURE_VERTEX_A, 0), (FEATURE_VERTEX_B, 1), (FEATURE_VERTEX_C, 2)):
        mask = features == code
        normals[mask] = index.vertex_normals[tri_vertices[mask, corner]]
    for code, local in ((FEATURE_EDGE_AB, 0), (FEATURE_EDGE_AC, 1), (FEATURE_EDGE_BC, 2)):
        mask = features == code
        normals[mask] = index.edge_normals[triangles[mask], local]
    return normals


def ray_hits(index: AccelIndex, origin: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Sorted distances along a ray at which it crosses the surface.

    Leaf spheres that the ray's line misses are skipped before the
    Moller-Trumbore test runs on the rest.
    """
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    direction = direction / np.linalg.norm(direction)

    offset = index.centroids - origin
    along = offset @ direction
    perpendicular = np.linalg.norm(offset - along[:, None] * direction, axis=1)
    near = (perpendicular <= index.radii + 1e-12) & (along >= -index.radii)
    corners = index.mesh.corners[near]
    if len(corners) == 0:
        return np.zeros(0)

    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    e1 = b - a
    e2 = c - a
    p = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, p)
    ok = np.abs(det) > 1e-15
    inv = np.zeros_like(det)
    inv[ok] = 1.0 / det[ok]
    s = origin - a
    u = np.einsum("ij,ij->i", s, p) * inv
    q = np.cross(s, e1)
    v = (q @ direction) * inv
    t = np.einsum("ij,ij->i", e2, q) * inv
    hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 0)
    return np.sort(t[hit])
