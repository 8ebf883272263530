"""Signed distance queries and generalized winding numbers on triangle meshes."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .bvh import AccelIndex, build_bvh, nearest_surface, pseudo_normals
from .exceptions import SignRequiresWatertight
from .mesh import TriMesh

SURFACE_EPS = 1e-12
INSIDE_THRESHOLD = 0.5


def winding_numbers(mesh: TriMesh, points: np.ndarray, chunk: int = 1_000_000) -> np.ndarray:
    """Generalized winding number of the surface around each point.

    Sums the signed solid angle of every triangle (Van Oosterom and Strackee)
    over 4*pi. Close to 1 inside a closed outward-facing surface and 0 outside.

    Args:
        mesh: Triangle mesh
        points: (Q, 3) query points
        chunk: Maximum point-triangle pairs per batch

    Returns:
        (Q,) winding numbers
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    corners = mesh.corners
    per_batch = max(1, chunk // max(1, mesh.triangle_count))
    result = np.empty(len(points))

    for start in range(0, len(points), per_batch):
        p = points[start:start + per_batch]
        a = corners[None, :, 0, :] - p[:, None, :]
        b = corners[None, :, 1, :] - p[:, None, :]
        c = corners[None, :, 2, :] - p[:, None, :]
        la = np.linalg.norm(a, axis=2)
        lb = np.linalg.norm(b, axis=2)
        lc = np.linalg.norm(c, axis=2)
        det = np.einsum("qtk,qtk->qt", a, np.cross(b, c))
        denom = (la * lb * lc
                 + np.einsum("qtk,qtk->qt", a, b) * lc
                 + np.einsum("qtk,qtk->qt", b, c) * la
                 + np.einsum("qtk,qtk->qt", c, a) * lb)
        result[start:start + per_batch] = np.arctan2(det, denom).sum(axis=1) / (2.0 * np.pi)

    return result


def contains(mesh: TriMesh, points: np.ndarray, chunk: int = 1_000_000) -> np.ndarray:
    """Inside test by winding number >= 0.5.

    Raises:
        SignRequiresWatertight: If the mesh is not watertight
    """
    if not mesh.watertight:
        raise SignRequiresWatertight("inside test")
    return winding_numbers(mesh, points, chunk) >= INSIDE_THRESHOLD


@dataclass(frozen=True)
class SdfResult:
    """Signed distance of one query point."""

    value: float
    gradient: np.ndarray
    nearest: np.ndarray


@dataclass(frozen=True)
class SdfBatch:
    """Signed distances of a batch of query points."""

    values: np.ndarray
    gradients: np.ndarray
    nearest: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, i: int) -> SdfResult:
        return SdfResult(float(self.values[i]), self.gradients[i], self.nearest[i])


def signed_distances(
    mesh: TriMesh,
    index: AccelIndex,
    queries: np.ndarray,
    signed: bool = True,
    chunk: int = 1_000_000,
) -> SdfBatch:
    """Signed (or unsigned) distance, spatial gradient and nearest point per query.

    The gradient points toward increasing distance: away from the surface
    outside, toward it inside, and along the angle-weighted pseudo-normal of
    the nearest feature for queries on the surface.

    Raises:
        SignRequiresWatertight: If a signed query is made on an open mesh
    """
    if signed and not mesh.watertight:
        raise SignRequiresWatertight()

    queries = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    hits = nearest_surface(index, queries)
    distances = hits.distances
    offsets = queries - hits.points

    on_surface = distances <= SURFACE_EPS
    gradients = np.empty_like(queries)
    safe = np.where(on_surface, 1.0, distances)
    gradients[:] = offsets / safe[:, None]
    if np.any(on_surface):
        gradients[on_surface] = pseudo_normals(index, hits.triangles[on_surface], hits.features[on_surface])

    values = distances.copy()
    if signed:
        off_surface = ~on_surface
        inside = np.zeros(len(queries), dtype=bool)
        if np.any(off_surface):
            inside[off_surface] = winding_numbers(mesh, queries[off_surface], chunk) >= INSIDE_THRESHOLD
        values[inside] = -values[inside]
        gradients[inside] = -gradients[inside]
    values[on_surface] = 0.0

    return SdfBatch(values, gradients, hits.points)


def signed_distance(mesh: TriMesh, index: AccelIndex, query: np.ndarray) -> SdfResult:
    """Signed distance of a single query point (negative inside)."""
    return signed_distances(mesh, index, np.asarray(query, dtype=np.float64).reshape(1, 3))[0]


class SignedDistanceField:
    """A mesh paired with its index, queried as a signed distance function."""

    def __init__(self, mesh: TriMesh, index: Optional[AccelIndex] = None, chunk: int = 1_000_000):
        """Initialize the field.

        Args:
            mesh: Watertight mesh (open meshes only support `unsigned`)
            index: Prebuilt index, built on demand when omitted
            chunk: Winding-number batch size
        """
        self.mesh = mesh
        self.index = index if index is not None else build_bvh(mesh)
        self.chunk = chunk

    def __call__(self, points: np.ndarray) -> SdfBatch:
        return signed_distances(self.mesh, self.index, points, signed=True, chunk=self.chunk)

    def unsigned(self, points: np.ndarray) -> SdfBatch:
        return signed_distances(self.mesh, self.index, points, signed=False, chunk=self.chunk)

    def banded(self, points: np.ndarray, band: float) -> SdfBatch:
        """Signed distances where only points within `band` of the surface get an inside test."""
        if not self.mesh.watertight:
            raise SignRequiresWatertight()
        batch = self.unsigned(points)
        near = (batch.values <= band) & (batch.values > SURFACE_EPS)
        values = batch.values.copy()
        gradients = batch.gradients.copy()
        if np.any(near):
            inside = np.zeros(len(values), dtype=bool)
            inside[near] = winding_numbers(self.mesh, np.asarray(points)[near], self.chunk) >= INSIDE_THRESHOLD
            values[inside] = -values[inside]
            gradients[inside] = -gradients[inside]
        return SdfBatch(values, gradients, batch.nearest)
