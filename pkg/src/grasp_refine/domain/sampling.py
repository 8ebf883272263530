"""Area-weighted and farthest-point surface sampling."""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .exceptions import InvalidMesh, SampleBudgetExceeded
from .mesh import TriMesh


class SampleSource(str, Enum):
    """Where a sample point came from."""

    OBJECT_SURFACE = "object_surface"
    HAND_SURFACE = "hand_surface"
    HAND_CONTACT = "hand_contact"


@dataclass(frozen=True)
class PointSample:
    """One sample point, optionally carried by barycentric coordinates."""

    position: np.ndarray
    source: SampleSource
    triangle: Optional[int] = None
    barycentric: Optional[np.ndarray] = None
    vertex: Optional[int] = None


@dataclass(frozen=True)
class SurfaceSamples:
    """A batch of sample points stored column-wise."""

    positions: np.ndarray
    source: SampleSource
    triangles: Optional[np.ndarray] = None
    barycentric: Optional[np.ndarray] = None
    vertices: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.positions)

    def __getitem__(self, i: int) -> PointSample:
        return PointSample(
            position=self.positions[i],
            source=self.source,
            triangle=None if self.triangles is None else int(self.triangles[i]),
            barycentric=None if self.barycentric is None else self.barycentric[i],
            vertex=None if self.vertices is None else int(self.vertices[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, ids: np.ndarray) -> "SurfaceSamples":
        pick = lambda a: None if a is None else a[ids]
        return SurfaceSamples(self.positions[ids], self.source, pick(self.triangles),
                              pick(self.barycentric), pick(self.vertices))

    def moved_to(self, mesh: TriMesh) -> "SurfaceSamples":
        """Re-evaluate barycentric samples on a deformed copy of the same topology."""
        corners = mesh.corners[self.triangles]
        positions = np.einsum("ij,ijk->ik", self.barycentric, corners)
        return SurfaceSamples(positions, self.source, self.triangles, self.barycentric, self.vertices)


def area_sample(
    mesh: TriMesh,
    count: int,
    rng: np.random.Generator,
    source: SampleSource = SampleSource.OBJECT_SURFACE,
) -> SurfaceSamples:
    """Uniform surface samples: triangle chosen by area, then a uniform barycentric draw.

    Args:
        mesh: Mesh to sample
        count: Number of points
        rng: Random generator (seeded by the caller)
        source: Tag for the samples

    Returns:
        Samples carrying triangle ids and barycentric coordinates
    """
    if mesh.is_empty:
        raise InvalidMesh("cannot sample a mesh with zero triangles")

    area_cum = np.cumsum(mesh.areas)
    face_index = np.searchsorted(area_cum, rng.random(count) * area_cum[-1], side="right")
    face_index = np.minimum(face_index, mesh.triangle_count - 1)

    r1 = np.sqrt(rng.random(count))
    r2 = rng.random(count)
    barycentric = np.stack([1.0 - r1, r1 * (1.0 - r2), r1 * r2], axis=1)
    barycentric /= barycentric.sum(axis=1, keepdims=True)

    corners = mesh.corners[face_index]
    positions = np.einsum("ij,ijk->ik", barycentric, corners)
    return SurfaceSamples(positions, source, face_index, barycentric)


def farthest_point_sample(
    mesh: TriMesh,
    n: int,
    seed: int,
    presample: Optional[int] = None,
    presample_factor: int = 50,
    presample_min: int = 20_000,
    source: SampleSource = SampleSource.OBJECT_SURFACE,
) -> SurfaceSamples:
    """Greedy max-min surface sampling over a dense area-weighted pre-sample.

    The first point is a seeded draw from the pre-sample; every later point
    maximizes its distance to the points already chosen.

    Args:
        mesh: Mesh to sample
        n: Number of samples (>= 1)
        seed: Seed for the pre-sample and the first pick
        presample: Dense pre-sample size; defaults to max(presample_factor*n, presample_min)

    Returns:
        n surface samples

    Raises:
        SampleBudgetExceeded: If n exceeds the pre-sample size
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    size = presample if presample is not None else max(presample_factor * n, presample_min)
    if n > size:
        raise SampleBudgetExceeded(n, size)

    rng = np.random.default_rng(seed)
    dense = area_sample(mesh, size, rng, source)
    points = dense.positions

    chosen = np.empty(n, dtype=np.int64)
    chosen[0] = rng.integers(size)
    min_dist = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for i in range(1, n):
        chosen[i] = int(np.argmax(min_dist))
        min_dist = np.minimum(min_dist, np.sum((points - points[chosen[i]]) ** 2, axis=1))

    return dense.subset(chosen)
