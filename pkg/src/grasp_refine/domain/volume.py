"""Convex hull volumes and voxelized occupancy."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .exceptions import DegenerateHull, GridTooLarge, SignRequiresWatertight
from .mesh import TriMesh
from .sdf import contains


def convex_hull_volume(points: np.ndarray) -> float:
    """Volume of the convex hull of a point set in m^3.

    Raises:
        DegenerateHull: If fewer than 4 points are given or they span no volume
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) < 4:
        raise DegenerateHull(f"need at least 4 points, got {len(points)}")

    extent = np.ptp(points, axis=0).max()
    try:
        hull = ConvexHull(points)
    except QhullError as e:
        raise DegenerateHull(str(e).splitlines()[0])

    if hull.volume <= 1e-12 * max(extent, 1e-300) ** 3:
        raise DegenerateHull("points are coplanar")
    return float(hull.volume)


@dataclass(frozen=True)
class VoxelGrid:
    """Boolean occupancy sampled at voxel centers."""

    origin: np.ndarray
    voxel_size: float
    occupancy: np.ndarray

    @property
    def shape(self):
        return self.occupancy.shape

    @property
    def occupied_count(self) -> int:
        return int(self.occupancy.sum())

    @property
    def volume(self) -> float:
        """Occupied volume in m^3."""
        return self.occupied_count * self.voxel_size ** 3

    def centers(self) -> np.ndarray:
        """(nx, ny, nz, 3) voxel center positions."""
        return voxel_centers(self.origin, self.voxel_size, self.occupancy.shape)

    def occupied_centers(self) -> np.ndarray:
        return self.centers()[self.occupancy]


def voxel_centers(origin: np.ndarray, voxel_size: float, shape) -> np.ndarray:
    axes = [origin[i] + (np.arange(shape[i]) + 0.5) * voxel_size for i in range(3)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def _check_budget(shape, budget: int) -> None:
    cells = int(np.prod(shape))
    if cells > budget:
        raise GridTooLarge(cells, budget)


def voxelize_occupancy(
    mesh: TriMesh,
    voxel_size: float,
    cell_budget: int = 8_000_000,
    chunk: int = 1_000_000,
) -> VoxelGrid:
    """Occupancy grid over the mesh bounding box padded by one voxel.

    A voxel is occupied when its center is inside the mesh by winding number.

    Raises:
        SignRequiresWatertight: If the mesh is open
        GridTooLarge: If the grid exceeds `cell_budget`
    """
    if voxel_size <= 0:
        raise ValueError("voxel_size must be positive")
    if not mesh.watertight:
        raise SignRequiresWatertight("voxelization")

    low, high = mesh.bounds
    origin = low - voxel_size
    shape = tuple(int(n) for n in np.ceil((high + voxel_size - origin) / voxel_size).astype(int))
    _check_budget(shape, cell_budget)

    centers = voxel_centers(origin, voxel_size, shape).reshape(-1, 3)
    inside = contains(mesh, centers, chunk).reshape(shape)
    return VoxelGrid(origin, voxel_size, inside)


def intersection_occupancy(
    first: TriMesh,
    second: TriMesh,
    voxel_size: float,
    cell_budget: int = 8_000_000,
    chunk: int = 1_000_000,
) -> VoxelGrid:
    """Voxels whose centers are inside both meshes, on a grid over the box intersection.

    The grid depends only on the intersection of the two bounding boxes, so the
    result is the same with the arguments swapped. Disjoint boxes give an empty grid.
    """
    if not (first.watertight and second.watertight):
        raise SignRequiresWatertight("solid intersection")
    if voxel_size <= 0:
        raise ValueError("voxel_size must be positive")

    low = np.maximum(first.bounds[0], second.bounds[0])
    high = np.minimum(first.bounds[1], second.bounds[1])
    if np.any(high <= low):
        return VoxelGrid(low, voxel_size, np.zeros((0, 0, 0), dtype=bool))

    shape = tuple(int(n) for n in np.maximum(np.ceil((high - low) / voxel_size), 1).astype(int))
    _check_budget(shape, cell_budget)

    # The coarser mesh screens every center, the finer one only its survivors
    coarse, fine = sorted((first, second), key=lambda mesh: mesh.triangle_count)
    centers = voxel_centers(low, voxel_size, shape).reshape(-1, 3)
    inside = contains(coarse, centers, chunk)
    if np.any(inside):
        candidates = np.flatnonzero(inside)
        inside[candidates] = contains(fine, centers[candidates], chunk)
    return VoxelGrid(low, voxel_size, inside.reshape(shape))
