"""Indexed triangle meshes with load-time cleanup."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import InvalidMesh

DEGENERATE_AREA = 1e-12


def triangle_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Area of every triangle."""
    a, b, c = (vertices[triangles[:, i]] for i in range(3))
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def edge_use_counts(triangles: np.ndarray) -> np.ndarray:
    """Number of triangles sharing each undirected edge."""
    edges = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return counts


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Indexed triangle surface in meters.

    Build instances with `TriMesh.create`, which validates indices, drops
    degenerate triangles and computes the watertightness flag.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    normals: Optional[np.ndarray] = None
    watertight: bool = False
    _areas: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self._areas is None:
            areas = triangle_areas(self.vertices, self.triangles) if len(self.triangles) else np.zeros(0)
            object.__setattr__(self, "_areas", areas)

    @classmethod
    def create(
        cls,
        vertices,
        triangles,
        normals=None,
        drop_degenerate: bool = True,
    ) -> "TriMesh":
        """Validate and clean a mesh.

        Args:
            vertices: (V, 3) positions in meters
            triangles: (T, 3) vertex indices
            normals: optional (V, 3) per-vertex normals
            drop_degenerate: remove triangles with area <= 1e-12 m^2

        Returns:
            Cleaned mesh

        Raises:
            InvalidMesh: If shapes are wrong, indices are out of range or values are not finite
        """
        vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)

        if not np.all(np.isfinite(vertices)):
            raise InvalidMesh("vertex coordinates must be finite")
        if len(triangles) and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise InvalidMesh("triangle index out of range")

        if normals is not None:
            normals = np.ascontiguousarray(normals, dtype=np.float64).reshape(-1, 3)
            if len(normals) != len(vertices):
                raise InvalidMesh("normal count must match vertex count")

        areas = triangle_areas(vertices, triangles) if len(triangles) else np.zeros(0)
        if drop_degenerate and len(triangles):
            keep = areas > DEGENERATE_AREA
            triangles = triangles[keep]
            areas = areas[keep]

        watertight = bool(len(triangles)) and bool(np.all(edge_use_counts(triangles) == 2))
        vertices.setflags(write=False)
        triangles.setflags(write=False)
        return cls(vertices, triangles, normals, watertight, areas)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    @property
    def is_empty(self) -> bool:
        return self.triangle_count == 0

    @property
    def areas(self) -> np.ndarray:
        return self._areas

    @property
    def area(self) -> float:
        return float(self._areas.sum())

    @property
    def corners(self) -> np.ndarray:
        """(T, 3, 3) triangle corner positions."""
        return self.vertices[self.triangles]

    @property
    def face_normals(self) -> np.ndarray:
        c = self.corners
        n = np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @property
    def centroid(self) -> np.ndarray:
        """Area-weighted surface centroid."""
        if self.is_empty:
            return self.vertices.mean(axis=0)
        centers = self.corners.mean(axis=1)
        return (centers * self._areas[:, None]).sum(axis=0) / self._areas.sum()

    @property
    def bounds(self) -> np.ndarray:
        """(2, 3) axis-aligned bounding box."""
        return np.stack([self.vertices.min(axis=0), self.vertices.max(axis=0)])

    @property
    def signed_volume(self) -> float:
        """Enclosed volume from the divergence theorem; negative for inward-facing meshes."""
        c = self.corners
        return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)

    def transformed(self, rotation: np.ndarray, translation: np.ndarray) -> "TriMesh":
        """Apply x -> R x + t. A reflecting linear map also reverses the face winding."""
        rotation = np.asarray(rotation, dtype=np.float64)
        vertices = self.vertices @ rotation.T + np.asarray(translation, dtype=np.float64)
        triangles = self.triangles
        if np.linalg.det(rotation) < 0:
            triangles = triangles[:, ::-1]
        normals = None
        if self.normals is not None:
            normals = self.normals @ np.linalg.inv(rotation)
            normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        return TriMesh.create(vertices, triangles, normals, drop_degenerate=False)

    def scaled(self, factor: float, about: Optional[np.ndarray] = None) -> "TriMesh":
        """Uniformly scale about a point (the origin by default)."""
        about = np.zeros(3) if about is None else np.asarray(about, dtype=np.float64)
        return self.transformed(np.eye(3) * factor, about * (1.0 - factor))

    def oriented_outward(self) -> "TriMesh":
        """Flip the face winding when the enclosed volume is negative."""
        if self.signed_volume >= 0:
            return self
        return TriMesh.create(self.vertices, self.triangles[:, ::-1], self.normals, drop_degenerate=False)

    @staticmethod
    def concatenate(meshes) -> "TriMesh":
        """Merge meshes into one without welding vertices."""
        vertices, triangles, offset = [], [], 0
        for m in meshes:
            vertices.append(m.vertices)
            triangles.append(m.triangles + offset)
            offset += m.vertex_count
        return TriMesh.create(np.concatenate(vertices), np.concatenate(triangles))
