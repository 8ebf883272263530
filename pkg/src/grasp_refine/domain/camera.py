"""Pinhole projection, mask point sets and the 2D Chamfer loss."""

from dataclasses import dataclass, field
from typing import Literal, Optional, Union

import cv2
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.spatial import cKDTree

from .exceptions import EmptyMask, NoVisiblePoints
from .mesh import TriMesh
from .transforms import RigidTransform

Z_NEAR = 1e-4
RASTER_SHIFT = 4
RASTER_LIMIT = 1e5


class CameraIntrinsics(BaseModel):
    """Pinhole intrinsics in pixels."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    fx: float = Field(gt=0)
    fy: float = Field(gt=0)
    cx: float
    cy: float
    width: int = Field(gt=0)
    height: int = Field(gt=0)

    @model_validator(mode="after")
    def _principal_point_in_frame(self) -> "CameraIntrinsics":
        if not (0 <= self.cx < self.width):
            raise ValueError("cx must satisfy 0 <= cx < width")
        if not (0 <= self.cy < self.height):
            raise ValueError("cy must satisfy 0 <= cy < height")
        return self

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class MaskImage:
    """Binary foreground bitmap indexed [row, column]."""

    bitmap: np.ndarray
    _points: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "bitmap", np.asarray(self.bitmap, dtype=bool))

    @property
    def height(self) -> int:
        return self.bitmap.shape[0]

    @property
    def width(self) -> int:
        return self.bitmap.shape[1]

    @property
    def foreground_count(self) -> int:
        return int(self.bitmap.sum())

    @property
    def points(self) -> np.ndarray:
        """(N, 2) foreground pixel centers as (u, v), cached after the first call."""
        if self._points is None:
            rows, cols = np.nonzero(self.bitmap)
            object.__setattr__(self, "_points", np.stack([cols + 0.5, rows + 0.5], axis=1))
        return self._points

    def boundary(self) -> "MaskImage":
        """Foreground pixels with at least one 4-neighbour in the background (or off-frame)."""
        padded = np.pad(self.bitmap, 1, constant_values=False)
        interior = (padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:])
        return MaskImage(self.bitmap & ~interior)


@dataclass(frozen=True)
class ProjectedSet:
    """Projected 2D points with per-point visibility."""

    points: np.ndarray
    visible: np.ndarray

    @property
    def visible_points(self) -> np.ndarray:
        return self.points[self.visible]


def project_points(
    points: np.ndarray,
    pose: RigidTransform,
    K: CameraIntrinsics,
    z_near: float = Z_NEAR,
) -> ProjectedSet:
    """Project object-frame points through the pose into pixel coordinates.

    The camera sits at the origin looking down +z. Points with z <= z_near or
    outside the frame are flagged invisible.
    """
    camera = pose.apply(points)
    return project_camera_points(camera, K, z_near)


def project_camera_points(camera: np.ndarray, K: CameraIntrinsics, z_near: float = Z_NEAR) -> ProjectedSet:
    """Project camera-frame points; see `project_points`."""
    camera = np.asarray(camera, dtype=np.float64).reshape(-1, 3)
    z = camera[:, 2]
    in_front = z > z_near
    safe_z = np.where(in_front, z, 1.0)
    u = K.fx * camera[:, 0] / safe_z + K.cx
    v = K.fy * camera[:, 1] / safe_z + K.cy
    visible = in_front & (u >= 0) & (u < K.width) & (v >= 0) & (v < K.height)
    return ProjectedSet(np.stack([u, v], axis=1), visible)


PointSet = Union[ProjectedSet, MaskImage, np.ndarray]


def _as_points(points: PointSet) -> np.ndarray:
    if isinstance(points, ProjectedSet):
        return points.visible_points
    if isinstance(points, MaskImage):
        return points.points
    return np.asarray(points, dtype=np.float64).reshape(-1, 2)


def chamfer_2d(
    a: PointSet,
    b: PointSet,
    normalize: bool = True,
    tree_b: Optional[cKDTree] = None,
) -> float:
    """Bidirectional squared-distance Chamfer loss between two 2D point sets.

    Each directed sum of squared nearest distances is divided by its set size
    when `normalize` is true (the default); otherwise the plain two-term sum
    is returned.

    Args:
        a: Projected points (visible ones only are used) or an (N, 2) array
        b: Mask point set or an (M, 2) array
        normalize: Divide each directed sum by its cardinality
        tree_b: Prebuilt KD-tree over `b`

    Raises:
        NoVisiblePoints: If `a` has no visible point
        EmptyMask: If `b` is empty
    """
    pa = _as_points(a)
    pb = _as_points(b)
    if len(pa) == 0:
        raise NoVisiblePoints(len(a.points) if isinstance(a, ProjectedSet) else 0)
    if len(pb) == 0:
        raise EmptyMask("target point set")

    tree_b = tree_b if tree_b is not None else cKDTree(pb)
    d_ab, _ = tree_b.query(pa)
    d_ba, _ = cKDTree(pa).query(pb)

    forward = float(np.sum(d_ab ** 2))
    backward = float(np.sum(d_ba ** 2))
    if normalize:
        return forward / len(pa) + backward / len(pb)
    return forward + backward


def mask_foreground_points(
    mask: MaskImage,
    budget: int = 4096,
    seed: int = 0,
    mode: Literal["interior", "boundary"] = "interior",
) -> np.ndarray:
    """Foreground pixel centers, subsampled uniformly to at most `budget` points.

    Raises:
        EmptyMask: If the mask has no foreground
    """
    source = mask.boundary() if mode == "boundary" else mask
    points = source.points
    if len(points) == 0:
        raise EmptyMask()
    if len(points) <= budget:
        return points
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(len(points), size=budget, replace=False))
    return points[keep]


def rasterize_mask(
    mesh: TriMesh,
    pose: RigidTransform,
    K: CameraIntrinsics,
    z_near: float = Z_NEAR,
) -> MaskImage:
    """Binary coverage of the projected mesh.

    Every triangle with all corners in front of the camera is filled with
    cv2 at subpixel precision; the mask is the union of the fills.

    Raises:
        EmptyMask: If nothing is covered
    """
    camera = pose.apply(mesh.vertices)

    in_front = camera[:, 2] > z_near
    front = np.all(in_front[mesh.triangles], axis=1)
    if not np.any(front):
        raise EmptyMask("rasterized mesh")

    uv = np.zeros((len(camera), 2))
    uv[in_front, 0] = K.fx * camera[in_front, 0] / camera[in_front, 2] + K.cx
    uv[in_front, 1] = K.fy * camera[in_front, 1] / camera[in_front, 2] + K.cy

    # cv2 puts pixel centers on integers; 4 fractional bits keep subpixel corners
    fixed = np.round(np.clip(uv - 0.5, -RASTER_LIMIT, RASTER_LIMIT) * (1 << RASTER_SHIFT)).astype(np.int32)
    canvas = np.zeros((K.height, K.width), dtype=np.uint8)
    for tri in mesh.triangles[front]:
        cv2.fillPoly(canvas, [fixed[tri]], 1, lineType=cv2.LINE_8, shift=RASTER_SHIFT)
    bitmap = canvas.astype(bool)

    if not bitmap.any():
        raise EmptyMask("rasterized mesh")
    return MaskImage(bitmap)
